#include "metastim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace metastim {

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double cosine(std::span<const double> x, std::span<const double> y) {
  const double nx = norm(x);
  const double ny = norm(y);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot(x, y) / (nx * ny);
}

Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

VecD matvec(const Mat& m, std::span<const double> x) {
  VecD y(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) y[i] = dot(m.row(i), x);
  return y;
}

void axpy(VecD& x, std::span<const double> y, double s) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * y[i];
}

double frobenius(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

void orthonormalize_columns(Mat& v) {
  const int n = v.rows;
  const int k = v.cols;
  for (int c = 0; c < k; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int p = 0; p < c; ++p) {
        double proj = 0.0;
        for (int i = 0; i < n; ++i) proj += v(i, p) * v(i, c);
        for (int i = 0; i < n; ++i) v(i, c) -= proj * v(i, p);
      }
    }
    double nn = 0.0;
    for (int i = 0; i < n; ++i) nn += v(i, c) * v(i, c);
    nn = std::sqrt(nn);
    if (nn < 1e-12) {
      // degenerate column: substitute a basis vector and redo this column
      for (int i = 0; i < n; ++i) v(i, c) = (i == c % n) ? 1.0 : 0.0;
      --c;
      continue;
    }
    for (int i = 0; i < n; ++i) v(i, c) /= nn;
  }
}

SymEig jacobi_eigh(const Mat& s) {
  const int n = s.rows;
  Mat a = s;
  Mat v(n, n);
  for (int i = 0; i < n; ++i) v(i, i) = 1.0;

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    double diag = 0.0;
    for (int i = 0; i < n; ++i) diag += a(i, i) * a(i, i);
    if (off <= 1e-28 * std::max(1.0, diag)) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - sn * aiq;
          a(i, q) = sn * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a(p, j);
          const double aqj = a(q, j);
          a(p, j) = c * apj - sn * aqj;
          a(q, j) = sn * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - sn * viq;
          v(i, q) = sn * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) > a(j, j); });

  SymEig out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (int c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (int i = 0; i < n; ++i) out.vectors(i, c) = v(i, order[c]);
  }
  return out;
}

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

} // namespace metastim
