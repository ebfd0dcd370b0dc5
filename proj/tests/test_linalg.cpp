#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include "metastim/linalg.hpp"
#include "metastim/rng.hpp"

using namespace metastim;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
  return m;
}

} // namespace

TEST_CASE("mat basics") {
  Mat m(2, 3);
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  CHECK(m.a.size() == 6);
  m(1, 2) = 5.0;
  CHECK(m.a[5] == 5.0);
  CHECK(m.row(1)[2] == 5.0);

  Mat copy = m;
  CHECK(copy == m);
  copy(0, 0) = 1.0;
  CHECK_FALSE(copy == m);
}

TEST_CASE("dot norm cosine") {
  VecD x = {1.0, 2.0, 3.0};
  VecD y = {4.0, -5.0, 6.0};
  CHECK(dot(x, y) == doctest::Approx(12.0));
  CHECK(norm(x) == doctest::Approx(std::sqrt(14.0)));
  CHECK(cosine(x, x) == doctest::Approx(1.0));
  VecD nx = {-1.0, -2.0, -3.0};
  CHECK(cosine(x, nx) == doctest::Approx(-1.0));
  VecD zero = {0.0, 0.0, 0.0};
  CHECK(cosine(x, zero) == 0.0);
}

TEST_CASE("transpose and matvec") {
  Mat m(2, 3);
  int v = 0;
  for (double& x : m.a) x = ++v;
  Mat t = transpose(m);
  CHECK(t.rows == 3);
  CHECK(t.cols == 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(t(j, i) == m(i, j));

  VecD x = {1.0, 0.0, -1.0};
  VecD y = matvec(m, x);
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(1.0 - 3.0));
  CHECK(y[1] == doctest::Approx(4.0 - 6.0));
}

TEST_CASE("axpy and frobenius") {
  VecD x = {1.0, 2.0};
  VecD y = {10.0, -10.0};
  axpy(x, y, 0.5);
  CHECK(x[0] == doctest::Approx(6.0));
  CHECK(x[1] == doctest::Approx(-3.0));

  Mat m(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 4.0;
  CHECK(frobenius(m) == doctest::Approx(5.0));
}

TEST_CASE("orthonormalize produces orthonormal columns spanning the input") {
  Rng rng(11);
  for (auto [r, c] : {std::pair{6, 3}, std::pair{5, 5}, std::pair{8, 1}}) {
    Mat a = random_mat(r, c, rng);
    Mat q = a;
    orthonormalize_columns(q);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) {
        VecD qi(r), qj(r);
        for (int k = 0; k < r; ++k) {
          qi[k] = q(k, i);
          qj[k] = q(k, j);
        }
        CHECK(dot(qi, qj) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
      }
    // every original column must lie in the span of q: a_col == q q^T a_col
    for (int col = 0; col < c; ++col) {
      VecD acol(r), proj(r, 0.0);
      for (int k = 0; k < r; ++k) acol[k] = a(k, col);
      for (int i = 0; i < c; ++i) {
        double coef = 0.0;
        for (int k = 0; k < r; ++k) coef += q(k, i) * acol[k];
        for (int k = 0; k < r; ++k) proj[k] += coef * q(k, i);
      }
      for (int k = 0; k < r; ++k) CHECK(proj[k] == doctest::Approx(acol[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("orthonormalize handles rank-deficient input") {
  Mat a(4, 3);
  for (int i = 0; i < 4; ++i) {
    a(i, 0) = i + 1.0;
    a(i, 1) = 2.0 * (i + 1.0);  // parallel to column 0
    a(i, 2) = (i == 0) ? 1.0 : 0.0;
  }
  orthonormalize_columns(a);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 4; ++k) d += a(k, i) * a(k, j);
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("jacobi recovers a planted eigensystem") {
  Rng rng(42);
  const int n = 7;
  Mat q = random_mat(n, n, rng);
  orthonormalize_columns(q);
  VecD lambda = {9.0, 6.5, 3.0, 1.0, 0.5, -2.0, -8.0};  // descending by |.| not required
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += q(i, k) * lambda[k] * q(j, k);
      a(i, j) = s;
    }

  SymEig eig = jacobi_eigh(a);
  VecD expect = lambda;
  std::sort(expect.rbegin(), expect.rend());
  REQUIRE(eig.values.size() == std::size_t(n));
  for (int i = 0; i < n; ++i) CHECK(eig.values[i] == doctest::Approx(expect[i]).epsilon(1e-10));

  // residual ||A v - lambda v|| per eigenpair
  for (int i = 0; i < n; ++i) {
    VecD v(n);
    for (int k = 0; k < n; ++k) v[k] = eig.vectors(k, i);
    VecD av = matvec(a, v);
    for (int k = 0; k < n; ++k) CHECK(av[k] == doctest::Approx(eig.values[i] * v[k]).epsilon(1e-8));
    CHECK(norm(v) == doctest::Approx(1.0));
  }

  // eigenvalue sum equals trace
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += a(i, i);
  CHECK(std::accumulate(eig.values.begin(), eig.values.end(), 0.0) ==
        doctest::Approx(trace).epsilon(1e-12));
}

TEST_CASE("jacobi on diagonal and identity matrices") {
  Mat d(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = -1.0;
  d(2, 2) = 7.0;
  SymEig eig = jacobi_eigh(d);
  CHECK(eig.values[0] == doctest::Approx(7.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(-1.0));

  Mat id(4, 4);
  for (int i = 0; i < 4; ++i) id(i, i) = 1.0;
  eig = jacobi_eigh(id);
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("format_full round-trips doubles exactly") {
  Rng rng(3);
  VecD samples = {0.0,    1.0,   -1.0,   1.0 / 3.0, 1e-300, 1e300,
                  2.5e-8, 123.456, -9.87654321e-5};
  for (int i = 0; i < 100; ++i) samples.push_back(rng.normal() * std::pow(10.0, rng.uniform_int(-20, 20)));
  for (double v : samples) {
    std::string s = format_full(v);
    double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(123), b(123), c(124);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a.next_u64();
    same = same && (x == b.next_u64());
    diff = diff || (x != c.next_u64());
  }
  CHECK(same);
  CHECK(diff);

  Rng s0 = Rng::from_stream(9, 0);
  Rng s1 = Rng::from_stream(9, 1);
  CHECK(s0.next_u64() != s1.next_u64());
  CHECK(derive_seed(9, 0) != derive_seed(9, 1));
  CHECK(derive_seed(9, 0) == derive_seed(9, 0));
}

TEST_CASE("rng ranges") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = rng.uniform(2.0, 3.0);
    CHECK(v >= 2.0);
    CHECK(v < 3.0);
    double w = rng.log_uniform(1e-4, 1e-2);
    CHECK(w >= 1e-4 * (1 - 1e-12));
    CHECK(w <= 1e-2 * (1 + 1e-12));
    auto k = rng.below(7);
    CHECK(k < 7);
    int m = rng.uniform_int(-3, 3);
    CHECK(m >= -3);
    CHECK(m <= 3);
  }
}

TEST_CASE("rng normal moments") {
  Rng rng(77);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng shuffle is a fair permutation") {
  Rng rng(31);
  std::vector<int> v(10);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> counts(10, 0);  // how often element 0 lands at each slot
  for (int rep = 0; rep < 5000; ++rep) {
    std::vector<int> w = v;
    rng.shuffle(w);
    std::set<int> seen(w.begin(), w.end());
    REQUIRE(seen.size() == 10);
    for (int i = 0; i < 10; ++i)
      if (w[i] == 0) counts[i]++;
  }
  for (int c : counts) {
    CHECK(c > 350);  // expectation 500
    CHECK(c < 650);
  }
}
