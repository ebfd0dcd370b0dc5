#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace metastim {

using VecD = std::vector<double>;

/// Dense row-major matrix. Deliberately minimal; the sizes in this project
/// are small enough that a trimmed-down type beats pulling in a full
/// linear-algebra package, and the hot kernels live in parallel.cpp where
/// they have both a threaded and a plain-loop path.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return a[std::size_t(i) * cols + j]; }

  std::span<double> row(int i) { return {a.data() + std::size_t(i) * cols, std::size_t(cols)}; }
  std::span<const double> row(int i) const {
    return {a.data() + std::size_t(i) * cols, std::size_t(cols)};
  }

  bool operator==(const Mat&) const = default;
};

double dot(std::span<const double> x, std::span<const double> y);
double norm(std::span<const double> x);
double cosine(std::span<const double> x, std::span<const double> y);

Mat transpose(const Mat& m);
VecD matvec(const Mat& m, std::span<const double> x);

/// x += s * y
void axpy(VecD& x, std::span<const double> y, double s);

double frobenius(const Mat& m);

/// In-place modified Gram-Schmidt on the columns of v (with one
/// re-orthogonalization pass). Degenerate columns fall back to unit basis
/// vectors so the result is always orthonormal.
void orthonormalize_columns(Mat& v);

struct SymEig {
  VecD values;  // descending
  Mat vectors;  // columns are the matching eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic
/// sweep order; eigenpairs sorted by descending eigenvalue.
SymEig jacobi_eigh(const Mat& s);

std::string format_full(double v);  // round-trip-exact decimal

} // namespace metastim
