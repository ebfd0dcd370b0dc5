#include "metastim/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace metastim::par {

namespace {
#ifdef _OPENMP
std::atomic<ExecMode> g_mode{ExecMode::OpenMp};
#else
std::atomic<ExecMode> g_mode{ExecMode::Serial};
#endif
} // namespace

void set_mode(ExecMode m) { g_mode.store(m); }
ExecMode mode() { return g_mode.load(); }

bool use_omp() {
#ifdef _OPENMP
  return g_mode.load() == ExecMode::OpenMp;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Each output row is produced by exactly one iteration with a fixed inner
// loop order, so the threaded and serial paths give identical bits.
Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  const bool omp = use_omp();
#pragma omp parallel for schedule(static) if (omp)
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.a.data() + std::size_t(i) * a.cols;
    double* crow = c.a.data() + std::size_t(i) * c.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.a.data() + std::size_t(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  Mat c(a.cols, b.cols);
  const bool omp = use_omp();
#pragma omp parallel for schedule(static) if (omp)
  for (int i = 0; i < a.cols; ++i) {
    double* crow = c.a.data() + std::size_t(i) * c.cols;
    for (int k = 0; k < a.rows; ++k) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* brow = b.a.data() + std::size_t(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

void for_each_index(int n, const std::function<void(int)>& fn) {
  const bool omp = use_omp();
#pragma omp parallel for schedule(dynamic, 1) if (omp)
  for (int i = 0; i < n; ++i) fn(i);
}

namespace reference {

Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  Mat c(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

} // namespace reference

} // namespace metastim::par
