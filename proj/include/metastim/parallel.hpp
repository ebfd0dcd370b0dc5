#pragma once

#include <functional>

#include "metastim/linalg.hpp"

namespace metastim::par {

enum class ExecMode { Serial, OpenMp };

void set_mode(ExecMode m);
ExecMode mode();
bool use_omp();
int max_threads();
void set_threads(int n);

/// Fixed work-chunk size for reductions. Partials are produced per chunk and
/// merged in chunk order, so results do not depend on the thread count and
/// the Serial and OpenMp modes are bit-identical.
inline constexpr int kChunk = 16;
inline int chunk_count(int n) { return (n + kChunk - 1) / kChunk; }

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C = A^T * B
Mat matmul_tn(const Mat& a, const Mat& b);

/// Runs fn(i) for i in [0, n). Iterations must be independent; callers store
/// results by index so scheduling order cannot matter.
void for_each_index(int n, const std::function<void(int)>& fn);

/// Plain-loop reference kernels, kept for tests and the benchmark.
namespace reference {
Mat matmul(const Mat& a, const Mat& b);
Mat matmul_tn(const Mat& a, const Mat& b);
} // namespace reference

} // namespace metastim::par
