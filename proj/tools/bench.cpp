// Timing harness comparing the serial, OpenMP, and reference kernels.
// Not part of the test suite; run manually: build/tools/bench [--size N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "metastim/linalg.hpp"
#include "metastim/neural.hpp"
#include "metastim/parallel.hpp"
#include "metastim/rng.hpp"

using namespace metastim;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
  return m;
}

template <class F>
double time_ms(F&& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_diff(const Mat& a, const Mat& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i) d = std::max(d, std::abs(a.a[i] - b.a[i]));
  return d;
}

double max_diff(const GradSet& a, const GradSet& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    d = std::max(d, max_diff(a[l].w, b[l].w));
    for (std::size_t i = 0; i < a[l].b.size(); ++i)
      d = std::max(d, std::abs(a[l].b[i] - b[l].b[i]));
  }
  return d;
}

void bench_matmul(int size, int reps) {
  Rng rng(7);
  const Mat a = random_mat(size, size, rng);
  const Mat b = random_mat(size, size, rng);

  std::printf("matmul %dx%d\n", size, size);

  par::set_mode(par::ExecMode::Serial);
  Mat serial = par::matmul(a, b);
  const double t_serial = time_ms([&] { serial = par::matmul(a, b); }, reps);

  par::set_mode(par::ExecMode::OpenMp);
  Mat omp = par::matmul(a, b);
  const double t_omp = time_ms([&] { omp = par::matmul(a, b); }, reps);

  Mat ref = par::reference::matmul(a, b);
  const double t_ref = time_ms([&] { ref = par::reference::matmul(a, b); }, reps);

  std::printf("  serial    %9.3f ms\n", t_serial);
  std::printf("  openmp    %9.3f ms  (%.2fx)\n", t_omp, t_serial / t_omp);
  std::printf("  reference %9.3f ms\n", t_ref);
  std::printf("  max |serial-openmp|    = %g\n", max_diff(serial, omp));
  std::printf("  max |serial-reference| = %g\n", max_diff(serial, ref));
}

void bench_matmul_tn(int size, int reps) {
  Rng rng(8);
  const Mat a = random_mat(size, size, rng);
  const Mat b = random_mat(size, size, rng);

  std::printf("matmul_tn %dx%d\n", size, size);

  par::set_mode(par::ExecMode::Serial);
  Mat serial = par::matmul_tn(a, b);
  const double t_serial = time_ms([&] { serial = par::matmul_tn(a, b); }, reps);

  par::set_mode(par::ExecMode::OpenMp);
  Mat omp = par::matmul_tn(a, b);
  const double t_omp = time_ms([&] { omp = par::matmul_tn(a, b); }, reps);

  Mat ref = par::reference::matmul_tn(a, b);

  std::printf("  serial    %9.3f ms\n", t_serial);
  std::printf("  openmp    %9.3f ms  (%.2fx)\n", t_omp, t_serial / t_omp);
  std::printf("  max |serial-openmp|    = %g\n", max_diff(serial, omp));
  std::printf("  max |serial-reference| = %g\n", max_diff(serial, ref));
}

SampleSet random_set(int samples, int in, int out, Rng& rng) {
  SampleSet s;
  s.x = random_mat(samples, in, rng);
  s.y = random_mat(samples, out, rng);
  return s;
}

void bench_gradients(int reps) {
  Rng rng(9);
  ArchSpec arch;
  arch.input_dim = 64;
  arch.output_dim = 4;
  arch.hidden = {64, 32};
  arch.activations = {Activation::Tanh, Activation::Tanh};
  const AnnModel model = init_network(arch, 3);
  const SampleSet set = random_set(512, arch.input_dim, arch.output_dim, rng);
  std::vector<int> all(std::size_t(set.size()));
  for (int i = 0; i < set.size(); ++i) all[std::size_t(i)] = i;

  std::printf("batch gradients, 512 samples, 64-64-32-4 net\n");

  par::set_mode(par::ExecMode::Serial);
  GradSet serial = gradients(model, set, all);
  const double t_serial = time_ms([&] { serial = gradients(model, set, all); }, reps);

  par::set_mode(par::ExecMode::OpenMp);
  GradSet omp = gradients(model, set, all);
  const double t_omp = time_ms([&] { omp = gradients(model, set, all); }, reps);

  std::printf("  serial    %9.3f ms\n", t_serial);
  std::printf("  openmp    %9.3f ms  (%.2fx)\n", t_omp, t_serial / t_omp);
  std::printf("  max |serial-openmp|    = %g\n", max_diff(serial, omp));
}

void bench_train(int reps) {
  Rng rng(10);
  ArchSpec arch;
  arch.input_dim = 32;
  arch.output_dim = 3;
  arch.hidden = {48};
  arch.activations = {Activation::Tanh};
  const AnnModel model = init_network(arch, 4);
  const SampleSet train_set = random_set(256, arch.input_dim, arch.output_dim, rng);
  const SampleSet test_set = random_set(64, arch.input_dim, arch.output_dim, rng);
  TrainParams p;
  p.epochs = 10;

  std::printf("10-epoch training, 256 atoms, 32-48-3 net\n");

  par::set_mode(par::ExecMode::Serial);
  TrainResult serial = train(model, train_set, test_set, {}, p);
  const double t_serial = time_ms([&] { serial = train(model, train_set, test_set, {}, p); }, reps);

  par::set_mode(par::ExecMode::OpenMp);
  TrainResult omp = train(model, train_set, test_set, {}, p);
  const double t_omp = time_ms([&] { omp = train(model, train_set, test_set, {}, p); }, reps);

  std::printf("  serial    %9.3f ms\n", t_serial);
  std::printf("  openmp    %9.3f ms  (%.2fx)\n", t_omp, t_serial / t_omp);
  std::printf("  final train loss: serial %g, openmp %g, identical %s\n",
              serial.log.rows.back().train_loss, omp.log.rows.back().train_loss,
              serial.model == omp.model ? "yes" : "NO");
}

} // namespace

int main(int argc, char** argv) {
  int size = 384;
  int reps = 3;
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--size") size = std::stoi(argv[i + 1]);
    if (std::string(argv[i]) == "--reps") reps = std::stoi(argv[i + 1]);
  }

  std::printf("%d threads available\n\n", par::max_threads());
  bench_matmul(size, reps);
  std::printf("\n");
  bench_matmul_tn(size, reps);
  std::printf("\n");
  bench_gradients(reps);
  std::printf("\n");
  bench_train(reps);
  return 0;
}
