#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metastim/linalg.hpp"

namespace metastim {

enum class Activation { Tanh, Sigmoid, Softplus };
enum class NetKind { Ffnn, Rnn };
enum class Optimizer { Sgd, Adam, AdaGrad, AdaDelta, AdaMax, RmsProp };

std::string to_string(Activation a);
std::string to_string(NetKind k);
std::string to_string(Optimizer o);
Activation activation_from(const std::string& s);
NetKind net_kind_from(const std::string& s);
Optimizer optimizer_from(const std::string& s);

/// Network shape. `hidden` lists the hidden-layer widths ("features"); the
/// scalar/vector readout layer is implicit and linear. An empty hidden list
/// is a plain affine map. The recurrent net is a single Elman cell of width
/// hidden[0] whose readout uses the final state.
struct ArchSpec {
  NetKind kind = NetKind::Ffnn;
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden;
  std::vector<Activation> activations;  // one per hidden layer

  bool operator==(const ArchSpec&) const = default;
};

void validate(const ArchSpec& arch);  // throws ConfigError

struct Layer {
  Mat w;
  VecD b;

  bool operator==(const Layer&) const = default;
};

/// FFNN layers: one per hidden width, then the readout.
/// RNN layers: [0] input->state (with the state bias), [1] state->state
/// (no bias), [2] readout.
struct AnnModel {
  ArchSpec arch;
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  bool operator==(const AnnModel&) const = default;
};

using GradSet = std::vector<Layer>;  // same shapes as the model layers

/// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
AnnModel init_network(const ArchSpec& arch, std::uint64_t seed);

VecD forward(const AnnModel& model, std::span<const double> x);
VecD forward_seq(const AnnModel& model, const std::vector<VecD>& seq);

/// Inputs plus targets for a partition. Exactly one of x / seqs is
/// populated, matching the model kind.
struct SampleSet {
  Mat x;                                // row per sample (feedforward)
  std::vector<std::vector<VecD>> seqs;  // token-vector sequences (recurrent)
  Mat y;                                // row per sample
  bool sequential = false;

  int size() const { return sequential ? int(seqs.size()) : x.rows; }
};

/// Mean-squared-error backpropagation over the chosen samples:
///   L = mean_b ||yhat_b - y_b||^2 / output_dim.
/// Per-sample gradients are computed independently (parallel-safe) and
/// summed in sample order.
GradSet gradients(const AnnModel& model, const SampleSet& set, const std::vector<int>& indices);

/// Mean loss over the whole set; `y_override` swaps in alternative targets
/// of identical shape (the null-set path). Read-only on the model.
double evaluate(const AnnModel& model, const SampleSet& set);
double evaluate(const AnnModel& model, const SampleSet& set, const Mat& y_override);

struct TrainParams {
  Optimizer optimizer = Optimizer::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;   // Adam / AdaMax first moment
  double beta2 = 0.999; // Adam second moment / AdaMax infinity norm decay
  double rho = 0.95;    // AdaDelta decay
  double gamma = 0.9;   // RMSprop decay
  double eps = 1e-8;
  int epochs = 10;
  int batch_size = 16;
  double dropout = 0.0;  // probability an atom sits out a given epoch
  std::uint64_t seed = 1;

  bool operator==(const TrainParams&) const = default;
};

/// Slow-state moments for whichever rule is active: two value slots shaped
/// like the parameters plus the shared step counter.
struct OptState {
  GradSet m1;
  GradSet m2;
  long long t = 0;
};

OptState init_opt_state(const AnnModel& model);

/// One canonical update of the chosen rule. SGD ignores the state; Adam,
/// AdaGrad, AdaDelta, AdaMax, and RMSprop use m1/m2 as their usual moment
/// or accumulator slots.
void optimizer_step(AnnModel& model, const GradSet& grads, OptState& state,
                    const TrainParams& hp);

struct EpochRow {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double null_loss_mean = 0.0;
};

struct EpochLog {
  std::vector<EpochRow> rows;

  std::string to_csv() const;  // header: epoch,train_loss,test_loss,null_loss_mean
};

struct TrainResult {
  AnnModel model;
  EpochLog log;
};

/// Seeded minibatch training. Each epoch shuffles the training atoms (after
/// the per-atom dropout draw), applies optimizer updates batch by batch, and
/// then records the losses on the full train set, the test set, and the mean
/// over the null label copies. Only the training loss ever drives updates.
TrainResult train(AnnModel model, const SampleSet& train_set, const SampleSet& test_set,
                  const std::vector<Mat>& null_labels, const TrainParams& p);

/// Versioned text checkpoint, exact decimal round trip.
void save_model(const AnnModel& model, const std::filesystem::path& path);
AnnModel load_model(const std::filesystem::path& path);

} // namespace metastim
