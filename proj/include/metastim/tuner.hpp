#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metastim/neural.hpp"

namespace metastim {

/// One sampled configuration of the searchable training knobs. The optimizer
/// choice and network kind are meta-parameters and live outside this struct;
/// unused optimizer constants are carried along untouched.
struct HyperParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.95;
  double gamma = 0.9;
  std::vector<int> features;            // hidden layer widths
  std::vector<Activation> activations;  // one per hidden layer

  bool operator==(const HyperParams&) const = default;
};

std::string hp_to_json(const HyperParams& hp);
HyperParams hp_from_json(const std::string& text);

/// Sampling ranges. Widths are drawn as multiples of 8. The fixed `kind`
/// pins recurrent nets to a single cell (one hidden width).
struct HyperSpace {
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  int hidden_min = 1;
  int hidden_max = 4;
  int feat_min = 8;
  int feat_max = 64;
  std::vector<Activation> activation_choices = {Activation::Tanh, Activation::Sigmoid,
                                                Activation::Softplus};
  double beta1_min = 0.85, beta1_max = 0.95;
  double beta2_min = 0.9, beta2_max = 0.999;
  double rho_min = 0.9, rho_max = 0.99;
  double gamma_min = 0.8, gamma_max = 0.99;
  NetKind kind = NetKind::Ffnn;
};

void validate(const HyperSpace& space);  // throws ConfigError

HyperParams sample_hp(const HyperSpace& space, std::uint64_t seed);

/// All points of a space whose continuous ranges are degenerate, in a fixed
/// enumeration order; empty when the space is continuous or has more than
/// `limit` points.
std::vector<HyperParams> try_enumerate(const HyperSpace& space, int limit);

/// Loss reached by a configuration after `epochs` of training, seeded.
using FitnessFn =
    std::function<double(const HyperParams& hp, int epochs, std::uint64_t seed)>;

struct Trial {
  int index = -1;
  int bracket = -1;  // -1 outside hyperband
  int rung = -1;
  int epochs = 0;
  HyperParams hp;
  std::uint64_t seed = 0;
  double fitness = 0.0;
  bool failed = false;
};

struct TunerResult {
  Trial best;
  std::vector<Trial> trials;  // every evaluation, in schedule order

  /// trial,bracket,rung,epochs,fitness,hp_json (hp_json quoted per RFC 4180)
  std::string ledger_csv() const;
};

/// Independent samples at a fixed resource; lowest fitness wins, ties by
/// earliest trial. Spaces small enough to enumerate within the budget are
/// swept exhaustively instead of sampled. Failing evaluations (throws or
/// non-finite loss) are recorded and skipped; all failing is an error.
TunerResult random_search(const HyperSpace& space, int budget, const FitnessFn& fn,
                          std::uint64_t seed, int trial_epochs = 10);

struct RungSpec {
  int bracket = 0;    // the s value
  int rung = 0;       // i within the bracket
  int configs = 0;    // n_i
  double resource0 = 0.0;  // r_i (may be fractional)
  int epochs = 0;     // resource granted to each config at this rung
};

/// The (s, n_i, r_i) table: s_max = floor(log_eta R); bracket s starts with
/// n = ceil((s_max+1)/(s+1) * eta^s) configs at r = R * eta^-s epochs, and
/// rung i runs n_i = floor(n / eta^i) configs at r_i = r * eta^i.
std::vector<RungSpec> bracket_schedule(int r_max, int eta);

/// Successive halving over the bracket schedule: each rung keeps the
/// floor(n_i/eta) lowest-fitness configs, survivors retrain from scratch at
/// the next resource with their original per-config seed.
TunerResult hyperband(const HyperSpace& space, int r_max, int eta, const FitnessFn& fn,
                      std::uint64_t seed);

enum class TunerKind { Random, Hyperband, Bayesian };

std::string to_string(TunerKind k);
TunerKind tuner_kind_from(const std::string& s);

struct TunerOptions {
  int budget = 20;  // random-search trials
  int r_max = 9;    // hyperband max resource
  int eta = 3;
  int trial_epochs = 10;
};

/// Dispatch on the configured tuner. The Bayesian option is reserved but
/// not implemented and reports a clear error.
TunerResult run_tuner(TunerKind kind, const HyperSpace& space, const FitnessFn& fn,
                      std::uint64_t seed, const TunerOptions& opt);

/// Network shape for a sampled configuration.
ArchSpec hp_arch(const HyperParams& hp, NetKind kind, int input_dim, int output_dim);

/// Optimizer settings for a sampled configuration.
TrainParams hp_train_params(const HyperParams& hp, Optimizer opt, int epochs,
                            std::uint64_t seed);

} // namespace metastim
