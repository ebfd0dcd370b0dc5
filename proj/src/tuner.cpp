#include "metastim/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "metastim/error.hpp"
#include "metastim/parallel.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int feat_lo8(const HyperSpace& s) { return (s.feat_min + 7) / 8; }
int feat_hi8(const HyperSpace& s) { return s.feat_max / 8; }

struct PendingTrial {
  HyperParams hp;
  std::uint64_t seed = 0;
  int epochs = 0;
  int bracket = -1;
  int rung = -1;
};

std::vector<Trial> evaluate_block(const std::vector<PendingTrial>& pending,
                                  const FitnessFn& fn, int index0) {
  std::vector<Trial> out(pending.size());
  par::for_each_index(int(pending.size()), [&](int i) {
    Trial t;
    t.index = index0 + i;
    t.bracket = pending[i].bracket;
    t.rung = pending[i].rung;
    t.epochs = pending[i].epochs;
    t.hp = pending[i].hp;
    t.seed = pending[i].seed;
    try {
      const double f = fn(t.hp, t.epochs, t.seed);
      if (std::isfinite(f)) {
        t.fitness = f;
      } else {
        t.fitness = kInf;
        t.failed = true;
      }
    } catch (const std::exception&) {
      t.fitness = kInf;
      t.failed = true;
    }
    out[i] = std::move(t);
  });
  return out;
}

Trial best_of(const std::vector<Trial>& trials) {
  const Trial* best = nullptr;
  for (const Trial& t : trials) {
    if (t.failed) continue;
    if (!best || t.fitness < best->fitness) best = &t;
  }
  if (!best) throw DataError("all " + std::to_string(trials.size()) + " trials failed");
  return *best;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

} // namespace

std::string hp_to_json(const HyperParams& hp) {
  nlohmann::json j;
  j["lr"] = hp.lr;
  j["beta1"] = hp.beta1;
  j["beta2"] = hp.beta2;
  j["rho"] = hp.rho;
  j["gamma"] = hp.gamma;
  j["features"] = hp.features;
  std::vector<std::string> acts;
  for (Activation a : hp.activations) acts.push_back(to_string(a));
  j["activations"] = acts;
  return j.dump();
}

HyperParams hp_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    HyperParams hp;
    hp.lr = j.at("lr").get<double>();
    hp.beta1 = j.at("beta1").get<double>();
    hp.beta2 = j.at("beta2").get<double>();
    hp.rho = j.at("rho").get<double>();
    hp.gamma = j.at("gamma").get<double>();
    hp.features = j.at("features").get<std::vector<int>>();
    hp.activations.clear();
    for (const auto& name : j.at("activations")) {
      hp.activations.push_back(activation_from(name.get<std::string>()));
    }
    if (hp.activations.size() != hp.features.size()) {
      throw ConfigError("hyper-parameter json: activations do not match features");
    }
    return hp;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad hyper-parameter json: ") + e.what());
  }
}

void validate(const HyperSpace& space) {
  if (!(space.lr_min > 0.0) || space.lr_min > space.lr_max) {
    throw ConfigError("learning-rate range must satisfy 0 < min <= max");
  }
  if (space.hidden_min < 1 || space.hidden_min > space.hidden_max) {
    throw ConfigError("hidden layer range must satisfy 1 <= min <= max");
  }
  if (space.feat_min < 1 || space.feat_min > space.feat_max) {
    throw ConfigError("feature range must satisfy 1 <= min <= max");
  }
  if (feat_lo8(space) > feat_hi8(space)) {
    throw ConfigError("feature range contains no multiple of 8");
  }
  if (space.activation_choices.empty()) throw ConfigError("no activation choices");
  if (space.beta1_min > space.beta1_max || space.beta2_min > space.beta2_max ||
      space.rho_min > space.rho_max || space.gamma_min > space.gamma_max) {
    throw ConfigError("optimizer parameter ranges must satisfy min <= max");
  }
}

HyperParams sample_hp(const HyperSpace& space, std::uint64_t seed) {
  validate(space);
  Rng rng(seed);
  HyperParams hp;
  hp.lr = space.lr_min == space.lr_max ? space.lr_min
                                       : rng.log_uniform(space.lr_min, space.lr_max);
  const int layers = space.kind == NetKind::Rnn
                         ? 1
                         : rng.uniform_int(space.hidden_min, space.hidden_max);
  hp.features.resize(layers);
  hp.activations.resize(layers);
  for (int l = 0; l < layers; ++l) {
    hp.features[l] = 8 * rng.uniform_int(feat_lo8(space), feat_hi8(space));
    hp.activations[l] =
        space.activation_choices[rng.below(space.activation_choices.size())];
  }
  hp.beta1 = rng.uniform(space.beta1_min, space.beta1_max);
  hp.beta2 = rng.uniform(space.beta2_min, space.beta2_max);
  hp.rho = rng.uniform(space.rho_min, space.rho_max);
  hp.gamma = rng.uniform(space.gamma_min, space.gamma_max);
  return hp;
}

std::vector<HyperParams> try_enumerate(const HyperSpace& space, int limit) {
  validate(space);
  if (space.lr_min != space.lr_max || space.beta1_min != space.beta1_max ||
      space.beta2_min != space.beta2_max || space.rho_min != space.rho_max ||
      space.gamma_min != space.gamma_max) {
    return {};
  }
  const int lo8 = feat_lo8(space), hi8 = feat_hi8(space);
  const int na = int(space.activation_choices.size());
  const int per_layer = (hi8 - lo8 + 1) * na;

  HyperParams base;
  base.lr = space.lr_min;
  base.beta1 = space.beta1_min;
  base.beta2 = space.beta2_min;
  base.rho = space.rho_min;
  base.gamma = space.gamma_min;

  std::vector<HyperParams> out;
  const int hmin = space.kind == NetKind::Rnn ? 1 : space.hidden_min;
  const int hmax = space.kind == NetKind::Rnn ? 1 : space.hidden_max;
  for (int h = hmin; h <= hmax; ++h) {
    std::vector<int> digits(h, 0);
    while (true) {
      HyperParams hp = base;
      hp.features.resize(h);
      hp.activations.resize(h);
      for (int l = 0; l < h; ++l) {
        hp.features[l] = 8 * (lo8 + digits[l] / na);
        hp.activations[l] = space.activation_choices[digits[l] % na];
      }
      out.push_back(std::move(hp));
      if (int(out.size()) > limit) return {};
      int pos = h - 1;
      while (pos >= 0 && ++digits[pos] == per_layer) digits[pos--] = 0;
      if (pos < 0) break;
    }
  }
  return out;
}

std::string TunerResult::ledger_csv() const {
  std::string out = "trial,bracket,rung,epochs,fitness,hp_json\n";
  for (const Trial& t : trials) {
    out += std::to_string(t.index);
    out += ',';
    out += std::to_string(t.bracket);
    out += ',';
    out += std::to_string(t.rung);
    out += ',';
    out += std::to_string(t.epochs);
    out += ',';
    out += format_full(t.fitness);
    out += ',';
    out += csv_quote(hp_to_json(t.hp));
    out += '\n';
  }
  return out;
}

TunerResult random_search(const HyperSpace& space, int budget, const FitnessFn& fn,
                          std::uint64_t seed, int trial_epochs) {
  validate(space);
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  if (trial_epochs < 1) throw ConfigError("trial epochs must be at least 1");

  std::vector<PendingTrial> pending;
  const std::vector<HyperParams> points = try_enumerate(space, budget);
  if (!points.empty()) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      pending.push_back({points[j], derive_seed(seed, 2 * j + 1), trial_epochs, -1, -1});
    }
  } else {
    for (int j = 0; j < budget; ++j) {
      const HyperParams hp = sample_hp(space, derive_seed(seed, 2 * j));
      pending.push_back({hp, derive_seed(seed, 2 * j + 1), trial_epochs, -1, -1});
    }
  }
  TunerResult result;
  result.trials = evaluate_block(pending, fn, 0);
  result.best = best_of(result.trials);
  return result;
}

std::vector<RungSpec> bracket_schedule(int r_max, int eta) {
  if (r_max < 1) throw ConfigError("max resource must be at least 1");
  if (eta < 2) throw ConfigError("eta must be at least 2");
  int s_max = 0;
  long long p = 1;
  while (p * eta <= r_max) {
    p *= eta;
    ++s_max;
  }
  std::vector<RungSpec> out;
  for (int s = s_max; s >= 0; --s) {
    long long pow_s = 1;
    for (int k = 0; k < s; ++k) pow_s *= eta;
    const long long n = (static_cast<long long>(s_max + 1) * pow_s + s) / (s + 1);  // exact ceil
    const double r = double(r_max) / double(pow_s);
    long long eta_i = 1;
    for (int i = 0; i <= s; ++i) {
      RungSpec rung;
      rung.bracket = s;
      rung.rung = i;
      rung.configs = int(n / eta_i);
      rung.resource0 = r * double(eta_i);
      rung.epochs = std::max(1, int(std::floor(rung.resource0 + 1e-12)));
      out.push_back(rung);
      eta_i *= eta;
    }
  }
  return out;
}

TunerResult hyperband(const HyperSpace& space, int r_max, int eta, const FitnessFn& fn,
                      std::uint64_t seed) {
  validate(space);
  const std::vector<RungSpec> schedule = bracket_schedule(r_max, eta);

  TunerResult result;
  struct Config {
    HyperParams hp;
    std::uint64_t fit_seed = 0;
  };
  std::size_t at = 0;
  while (at < schedule.size()) {
    const int s = schedule[at].bracket;
    const std::uint64_t bracket_seed = derive_seed(seed, 1000 + std::uint64_t(s));
    std::vector<Config> configs(schedule[at].configs);
    for (std::size_t j = 0; j < configs.size(); ++j) {
      configs[j].hp = sample_hp(space, derive_seed(bracket_seed, 2 * j));
      configs[j].fit_seed = derive_seed(bracket_seed, 2 * j + 1);
    }
    std::vector<int> alive(configs.size());
    std::iota(alive.begin(), alive.end(), 0);

    while (at < schedule.size() && schedule[at].bracket == s) {
      const RungSpec& rung = schedule[at];
      std::vector<PendingTrial> pending;
      for (int c : alive) {
        pending.push_back({configs[c].hp, configs[c].fit_seed, rung.epochs, s, rung.rung});
      }
      std::vector<Trial> block = evaluate_block(pending, fn, int(result.trials.size()));

      const bool last_in_bracket = at + 1 >= schedule.size() || schedule[at + 1].bracket != s;
      if (!last_in_bracket) {
        const int keep = schedule[at + 1].configs;
        // healthy configs by fitness (ties by position), failed ones last
        std::vector<int> order(alive.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
          if (block[x].failed != block[y].failed) return !block[x].failed;
          return block[x].fitness < block[y].fitness;
        });
        std::vector<int> next;
        for (int k = 0; k < keep && k < int(order.size()); ++k) next.push_back(alive[order[k]]);
        std::sort(next.begin(), next.end());
        alive = std::move(next);
      }
      for (Trial& t : block) result.trials.push_back(std::move(t));
      ++at;
    }
  }
  result.best = best_of(result.trials);
  return result;
}

std::string to_string(TunerKind k) {
  switch (k) {
    case TunerKind::Random: return "random";
    case TunerKind::Hyperband: return "hyperband";
    case TunerKind::Bayesian: return "bayesian";
  }
  throw ConfigError("unknown tuner");
}

TunerKind tuner_kind_from(const std::string& s) {
  if (s == "random") return TunerKind::Random;
  if (s == "hyperband") return TunerKind::Hyperband;
  if (s == "bayesian") return TunerKind::Bayesian;
  throw ConfigError("unknown tuner '" + s + "'");
}

TunerResult run_tuner(TunerKind kind, const HyperSpace& space, const FitnessFn& fn,
                      std::uint64_t seed, const TunerOptions& opt) {
  switch (kind) {
    case TunerKind::Random:
      return random_search(space, opt.budget, fn, seed, opt.trial_epochs);
    case TunerKind::Hyperband:
      return hyperband(space, opt.r_max, opt.eta, fn, seed);
    case TunerKind::Bayesian:
      throw ConfigError("the bayesian tuner is reserved but not implemented; "
                        "use random or hyperband");
  }
  throw ConfigError("unknown tuner");
}

ArchSpec hp_arch(const HyperParams& hp, NetKind kind, int input_dim, int output_dim) {
  ArchSpec arch;
  arch.kind = kind;
  arch.input_dim = input_dim;
  arch.output_dim = output_dim;
  arch.hidden = hp.features;
  arch.activations = hp.activations;
  return arch;
}

TrainParams hp_train_params(const HyperParams& hp, Optimizer opt, int epochs,
                            std::uint64_t seed) {
  TrainParams p;
  p.optimizer = opt;
  p.lr = hp.lr;
  p.beta1 = hp.beta1;
  p.beta2 = hp.beta2;
  p.rho = hp.rho;
  p.gamma = hp.gamma;
  p.epochs = epochs;
  p.seed = seed;
  return p;
}

} // namespace metastim
