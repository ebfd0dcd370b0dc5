#include "metastim/patsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "metastim/error.hpp"
#include "metastim/parallel.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int clamp_var(const MetaVar& v, long long code) {
  return int(std::clamp(code, (long long)v.lo, (long long)v.hi));
}

int encode_real(const MetaVar& v, double value, const std::string& what) {
  const long long code = llround((value - v.offset) / v.scale);
  if (code < v.lo || code > v.hi) {
    throw ConfigError(what + " " + std::to_string(value) + " outside the search range");
  }
  return int(code);
}

int encode_label(const MetaVar& v, const std::string& label) {
  for (std::size_t i = 0; i < v.labels.size(); ++i) {
    if (v.labels[i] == label) return int(i);
  }
  throw ConfigError("'" + label + "' is not a choice of " + v.name);
}

std::string point_json(const MetaPoint& p) {
  return nlohmann::json(p.coords).dump();
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

void validate(const MetaSpace& space) {
  if (space.vars.empty()) throw ConfigError("meta space has no variables");
  for (const MetaVar& v : space.vars) {
    if (v.lo > v.hi) throw ConfigError("variable '" + v.name + "' has an empty range");
    if (!(v.scale > 0.0)) throw ConfigError("variable '" + v.name + "' has a bad scale");
    if (!v.labels.empty()) {
      if (v.lo != 0 || v.hi != int(v.labels.size()) - 1) {
        throw ConfigError("variable '" + v.name + "' bounds do not match its choices");
      }
    }
  }
}

bool in_bounds(const MetaSpace& space, const MetaPoint& p) {
  if (p.coords.size() != space.vars.size()) return false;
  for (std::size_t i = 0; i < space.vars.size(); ++i) {
    if (p.coords[i] < space.vars[i].lo || p.coords[i] > space.vars[i].hi) return false;
  }
  return true;
}

MetaSpace default_meta_space() {
  MetaSpace s;
  auto int_var = [](std::string name, int lo, int hi, double scale = 1.0) {
    MetaVar v;
    v.name = std::move(name);
    v.lo = lo;
    v.hi = hi;
    v.scale = scale;
    return v;
  };
  auto enum_var = [](std::string name, std::vector<std::string> labels) {
    MetaVar v;
    v.name = std::move(name);
    v.lo = 0;
    v.hi = int(labels.size()) - 1;
    v.labels = std::move(labels);
    return v;
  };
  s.vars.push_back(int_var("d_out", 1, 6));
  s.vars.push_back(int_var("input_dims", 1, 64));
  s.vars.push_back(int_var("keyword_weight", 0, 20, 0.5));    // 0..10 by 0.5
  s.vars.push_back(enum_var("method", {"bow_sum", "bow_mean", "nabla", "pvdm"}));
  s.vars.push_back(enum_var("optimizer",
                            {"sgd", "adam", "adagrad", "adadelta", "adamax", "rmsprop"}));
  s.vars.push_back(enum_var("arch", {"ffnn", "rnn"}));
  s.vars.push_back(enum_var("tuner", {"random", "hyperband"}));
  s.vars.push_back(int_var("tuner_budget", 1, 10, 4.0));      // 4..40 by 4
  s.vars.push_back(int_var("tuner_r", 1, 9, 3.0));            // 3..27 by 3
  s.vars.push_back(int_var("tuner_eta", 2, 4));
  return s;
}

MetaPoint encode(const MetaSpace& space, const MetaConfig& config) {
  validate(space);
  if (space.vars.size() != 10) {
    throw ConfigError("encode expects the canonical meta space");
  }
  MetaPoint p;
  p.coords.resize(10);
  p.coords[0] = encode_real(space.vars[0], config.d_out, "projection dims");
  p.coords[1] = encode_real(space.vars[1], config.input_dims, "input dims");
  p.coords[2] = encode_real(space.vars[2], config.keyword_weight, "keyword weight");
  p.coords[3] = encode_label(space.vars[3], to_string(config.method));
  p.coords[4] = encode_label(space.vars[4], to_string(config.optimizer));
  p.coords[5] = encode_label(space.vars[5], to_string(config.kind));
  p.coords[6] = encode_label(space.vars[6], to_string(config.tuner));
  p.coords[7] = encode_real(space.vars[7], config.tuner_budget, "tuner budget");
  p.coords[8] = encode_real(space.vars[8], config.tuner_r, "tuner max resource");
  p.coords[9] = encode_real(space.vars[9], config.tuner_eta, "tuner eta");
  return p;
}

MetaConfig decode(const MetaSpace& space, const MetaPoint& point) {
  validate(space);
  if (space.vars.size() != 10) {
    throw ConfigError("decode expects the canonical meta space");
  }
  if (!in_bounds(space, point)) throw ConfigError("meta point out of bounds");
  auto real_at = [&](int i) {
    return space.vars[i].offset + space.vars[i].scale * point.coords[i];
  };
  auto label_at = [&](int i) -> const std::string& {
    return space.vars[i].labels[point.coords[i]];
  };
  MetaConfig c;
  c.d_out = int(llround(real_at(0)));
  c.input_dims = int(llround(real_at(1)));
  c.keyword_weight = real_at(2);
  c.method = atom_method_from(label_at(3));
  c.optimizer = optimizer_from(label_at(4));
  c.kind = net_kind_from(label_at(5));
  c.tuner = tuner_kind_from(label_at(6));
  c.tuner_budget = int(llround(real_at(7)));
  c.tuner_r = int(llround(real_at(8)));
  c.tuner_eta = int(llround(real_at(9)));
  return c;
}

std::vector<MetaPoint> exploratory_mesh(const MetaPoint& x, int mu, const MetaSpace& space) {
  validate(space);
  if (!in_bounds(space, x)) throw ConfigError("meta point out of bounds");
  std::vector<MetaPoint> out;
  if (mu < 1) return out;
  std::set<MetaPoint> seen;
  for (std::size_t i = 0; i < space.vars.size(); ++i) {
    for (int sign : {+1, -1}) {
      const int c = clamp_var(space.vars[i], (long long)x.coords[i] + sign * (long long)mu);
      if (c == x.coords[i]) continue;
      MetaPoint p = x;
      p.coords[i] = c;
      if (seen.insert(p).second) out.push_back(std::move(p));
    }
  }
  return out;
}

std::string SearchTrace::to_csv() const {
  std::string out = "iter,kind,point_json,fitness,mesh\n";
  for (const TraceEntry& e : entries) {
    out += std::to_string(e.iter);
    out += ',';
    out += e.kind;
    out += ',';
    out += csv_quote(point_json(e.point));
    out += ',';
    out += format_full(e.fitness);
    out += ',';
    out += std::to_string(e.mesh);
    out += '\n';
  }
  return out;
}

PatternResult pattern_search(const MetaSpace& space, const MetaFitnessFn& fn,
                             const SearchParams& params, std::uint64_t seed) {
  validate(space);
  if (!(params.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (params.mu0 < 1) throw ConfigError("initial mesh size must be at least 1");
  if (params.delta < 1) throw ConfigError("mesh decrement must be at least 1");
  if (params.max_stall < 1) throw ConfigError("stall limit must be at least 1");
  if (params.min_improvement < 0.0) throw ConfigError("min improvement must be >= 0");

  std::map<MetaPoint, double> memo;
  bool any_finite = false;
  auto safe_eval = [&fn](const MetaPoint& p) -> double {
    try {
      const double f = fn(p);
      return std::isfinite(f) ? f : kInf;
    } catch (const std::exception&) {
      return kInf;
    }
  };
  auto eval_points = [&](const std::vector<MetaPoint>& pts) {
    std::vector<double> out(pts.size(), 0.0);
    std::vector<int> missing;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto it = memo.find(pts[i]);
      if (it != memo.end()) out[i] = it->second;
      else missing.push_back(int(i));
    }
    std::vector<double> fresh(missing.size());
    par::for_each_index(int(missing.size()),
                        [&](int k) { fresh[k] = safe_eval(pts[missing[k]]); });
    for (std::size_t k = 0; k < missing.size(); ++k) {
      memo.emplace(pts[missing[k]], fresh[k]);
      out[missing[k]] = fresh[k];
    }
    for (double f : out) {
      if (std::isfinite(f)) any_finite = true;
    }
    return out;
  };
  auto pattern_move = [&](const MetaPoint& from, const MetaPoint& to) {
    MetaPoint cand = to;
    for (std::size_t i = 0; i < space.vars.size(); ++i) {
      const double raw = from.coords[i] + params.alpha * (to.coords[i] - from.coords[i]);
      cand.coords[i] = clamp_var(space.vars[i], llround(raw));
    }
    return cand;
  };

  MetaPoint base;
  if (params.start) {
    if (!in_bounds(space, *params.start)) throw ConfigError("start point out of bounds");
    base = *params.start;
  } else {
    Rng rng(seed);
    base.coords.resize(space.vars.size());
    for (std::size_t i = 0; i < space.vars.size(); ++i) {
      base.coords[i] = rng.uniform_int(space.vars[i].lo, space.vars[i].hi);
    }
  }
  double f_base = eval_points({base})[0];

  PatternResult result;
  result.trace.entries.push_back({0, "base", base, f_base, params.mu0});

  int mu = params.mu0;
  int stall = 0;
  int iter = 0;
  while (true) {
    ++iter;
    const std::vector<MetaPoint> mesh = mu >= 1 ? exploratory_mesh(base, mu, space)
                                                : std::vector<MetaPoint>{};
    const std::vector<double> fits = eval_points(mesh);
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      result.trace.entries.push_back({iter, "explore", mesh[i], fits[i], mu});
    }
    int best = -1;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      if (best < 0 || fits[i] < fits[best]) best = int(i);
    }

    if (best >= 0 && fits[best] < f_base) {
      const double f_start = f_base;
      MetaPoint prev = base;
      MetaPoint cur = mesh[best];
      double f_cur = fits[best];
      while (true) {
        const MetaPoint cand = pattern_move(prev, cur);
        if (cand == cur) break;
        const double f_cand = eval_points({cand})[0];
        result.trace.entries.push_back({iter, "move", cand, f_cand, mu});
        if (f_cand < f_cur) {
          prev = cur;
          cur = cand;
          f_cur = f_cand;
        } else {
          break;
        }
      }
      base = cur;
      f_base = f_cur;
      stall = 0;
      mu = params.mu0;
      result.trace.entries.push_back({iter, "accept", base, f_base, mu});
      if (params.min_improvement > 0.0 && f_start - f_base < params.min_improvement) break;
    } else {
      ++stall;
      result.trace.entries.push_back({iter, "stall", base, f_base, mu});
      mu -= params.delta;
      if (stall >= params.max_stall) break;
    }
  }

  if (!any_finite) throw DataError("pattern search: every evaluation was non-finite");
  result.best = base;
  result.best_fitness = f_base;
  return result;
}

} // namespace metastim
