#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metastim/atomvec.hpp"
#include "metastim/tuner.hpp"

namespace metastim {

/// One coordinate of the search lattice. Integers map straight onto codes,
/// quantized reals via value = offset + scale * code, enums by label index.
struct MetaVar {
  std::string name;
  int lo = 0;
  int hi = 0;
  double scale = 1.0;
  double offset = 0.0;
  std::vector<std::string> labels;  // non-empty marks an enum variable

  bool operator==(const MetaVar&) const = default;
};

struct MetaSpace {
  std::vector<MetaVar> vars;
};

void validate(const MetaSpace& space);  // throws ConfigError

struct MetaPoint {
  std::vector<int> coords;

  bool operator==(const MetaPoint&) const = default;
  auto operator<=>(const MetaPoint&) const = default;
};

bool in_bounds(const MetaSpace& space, const MetaPoint& p);

/// The decoded settings driving one end-to-end pipeline evaluation.
struct MetaConfig {
  int d_out = 4;
  int input_dims = 20;
  double keyword_weight = 5.0;
  AtomMethod method = AtomMethod::Pvdm;
  Optimizer optimizer = Optimizer::Adam;
  NetKind kind = NetKind::Ffnn;
  TunerKind tuner = TunerKind::Random;
  int tuner_budget = 8;
  int tuner_r = 9;
  int tuner_eta = 3;

  bool operator==(const MetaConfig&) const = default;
};

/// The canonical ten-variable lattice: projection dims, word-vector input
/// dims, keyword weight (half-unit grid), embedding method, optimizer,
/// network kind, tuner kind, and the tuner's budget / max resource / eta.
MetaSpace default_meta_space();

MetaPoint encode(const MetaSpace& space, const MetaConfig& config);
MetaConfig decode(const MetaSpace& space, const MetaPoint& point);

/// Coordinate steps of +-mu around x, clamped to bounds; steps that clamp
/// back onto x are dropped, duplicates removed, generation order kept.
std::vector<MetaPoint> exploratory_mesh(const MetaPoint& x, int mu, const MetaSpace& space);

struct SearchParams {
  double alpha = 2.0;        // pattern-move acceleration
  int mu0 = 2;               // initial mesh size in lattice steps
  int delta = 1;             // mesh shrink per non-improving set
  int max_stall = 3;         // consecutive non-improving sets before stopping
  double min_improvement = 0.0;
  std::optional<MetaPoint> start;  // defaults to a random base point
};

struct TraceEntry {
  int iter = 0;
  std::string kind;  // base | explore | move | accept | stall
  MetaPoint point;
  double fitness = 0.0;
  int mesh = 0;
};

struct SearchTrace {
  std::vector<TraceEntry> entries;

  std::string to_csv() const;  // iter,kind,point_json,fitness,mesh
};

struct PatternResult {
  MetaPoint best;
  double best_fitness = 0.0;
  SearchTrace trace;
};

using MetaFitnessFn = std::function<double(const MetaPoint&)>;

/// Derivative-free lattice descent: evaluate the mesh around the base
/// point; adopt an improving point, follow accelerated pattern moves while
/// they keep improving, and reset the mesh; otherwise shrink the mesh and
/// count a stall. Stops after max_stall consecutive non-improving sets (a
/// mesh below one lattice step yields empty sets, which cannot improve) or
/// when an accepted improvement falls under min_improvement. Fitness values
/// are memoized per point; non-finite values act as +infinity.
PatternResult pattern_search(const MetaSpace& space, const MetaFitnessFn& fn,
                             const SearchParams& params, std::uint64_t seed);

} // namespace metastim
