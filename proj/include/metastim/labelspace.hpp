#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "metastim/corpus.hpp"
#include "metastim/linalg.hpp"

namespace metastim {

struct OneHot {
  VecD values;  // length = tree node count
  int hot = -1;
};

/// PCA of the label multiset. `components` rows are orthonormal principal
/// directions (descending variance); projection maps a node-space vector to
/// the d_out-dimensional label space the networks regress onto.
struct ProjectionModel {
  VecD mean;       // column mean of the fitted label matrix
  Mat components;  // d_out x |nodes|

  int d_out() const { return components.rows; }
  int node_count() const { return components.cols; }

  bool operator==(const ProjectionModel&) const = default;
};

struct LabelPoint {
  VecD y;
};

enum class ClassifyMode { NnInProjected, NnInNodeSpace };

OneHot one_hot(const CategoryPath& category, const PimsTree& tree);

/// One-hot rows for the chosen atoms (defaults to every atom).
Mat label_matrix(const Dataset& ds);
Mat label_matrix(const Dataset& ds, const std::vector<int>& atom_indices);

/// Numerical rank of the centered label matrix (eigenvalues above
/// 1e-10 x the largest).
int label_rank(const Mat& labels);

/// Centered PCA fit. Throws DataError when d_out exceeds the achievable
/// rank (the message states it). Row signs follow a fixed convention
/// (largest-magnitude entry positive), so refits are bit-identical.
/// `variances` (optional) receives the retained eigenvalues of the centered
/// scatter matrix, descending.
ProjectionModel fit_pca(const Mat& labels, int d_out, VecD* variances = nullptr);

LabelPoint project(const ProjectionModel& model, std::span<const double> c);
VecD inverse_project(const ProjectionModel& model, const LabelPoint& y);

/// Index into `candidates` of the closest candidate by squared Euclidean
/// distance; the earliest wins ties.
int nearest(std::span<const double> point, const std::vector<VecD>& candidates);

/// Resolves a network output to a category, searching only the `candidates`
/// node ids (the labels actually observed in training). The two modes do the
/// nearest-neighbor step before or after inverse projection; at full rank
/// they agree because the projection is an isometry on the label span.
CategoryPath classify(const LabelPoint& yhat, const ProjectionModel& model, const PimsTree& tree,
                      const std::vector<int>& candidates, ClassifyMode mode);

/// Text form: "d_out n_nodes", the mean line, then one line per component
/// row; full-precision decimals, so reload is exact.
void save_projection(const ProjectionModel& model, const std::filesystem::path& path);
ProjectionModel load_projection(const std::filesystem::path& path);

} // namespace metastim
