#include "metastim/labelspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metastim/error.hpp"
#include "metastim/parallel.hpp"

namespace metastim {

OneHot one_hot(const CategoryPath& category, const PimsTree& tree) {
  auto node = tree.resolve(category);
  if (!node) throw DataError("unknown category: " + category.joined());
  OneHot oh;
  oh.values.assign(tree.node_count(), 0.0);
  oh.values[*node] = 1.0;
  oh.hot = *node;
  return oh;
}

Mat label_matrix(const Dataset& ds) {
  std::vector<int> all(ds.atoms.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = int(i);
  return label_matrix(ds, all);
}

Mat label_matrix(const Dataset& ds, const std::vector<int>& atom_indices) {
  Mat m(int(atom_indices.size()), ds.tree.node_count());
  for (std::size_t r = 0; r < atom_indices.size(); ++r) {
    OneHot oh = one_hot(ds.atoms[atom_indices[r]].category, ds.tree);
    std::copy(oh.values.begin(), oh.values.end(), m.row(int(r)).begin());
  }
  return m;
}

namespace {

Mat centered(const Mat& labels, VecD& mean) {
  mean.assign(labels.cols, 0.0);
  for (int i = 0; i < labels.rows; ++i)
    for (int j = 0; j < labels.cols; ++j) mean[j] += labels(i, j);
  for (double& v : mean) v /= double(labels.rows);

  Mat b = labels;
  for (int i = 0; i < b.rows; ++i)
    for (int j = 0; j < b.cols; ++j) b(i, j) -= mean[j];
  return b;
}

int rank_of(const VecD& eigenvalues) {
  if (eigenvalues.empty() || eigenvalues[0] <= 0.0) return 0;
  const double cutoff = 1e-10 * eigenvalues[0];
  int r = 0;
  while (r < int(eigenvalues.size()) && eigenvalues[r] > cutoff) ++r;
  return r;
}

} // namespace

int label_rank(const Mat& labels) {
  VecD mean;
  Mat b = centered(labels, mean);
  SymEig eig = jacobi_eigh(par::matmul_tn(b, b));
  return rank_of(eig.values);
}

ProjectionModel fit_pca(const Mat& labels, int d_out, VecD* variances) {
  if (labels.rows < 2) throw DataError("PCA needs at least 2 label rows");
  if (labels.cols < 1) throw DataError("PCA needs at least 1 label column");
  if (d_out < 1) throw DataError("output dimension must be positive");

  ProjectionModel model;
  Mat b = centered(labels, model.mean);
  SymEig eig = jacobi_eigh(par::matmul_tn(b, b));
  const int rank = rank_of(eig.values);
  if (d_out > rank)
    throw DataError("output dimension " + std::to_string(d_out) +
                    " exceeds label rank " + std::to_string(rank));

  model.components = Mat(d_out, labels.cols);
  for (int r = 0; r < d_out; ++r)
    for (int j = 0; j < labels.cols; ++j) model.components(r, j) = eig.vectors(j, r);

  // sign convention: the largest-magnitude entry of each row is positive
  for (int r = 0; r < d_out; ++r) {
    auto row = model.components.row(r);
    int arg = 0;
    for (int j = 1; j < labels.cols; ++j)
      if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
    if (row[arg] < 0.0)
      for (int j = 0; j < labels.cols; ++j) row[j] = -row[j];
  }

  if (variances) variances->assign(eig.values.begin(), eig.values.begin() + d_out);
  return model;
}

LabelPoint project(const ProjectionModel& model, std::span<const double> c) {
  if (int(c.size()) != model.node_count())
    throw DataError("projection input length " + std::to_string(c.size()) +
                    " != node count " + std::to_string(model.node_count()));
  LabelPoint p;
  p.y.assign(model.d_out(), 0.0);
  for (int r = 0; r < model.d_out(); ++r) {
    double s = 0.0;
    for (int j = 0; j < model.node_count(); ++j)
      s += model.components(r, j) * (c[j] - model.mean[j]);
    p.y[r] = s;
  }
  return p;
}

VecD inverse_project(const ProjectionModel& model, const LabelPoint& y) {
  if (int(y.y.size()) != model.d_out())
    throw DataError("label point length " + std::to_string(y.y.size()) +
                    " != output dimension " + std::to_string(model.d_out()));
  VecD c = model.mean;
  for (int r = 0; r < model.d_out(); ++r)
    for (int j = 0; j < model.node_count(); ++j) c[j] += model.components(r, j) * y.y[r];
  return c;
}

int nearest(std::span<const double> point, const std::vector<VecD>& candidates) {
  if (candidates.empty()) throw DataError("nearest-neighbor search with no candidates");
  int best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != point.size())
      throw DataError("candidate dimension mismatch in nearest-neighbor search");
    double d = 0.0;
    for (std::size_t k = 0; k < point.size(); ++k) {
      const double diff = point[k] - candidates[i][k];
      d += diff * diff;
    }
    if (best_d < 0.0 || d < best_d) {
      best_d = d;
      best = int(i);
    }
  }
  return best;
}

CategoryPath classify(const LabelPoint& yhat, const ProjectionModel& model, const PimsTree& tree,
                      const std::vector<int>& candidates, ClassifyMode mode) {
  if (candidates.empty()) throw DataError("classify called with no candidate nodes");
  std::vector<int> nodes = candidates;
  std::sort(nodes.begin(), nodes.end());  // ties resolve to the smallest node id

  std::vector<VecD> points;
  points.reserve(nodes.size());
  VecD target;
  if (mode == ClassifyMode::NnInProjected) {
    for (int node : nodes) {
      VecD c(model.node_count(), 0.0);
      if (node < 0 || node >= model.node_count())
        throw DataError("candidate node out of range: " + std::to_string(node));
      c[node] = 1.0;
      points.push_back(project(model, c).y);
    }
    target = yhat.y;
  } else {
    for (int node : nodes) {
      if (node < 0 || node >= model.node_count())
        throw DataError("candidate node out of range: " + std::to_string(node));
      VecD c(model.node_count(), 0.0);
      c[node] = 1.0;
      points.push_back(std::move(c));
    }
    target = inverse_project(model, yhat);
  }
  return tree.path_of(nodes[nearest(target, points)]);
}

void save_projection(const ProjectionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << model.d_out() << ' ' << model.node_count() << '\n';
  for (int j = 0; j < model.node_count(); ++j)
    out << (j ? " " : "") << format_full(model.mean[j]);
  out << '\n';
  for (int r = 0; r < model.d_out(); ++r) {
    for (int j = 0; j < model.node_count(); ++j)
      out << (j ? " " : "") << format_full(model.components(r, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

ProjectionModel load_projection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  int d_out = 0, nodes = 0;
  in >> d_out >> nodes;
  if (!in || d_out < 1 || nodes < 1 || d_out > nodes)
    throw DataError("corrupt projection header in " + path.string());

  ProjectionModel model;
  model.mean.resize(nodes);
  for (double& v : model.mean) in >> v;
  model.components = Mat(d_out, nodes);
  for (double& v : model.components.a) in >> v;
  if (!in) throw DataError("corrupt projection data in " + path.string());

  for (int r = 0; r < d_out; ++r) {
    for (int s = 0; s <= r; ++s) {
      double d = dot(model.components.row(r), model.components.row(s));
      const double want = r == s ? 1.0 : 0.0;
      if (std::abs(d - want) > 1e-10)
        throw DataError("projection rows not orthonormal in " + path.string());
    }
  }
  return model;
}

} // namespace metastim
