#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "metastim/error.hpp"
#include "metastim/labelspace.hpp"
#include "metastim/rng.hpp"

using namespace metastim;
namespace fs = std::filesystem;

namespace {

// dataset with `cats` flat categories, `per` atoms each
Dataset flat_dataset(int cats, int per) {
  Dataset ds;
  for (int c = 0; c < cats; ++c) {
    for (int i = 0; i < per; ++i) {
      Atom a;
      a.id = int(ds.atoms.size());
      a.tokens = {"t"};
      a.category.segments = {"cat" + std::to_string(c)};
      ds.tree.add_path(a.category);
      ds.atoms.push_back(a);
    }
  }
  ds.part.assign(ds.atoms.size(), Part::Train);
  return ds;
}

double dist(const VecD& a, const VecD& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

} // namespace

TEST_CASE("one_hot places the single 1 at the node index") {
  PimsTree tree;
  tree.add_path({{"a"}});
  tree.add_path({{"a", "b"}});
  tree.add_path({{"c"}});
  tree.add_path({{"c", "d"}});

  OneHot oh = one_hot({{"c"}}, tree);
  CHECK(oh.values == VecD{0.0, 0.0, 1.0, 0.0});
  CHECK(oh.hot == 2);

  CHECK_THROWS_WITH_AS(one_hot({{"zzz"}}, tree), doctest::Contains("unknown category"), DataError);

  // distinct categories give orthogonal encodings
  OneHot o1 = one_hot({{"a", "b"}}, tree);
  OneHot o2 = one_hot({{"c", "d"}}, tree);
  CHECK(dot(o1.values, o2.values) == 0.0);
  CHECK(dot(o1.values, o1.values) == 1.0);
}

TEST_CASE("label matrix stacks one-hot rows") {
  Dataset ds = flat_dataset(3, 2);
  Mat m = label_matrix(ds);
  REQUIRE(m.rows == 6);
  REQUIRE(m.cols == 3);
  for (int i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) sum += m(i, j);
    CHECK(sum == 1.0);
  }
  CHECK(m(0, 0) == 1.0);
  CHECK(m(5, 2) == 1.0);

  Mat sub = label_matrix(ds, {1, 4});
  REQUIRE(sub.rows == 2);
  CHECK(sub(0, 0) == 1.0);
  CHECK(sub(1, 2) == 1.0);
}

TEST_CASE("centered one-hots lose exactly one rank") {
  for (int cats : {3, 4, 5}) {
    Dataset ds = flat_dataset(cats, 3);
    Mat labels = label_matrix(ds);
    CHECK(label_rank(labels) == cats - 1);
    CHECK_NOTHROW(fit_pca(labels, cats - 1));
    const std::string msg = "exceeds label rank " + std::to_string(cats - 1);
    CHECK_THROWS_WITH_AS(fit_pca(labels, cats), doctest::Contains(msg.c_str()), DataError);
  }
  // the 4-D label space needs at least 5 categories
  Mat labels5 = label_matrix(flat_dataset(5, 2));
  CHECK_NOTHROW(fit_pca(labels5, 4));
}

TEST_CASE("component rows are orthonormal and deterministic") {
  Dataset ds = flat_dataset(5, 4);
  Mat labels = label_matrix(ds);
  ProjectionModel m = fit_pca(labels, 4);

  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s)
      CHECK(std::abs(dot(m.components.row(r), m.components.row(s)) - (r == s ? 1.0 : 0.0)) <=
            1e-10);

  ProjectionModel again = fit_pca(labels, 4);
  CHECK(m == again);  // bit-identical refit
}

TEST_CASE("variances match a brute-force eigendecomposition and decrease") {
  Rng rng(21);
  Mat labels(6, 6);
  for (double& v : labels.a) v = rng.uniform(0.0, 1.0);

  VecD variances;
  const int rank = label_rank(labels);
  REQUIRE(rank >= 2);
  fit_pca(labels, rank, &variances);

  // independent covariance eigendecomposition
  VecD mean(6, 0.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) mean[j] += labels(i, j) / 6.0;
  Mat cov(6, 6);
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) {
      double s = 0.0;
      for (int i = 0; i < 6; ++i) s += (labels(i, p) - mean[p]) * (labels(i, q) - mean[q]);
      cov(p, q) = s;
    }
  SymEig eig = jacobi_eigh(cov);

  for (int r = 0; r < rank; ++r) {
    CHECK(variances[r] == doctest::Approx(eig.values[r]).epsilon(1e-9));
    if (r) CHECK(variances[r] <= variances[r - 1] + 1e-12);
  }
}

TEST_CASE("projection basics") {
  Dataset ds = flat_dataset(4, 2);
  Mat labels = label_matrix(ds);
  ProjectionModel m = fit_pca(labels, 3);

  LabelPoint at_mean = project(m, m.mean);
  for (double v : at_mean.y) CHECK(std::abs(v) <= 1e-12);

  VecD wrong(5, 0.0);
  CHECK_THROWS_AS(project(m, wrong), DataError);

  // linearity on centered inputs: project(mean + a*u + b*v) = a*P(u') + b*P(v')
  Rng rng(3);
  VecD u(4), v(4);
  for (int i = 0; i < 4; ++i) {
    u[i] = rng.uniform(-1.0, 1.0);
    v[i] = rng.uniform(-1.0, 1.0);
  }
  const double a = 0.7, b = -1.3;
  VecD combo = m.mean;
  for (int i = 0; i < 4; ++i) combo[i] += a * u[i] + b * v[i];
  VecD shifted_u = m.mean, shifted_v = m.mean;
  for (int i = 0; i < 4; ++i) {
    shifted_u[i] += u[i];
    shifted_v[i] += v[i];
  }
  LabelPoint pc = project(m, combo);
  LabelPoint pu = project(m, shifted_u);
  LabelPoint pv = project(m, shifted_v);
  for (int r = 0; r < 3; ++r)
    CHECK(pc.y[r] == doctest::Approx(a * pu.y[r] + b * pv.y[r]).epsilon(1e-10));
}

TEST_CASE("equal-frequency one-hots project to a regular simplex") {
  Dataset ds = flat_dataset(4, 3);
  Mat labels = label_matrix(ds);
  ProjectionModel m = fit_pca(labels, 3);

  std::vector<VecD> pts;
  for (int c = 0; c < 4; ++c) {
    VecD oh(4, 0.0);
    oh[c] = 1.0;
    pts.push_back(project(m, oh).y);
  }
  const double d01 = dist(pts[0], pts[1]);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      CHECK(dist(pts[i], pts[j]) == doctest::Approx(d01).epsilon(1e-10));
}

TEST_CASE("inverse projection round trip") {
  Dataset ds = flat_dataset(5, 2);
  Mat labels = label_matrix(ds);
  ProjectionModel m = fit_pca(labels, 4);  // full rank for 5 categories

  for (int c = 0; c < 5; ++c) {
    VecD oh(5, 0.0);
    oh[c] = 1.0;
    VecD back = inverse_project(m, project(m, oh));
    for (int j = 0; j < 5; ++j) CHECK(std::abs(back[j] - oh[j]) <= 1e-10);
  }

  LabelPoint zero{VecD(4, 0.0)};
  CHECK(inverse_project(m, zero) == m.mean);

  LabelPoint wrong{VecD(2, 0.0)};
  CHECK_THROWS_AS(inverse_project(m, wrong), DataError);
}

TEST_CASE("truncation error equals the discarded component mass and shrinks") {
  Rng rng(9);
  Mat labels(8, 6);
  for (double& v : labels.a) v = rng.uniform(0.0, 1.0);
  const int rank = label_rank(labels);
  REQUIRE(rank >= 3);

  ProjectionModel full = fit_pca(labels, rank);
  VecD probe(6);
  for (double& v : probe) v = rng.uniform(0.0, 1.0);
  LabelPoint full_proj = project(full, probe);

  double prev_err = 1e300;
  for (int d = 1; d <= rank; ++d) {
    ProjectionModel m = fit_pca(labels, d);
    VecD back = inverse_project(m, project(m, probe));
    const double err = dist(back, probe);

    // discarded mass: the full-rank coordinates beyond d plus the residual
    // outside the label span
    VecD full_back = inverse_project(full, full_proj);
    double tail = 0.0;
    for (int r = d; r < rank; ++r) tail += full_proj.y[r] * full_proj.y[r];
    for (std::size_t j = 0; j < probe.size(); ++j)
      tail += (probe[j] - full_back[j]) * (probe[j] - full_back[j]);
    CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));

    CHECK(err <= prev_err + 1e-12);
    prev_err = err;
  }
}

TEST_CASE("classification hits, ties, and mode agreement") {
  Dataset ds = flat_dataset(4, 3);
  Mat labels = label_matrix(ds);
  ProjectionModel m = fit_pca(labels, 3);
  std::vector<int> candidates = observed_label_nodes(ds);
  REQUIRE(candidates.size() == 4);

  // exact hit, both modes
  for (int c = 0; c < 4; ++c) {
    VecD oh(4, 0.0);
    oh[c] = 1.0;
    LabelPoint y = project(m, oh);
    CHECK(classify(y, m, ds.tree, candidates, ClassifyMode::NnInProjected).joined() ==
          "cat" + std::to_string(c));
    CHECK(classify(y, m, ds.tree, candidates, ClassifyMode::NnInNodeSpace).joined() ==
          "cat" + std::to_string(c));
  }

  // midpoint of two projected labels: the smaller node index wins
  VecD oh0(4, 0.0), oh1(4, 0.0);
  oh0[0] = 1.0;
  oh1[1] = 1.0;
  LabelPoint p0 = project(m, oh0), p1 = project(m, oh1);
  LabelPoint mid{VecD(3, 0.0)};
  for (int r = 0; r < 3; ++r) mid.y[r] = 0.5 * (p0.y[r] + p1.y[r]);
  CHECK(classify(mid, m, ds.tree, candidates, ClassifyMode::NnInProjected).joined() == "cat0");

  // full-rank modes agree on random probes
  Rng rng(33);
  for (int rep = 0; rep < 500; ++rep) {
    LabelPoint y{VecD(3)};
    for (double& v : y.y) v = rng.uniform(-2.0, 2.0);
    CHECK(classify(y, m, ds.tree, candidates, ClassifyMode::NnInProjected) ==
          classify(y, m, ds.tree, candidates, ClassifyMode::NnInNodeSpace));
  }

  CHECK_THROWS_AS(classify(p0, m, ds.tree, {}, ClassifyMode::NnInProjected), DataError);
}

TEST_CASE("nearest is translation-invariant and breaks ties low") {
  std::vector<VecD> cands = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 2.0}};
  VecD origin = {0.0, 0.0};
  CHECK(nearest(origin, cands) == 0);  // tie between first two -> earliest

  Rng rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    VecD p = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    VecD t = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
    std::vector<VecD> shifted = cands;
    VecD p_shifted = p;
    for (auto& c : shifted)
      for (int k = 0; k < 2; ++k) c[k] += t[k];
    for (int k = 0; k < 2; ++k) p_shifted[k] += t[k];
    CHECK(nearest(p, cands) == nearest(p_shifted, shifted));
  }

  CHECK_THROWS_AS(nearest(origin, {}), DataError);
}

TEST_CASE("projection model round trip") {
  Dataset ds = flat_dataset(5, 2);
  ProjectionModel m = fit_pca(label_matrix(ds), 3);

  fs::path p = fs::temp_directory_path() /
               ("metastim-proj-" + std::to_string(::getpid()) + ".txt");
  save_projection(m, p);
  ProjectionModel back = load_projection(p);
  CHECK(back == m);
  fs::remove(p);
  CHECK_THROWS_AS(load_projection(p), DataError);

  fs::path bad = fs::temp_directory_path() /
                 ("metastim-proj-bad-" + std::to_string(::getpid()) + ".txt");
  {
    std::ofstream out(bad);
    out << "2 3\n1 2 3\n1 0 0\n1 0 0\n";  // duplicate rows are not orthonormal
  }
  CHECK_THROWS_WITH_AS(load_projection(bad), doctest::Contains("orthonormal"), DataError);
  {
    std::ofstream out(bad);
    out << "4 3\n";  // d_out > nodes
  }
  CHECK_THROWS_AS(load_projection(bad), DataError);
  fs::remove(bad);
}
