#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "metastim/error.hpp"
#include "metastim/pipeline.hpp"

using namespace metastim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / fs::path("metastim-test-" + std::to_string(::getpid()) +
                                                "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GenCorpusParams tiny_corpus_params() {
  GenCorpusParams p;
  p.categories = 4;
  p.atoms_per_category = 8;
  p.vocab = 48;
  p.min_tokens = 15;
  p.max_tokens = 25;
  p.seed = 5;
  return p;
}

// a generated corpus on disk plus a ready config pointing at it
struct Fixture {
  TempDir dir;
  PipelineConfig config;

  explicit Fixture(const GenCorpusParams& gp = tiny_corpus_params()) {
    gen_corpus(gp, dir.path / "corpus.jsonl");
    config.corpus = dir.path / "corpus.jsonl";
    config.method = AtomMethod::BowMean;
    config.input_dims = 8;
    config.window = 3;
    config.pvdm_epochs = 5;
    config.d_out = 3;
    config.null_copies = 2;
    config.final_epochs = 4;
    config.trial_epochs = 2;
    config.seed = 9;
    config.out_dir = dir.path / "out";
  }
};

} // namespace

TEST_CASE("generated corpus hits the requested shape") {
  TempDir dir;
  GenCorpusParams p;  // 4 x 50 defaults
  gen_corpus(p, dir.path / "c.jsonl");
  const Dataset ds = ingest_jsonl(dir.path / "c.jsonl");
  CHECK(ds.atoms.size() == 200);
  CHECK(ds.tree.node_count() == 4);

  std::map<std::string, std::set<std::string>> topics;  // signature word -> categories using it
  long long filler = 0, total = 0;
  for (const Atom& a : ds.atoms) {
    for (const std::string& t : a.tokens) {
      ++total;
      if (t.rfind("common", 0) == 0)
        ++filler;
      else
        topics[t].insert(a.category.segments.front());
    }
    CHECK(a.tokens.size() >= 30);
    CHECK(a.tokens.size() <= 60);
  }
  for (const auto& [word, cats] : topics) {
    CHECK(cats.size() == 1);
    CHECK(word.rfind(*cats.begin() + "term", 0) == 0);  // topic2term7 belongs to topic2
  }
  CHECK(double(filler) / double(total) == doctest::Approx(0.5).epsilon(0.04));

  gen_corpus(p, dir.path / "again.jsonl");
  CHECK(slurp(dir.path / "again.jsonl") == slurp(dir.path / "c.jsonl"));

  GenCorpusParams bad = p;
  bad.vocab = 5;
  CHECK_THROWS_AS(gen_corpus(bad, dir.path / "x.jsonl"), ConfigError);
  bad = p;
  bad.min_tokens = 10;
  bad.max_tokens = 5;
  CHECK_THROWS_AS(gen_corpus(bad, dir.path / "x.jsonl"), ConfigError);
}

TEST_CASE("config files load with defaults, overrides, and field-named errors") {
  TempDir dir;
  gen_corpus(tiny_corpus_params(), dir.path / "corpus.jsonl");

  std::ofstream(dir.path / "min.json") << R"({"corpus": "corpus.jsonl"})";
  const PipelineConfig c = load_config(dir.path / "min.json");
  CHECK(c.corpus == dir.path / "corpus.jsonl");  // resolved against the config dir
  CHECK(c.method == AtomMethod::Pvdm);
  CHECK(c.d_out == 4);
  CHECK(c.final_epochs == 200);
  CHECK(c.null_copies == 5);
  CHECK(c.hp.features == std::vector<int>{32});

  std::ofstream(dir.path / "full.json") << R"({
    "corpus": "corpus.jsonl", "format": "jsonl", "seed": 42, "test_fraction": 0.25,
    "null_copies": 3, "method": "nabla", "input_dims": 12, "keyword_weight": 2.5,
    "window": 5, "pvdm_epochs": 7, "d_out": 2, "arch": "rnn", "optimizer": "rmsprop",
    "classify_mode": "node", "tuner": "hyperband", "tuner_budget": 6, "tuner_r": 27,
    "tuner_eta": 3, "trial_epochs": 4, "lr": 0.005, "beta1": 0.91, "beta2": 0.995,
    "rho": 0.93, "gamma": 0.88, "features": [24], "activations": ["softplus"],
    "final_epochs": 50, "batch_size": 8, "dropout": 0.1, "per_dimension": true,
    "alpha": 1.5, "mu0": 3, "delta": 2, "max_stall": 4, "min_improvement": 0.01,
    "meta_budget": 2, "out_dir": "results"})";
  const PipelineConfig f = load_config(dir.path / "full.json");
  CHECK(f.seed == 42);
  CHECK(f.method == AtomMethod::Nabla);
  CHECK(f.kind == NetKind::Rnn);
  CHECK(f.optimizer == Optimizer::RmsProp);
  CHECK(f.classify_mode == ClassifyMode::NnInNodeSpace);
  CHECK(f.tuner == TunerKind::Hyperband);
  CHECK(f.hp.lr == 0.005);
  CHECK(f.hp.activations == std::vector<Activation>{Activation::Softplus});
  CHECK(f.per_dimension);
  CHECK(f.out_dir == fs::path("results"));

  std::ofstream(dir.path / "unknown.json") << R"({"corpus": "corpus.jsonl", "lerning": 1})";
  CHECK_THROWS_WITH_AS(load_config(dir.path / "unknown.json"),
                       doctest::Contains("lerning"), ConfigError);

  std::ofstream(dir.path / "badenum.json")
      << R"({"corpus": "corpus.jsonl", "optimizer": "adamw"})";
  CHECK_THROWS_WITH_AS(load_config(dir.path / "badenum.json"),
                       doctest::Contains("optimizer"), ConfigError);

  std::ofstream(dir.path / "badnull.json")
      << R"({"corpus": "corpus.jsonl", "null_copies": 0})";
  CHECK_THROWS_WITH_AS(load_config(dir.path / "badnull.json"),
                       doctest::Contains("null_copies"), ConfigError);

  std::ofstream(dir.path / "mismatch.json")
      << R"({"corpus": "corpus.jsonl", "features": [8, 8], "activations": ["tanh"]})";
  CHECK_THROWS_AS(load_config(dir.path / "mismatch.json"), ConfigError);

  std::ofstream(dir.path / "notjson.json") << "not json";
  CHECK_THROWS_AS(load_config(dir.path / "notjson.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir.path / "absent.json"), DataError);
}

TEST_CASE("embeddings pool exactly as the method promises") {
  Fixture fx;
  const PipelineContext ctx = load_pipeline(fx.config);
  EmbedOptions eo;
  eo.input_dims = 6;
  eo.keyword_weight = 3.0;
  eo.window = 3;
  eo.seed = 21;

  eo.method = AtomMethod::BowSum;
  const EmbeddedCorpus sum = embed_corpus(ctx.dataset, eo);
  CHECK(sum.pooled.rows == int(ctx.dataset.atoms.size()));
  CHECK(sum.pooled.cols == 6);
  CHECK(sum.sequences.size() == ctx.dataset.atoms.size());
  for (int i : {0, 7, 31}) {
    VecD expect(6, 0.0);
    for (const VecD& v : sum.sequences[i])
      for (int k = 0; k < 6; ++k) expect[k] += v[k];
    for (int k = 0; k < 6; ++k)
      CHECK(sum.pooled(i, k) == doctest::Approx(expect[k]).epsilon(1e-12));
  }

  eo.method = AtomMethod::BowMean;
  const EmbeddedCorpus mean = embed_corpus(ctx.dataset, eo);
  for (int k = 0; k < 6; ++k)
    CHECK(mean.pooled(3, k) ==
          doctest::Approx(sum.pooled(3, k) / double(sum.sequences[3].size())).epsilon(1e-12));

  eo.method = AtomMethod::Nabla;
  const EmbeddedCorpus nab = embed_corpus(ctx.dataset, eo);
  for (int i : {2, 19}) {
    const VecD& first = nab.sequences[i].front();
    const VecD& last = nab.sequences[i].back();
    for (int k = 0; k < 6; ++k)
      CHECK(nab.pooled(i, k) == doctest::Approx(last[k] - first[k]).epsilon(1e-12));
  }

  eo.method = AtomMethod::Pvdm;
  eo.pvdm_epochs = 3;
  const EmbeddedCorpus pv = embed_corpus(ctx.dataset, eo);
  REQUIRE(pv.pvdm.has_value());
  const VecD& id0 = pv.pvdm->atom_ids.at(ctx.dataset.atoms[0].id);
  for (int k = 0; k < 6; ++k) CHECK(pv.pooled(0, k) == id0[k]);

  const EmbeddedCorpus pv2 = embed_corpus(ctx.dataset, eo);
  CHECK(pv2.pooled == pv.pooled);
}

TEST_CASE("label projection and sample sets line up") {
  Fixture fx;
  const PipelineContext ctx = load_pipeline(fx.config);
  const LabelTargets lab = project_labels(ctx.dataset, 3);
  CHECK(lab.y.rows == int(ctx.dataset.atoms.size()));
  CHECK(lab.y.cols == 3);
  CHECK(lab.candidates.size() == 4);

  const Mat raw = label_matrix(ctx.dataset);
  const LabelPoint p5 = project(lab.projection, raw.row(5));
  for (int k = 0; k < 3; ++k) CHECK(lab.y(5, k) == p5.y[k]);
  CHECK_THROWS_AS(project_labels(ctx.dataset, 4), DataError);  // rank is C-1 = 3

  EmbedOptions eo;
  eo.method = AtomMethod::BowMean;
  eo.input_dims = 8;
  eo.window = 3;
  eo.seed = 13;
  const EmbeddedCorpus emb = embed_corpus(ctx.dataset, eo);
  const auto nulls = make_null_sets(ctx.dataset, 3, 77);

  const SplitSets joint = make_sample_sets(ctx.dataset, emb, lab, nulls, NetKind::Ffnn);
  const auto train_idx = ctx.dataset.train_indices();
  const auto test_idx = ctx.dataset.test_indices();
  CHECK(joint.train.size() == int(train_idx.size()));
  CHECK(joint.test.size() == int(test_idx.size()));
  CHECK(joint.train.x.cols == 8);
  CHECK(joint.train.y.cols == 3);
  CHECK_FALSE(joint.train.sequential);
  CHECK(joint.null_labels.size() == 3);
  for (const Mat& m : joint.null_labels) {
    CHECK(m.rows == int(test_idx.size()));
    CHECK(m.cols == 3);
  }
  for (int k = 0; k < 8; ++k) CHECK(joint.train.x(0, k) == emb.pooled(train_idx[0], k));
  for (int k = 0; k < 3; ++k) CHECK(joint.test.y(1, k) == lab.y(test_idx[1], k));

  const SplitSets dim1 = make_sample_sets(ctx.dataset, emb, lab, nulls, NetKind::Ffnn, 1);
  CHECK(dim1.train.y.cols == 1);
  for (int i = 0; i < dim1.train.y.rows; ++i)
    CHECK(dim1.train.y(i, 0) == joint.train.y(i, 1));
  for (int i = 0; i < dim1.null_labels[0].rows; ++i)
    CHECK(dim1.null_labels[0](i, 0) == joint.null_labels[0](i, 1));
  CHECK_THROWS_AS(make_sample_sets(ctx.dataset, emb, lab, nulls, NetKind::Ffnn, 3),
                  ConfigError);

  const SplitSets rec = make_sample_sets(ctx.dataset, emb, lab, {}, NetKind::Rnn);
  CHECK(rec.train.sequential);
  CHECK(rec.train.seqs.size() == train_idx.size());
  CHECK(rec.train.seqs[0] == emb.sequences[train_idx[0]]);
  CHECK(rec.null_labels.empty());
}

TEST_CASE("trial fitness is finite, deterministic, and seed-sensitive") {
  Fixture fx;
  const PipelineContext ctx = load_pipeline(fx.config);
  EmbedOptions eo;
  eo.method = AtomMethod::BowMean;
  eo.input_dims = 8;
  eo.window = 3;
  eo.seed = 13;
  const EmbeddedCorpus emb = embed_corpus(ctx.dataset, eo);
  const LabelTargets lab = project_labels(ctx.dataset, 3);
  const SplitSets sets = make_sample_sets(ctx.dataset, emb, lab, {}, NetKind::Ffnn);

  HyperParams hp;
  hp.features = {16};
  hp.activations = {Activation::Tanh};
  const double a = trial_fitness(sets, hp, NetKind::Ffnn, Optimizer::Adam, 3, 5);
  const double b = trial_fitness(sets, hp, NetKind::Ffnn, Optimizer::Adam, 3, 5);
  CHECK(std::isfinite(a));
  CHECK(a == b);
  CHECK(a != trial_fitness(sets, hp, NetKind::Ffnn, Optimizer::Adam, 3, 6));
}

TEST_CASE("tuner plumbing honors the meta settings and the budget cap") {
  MetaConfig m;
  m.kind = NetKind::Rnn;
  m.tuner_budget = 11;
  m.tuner_r = 27;
  m.tuner_eta = 4;
  CHECK(hyper_space_for(m).kind == NetKind::Rnn);

  const TunerOptions plain = tuner_options_for(m, 0, 10);
  CHECK(plain.budget == 11);
  CHECK(plain.r_max == 27);
  CHECK(plain.eta == 4);
  CHECK(plain.trial_epochs == 10);

  const TunerOptions capped = tuner_options_for(m, 5, 2);
  CHECK(capped.budget == 5);
  CHECK(capped.r_max == 5);
  CHECK(capped.eta == 4);
  CHECK(capped.trial_epochs == 2);
}

TEST_CASE("meta fitness is deterministic and maps failures to +infinity") {
  GenCorpusParams gp = tiny_corpus_params();
  gp.atoms_per_category = 12;
  Fixture fx(gp);
  fx.config.pvdm_epochs = 3;
  fx.config.trial_epochs = 30;
  const PipelineContext ctx = load_pipeline(fx.config);
  const MetaSpace space = default_meta_space();

  MetaConfig sane;
  sane.d_out = 3;
  sane.input_dims = 8;
  sane.method = AtomMethod::BowMean;
  sane.tuner_budget = 2;
  const MetaPoint p = encode(space, sane);
  const double f1 = meta_fitness(p, ctx, 3, 99);
  const double f2 = meta_fitness(p, ctx, 3, 99);
  CHECK(std::isfinite(f1));
  CHECK(f1 == f2);

  MetaConfig deep = sane;
  deep.d_out = 6;  // past the rank of 4 one-hot categories
  CHECK(meta_fitness(encode(space, deep), ctx, 3, 99) ==
        std::numeric_limits<double>::infinity());

  MetaConfig skinny = sane;
  skinny.input_dims = 1;  // degenerate one-dimensional embedding
  const double thin = meta_fitness(encode(space, skinny), ctx, 3, 99);
  CHECK(std::isfinite(thin));
  CHECK(f1 < thin);
}

TEST_CASE("training runs end to end, saves artifacts, and classifies") {
  Fixture fx;
  const PipelineContext ctx = load_pipeline(fx.config);
  const TrainArtifacts art = run_train(ctx);
  CHECK(art.nets.size() == 1);
  CHECK(art.log.rows.size() == 4);
  for (const EpochRow& r : art.log.rows) {
    CHECK(std::isfinite(r.train_loss));
    CHECK(std::isfinite(r.test_loss));
    CHECK(std::isfinite(r.null_loss_mean));
  }

  const std::string csv = losses_csv(art.log);
  CHECK(csv.rfind("epoch,train,test,null_mean\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("\n1,") != std::string::npos);

  save_artifacts(art, fx.config.out_dir);
  CHECK(fs::exists(fx.config.out_dir / "losses.csv"));
  CHECK(fs::exists(fx.config.out_dir / "model.txt"));
  CHECK(fs::exists(fx.config.out_dir / "projection.txt"));
  CHECK(fs::exists(fx.config.out_dir / "embeddings.txt"));
  CHECK_FALSE(fs::exists(fx.config.out_dir / "pvdm.txt"));  // bow_mean run
  CHECK(slurp(fx.config.out_dir / "losses.csv") == csv);

  const auto again = run_train(ctx);
  CHECK(losses_csv(again.log) == csv);
  CHECK(again.nets.front().model == art.nets.front().model);

  const auto preds = run_classify(ctx, fx.config.out_dir, ctx.dataset.atoms);
  CHECK(preds.size() == ctx.dataset.atoms.size());
  for (const CategoryPath& p : preds) CHECK(p.segments.size() == 1);

  Atom oov;
  oov.id = 9000;
  oov.tokens = {"entirely", "unknown", "words"};
  CHECK_THROWS_AS(run_classify(ctx, fx.config.out_dir, {oov}), DataError);
}

TEST_CASE("per-dimension training yields one net per output and a mean log") {
  Fixture fx;
  fx.config.per_dimension = true;
  fx.config.final_epochs = 3;
  const PipelineContext ctx = load_pipeline(fx.config);
  const TrainArtifacts art = run_train(ctx);
  REQUIRE(art.nets.size() == 3);
  REQUIRE(art.log.rows.size() == 3);
  for (const TrainResult& r : art.nets) CHECK(r.model.arch.output_dim == 1);
  for (std::size_t i = 0; i < art.log.rows.size(); ++i) {
    double t = 0;
    for (const TrainResult& r : art.nets) t += r.log.rows[i].test_loss;
    CHECK(art.log.rows[i].test_loss == doctest::Approx(t / 3.0).epsilon(1e-12));
  }

  save_artifacts(art, fx.config.out_dir);
  CHECK(fs::exists(fx.config.out_dir / "model_dim0.txt"));
  CHECK(fs::exists(fx.config.out_dir / "model_dim2.txt"));
  CHECK_FALSE(fs::exists(fx.config.out_dir / "model.txt"));

  const auto preds = run_classify(ctx, fx.config.out_dir, ctx.dataset.atoms);
  CHECK(preds.size() == ctx.dataset.atoms.size());
}

TEST_CASE("tune command surfaces the tuner ledger") {
  Fixture fx;
  fx.config.tuner_budget = 3;
  const PipelineContext ctx = load_pipeline(fx.config);
  const TuneArtifacts art = run_tune(ctx);
  REQUIRE(art.results.size() == 1);
  CHECK(art.results[0].trials.size() == 3);
  CHECK(std::isfinite(art.results[0].best.fitness));
  for (const Trial& t : art.results[0].trials) CHECK(t.epochs == 2);

  const TuneArtifacts again = run_tune(ctx);
  CHECK(again.results[0].ledger_csv() == art.results[0].ledger_csv());
}

TEST_CASE("metaopt completes on a tiny corpus and never worsens the base point") {
  GenCorpusParams gp = tiny_corpus_params();
  gp.atoms_per_category = 6;
  Fixture fx(gp);
  fx.config.meta_budget = 2;
  fx.config.pvdm_epochs = 3;
  fx.config.max_stall = 2;
  fx.config.mu0 = 1;
  const PipelineContext ctx = load_pipeline(fx.config);
  const MetaSpace searchable = metaopt_space(ctx.dataset);
  CHECK(searchable.vars[0].hi == 3);  // label rank of 4 one-hot categories

  const MetaoptArtifacts art = run_metaopt(ctx);
  REQUIRE(!art.result.trace.entries.empty());
  const TraceEntry& base = art.result.trace.entries.front();
  CHECK(base.kind == "base");
  CHECK(art.result.best_fitness <= base.fitness);
  CHECK(decode(default_meta_space(), art.result.best) == art.best);
  CHECK(art.result.trace.to_csv().rfind("iter,kind,point_json,fitness,mesh\n", 0) == 0);
}
