#include "metastim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"

#include "metastim/error.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace {

using nlohmann::json;

// Seed streams, one per independent random decision.
namespace stream {
constexpr std::uint64_t kPartition = 101;
constexpr std::uint64_t kNullSets = 102;
constexpr std::uint64_t kEmbed = 103;
constexpr std::uint64_t kInit = 104;
constexpr std::uint64_t kTrainLoop = 105;
constexpr std::uint64_t kTuner = 106;
constexpr std::uint64_t kMetaFitness = 107;
constexpr std::uint64_t kSearch = 108;
constexpr std::uint64_t kInfer = 200000;
} // namespace stream

ClassifyMode classify_mode_from(const std::string& s) {
  if (s == "projected") return ClassifyMode::NnInProjected;
  if (s == "node") return ClassifyMode::NnInNodeSpace;
  throw ConfigError("unknown classify mode '" + s + "' (expected projected or node)");
}

int input_dim_of(const SampleSet& set) {
  return set.sequential ? int(set.seqs.front().front().size()) : set.x.cols;
}

TrainResult train_one(const PipelineConfig& c, const SplitSets& sets, int k) {
  const ArchSpec arch =
      hp_arch(c.hp, c.kind, input_dim_of(sets.train), sets.train.y.cols);
  AnnModel model = init_network(arch, derive_seed(c.seed, stream::kInit + 16 * k));
  TrainParams tp = hp_train_params(c.hp, c.optimizer, c.final_epochs,
                                   derive_seed(c.seed, stream::kTrainLoop + 16 * k));
  tp.batch_size = c.batch_size;
  tp.dropout = c.dropout;
  return train(std::move(model), sets.train, sets.test, sets.null_labels, tp);
}

EpochLog mean_log(const std::vector<TrainResult>& nets) {
  EpochLog out;
  if (nets.empty()) return out;
  const std::size_t rows = nets.front().log.rows.size();
  for (std::size_t i = 0; i < rows; ++i) {
    EpochRow mean;
    for (const TrainResult& r : nets) {
      mean.train_loss += r.log.rows[i].train_loss;
      mean.test_loss += r.log.rows[i].test_loss;
      mean.null_loss_mean += r.log.rows[i].null_loss_mean;
    }
    mean.train_loss /= double(nets.size());
    mean.test_loss /= double(nets.size());
    mean.null_loss_mean /= double(nets.size());
    out.rows.push_back(mean);
  }
  return out;
}

} // namespace

EmbedOptions embed_options(const PipelineConfig& c) {
  EmbedOptions eo;
  eo.method = c.method;
  eo.input_dims = c.input_dims;
  eo.keyword_weight = c.keyword_weight;
  eo.window = c.window;
  eo.pvdm_epochs = c.pvdm_epochs;
  eo.seed = derive_seed(c.seed, stream::kEmbed);
  return eo;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad json in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a json object: " + path.string());

  PipelineConfig c;
  std::set<std::string> known;
  auto take = [&](const char* key, auto&& fn) {
    known.insert(key);
    if (!j.contains(key)) return;
    try {
      fn(j.at(key));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  };

  take("corpus", [&](const json& v) { c.corpus = v.get<std::string>(); });
  take("format", [&](const json& v) { c.format = v.get<std::string>(); });
  take("seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
  take("test_fraction", [&](const json& v) { c.test_fraction = v.get<double>(); });
  take("null_copies", [&](const json& v) { c.null_copies = v.get<int>(); });
  take("method", [&](const json& v) { c.method = atom_method_from(v.get<std::string>()); });
  take("input_dims", [&](const json& v) { c.input_dims = v.get<int>(); });
  take("keyword_weight", [&](const json& v) { c.keyword_weight = v.get<double>(); });
  take("window", [&](const json& v) { c.window = v.get<int>(); });
  take("pvdm_epochs", [&](const json& v) { c.pvdm_epochs = v.get<int>(); });
  take("d_out", [&](const json& v) { c.d_out = v.get<int>(); });
  take("arch", [&](const json& v) { c.kind = net_kind_from(v.get<std::string>()); });
  take("optimizer", [&](const json& v) { c.optimizer = optimizer_from(v.get<std::string>()); });
  take("classify_mode",
       [&](const json& v) { c.classify_mode = classify_mode_from(v.get<std::string>()); });
  take("tuner", [&](const json& v) { c.tuner = tuner_kind_from(v.get<std::string>()); });
  take("tuner_budget", [&](const json& v) { c.tuner_budget = v.get<int>(); });
  take("tuner_r", [&](const json& v) { c.tuner_r = v.get<int>(); });
  take("tuner_eta", [&](const json& v) { c.tuner_eta = v.get<int>(); });
  take("trial_epochs", [&](const json& v) { c.trial_epochs = v.get<int>(); });
  take("lr", [&](const json& v) { c.hp.lr = v.get<double>(); });
  take("beta1", [&](const json& v) { c.hp.beta1 = v.get<double>(); });
  take("beta2", [&](const json& v) { c.hp.beta2 = v.get<double>(); });
  take("rho", [&](const json& v) { c.hp.rho = v.get<double>(); });
  take("gamma", [&](const json& v) { c.hp.gamma = v.get<double>(); });
  take("features", [&](const json& v) { c.hp.features = v.get<std::vector<int>>(); });
  take("activations", [&](const json& v) {
    c.hp.activations.clear();
    for (const auto& name : v.get<std::vector<std::string>>())
      c.hp.activations.push_back(activation_from(name));
  });
  take("final_epochs", [&](const json& v) { c.final_epochs = v.get<int>(); });
  take("batch_size", [&](const json& v) { c.batch_size = v.get<int>(); });
  take("dropout", [&](const json& v) { c.dropout = v.get<double>(); });
  take("per_dimension", [&](const json& v) { c.per_dimension = v.get<bool>(); });
  take("alpha", [&](const json& v) { c.alpha = v.get<double>(); });
  take("mu0", [&](const json& v) { c.mu0 = v.get<int>(); });
  take("delta", [&](const json& v) { c.delta = v.get<int>(); });
  take("max_stall", [&](const json& v) { c.max_stall = v.get<int>(); });
  take("min_improvement", [&](const json& v) { c.min_improvement = v.get<double>(); });
  take("meta_budget", [&](const json& v) { c.meta_budget = v.get<int>(); });
  take("out_dir", [&](const json& v) { c.out_dir = v.get<std::string>(); });

  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");

  const auto base = std::filesystem::absolute(path).parent_path();
  if (!c.corpus.empty() && c.corpus.is_relative())
    c.corpus = (base / c.corpus).lexically_normal();

  validate(c);
  return c;
}

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("config field " + what); };
  if (c.corpus.empty()) fail("'corpus' is required");
  if (c.format != "jsonl" && c.format != "tree")
    fail("'format' must be jsonl or tree, got '" + c.format + "'");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    fail("'test_fraction' must lie in (0, 1)");
  if (c.null_copies < 1) fail("'null_copies' must be at least 1");
  if (c.input_dims < 1) fail("'input_dims' must be positive");
  if (c.keyword_weight <= 0.0) fail("'keyword_weight' must be positive");
  if (c.window < 1) fail("'window' must be positive");
  if (c.pvdm_epochs < 0) fail("'pvdm_epochs' must be non-negative");
  if (c.d_out < 1) fail("'d_out' must be positive");
  if (c.tuner_budget < 1) fail("'tuner_budget' must be positive");
  if (c.tuner_r < 1) fail("'tuner_r' must be positive");
  if (c.tuner_eta < 2) fail("'tuner_eta' must be at least 2");
  if (c.trial_epochs < 1) fail("'trial_epochs' must be positive");
  if (c.final_epochs < 0) fail("'final_epochs' must be non-negative");
  if (c.batch_size < 1) fail("'batch_size' must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail("'dropout' must lie in [0, 1)");
  if (c.hp.features.size() != c.hp.activations.size())
    fail("'activations' must list one entry per width in 'features'");
  for (int f : c.hp.features)
    if (f < 1) fail("'features' entries must be positive");
  if (c.hp.lr <= 0.0) fail("'lr' must be positive");
  if (c.alpha <= 0.0) fail("'alpha' must be positive");
  if (c.mu0 < 1) fail("'mu0' must be at least 1");
  if (c.delta < 1) fail("'delta' must be at least 1");
  if (c.max_stall < 1) fail("'max_stall' must be at least 1");
  if (c.min_improvement < 0.0) fail("'min_improvement' must be non-negative");
  if (c.meta_budget < 0) fail("'meta_budget' must be non-negative");
}

PipelineContext load_pipeline(const PipelineConfig& config) {
  Dataset ds = config.format == "jsonl" ? ingest_jsonl(config.corpus)
                                        : ingest_tree(config.corpus);
  ds = partition(std::move(ds), config.test_fraction,
                 derive_seed(config.seed, stream::kPartition));
  return {config, std::move(ds)};
}

EmbeddedCorpus embed_corpus(const Dataset& ds, const EmbedOptions& opt) {
  if (opt.input_dims < 1) throw ConfigError("word-vector dims must be positive");
  if (ds.atoms.empty()) throw DataError("cannot embed an empty dataset");

  EmbeddedCorpus out;
  out.method = opt.method;
  const Cooccurrence co = build_cooccurrence(ds.atoms, opt.window);
  out.words = train_embeddings(co, opt.input_dims, derive_seed(opt.seed, 1));
  out.keywords = extract_keywords(ds.tree, opt.keyword_weight);

  out.sequences.reserve(ds.atoms.size());
  for (const Atom& a : ds.atoms)
    out.sequences.push_back(weight_tokens(a, out.words, out.keywords));

  if (opt.method == AtomMethod::Pvdm) {
    PvdmParams pp;
    pp.vec_size = opt.input_dims;
    pp.window = opt.window;
    pp.epochs = opt.pvdm_epochs;
    pp.seed = derive_seed(opt.seed, 2);
    out.pvdm = train_pvdm(ds.atoms, out.words, pp, out.keywords);
  }

  out.pooled = Mat(int(ds.atoms.size()), opt.input_dims);
  for (std::size_t i = 0; i < ds.atoms.size(); ++i) {
    const Atom& a = ds.atoms[i];
    VecD v;
    switch (opt.method) {
      case AtomMethod::BowSum:
        v = embed_bow(a, out.words, out.keywords, BowMode::Sum).values;
        break;
      case AtomMethod::BowMean:
        v = embed_bow(a, out.words, out.keywords, BowMode::Mean).values;
        break;
      case AtomMethod::Nabla:
        v = embed_nabla(a, out.words, out.keywords, 1).values;
        break;
      case AtomMethod::Pvdm:
        v = out.pvdm->atom_ids.at(a.id);
        break;
    }
    std::copy(v.begin(), v.end(), out.pooled.row(int(i)).begin());
  }
  return out;
}

LabelTargets project_labels(const Dataset& ds, int d_out) {
  LabelTargets t;
  const Mat labels = label_matrix(ds);
  t.projection = fit_pca(labels, d_out);
  t.y = Mat(labels.rows, d_out);
  for (int i = 0; i < labels.rows; ++i) {
    const LabelPoint p = project(t.projection, labels.row(i));
    std::copy(p.y.begin(), p.y.end(), t.y.row(i).begin());
  }
  t.candidates = observed_label_nodes(ds);
  return t;
}

SplitSets make_sample_sets(const Dataset& ds, const EmbeddedCorpus& emb,
                           const LabelTargets& labels, const std::vector<NullSet>& nulls,
                           NetKind kind, int dim) {
  if (dim >= labels.y.cols) throw ConfigError("output dimension index out of range");
  const std::vector<int> train_idx = ds.train_indices();
  const std::vector<int> test_idx = ds.test_indices();
  if (train_idx.empty() || test_idx.empty())
    throw DataError("both partitions must be non-empty");

  const int width = dim < 0 ? labels.y.cols : 1;
  auto fill = [&](SampleSet& set, const std::vector<int>& idx) {
    set.y = Mat(int(idx.size()), width);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (dim < 0) {
        const auto row = labels.y.row(idx[i]);
        std::copy(row.begin(), row.end(), set.y.row(int(i)).begin());
      } else {
        set.y(int(i), 0) = labels.y(idx[i], dim);
      }
    }
    if (kind == NetKind::Rnn) {
      set.sequential = true;
      for (int a : idx) set.seqs.push_back(emb.sequences[a]);
    } else {
      set.x = Mat(int(idx.size()), emb.pooled.cols);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = emb.pooled.row(idx[i]);
        std::copy(row.begin(), row.end(), set.x.row(int(i)).begin());
      }
    }
  };

  SplitSets out;
  fill(out.train, train_idx);
  fill(out.test, test_idx);
  for (const NullSet& ns : nulls) {
    Mat y(int(ns.relabels.size()), width);
    for (std::size_t i = 0; i < ns.relabels.size(); ++i) {
      const OneHot hot = one_hot(ns.relabels[i], ds.tree);
      const LabelPoint p = project(labels.projection, hot.values);
      if (dim < 0)
        std::copy(p.y.begin(), p.y.end(), y.row(int(i)).begin());
      else
        y(int(i), 0) = p.y[dim];
    }
    out.null_labels.push_back(std::move(y));
  }
  return out;
}

double trial_fitness(const SplitSets& sets, const HyperParams& hp, NetKind kind, Optimizer opt,
                     int epochs, std::uint64_t seed) {
  const ArchSpec arch = hp_arch(hp, kind, input_dim_of(sets.train), sets.train.y.cols);
  AnnModel model = init_network(arch, derive_seed(seed, 1));
  const TrainParams tp = hp_train_params(hp, opt, epochs, derive_seed(seed, 2));
  const TrainResult r = train(std::move(model), sets.train, sets.test, {}, tp);
  return evaluate(r.model, sets.test);
}

HyperSpace hyper_space_for(const MetaConfig& m) {
  HyperSpace s;
  s.kind = m.kind;
  return s;
}

TunerOptions tuner_options_for(const MetaConfig& m, int budget_cap, int trial_epochs) {
  TunerOptions o;
  o.budget = m.tuner_budget;
  o.r_max = m.tuner_r;
  o.eta = m.tuner_eta;
  o.trial_epochs = trial_epochs;
  if (budget_cap > 0) {
    o.budget = budget_cap;
    o.r_max = budget_cap;
  }
  return o;
}

MetaSpace metaopt_space(const Dataset& ds) {
  MetaSpace space = default_meta_space();
  const int rank = label_rank(label_matrix(ds));
  if (rank < space.vars[0].lo)
    throw DataError("label rank " + std::to_string(rank) +
                    " leaves no feasible output dimension");
  space.vars[0].hi = std::min(space.vars[0].hi, rank);
  return space;
}

double meta_fitness(const MetaPoint& point, const PipelineContext& ctx, int budget_cap,
                    std::uint64_t seed) {
  const MetaSpace space = default_meta_space();
  const MetaConfig m = decode(space, point);
  try {
    EmbedOptions eo = embed_options(ctx.config);
    eo.method = m.method;
    eo.input_dims = m.input_dims;
    eo.keyword_weight = m.keyword_weight;
    eo.seed = derive_seed(seed, 3);
    const EmbeddedCorpus emb = embed_corpus(ctx.dataset, eo);
    const LabelTargets labels = project_labels(ctx.dataset, m.d_out);
    const HyperSpace hs = hyper_space_for(m);
    const TunerOptions opt = tuner_options_for(m, budget_cap, ctx.config.trial_epochs);

    const int runs = ctx.config.per_dimension ? m.d_out : 1;
    double total = 0.0;
    for (int k = 0; k < runs; ++k) {
      const int dim = ctx.config.per_dimension ? k : -1;
      const SplitSets sets = make_sample_sets(ctx.dataset, emb, labels, {}, m.kind, dim);
      const FitnessFn fn = [&](const HyperParams& hp, int epochs, std::uint64_t s) {
        return trial_fitness(sets, hp, m.kind, m.optimizer, epochs, s);
      };
      total += run_tuner(m.tuner, hs, fn, derive_seed(seed, 4 + 16 * k), opt).best.fitness;
    }
    return total / double(runs);
  } catch (const std::exception& e) {
    std::clog << "meta point rejected: " << e.what() << "\n";
    return std::numeric_limits<double>::infinity();
  }
}

TrainArtifacts run_train(const PipelineContext& ctx) {
  const PipelineConfig& c = ctx.config;
  TrainArtifacts art;
  art.per_dimension = c.per_dimension;
  art.embedding = embed_corpus(ctx.dataset, embed_options(c));
  art.labels = project_labels(ctx.dataset, c.d_out);
  const std::vector<NullSet> nulls =
      make_null_sets(ctx.dataset, c.null_copies, derive_seed(c.seed, stream::kNullSets));

  const int runs = c.per_dimension ? c.d_out : 1;
  for (int k = 0; k < runs; ++k) {
    const int dim = c.per_dimension ? k : -1;
    const SplitSets sets =
        make_sample_sets(ctx.dataset, art.embedding, art.labels, nulls, c.kind, dim);
    art.nets.push_back(train_one(c, sets, k));
  }
  art.log = c.per_dimension ? mean_log(art.nets) : art.nets.front().log;
  return art;
}

std::string losses_csv(const EpochLog& log) {
  std::string out = "epoch,train,test,null_mean\n";
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const EpochRow& r = log.rows[i];
    out += std::to_string(i + 1) + ',' + format_full(r.train_loss) + ',' +
           format_full(r.test_loss) + ',' + format_full(r.null_loss_mean) + '\n';
  }
  return out;
}

void save_artifacts(const TrainArtifacts& art, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "losses.csv");
    if (!out) throw DataError("cannot write " + (dir / "losses.csv").string());
    out << losses_csv(art.log);
  }
  save_projection(art.labels.projection, dir / "projection.txt");
  save_embeddings(art.embedding.words, dir / "embeddings.txt");
  if (art.embedding.pvdm) save_pvdm(*art.embedding.pvdm, dir / "pvdm.txt");
  if (art.per_dimension) {
    for (std::size_t k = 0; k < art.nets.size(); ++k)
      save_model(art.nets[k].model, dir / ("model_dim" + std::to_string(k) + ".txt"));
  } else {
    save_model(art.nets.front().model, dir / "model.txt");
  }
}

TuneArtifacts run_tune(const PipelineContext& ctx) {
  const PipelineConfig& c = ctx.config;
  const EmbeddedCorpus emb = embed_corpus(ctx.dataset, embed_options(c));
  const LabelTargets labels = project_labels(ctx.dataset, c.d_out);

  MetaConfig m;
  m.kind = c.kind;
  m.tuner_budget = c.tuner_budget;
  m.tuner_r = c.tuner_r;
  m.tuner_eta = c.tuner_eta;
  const HyperSpace hs = hyper_space_for(m);
  const TunerOptions opt = tuner_options_for(m, 0, c.trial_epochs);

  TuneArtifacts art;
  art.per_dimension = c.per_dimension;
  const int runs = c.per_dimension ? c.d_out : 1;
  for (int k = 0; k < runs; ++k) {
    const int dim = c.per_dimension ? k : -1;
    const SplitSets sets = make_sample_sets(ctx.dataset, emb, labels, {}, c.kind, dim);
    const FitnessFn fn = [&](const HyperParams& hp, int epochs, std::uint64_t s) {
      return trial_fitness(sets, hp, c.kind, c.optimizer, epochs, s);
    };
    art.results.push_back(
        run_tuner(c.tuner, hs, fn, derive_seed(c.seed, stream::kTuner + 16 * k), opt));
  }
  return art;
}

MetaoptArtifacts run_metaopt(const PipelineContext& ctx) {
  const PipelineConfig& c = ctx.config;
  const MetaSpace space = metaopt_space(ctx.dataset);
  SearchParams sp;
  sp.alpha = c.alpha;
  sp.mu0 = c.mu0;
  sp.delta = c.delta;
  sp.max_stall = c.max_stall;
  sp.min_improvement = c.min_improvement;

  const std::uint64_t fit_seed = derive_seed(c.seed, stream::kMetaFitness);
  const MetaFitnessFn fn = [&](const MetaPoint& p) {
    return meta_fitness(p, ctx, c.meta_budget, fit_seed);
  };
  MetaoptArtifacts art;
  art.result = pattern_search(space, fn, sp, derive_seed(c.seed, stream::kSearch));
  art.best = decode(space, art.result.best);
  return art;
}

std::vector<CategoryPath> run_classify(const PipelineContext& ctx,
                                       const std::filesystem::path& artifact_dir,
                                       const std::vector<Atom>& atoms) {
  const PipelineConfig& c = ctx.config;
  const EmbeddingTable words = load_embeddings(artifact_dir / "embeddings.txt");
  const ProjectionModel proj = load_projection(artifact_dir / "projection.txt");
  const KeywordSet keywords = extract_keywords(ctx.dataset.tree, c.keyword_weight);

  std::optional<PvdmModel> pvdm;
  if (c.kind == NetKind::Ffnn && c.method == AtomMethod::Pvdm)
    pvdm = load_pvdm(artifact_dir / "pvdm.txt");

  std::vector<AnnModel> nets;
  if (c.per_dimension) {
    for (int k = 0; k < c.d_out; ++k)
      nets.push_back(load_model(artifact_dir / ("model_dim" + std::to_string(k) + ".txt")));
  } else {
    nets.push_back(load_model(artifact_dir / "model.txt"));
  }

  const std::vector<int> candidates = observed_label_nodes(ctx.dataset);
  std::vector<CategoryPath> out;
  out.reserve(atoms.size());
  for (const Atom& a : atoms) {
    VecD yhat;
    if (c.kind == NetKind::Rnn) {
      const std::vector<VecD> seq = weight_tokens(a, words, keywords);
      for (const AnnModel& net : nets) {
        const VecD y = forward_seq(net, seq);
        yhat.insert(yhat.end(), y.begin(), y.end());
      }
    } else {
      VecD x;
      switch (c.method) {
        case AtomMethod::BowSum:
          x = embed_bow(a, words, keywords, BowMode::Sum).values;
          break;
        case AtomMethod::BowMean:
          x = embed_bow(a, words, keywords, BowMode::Mean).values;
          break;
        case AtomMethod::Nabla:
          x = embed_nabla(a, words, keywords, 1).values;
          break;
        case AtomMethod::Pvdm:
          x = infer_pvdm(*pvdm, a, 40, pvdm->params.lr,
                         derive_seed(c.seed, stream::kInfer + std::uint64_t(a.id)), keywords)
                  .values;
          break;
      }
      for (const AnnModel& net : nets) {
        const VecD y = forward(net, x);
        yhat.insert(yhat.end(), y.begin(), y.end());
      }
    }
    out.push_back(classify(LabelPoint{std::move(yhat)}, proj, ctx.dataset.tree, candidates,
                           c.classify_mode));
  }
  return out;
}

void gen_corpus(const GenCorpusParams& p, const std::filesystem::path& out_path) {
  if (p.categories < 1) throw ConfigError("category count must be positive");
  if (p.atoms_per_category < 1) throw ConfigError("atoms per category must be positive");
  if (!(p.filler_ratio >= 0.0 && p.filler_ratio <= 1.0))
    throw ConfigError("filler ratio must lie in [0, 1]");
  if (p.min_tokens < 1 || p.max_tokens < p.min_tokens)
    throw ConfigError("token length range is invalid");
  const int filler = p.vocab / 2;
  const int per_cat = (p.vocab - filler) / p.categories;
  if (filler < 1 || per_cat < 1)
    throw ConfigError("vocab size too small for the category count");

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path.string());

  Rng rng(p.seed);
  for (int c = 0; c < p.categories; ++c) {
    const std::string cat = "topic" + std::to_string(c);
    for (int a = 0; a < p.atoms_per_category; ++a) {
      const int len = rng.uniform_int(p.min_tokens, p.max_tokens);
      std::string text;
      for (int t = 0; t < len; ++t) {
        if (t) text += ' ';
        if (rng.uniform() < p.filler_ratio)
          text += "common" + std::to_string(int(rng.below(std::uint64_t(filler))));
        else
          text += cat + "term" + std::to_string(int(rng.below(std::uint64_t(per_cat))));
      }
      const json line = {{"text", text}, {"category", json::array({cat})}};
      out << line.dump() << "\n";
    }
  }
}

} // namespace metastim
