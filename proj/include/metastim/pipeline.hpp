#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metastim/atomvec.hpp"
#include "metastim/corpus.hpp"
#include "metastim/labelspace.hpp"
#include "metastim/neural.hpp"
#include "metastim/patsearch.hpp"
#include "metastim/tuner.hpp"
#include "metastim/wordvec.hpp"

namespace metastim {

/// The flat JSON config driving every command. Relative paths are resolved
/// against the config file's directory at load time.
struct PipelineConfig {
  std::filesystem::path corpus;
  std::string format = "jsonl";  // jsonl | tree
  std::uint64_t seed = 1;
  double test_fraction = 0.2;
  int null_copies = 5;

  AtomMethod method = AtomMethod::Pvdm;
  int input_dims = 20;
  double keyword_weight = 5.0;
  int window = 4;
  int pvdm_epochs = 20;

  int d_out = 4;
  NetKind kind = NetKind::Ffnn;
  Optimizer optimizer = Optimizer::Adam;
  ClassifyMode classify_mode = ClassifyMode::NnInProjected;

  TunerKind tuner = TunerKind::Random;
  int tuner_budget = 20;
  int tuner_r = 9;
  int tuner_eta = 3;
  int trial_epochs = 10;

  // training knobs used when a command trains directly (no tuner in front)
  HyperParams hp = {1e-3, 0.9, 0.999, 0.95, 0.9, {32}, {Activation::Tanh}};
  int final_epochs = 200;
  int batch_size = 16;
  double dropout = 0.0;
  bool per_dimension = false;

  // pattern-search knobs
  double alpha = 2.0;
  int mu0 = 2;
  int delta = 1;
  int max_stall = 3;
  double min_improvement = 0.0;
  int meta_budget = 0;  // > 0 caps the nested tuner regardless of the point

  std::filesystem::path out_dir = "out";
};

PipelineConfig load_config(const std::filesystem::path& path);
void validate(const PipelineConfig& config);  // throws ConfigError naming the field

/// Config plus its ingested, partitioned dataset.
struct PipelineContext {
  PipelineConfig config;
  Dataset dataset;
};

PipelineContext load_pipeline(const PipelineConfig& config);

struct EmbedOptions {
  AtomMethod method = AtomMethod::Pvdm;
  int input_dims = 20;
  double keyword_weight = 5.0;
  int window = 4;
  int pvdm_epochs = 20;
  std::uint64_t seed = 1;
};

/// Word vectors, keyword stems, and per-atom features covering every atom in
/// dataset order. `pooled` feeds feedforward nets; `sequences` keeps the
/// per-token weighted vectors for recurrent nets.
struct EmbeddedCorpus {
  EmbeddingTable words;
  KeywordSet keywords;
  std::optional<PvdmModel> pvdm;
  AtomMethod method = AtomMethod::Pvdm;
  Mat pooled;
  std::vector<std::vector<VecD>> sequences;
};

EmbeddedCorpus embed_corpus(const Dataset& ds, const EmbedOptions& opt);

/// The embedding settings a config implies (seed drawn from its own stream).
EmbedOptions embed_options(const PipelineConfig& c);

/// PCA fit of the label one-hots plus the projected target of every atom.
struct LabelTargets {
  ProjectionModel projection;
  Mat y;                        // one row per atom, dataset order
  std::vector<int> candidates;  // observed label node ids
};

LabelTargets project_labels(const Dataset& ds, int d_out);

/// Network-ready train/test partitions. `dim` slices a single output column
/// for per-dimension training; -1 keeps the full label vector.
struct SplitSets {
  SampleSet train;
  SampleSet test;
  std::vector<Mat> null_labels;  // per null copy, test rows only
};

SplitSets make_sample_sets(const Dataset& ds, const EmbeddedCorpus& emb,
                           const LabelTargets& labels, const std::vector<NullSet>& nulls,
                           NetKind kind, int dim = -1);

/// Test loss after `epochs` of training a freshly initialized network with
/// the sampled knobs; the body of every tuner fitness callback.
double trial_fitness(const SplitSets& sets, const HyperParams& hp, NetKind kind, Optimizer opt,
                     int epochs, std::uint64_t seed);

/// Hyper-parameter ranges for the decoded meta-settings (pins the net kind).
HyperSpace hyper_space_for(const MetaConfig& m);

/// Tuner settings for the decoded meta-settings. A positive `budget_cap`
/// overrides the point's own trial budget (and hyperband max resource).
TunerOptions tuner_options_for(const MetaConfig& m, int budget_cap, int trial_epochs);

/// The canonical meta lattice with the output-dims axis capped at the
/// dataset's achievable label rank, so the search starts feasible.
MetaSpace metaopt_space(const Dataset& ds);

/// Fitness of one meta-point: embed per the point, project labels at its
/// output dims, run its tuner, return the best trial loss. Construction
/// failures (say, output dims past the label rank) log the reason and return
/// +infinity instead of throwing.
double meta_fitness(const MetaPoint& point, const PipelineContext& ctx, int budget_cap,
                    std::uint64_t seed);

struct TrainArtifacts {
  EmbeddedCorpus embedding;
  LabelTargets labels;
  std::vector<TrainResult> nets;  // one, or one per output dimension
  EpochLog log;                   // per-dimension runs hold the mean row
  bool per_dimension = false;
};

TrainArtifacts run_train(const PipelineContext& ctx);

/// epoch,train,test,null_mean rows of the aggregated log.
std::string losses_csv(const EpochLog& log);

/// Writes losses.csv, model checkpoints, projection, and embeddings under
/// `dir` (created if missing).
void save_artifacts(const TrainArtifacts& art, const std::filesystem::path& dir);

struct TuneArtifacts {
  std::vector<TunerResult> results;  // one, or one per output dimension
  bool per_dimension = false;
};

TuneArtifacts run_tune(const PipelineContext& ctx);

struct MetaoptArtifacts {
  PatternResult result;
  MetaConfig best;
};

MetaoptArtifacts run_metaopt(const PipelineContext& ctx);

/// Loads the checkpoints saved by save_artifacts and classifies fresh atoms.
std::vector<CategoryPath> run_classify(const PipelineContext& ctx,
                                       const std::filesystem::path& artifact_dir,
                                       const std::vector<Atom>& atoms);

struct GenCorpusParams {
  int categories = 4;
  int atoms_per_category = 50;
  int vocab = 120;
  double filler_ratio = 0.5;
  int min_tokens = 30;
  int max_tokens = 60;
  std::uint64_t seed = 1;
};

/// Synthetic JSONL corpus: each category owns a disjoint signature
/// vocabulary ("topic2term5"), mixed with shared filler words ("common17")
/// at the filler ratio. Category names ("topic2") prefix-match their
/// signature words, so keyword weighting has something to bite on.
void gen_corpus(const GenCorpusParams& p, const std::filesystem::path& out_path);

} // namespace metastim
