#include "metastim/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "metastim/error.hpp"
#include "metastim/pipeline.hpp"

namespace metastim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  bool seed_set = false;
  bool out_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config json")->required();
    cmd->add_option("--seed", seed, "override the config seed")
        ->each([this](const std::string&) { seed_set = true; });
    cmd->add_option("--out", out, "override the config output directory")
        ->each([this](const std::string&) { out_set = true; });
  }

  PipelineConfig resolve() const {
    if (!fs::exists(config_path))
      throw ConfigError("config file not found: " + config_path);
    PipelineConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (out_set) cfg.out_dir = out;
    return cfg;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << content;
}

std::string joined_tokens(const Atom& a) {
  std::string text;
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    if (i) text += ' ';
    text += a.tokens[i];
  }
  return text;
}

void cmd_ingest(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);

  std::string lines;
  for (std::size_t i = 0; i < ctx.dataset.atoms.size(); ++i) {
    const Atom& a = ctx.dataset.atoms[i];
    const json rec = {{"id", a.id},
                      {"text", joined_tokens(a)},
                      {"category", a.category.segments},
                      {"part", ctx.dataset.part[i] == Part::Train ? "train" : "test"}};
    lines += rec.dump() + "\n";
  }
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "dataset.jsonl", lines);

  out << "atoms " << ctx.dataset.atoms.size() << "\n"
      << "categories " << observed_label_nodes(ctx.dataset).size() << "\n"
      << "train " << ctx.dataset.train_indices().size() << "\n"
      << "test " << ctx.dataset.test_indices().size() << "\n";
}

void cmd_embed(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);
  const EmbeddedCorpus emb = embed_corpus(ctx.dataset, embed_options(cfg));

  fs::create_directories(cfg.out_dir);
  save_embeddings(emb.words, cfg.out_dir / "embeddings.txt");
  if (emb.pvdm) save_pvdm(*emb.pvdm, cfg.out_dir / "pvdm.txt");

  out << "method " << to_string(cfg.method) << "\n"
      << "vocab " << emb.words.vocab.size() << "\n"
      << "dims " << emb.words.dims() << "\n"
      << "atoms " << emb.pooled.rows << "\n";
}

void cmd_train(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);
  const TrainArtifacts art = run_train(ctx);
  save_artifacts(art, cfg.out_dir);

  out << "epochs " << art.log.rows.size() << "\n";
  if (!art.log.rows.empty()) {
    const EpochRow& last = art.log.rows.back();
    out << "final_train " << format_full(last.train_loss) << "\n"
        << "final_test " << format_full(last.test_loss) << "\n"
        << "final_null_mean " << format_full(last.null_loss_mean) << "\n";
  }
}

void cmd_tune(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);
  const TuneArtifacts art = run_tune(ctx);

  fs::create_directories(cfg.out_dir);
  if (art.per_dimension) {
    for (std::size_t k = 0; k < art.results.size(); ++k) {
      const std::string tag = "_dim" + std::to_string(k);
      write_file(cfg.out_dir / ("trials" + tag + ".csv"), art.results[k].ledger_csv());
      write_file(cfg.out_dir / ("best_hp" + tag + ".json"),
                 hp_to_json(art.results[k].best.hp) + "\n");
      out << "dim " << k << " best_fitness " << format_full(art.results[k].best.fitness)
          << "\n";
    }
  } else {
    write_file(cfg.out_dir / "trials.csv", art.results.front().ledger_csv());
    write_file(cfg.out_dir / "best_hp.json", hp_to_json(art.results.front().best.hp) + "\n");
    out << "trials " << art.results.front().trials.size() << "\n"
        << "best_fitness " << format_full(art.results.front().best.fitness) << "\n";
  }
}

void cmd_metaopt(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);
  const MetaoptArtifacts art = run_metaopt(ctx);

  const json best = {{"d_out", art.best.d_out},
                     {"input_dims", art.best.input_dims},
                     {"keyword_weight", art.best.keyword_weight},
                     {"method", to_string(art.best.method)},
                     {"optimizer", to_string(art.best.optimizer)},
                     {"arch", to_string(art.best.kind)},
                     {"tuner", to_string(art.best.tuner)},
                     {"tuner_budget", art.best.tuner_budget},
                     {"tuner_r", art.best.tuner_r},
                     {"tuner_eta", art.best.tuner_eta},
                     {"fitness", art.result.best_fitness},
                     {"point", art.result.best.coords}};
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "best_meta.json", best.dump(2) + "\n");
  write_file(cfg.out_dir / "meta_trace.csv", art.result.trace.to_csv());

  out << "evaluated_sets " << art.result.trace.entries.size() << "\n"
      << "best_fitness " << format_full(art.result.best_fitness) << "\n"
      << "best " << best["method"].get<std::string>() << " d_out " << art.best.d_out
      << " input_dims " << art.best.input_dims << "\n";
}

std::vector<Atom> read_atoms(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Atom> atoms;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("bad json on line " + std::to_string(line_no) + " of " + path.string() +
                      ": " + e.what());
    }
    if (!rec.contains("text") || !rec.at("text").is_string())
      throw DataError("line " + std::to_string(line_no) + " of " + path.string() +
                      " lacks a \"text\" string");
    Atom a;
    a.id = line_no;
    a.tokens = tokenize(rec.at("text").get<std::string>());
    atoms.push_back(std::move(a));
  }
  if (atoms.empty()) throw DataError("no atoms in " + path.string());
  return atoms;
}

void cmd_classify(const CommonFlags& flags, const std::string& input, std::ostream& out) {
  const PipelineConfig cfg = flags.resolve();
  const PipelineContext ctx = load_pipeline(cfg);
  const std::vector<Atom> atoms = read_atoms(input);
  const std::vector<CategoryPath> preds = run_classify(ctx, cfg.out_dir, atoms);

  std::string lines;
  for (const CategoryPath& p : preds) lines += p.joined() + "\n";
  write_file(cfg.out_dir / "predictions.txt", lines);
  out << lines;
}

void cmd_gen_corpus(const GenCorpusParams& params, const std::string& out_path,
                    std::ostream& out) {
  gen_corpus(params, out_path);
  out << "wrote " << out_path << ": " << params.categories << " categories x "
      << params.atoms_per_category << " atoms\n";
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"metastimuli pipeline: embed labeled text atoms and regress them onto "
               "low-dimensional taxonomy coordinates"};
  app.require_subcommand(1);

  CommonFlags flags;

  GenCorpusParams gen_params;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic labeled corpus");
  gen->add_option("--out", gen_out, "output jsonl path")->required();
  gen->add_option("--categories", gen_params.categories, "category count");
  gen->add_option("--atoms", gen_params.atoms_per_category, "atoms per category");
  gen->add_option("--vocab", gen_params.vocab, "total vocabulary size");
  gen->add_option("--filler-ratio", gen_params.filler_ratio, "shared-word token fraction");
  gen->add_option("--min-tokens", gen_params.min_tokens, "shortest atom");
  gen->add_option("--max-tokens", gen_params.max_tokens, "longest atom");
  gen->add_option("--seed", gen_params.seed, "generator seed");

  auto* ingest = app.add_subcommand("ingest", "load, partition, and report the corpus");
  flags.attach(ingest);
  auto* embed = app.add_subcommand("embed", "train word vectors and atom embeddings");
  flags.attach(embed);
  auto* train = app.add_subcommand("train", "train the regression network(s)");
  flags.attach(train);
  auto* tune = app.add_subcommand("tune", "search hyper-parameters with the configured tuner");
  flags.attach(tune);
  auto* metaopt = app.add_subcommand("metaopt", "pattern-search the meta-parameters");
  flags.attach(metaopt);
  std::string classify_in;
  auto* classify = app.add_subcommand("classify", "label fresh atoms with a trained model");
  flags.attach(classify);
  classify->add_option("--in", classify_in, "jsonl of atoms to classify")->required();

  std::vector<const char*> argv;
  argv.push_back("metastim");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
    if (gen->parsed()) cmd_gen_corpus(gen_params, gen_out, out);
    if (ingest->parsed()) cmd_ingest(flags, out);
    if (embed->parsed()) cmd_embed(flags, out);
    if (train->parsed()) cmd_train(flags, out);
    if (tune->parsed()) cmd_tune(flags, out);
    if (metaopt->parsed()) cmd_metaopt(flags, out);
    if (classify->parsed()) cmd_classify(flags, classify_in, out);
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

} // namespace metastim
