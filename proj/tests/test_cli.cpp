#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "metastim/cli.hpp"
#include "metastim/neural.hpp"

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

int cli(const std::vector<std::string>& args, std::string* captured = nullptr) {
  std::ostringstream out;
  const int rc = run_cli(args, out);
  if (captured) *captured = out.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int line_count(const std::string& s) { return int(std::count(s.begin(), s.end(), '\n')); }

// small corpus plus a fast config, both inside `dir`
void write_fixture(const TempDir& dir, const std::string& extra = "") {
  REQUIRE(cli({"gen-corpus", "--out", (dir.path / "corpus.jsonl").string(), "--categories",
               "4", "--atoms", "10", "--vocab", "60", "--seed", "3"}) == 0);
  std::ofstream cfg(dir.path / "cfg.json");
  cfg << R"({"corpus": "corpus.jsonl", "method": "bow_mean", "input_dims": 8, "d_out": 3,
             "final_epochs": 6, "null_copies": 2, "tuner_budget": 3, "trial_epochs": 2,
             "out_dir": ")"
      << (dir.path / "out").string() << "\"" << extra << "}";
}

} // namespace

TEST_CASE("gen-corpus writes the requested corpus and validates its flags") {
  TempDir dir;
  std::string out;
  CHECK(cli({"gen-corpus", "--out", (dir.path / "c.jsonl").string(), "--categories", "3",
             "--atoms", "5", "--vocab", "45", "--seed", "1"},
            &out) == 0);
  CHECK(out.find("3 categories x 5 atoms") != std::string::npos);
  CHECK(line_count(slurp(dir.path / "c.jsonl")) == 15);

  CHECK(cli({"gen-corpus", "--out", (dir.path / "d.jsonl").string(), "--vocab", "5"}) == 1);
  const bool leftover = fs::exists(dir.path / "d.jsonl") && !slurp(dir.path / "d.jsonl").empty();
  CHECK_FALSE(leftover);
}

TEST_CASE("ingest reports counts, writes a deterministic artifact, and fails cleanly") {
  TempDir dir;
  write_fixture(dir);
  std::string out;
  REQUIRE(cli({"ingest", "--config", (dir.path / "cfg.json").string()}, &out) == 0);
  CHECK(out == "atoms 40\ncategories 4\ntrain 32\ntest 8\n");
  const std::string first = slurp(dir.path / "out" / "dataset.jsonl");
  CHECK(line_count(first) == 40);
  CHECK(first.find("\"part\":\"train\"") != std::string::npos);
  CHECK(first.find("\"part\":\"test\"") != std::string::npos);

  REQUIRE(cli({"ingest", "--config", (dir.path / "cfg.json").string()}) == 0);
  CHECK(slurp(dir.path / "out" / "dataset.jsonl") == first);

  std::ofstream(dir.path / "bad.json")
      << R"({"corpus": "absent.jsonl", "out_dir": ")" << (dir.path / "nope").string() << "\"}";
  CHECK(cli({"ingest", "--config", (dir.path / "bad.json").string()}) == 2);
  CHECK_FALSE(fs::exists(dir.path / "nope"));
}

TEST_CASE("train writes losses.csv plus checkpoints and reruns byte-identically") {
  TempDir dir;
  write_fixture(dir);
  std::string out;
  REQUIRE(cli({"train", "--config", (dir.path / "cfg.json").string()}, &out) == 0);
  CHECK(out.find("epochs 6\n") == 0);
  CHECK(out.find("final_test ") != std::string::npos);

  const std::string csv = slurp(dir.path / "out" / "losses.csv");
  CHECK(csv.rfind("epoch,train,test,null_mean\n", 0) == 0);
  CHECK(line_count(csv) == 7);
  const AnnModel model = load_model(dir.path / "out" / "model.txt");
  CHECK(model.arch.output_dim == 3);
  CHECK(fs::exists(dir.path / "out" / "projection.txt"));
  CHECK(fs::exists(dir.path / "out" / "embeddings.txt"));

  REQUIRE(cli({"train", "--config", (dir.path / "cfg.json").string()}) == 0);
  CHECK(slurp(dir.path / "out" / "losses.csv") == csv);

  REQUIRE(cli({"train", "--config", (dir.path / "cfg.json").string(), "--seed", "99", "--out",
               (dir.path / "alt").string()}) == 0);
  const std::string alt = slurp(dir.path / "alt" / "losses.csv");
  CHECK(alt != csv);
  CHECK(slurp(dir.path / "out" / "losses.csv") == csv);  // original untouched
}

TEST_CASE("null copy count shifts only the null_mean column") {
  TempDir dir;
  write_fixture(dir);
  std::ofstream(dir.path / "cfg5.json")
      << R"({"corpus": "corpus.jsonl", "method": "bow_mean", "input_dims": 8, "d_out": 3,
             "final_epochs": 6, "null_copies": 5, "tuner_budget": 3, "trial_epochs": 2,
             "out_dir": ")"
      << (dir.path / "out5").string() << "\"}";
  REQUIRE(cli({"train", "--config", (dir.path / "cfg.json").string()}) == 0);
  REQUIRE(cli({"train", "--config", (dir.path / "cfg5.json").string()}) == 0);

  std::istringstream two(slurp(dir.path / "out" / "losses.csv"));
  std::istringstream five(slurp(dir.path / "out5" / "losses.csv"));
  std::string a, b;
  std::getline(two, a);
  std::getline(five, b);
  CHECK(a == b);  // header
  bool null_diff = false;
  while (std::getline(two, a) && std::getline(five, b)) {
    const auto cut = [](const std::string& s) { return s.substr(0, s.rfind(',')); };
    CHECK(cut(a) == cut(b));  // epoch, train, test agree
    if (a.substr(a.rfind(',')) != b.substr(b.rfind(','))) null_diff = true;
  }
  CHECK(null_diff);
}

TEST_CASE("tune honors the budget and is reproducible") {
  TempDir dir;
  write_fixture(dir);
  std::string out;
  REQUIRE(cli({"tune", "--config", (dir.path / "cfg.json").string()}, &out) == 0);
  CHECK(out.find("trials 3\n") != std::string::npos);
  CHECK(out.find("best_fitness ") != std::string::npos);
  const std::string trials = slurp(dir.path / "out" / "trials.csv");
  CHECK(trials.rfind("trial,bracket,rung,epochs,fitness,hp_json\n", 0) == 0);
  CHECK(line_count(trials) == 4);
  CHECK_FALSE(slurp(dir.path / "out" / "best_hp.json").empty());

  REQUIRE(cli({"tune", "--config", (dir.path / "cfg.json").string()}) == 0);
  CHECK(slurp(dir.path / "out" / "trials.csv") == trials);
}

TEST_CASE("classify emits one line per input atom after training") {
  TempDir dir;
  write_fixture(dir, R"(, "final_epochs": 120)");
  // a second fixture call would clash; the extra key override rides along instead
  REQUIRE(cli({"train", "--config", (dir.path / "cfg.json").string()}) == 0);

  std::string out;
  REQUIRE(cli({"classify", "--config", (dir.path / "cfg.json").string(), "--in",
               (dir.path / "corpus.jsonl").string()},
              &out) == 0);
  CHECK(line_count(out) == 40);
  CHECK(slurp(dir.path / "out" / "predictions.txt") == out);
  for (std::istringstream lines(out); std::getline(lines, out);)
    CHECK(out.rfind("topic", 0) == 0);
}

TEST_CASE("classify without a trained model fails with a data error") {
  TempDir dir;
  write_fixture(dir);
  CHECK(cli({"classify", "--config", (dir.path / "cfg.json").string(), "--in",
             (dir.path / "corpus.jsonl").string()}) == 2);
}

TEST_CASE("metaopt runs the nested search and leaves a trace") {
  TempDir dir;
  REQUIRE(cli({"gen-corpus", "--out", (dir.path / "corpus.jsonl").string(), "--categories",
               "4", "--atoms", "6", "--vocab", "48", "--min-tokens", "15", "--max-tokens",
               "25", "--seed", "5"}) == 0);
  std::ofstream(dir.path / "cfg.json")
      << R"({"corpus": "corpus.jsonl", "pvdm_epochs": 3, "meta_budget": 2, "trial_epochs": 2,
             "max_stall": 2, "mu0": 1, "out_dir": ")"
      << (dir.path / "out").string() << "\"}";

  std::string out;
  REQUIRE(cli({"metaopt", "--config", (dir.path / "cfg.json").string()}, &out) == 0);
  CHECK(out.find("best_fitness ") != std::string::npos);
  const std::string trace = slurp(dir.path / "out" / "meta_trace.csv");
  CHECK(trace.rfind("iter,kind,point_json,fitness,mesh\n", 0) == 0);
  CHECK(line_count(trace) >= 2);
  const std::string best = slurp(dir.path / "out" / "best_meta.json");
  CHECK(best.find("\"d_out\"") != std::string::npos);
  CHECK(best.find("\"method\"") != std::string::npos);
}

TEST_CASE("usage problems exit with code 1") {
  TempDir dir;
  CHECK(cli({}) == 1);
  CHECK(cli({"explode"}) == 1);
  CHECK(cli({"train"}) == 1);  // --config is required
  CHECK(cli({"train", "--config", (dir.path / "absent.json").string()}) == 1);

  std::ofstream(dir.path / "typo.json") << R"({"corpus": "c.jsonl", "lerning_rate": 1})";
  CHECK(cli({"train", "--config", (dir.path / "typo.json").string()}) == 1);

  std::string help;
  CHECK(cli({"--help"}, &help) == 0);
  CHECK(help.find("Usage:") != std::string::npos);
  CHECK(help.find("gen-corpus") != std::string::npos);
}
