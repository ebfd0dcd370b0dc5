#include "metastim/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "metastim/error.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace fs = std::filesystem;

std::string CategoryPath::joined(char sep) const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out.push_back(sep);
    out += segments[i];
  }
  return out;
}

int PimsTree::find_child(int parent, std::string_view name) const {
  if (parent < 0) {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].parent == -1 && nodes_[i].name == name) return int(i);
    return -1;
  }
  for (int c : nodes_[parent].children)
    if (nodes_[c].name == name) return c;
  return -1;
}

int PimsTree::add_path(const CategoryPath& path) {
  if (path.segments.empty()) throw DataError("empty category path");
  int cur = -1;
  for (const std::string& seg : path.segments) {
    if (seg.empty()) throw DataError("empty category segment in path '" + path.joined() + "'");
    int next = find_child(cur, seg);
    if (next < 0) {
      next = int(nodes_.size());
      nodes_.push_back({seg, cur, {}});
      if (cur >= 0) nodes_[cur].children.push_back(next);
    }
    cur = next;
  }
  return cur;
}

std::optional<int> PimsTree::resolve(const CategoryPath& path) const {
  if (path.segments.empty()) return std::nullopt;
  int cur = -1;
  for (const std::string& seg : path.segments) {
    cur = find_child(cur, seg);
    if (cur < 0) return std::nullopt;
  }
  return cur;
}

CategoryPath PimsTree::path_of(int node) const {
  CategoryPath p;
  for (int cur = node; cur >= 0; cur = nodes_[cur].parent)
    p.segments.insert(p.segments.begin(), nodes_[cur].name);
  return p;
}

std::vector<int> PimsTree::top_level() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].parent == -1) out.push_back(int(i));
  return out;
}

std::vector<int> Dataset::train_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (part[i] == Part::Train) out.push_back(int(i));
  return out;
}

std::vector<int> Dataset::test_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    if (part[i] == Part::Test) out.push_back(int(i));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(char(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

CategoryPath parse_category(const nlohmann::json& j, int line_no) {
  if (!j.is_array() || j.empty())
    throw DataError("malformed line " + std::to_string(line_no) +
                    ": 'category' must be a non-empty array of strings");
  CategoryPath p;
  for (const auto& seg : j) {
    if (!seg.is_string() || seg.get<std::string>().empty())
      throw DataError("malformed line " + std::to_string(line_no) +
                      ": category segments must be non-empty strings");
    p.segments.push_back(seg.get<std::string>());
  }
  return p;
}

} // namespace

Dataset ingest_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path.string());

  Dataset ds;
  std::string line;
  int line_no = 0;
  int next_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string() ||
        !rec.contains("category"))
      throw DataError("malformed line " + std::to_string(line_no) +
                      ": expected object with 'text' and 'category'");
    Atom a;
    a.id = next_id;
    a.tokens = tokenize(rec["text"].get<std::string>());
    if (a.tokens.empty())
      throw DataError("empty atom at line " + std::to_string(line_no));
    a.category = parse_category(rec["category"], line_no);
    ds.tree.add_path(a.category);
    ds.atoms.push_back(std::move(a));
    ++next_id;
  }
  if (ds.atoms.empty()) throw DataError("empty corpus: " + path.string());
  ds.part.assign(ds.atoms.size(), Part::Train);
  return ds;
}

Dataset ingest_tree(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("no .txt files under " + dir.string());
  std::sort(files.begin(), files.end());  // directory iteration order is OS-defined

  Dataset ds;
  int next_id = 0;
  for (const fs::path& file : files) {
    CategoryPath cat;
    for (const auto& seg : file.parent_path().lexically_relative(dir))
      if (seg != ".") cat.segments.push_back(seg.string());
    if (cat.segments.empty())
      throw DataError("file at corpus root has no category directory: " + file.string());

    std::ifstream in(file);
    if (!in) throw DataError("cannot read " + file.string());
    std::string line;
    std::string paragraph;
    auto flush = [&]() {
      auto tokens = tokenize(paragraph);
      paragraph.clear();
      if (tokens.empty()) return;  // blank or punctuation-only block
      Atom a;
      a.id = next_id++;
      a.tokens = std::move(tokens);
      a.category = cat;
      ds.tree.add_path(a.category);
      ds.atoms.push_back(std::move(a));
    };
    while (std::getline(in, line)) {
      if (blank(line)) {
        flush();
      } else {
        if (!paragraph.empty()) paragraph.push_back(' ');
        paragraph += line;
      }
    }
    flush();
  }
  ds.part.assign(ds.atoms.size(), Part::Train);
  return ds;
}

Dataset partition(Dataset ds, double test_fraction, std::uint64_t seed) {
  const int n = int(ds.atoms.size());
  if (n < 2) throw DataError("partition needs at least 2 atoms");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test_fraction must be in (0, 1)");

  int test_total = int(std::llround(n * test_fraction));
  test_total = std::max(1, std::min(test_total, n - 1));

  // group atoms by resolved category node
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    auto node = ds.tree.resolve(ds.atoms[i].category);
    if (!node) throw DataError("atom category not in tree: " + ds.atoms[i].category.joined());
    groups[*node].push_back(i);
  }

  // per-category quota: floor(size * f), remainder by largest fraction
  struct Q {
    int node;
    int size;
    int quota;
    double rem;
  };
  std::vector<Q> quotas;
  int assigned = 0;
  for (const auto& [node, idx] : groups) {
    const double exact = idx.size() * test_fraction;
    int q = int(std::floor(exact));
    q = std::min(q, int(idx.size()));
    quotas.push_back({node, int(idx.size()), q, exact - std::floor(exact)});
    assigned += q;
  }
  std::vector<int> order(quotas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (quotas[a].rem != quotas[b].rem) return quotas[a].rem > quotas[b].rem;
    return quotas[a].node < quotas[b].node;
  });
  int deficit = test_total - assigned;
  while (deficit > 0) {
    bool any = false;
    for (int i : order) {
      if (deficit == 0) break;
      if (quotas[i].quota < quotas[i].size) {
        ++quotas[i].quota;
        --deficit;
        any = true;
      }
    }
    if (!any) break;
  }
  while (deficit < 0) {  // only possible after the n-1 clamp
    for (auto it = order.rbegin(); it != order.rend() && deficit < 0; ++it)
      if (quotas[*it].quota > 0) {
        --quotas[*it].quota;
        ++deficit;
      }
  }

  ds.part.assign(n, Part::Train);
  for (const Q& q : quotas) {
    auto idx = groups[q.node];
    Rng rng = Rng::from_stream(seed, std::uint64_t(q.node));
    rng.shuffle(idx);
    for (int i = 0; i < q.quota; ++i) ds.part[idx[i]] = Part::Test;
  }
  return ds;
}

std::vector<int> observed_label_nodes(const Dataset& ds) {
  std::set<int> seen;
  for (const Atom& a : ds.atoms) {
    auto node = ds.tree.resolve(a.category);
    if (node) seen.insert(*node);
  }
  return {seen.begin(), seen.end()};
}

std::vector<NullSet> make_null_sets(const Dataset& ds, int k, std::uint64_t seed) {
  if (k <= 0) throw DataError("null set count must be positive");
  const std::vector<int> test = ds.test_indices();
  if (test.empty()) throw DataError("test partition is empty");
  const std::vector<int> observed = observed_label_nodes(ds);
  if (observed.size() < 2)
    throw DataError("null sets need at least 2 observed categories");

  std::vector<NullSet> out;
  out.reserve(k);
  for (int c = 0; c < k; ++c) {
    NullSet ns;
    ns.base = test;
    ns.seed = derive_seed(seed, std::uint64_t(c));
    Rng rng(ns.seed);
    ns.relabels.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int node = observed[rng.below(observed.size())];
      ns.relabels.push_back(ds.tree.path_of(node));
    }
    out.push_back(std::move(ns));
  }
  return out;
}

} // namespace metastim
