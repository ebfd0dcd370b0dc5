#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metastim {

/// Category label as a path of node names from a top-level node down.
struct CategoryPath {
  std::vector<std::string> segments;

  bool operator==(const CategoryPath&) const = default;
  std::string joined(char sep = '/') const;
};

/// Paragraph-sized unit of text with its category label.
struct Atom {
  int id = 0;
  std::vector<std::string> tokens;
  CategoryPath category;
};

/// Hierarchical category taxonomy. Nodes are stored in insertion order and
/// the vector index doubles as the dense node id (the node_index bijection
/// needed for one-hot encoding and the inverse node lookup). Top-level nodes
/// have parent -1, so the structure is a forest of category roots.
class PimsTree {
public:
  /// Adds any missing nodes along the path; returns the final node's id.
  /// Throws DataError on an empty path or empty segment.
  int add_path(const CategoryPath& path);

  std::optional<int> resolve(const CategoryPath& path) const;
  CategoryPath path_of(int node) const;

  int node_count() const { return int(nodes_.size()); }
  const std::string& name(int node) const { return nodes_[node].name; }
  int parent(int node) const { return nodes_[node].parent; }
  const std::vector<int>& children(int node) const { return nodes_[node].children; }
  std::vector<int> top_level() const;

private:
  struct Node {
    std::string name;
    int parent = -1;
    std::vector<int> children;
  };
  std::vector<Node> nodes_;

  int find_child(int parent, std::string_view name) const;
};

enum class Part { Train, Test };

struct Dataset {
  std::vector<Atom> atoms;
  PimsTree tree;
  std::vector<Part> part;  // parallel to atoms

  std::vector<int> train_indices() const;
  std::vector<int> test_indices() const;
};

/// Random relabeling of the test partition. `base` lists the atom indices of
/// the test partition in dataset order; `relabels` is parallel to it.
struct NullSet {
  std::vector<int> base;
  std::vector<CategoryPath> relabels;
  std::uint64_t seed = 0;
};

/// Lowercases and splits on runs of non-alphanumerics.
std::vector<std::string> tokenize(std::string_view text);

/// One JSON object per line: {"text": "...", "category": ["a","b"]}.
Dataset ingest_jsonl(const std::filesystem::path& path);

/// Directory corpus: category = relative directory path, atoms =
/// blank-line-separated paragraphs inside .txt files.
Dataset ingest_tree(const std::filesystem::path& dir);

/// Deterministic stratified train/test split. Test count = round(N * f),
/// at least 1; every category large enough to deserve a test atom gets one.
Dataset partition(Dataset ds, double test_fraction, std::uint64_t seed);

/// k independent uniform relabelings of the test partition (labels drawn
/// from the distinct category paths observed in the full dataset).
std::vector<NullSet> make_null_sets(const Dataset& ds, int k, std::uint64_t seed);

/// Distinct node ids used as atom labels, ascending.
std::vector<int> observed_label_nodes(const Dataset& ds);

} // namespace metastim
