#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "metastim/corpus.hpp"
#include "metastim/linalg.hpp"

namespace metastim {

/// Word list with a dense index. Insertion order is first-seen order over the
/// corpus, which keeps every derived matrix deterministic.
struct Vocab {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;

  int add(const std::string& w);
  std::optional<int> find(const std::string& w) const;
  int size() const { return int(words.size()); }
};

/// Symmetric windowed co-occurrence counts. Rows are sparse and store both
/// triangles, so counts[i][j] == counts[j][i]. `total` is the sum over all
/// stored cells.
struct Cooccurrence {
  Vocab vocab;
  std::vector<std::map<int, double>> counts;
  double total = 0.0;

  double at(int i, int j) const;
  VecD row_sums() const;
};

struct EmbeddingTable {
  Vocab vocab;
  Mat vectors;  // |V| x d, row i is the vector for vocab.words[i]

  int dims() const { return vectors.cols; }
};

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

/// Stemmed keyword vocabulary derived from category names, plus the scale
/// applied to matching tokens when atoms are embedded.
struct KeywordSet {
  std::set<std::string> stems;
  double weight = 1.0;
};

/// Unordered co-occurrence pairs within `window` tokens inside one atom.
/// A pair of positions (p, q), p < q, q - p <= window contributes 1 to
/// count(w_p, w_q) and, when the words differ, 1 to count(w_q, w_p).
Cooccurrence build_cooccurrence(const std::vector<Atom>& atoms, int window);

/// Positive pointwise mutual information:
///   ppmi(i, j) = max(0, log(count(i,j) * total / (row_i * row_j)))
Mat ppmi_matrix(const Cooccurrence& co);

/// Rank-d factorization M ~= vectors * basis^T produced by orthogonal
/// iteration on the symmetric input. Exact at d = dim(M). Column signs are
/// canonicalized (largest-|entry| basis component positive), so different
/// seeds agree up to residual sign flips in degenerate eigenspaces.
struct Factorization {
  Mat vectors;  // M * basis
  Mat basis;    // orthonormal columns
};

Factorization factorize_ppmi(const Mat& ppmi, int d, std::uint64_t seed);

/// PPMI transform of the co-occurrence counts followed by rank-d
/// factorization; the factor rows become the word vectors.
EmbeddingTable train_embeddings(const Cooccurrence& co, int d, std::uint64_t seed);

/// Deterministic suffix stripper. Ordered rules
///   "ations"->"ate", "ings"->"", "ing"->"", "es"->"", "s"->"", "ed"->""
/// with a minimum remaining length of 3, applied to a fixed point. "es" only
/// strips after a sibilant (s, x, z, ch, sh) and "s" never strips after
/// another s, so plural category names keep their lemma ("voltages" ->
/// "voltage", "glass" -> "glass").
std::string stem(std::string_view token);

/// Splits every node name on non-alphanumerics, lowercases, stems each piece.
KeywordSet extract_keywords(const PimsTree& tree, double weight);

/// True when the token belongs to the keyword family: its stem equals a
/// keyword stem, or (at >= 3 characters) one stem is a prefix of the other.
/// The prefix half is what lets a category named "voltage" catch the token
/// "volts" (stems "voltage" and "volt").
bool matches_keyword(const KeywordSet& keywords, const std::string& token);

/// One line per word: `word v1 v2 ... vd`, round-trip exact.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

} // namespace metastim
