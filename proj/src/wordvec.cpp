#include "metastim/wordvec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metastim/error.hpp"
#include "metastim/parallel.hpp"
#include "metastim/rng.hpp"

namespace metastim {

int Vocab::add(const std::string& w) {
  auto it = index.find(w);
  if (it != index.end()) return it->second;
  const int id = int(words.size());
  words.push_back(w);
  index.emplace(w, id);
  return id;
}

std::optional<int> Vocab::find(const std::string& w) const {
  auto it = index.find(w);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

double Cooccurrence::at(int i, int j) const {
  const auto& row = counts[i];
  auto it = row.find(j);
  return it == row.end() ? 0.0 : it->second;
}

VecD Cooccurrence::row_sums() const {
  VecD sums(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (const auto& [j, c] : counts[i]) sums[i] += c;
  return sums;
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  return a.vocab.words == b.vocab.words && a.vectors == b.vectors;
}

Cooccurrence build_cooccurrence(const std::vector<Atom>& atoms, int window) {
  if (atoms.empty()) throw DataError("co-occurrence needs a non-empty atom list");
  if (window <= 0) throw DataError("co-occurrence window must be positive");

  Cooccurrence co;
  for (const Atom& a : atoms)
    for (const std::string& w : a.tokens) co.vocab.add(w);
  co.counts.resize(co.vocab.size());

  for (const Atom& a : atoms) {
    const int n = int(a.tokens.size());
    for (int p = 0; p < n; ++p) {
      const int wp = *co.vocab.find(a.tokens[p]);
      for (int q = p + 1; q < n && q - p <= window; ++q) {
        const int wq = *co.vocab.find(a.tokens[q]);
        co.counts[wp][wq] += 1.0;
        co.total += 1.0;
        if (wq != wp) {
          co.counts[wq][wp] += 1.0;
          co.total += 1.0;
        }
      }
    }
  }
  return co;
}

Mat ppmi_matrix(const Cooccurrence& co) {
  const int n = co.vocab.size();
  const VecD sums = co.row_sums();
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (const auto& [j, c] : co.counts[i]) {
      if (c <= 0.0 || sums[i] <= 0.0 || sums[j] <= 0.0) continue;
      const double pmi = std::log(c * co.total / (sums[i] * sums[j]));
      if (pmi > 0.0) m(i, j) = pmi;
    }
  return m;
}

Factorization factorize_ppmi(const Mat& ppmi, int d, std::uint64_t seed) {
  const int n = ppmi.rows;
  if (ppmi.cols != n) throw DataError("factorization input must be square");
  if (d < 1) throw DataError("embedding dimension must be positive");
  if (d > n) throw DataError("embedding dimension " + std::to_string(d) +
                             " exceeds vocabulary size " + std::to_string(n));

  Rng rng(seed);
  Mat v(n, d);
  for (double& x : v.a) x = rng.normal();
  orthonormalize_columns(v);

  // Iterate with M^2 so the subspace converges monotonically even though
  // a PPMI matrix is indefinite (iterating with M itself oscillates when
  // eigenvalues of opposite sign share a magnitude).
  for (int iter = 0; iter < 500; ++iter) {
    Mat next = par::matmul(ppmi, par::matmul(ppmi, v));
    orthonormalize_columns(next);
    bool settled = true;
    for (int j = 0; j < d && settled; ++j) {
      double align = 0.0;
      for (int i = 0; i < n; ++i) align += next(i, j) * v(i, j);
      settled = std::abs(std::abs(align) - 1.0) < 4e-16;
    }
    v = std::move(next);
    if (settled) break;
  }

  // Rayleigh-Ritz: rotate the basis to the eigenvectors of V^T M V so the
  // columns are individually determined (up to sign) by the subspace alone,
  // not by the random start.
  Mat b = par::matmul_tn(v, par::matmul(ppmi, v));
  SymEig ritz = jacobi_eigh(b);
  v = par::matmul(v, ritz.vectors);

  // fix each column's sign by its largest-magnitude entry
  for (int j = 0; j < d; ++j) {
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(v(i, j)) > std::abs(v(arg, j))) arg = i;
    if (v(arg, j) < 0.0)
      for (int i = 0; i < n; ++i) v(i, j) = -v(i, j);
  }

  return {par::matmul(ppmi, v), std::move(v)};
}

EmbeddingTable train_embeddings(const Cooccurrence& co, int d, std::uint64_t seed) {
  if (co.vocab.size() == 0) throw DataError("cannot train embeddings on an empty vocabulary");
  Factorization f = factorize_ppmi(ppmi_matrix(co), d, seed);
  return {co.vocab, std::move(f.vectors)};
}

namespace {

struct StemRule {
  std::string_view suffix;
  std::string_view replacement;
};

constexpr StemRule kStemRules[] = {
    {"ations", "ate"}, {"ings", ""}, {"ing", ""}, {"es", ""}, {"s", ""}, {"ed", ""},
};

bool sibilant_before(std::string_view base) {
  if (base.empty()) return false;
  const char c = base.back();
  if (c == 's' || c == 'x' || c == 'z') return true;
  if (c == 'h' && base.size() >= 2) {
    const char p = base[base.size() - 2];
    return p == 'c' || p == 's';
  }
  return false;
}

bool apply_one_rule(std::string& w) {
  for (const StemRule& rule : kStemRules) {
    if (w.size() <= rule.suffix.size()) continue;
    if (!w.ends_with(rule.suffix)) continue;
    std::string_view base(w.data(), w.size() - rule.suffix.size());
    if (base.size() < 3) continue;
    if (rule.suffix == "es" && !sibilant_before(base)) continue;
    if (rule.suffix == "s" && base.back() == 's') continue;
    w.assign(base);
    w.append(rule.replacement);
    return true;
  }
  return false;
}

} // namespace

std::string stem(std::string_view token) {
  std::string w(token);
  while (apply_one_rule(w)) {
  }
  return w;
}

KeywordSet extract_keywords(const PimsTree& tree, double weight) {
  KeywordSet ks;
  ks.weight = weight;
  for (int node = 0; node < tree.node_count(); ++node)
    for (const std::string& piece : tokenize(tree.name(node))) ks.stems.insert(stem(piece));
  return ks;
}

bool matches_keyword(const KeywordSet& keywords, const std::string& token) {
  const std::string ts = stem(token);
  for (const std::string& kw : keywords.stems) {
    if (ts == kw) return true;
    const std::string& shorter = ts.size() < kw.size() ? ts : kw;
    const std::string& longer = ts.size() < kw.size() ? kw : ts;
    if (shorter.size() >= 3 && longer.starts_with(shorter)) return true;
  }
  return false;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (int i = 0; i < table.vocab.size(); ++i) {
    const std::string& w = table.vocab.words[i];
    if (w.empty() || w.find_first_of(" \t\n") != std::string::npos)
      throw DataError("word not serializable: '" + w + "'");
    out << w;
    for (int j = 0; j < table.vectors.cols; ++j) out << ' ' << format_full(table.vectors(i, j));
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  Vocab vocab;
  std::vector<VecD> rows;
  int d = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    VecD vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof())
      throw DataError("malformed value at line " + std::to_string(line_no));
    if (vals.empty())
      throw DataError("no vector components at line " + std::to_string(line_no));
    if (d < 0)
      d = int(vals.size());
    else if (int(vals.size()) != d)
      throw DataError("dimension mismatch line " + std::to_string(line_no));
    if (vocab.find(word))
      throw DataError("duplicate word '" + word + "' at line " + std::to_string(line_no));
    vocab.add(word);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DataError("empty embedding file: " + path.string());

  EmbeddingTable table;
  table.vocab = std::move(vocab);
  table.vectors = Mat(int(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < d; ++j) table.vectors(int(i), j) = rows[i][j];
  return table;
}

} // namespace metastim
