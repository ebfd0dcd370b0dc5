#include "metastim/atomvec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metastim/error.hpp"
#include "metastim/rng.hpp"

namespace metastim {

namespace {

double softplus_stable(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

} // namespace

std::string to_string(AtomMethod m) {
  switch (m) {
    case AtomMethod::BowSum: return "bow_sum";
    case AtomMethod::BowMean: return "bow_mean";
    case AtomMethod::Nabla: return "nabla";
    case AtomMethod::Pvdm: return "pvdm";
  }
  throw ConfigError("unknown atom embedding method");
}

AtomMethod atom_method_from(const std::string& s) {
  if (s == "bow_sum") return AtomMethod::BowSum;
  if (s == "bow_mean") return AtomMethod::BowMean;
  if (s == "nabla") return AtomMethod::Nabla;
  if (s == "pvdm") return AtomMethod::Pvdm;
  throw ConfigError("unknown atom embedding method '" + s + "'");
}

std::vector<VecD> weight_tokens(const Atom& atom, const EmbeddingTable& table,
                                const KeywordSet& keywords) {
  std::vector<VecD> out;
  for (const std::string& tok : atom.tokens) {
    auto row = table.vocab.find(tok);
    if (!row) continue;
    auto src = table.vectors.row(*row);
    VecD v(src.begin(), src.end());
    if (keywords.weight != 1.0 && matches_keyword(keywords, tok))
      for (double& x : v) x *= keywords.weight;
    out.push_back(std::move(v));
  }
  if (out.empty())
    throw DataError("unembeddable atom " + std::to_string(atom.id) +
                    ": no in-vocabulary tokens");
  return out;
}

AtomVector embed_bow(const Atom& atom, const EmbeddingTable& table, const KeywordSet& keywords,
                     BowMode mode) {
  const std::vector<VecD> vecs = weight_tokens(atom, table, keywords);
  VecD sum(table.dims(), 0.0);
  for (const VecD& v : vecs) axpy(sum, v, 1.0);
  if (mode == BowMode::Mean)
    for (double& x : sum) x /= double(vecs.size());
  return {std::move(sum), mode == BowMode::Sum ? AtomMethod::BowSum : AtomMethod::BowMean,
          table.dims()};
}

NablaTriangle nabla_table(const Atom& atom, const EmbeddingTable& table,
                          const KeywordSet& keywords) {
  NablaTriangle tri;
  tri.levels.push_back(weight_tokens(atom, table, keywords));
  const int n = int(tri.levels[0].size());
  for (int j = 1; j < n; ++j) {
    const auto& prev = tri.levels[j - 1];
    std::vector<VecD> cur(prev.size() - 1);
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
      cur[i].resize(prev[i].size());
      for (std::size_t k = 0; k < prev[i].size(); ++k) cur[i][k] = prev[i + 1][k] - prev[i][k];
    }
    tri.levels.push_back(std::move(cur));
  }
  return tri;
}

AtomVector embed_nabla(const Atom& atom, const EmbeddingTable& table, const KeywordSet& keywords,
                       int level) {
  if (level < 0) throw DataError("difference level must be non-negative");
  std::vector<VecD> vecs = weight_tokens(atom, table, keywords);
  if (level >= int(vecs.size()))
    throw DataError("level exceeds atom length: level " + std::to_string(level) + " needs > " +
                    std::to_string(level) + " in-vocabulary tokens, atom " +
                    std::to_string(atom.id) + " has " + std::to_string(vecs.size()));
  for (int j = 0; j < level; ++j) {
    for (std::size_t i = 0; i + 1 < vecs.size(); ++i)
      for (std::size_t k = 0; k < vecs[i].size(); ++k) vecs[i][k] = vecs[i + 1][k] - vecs[i][k];
    vecs.pop_back();
  }
  VecD sum(table.dims(), 0.0);
  for (const VecD& v : vecs) axpy(sum, v, 1.0);
  return {std::move(sum), AtomMethod::Nabla, table.dims()};
}

AtomVector embed_nabla_concat(const Atom& atom, const EmbeddingTable& table,
                              const KeywordSet& keywords, int levels) {
  if (levels < 1) throw DataError("need at least one difference level to concatenate");
  AtomVector out;
  out.method = AtomMethod::Nabla;
  for (int j = 1; j <= levels; ++j) {
    AtomVector part = embed_nabla(atom, table, keywords, j);
    out.values.insert(out.values.end(), part.values.begin(), part.values.end());
  }
  out.dim = int(out.values.size());
  return out;
}

namespace {

struct NoiseTable {
  VecD cumulative;  // running sum of counts^0.75

  explicit NoiseTable(const VecD& counts) {
    cumulative.resize(counts.size());
    double run = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      run += std::pow(counts[i], 0.75);
      cumulative[i] = run;
    }
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return int(it - cumulative.begin());
  }
};

struct TokenizedAtom {
  int atom_index = 0;  // position in the training list
  std::vector<int> words;
  std::vector<double> scales;  // keyword factor per position
};

/// One negative-sampling step for target `target` given hidden average h.
/// Returns the loss; accumulates dL/dh into grad_h and, unless frozen,
/// applies the word_out updates.
double ns_step(Mat& word_out, const NoiseTable& noise, Rng& rng, int negatives, int target,
               const VecD& h, VecD& grad_h, double lr, bool freeze_out) {
  double loss = 0.0;
  auto pair_step = [&](int word, double label) {
    auto out = word_out.row(word);
    const double score = dot(h, out);
    loss += softplus_stable(label > 0.5 ? -score : score);
    const double g = sigmoid(score) - label;
    for (std::size_t k = 0; k < h.size(); ++k) {
      grad_h[k] += g * out[k];
      if (!freeze_out) out[k] -= lr * g * h[k];
    }
  };
  pair_step(target, 1.0);
  for (int d = 0; d < negatives; ++d) {
    const int neg = noise.sample(rng);
    if (neg == target) continue;
    pair_step(neg, 0.0);
  }
  return loss;
}

VecD small_init(Rng& rng, int n) {
  VecD v(n);
  for (double& x : v) x = rng.uniform(-0.5, 0.5) / n;
  return v;
}

/// Loss of the current model over all (atom, position) pairs with a fresh
/// fixed-stream generator, so successive epochs are compared on identical
/// negative draws.
double eval_pvdm(const PvdmModel& m, const std::vector<TokenizedAtom>& toks,
                 const std::vector<int>& atom_keys, const NoiseTable& noise) {
  Rng rng = Rng::from_stream(m.params.seed, 0xE7A1);
  Mat frozen_out = m.word_out;
  double total = 0.0;
  long long count = 0;
  for (std::size_t a = 0; a < toks.size(); ++a) {
    const std::vector<int>& w = toks[a].words;
    const VecD& id = m.atom_ids.at(atom_keys[a]);
    for (int t = 0; t < int(w.size()); ++t) {
      VecD h = id;
      int ctx = 0;
      for (int c = std::max(0, t - m.params.window);
           c <= std::min(int(w.size()) - 1, t + m.params.window); ++c) {
        if (c == t) continue;
        axpy(h, m.word_in.row(w[c]), toks[a].scales[c]);
        ++ctx;
      }
      for (double& x : h) x /= double(ctx + 1);
      VecD grad_h(h.size(), 0.0);
      total += ns_step(frozen_out, noise, rng, m.params.negatives, w[t], h, grad_h, 0.0, true);
      ++count;
    }
  }
  return count ? total / double(count) : 0.0;
}

} // namespace

bool operator==(const PvdmModel& a, const PvdmModel& b) {
  return a.vocab.words == b.vocab.words && a.word_counts == b.word_counts &&
         a.word_in == b.word_in && a.word_out == b.word_out && a.atom_ids == b.atom_ids &&
         a.params == b.params && a.epoch_loss == b.epoch_loss;
}

PvdmModel train_pvdm(const std::vector<Atom>& atoms, const EmbeddingTable& table,
                     const PvdmParams& params, const KeywordSet& keywords) {
  if (atoms.empty()) throw DataError("PVDM needs a non-empty training set");
  if (params.vec_size < 1) throw DataError("PVDM vector size must be positive");
  if (params.window < 1) throw DataError("PVDM window must be positive");
  if (params.negatives < 0) throw DataError("PVDM negative count must be non-negative");
  if (params.epochs < 0) throw DataError("PVDM epoch count must be non-negative");

  PvdmModel m;
  m.params = params;

  std::vector<TokenizedAtom> toks;
  std::vector<int> atom_keys;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    TokenizedAtom ta;
    ta.atom_index = int(a);
    for (const std::string& w : atoms[a].tokens) {
      if (!table.vocab.find(w)) continue;  // the table defines what counts as a word
      ta.words.push_back(m.vocab.add(w));
      ta.scales.push_back(
          keywords.weight != 1.0 && matches_keyword(keywords, w) ? keywords.weight : 1.0);
    }
    if (ta.words.empty()) continue;
    atom_keys.push_back(atoms[a].id);
    toks.push_back(std::move(ta));
  }
  if (toks.empty()) throw DataError("PVDM training set has no in-vocabulary atoms");

  m.word_counts.assign(m.vocab.size(), 0.0);
  for (const TokenizedAtom& ta : toks)
    for (int w : ta.words) m.word_counts[w] += 1.0;

  Rng rng(params.seed);
  m.word_in = Mat(m.vocab.size(), params.vec_size);
  for (int i = 0; i < m.vocab.size(); ++i) {
    VecD row = small_init(rng, params.vec_size);
    std::copy(row.begin(), row.end(), m.word_in.row(i).begin());
  }
  m.word_out = Mat(m.vocab.size(), params.vec_size);
  for (std::size_t a = 0; a < toks.size(); ++a)
    m.atom_ids[atom_keys[a]] = small_init(rng, params.vec_size);

  const NoiseTable noise(m.word_counts);
  std::vector<int> order(toks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (int a : order) {
      const std::vector<int>& w = toks[a].words;
      VecD& id = m.atom_ids[atom_keys[a]];
      for (int t = 0; t < int(w.size()); ++t) {
        VecD h = id;
        std::vector<int> ctx;  // positions, so the keyword scale is recoverable
        for (int c = std::max(0, t - params.window);
             c <= std::min(int(w.size()) - 1, t + params.window); ++c) {
          if (c == t) continue;
          axpy(h, m.word_in.row(w[c]), toks[a].scales[c]);
          ctx.push_back(c);
        }
        const double denom = double(ctx.size() + 1);
        for (double& x : h) x /= denom;

        VecD grad_h(h.size(), 0.0);
        ns_step(m.word_out, noise, rng, params.negatives, w[t], h, grad_h, params.lr, false);

        const double scale = params.lr / denom;
        for (std::size_t k = 0; k < id.size(); ++k) id[k] -= scale * grad_h[k];
        for (int c : ctx) {
          auto row = m.word_in.row(w[c]);
          const double s = scale * toks[a].scales[c];
          for (std::size_t k = 0; k < row.size(); ++k) row[k] -= s * grad_h[k];
        }
      }
    }
    m.epoch_loss.push_back(eval_pvdm(m, toks, atom_keys, noise));
  }
  return m;
}

AtomVector infer_pvdm(const PvdmModel& model, const Atom& atom, int steps, double lr,
                      std::uint64_t seed, const KeywordSet& keywords) {
  if (steps < 0) throw DataError("PVDM inference steps must be non-negative");

  std::vector<int> words;
  std::vector<double> scales;
  for (const std::string& tok : atom.tokens) {
    auto id = model.vocab.find(tok);
    if (!id) continue;
    words.push_back(*id);
    scales.push_back(keywords.weight != 1.0 && matches_keyword(keywords, tok) ? keywords.weight
                                                                              : 1.0);
  }
  if (words.empty())
    throw DataError("unembeddable atom " + std::to_string(atom.id) +
                    ": no tokens in PVDM vocabulary");

  Rng rng(seed);
  VecD id = small_init(rng, model.params.vec_size);
  const NoiseTable noise(model.word_counts);
  Mat frozen_out = model.word_out;

  for (int step = 0; step < steps; ++step) {
    for (int t = 0; t < int(words.size()); ++t) {
      VecD h = id;
      int ctx = 0;
      for (int c = std::max(0, t - model.params.window);
           c <= std::min(int(words.size()) - 1, t + model.params.window); ++c) {
        if (c == t) continue;
        axpy(h, model.word_in.row(words[c]), scales[c]);
        ++ctx;
      }
      const double denom = double(ctx + 1);
      for (double& x : h) x /= denom;

      VecD grad_h(h.size(), 0.0);
      ns_step(frozen_out, noise, rng, model.params.negatives, words[t], h, grad_h, 0.0, true);
      const double scale = lr / denom;
      for (std::size_t k = 0; k < id.size(); ++k) id[k] -= scale * grad_h[k];
    }
  }
  return {std::move(id), AtomMethod::Pvdm, model.params.vec_size};
}

void save_pvdm(const PvdmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "metastim-pvdm 1\n";
  out << model.params.vec_size << ' ' << model.params.window << ' ' << model.params.negatives
      << ' ' << model.params.epochs << ' ' << format_full(model.params.lr) << ' '
      << model.params.seed << '\n';

  out << model.vocab.size() << '\n';
  for (int i = 0; i < model.vocab.size(); ++i)
    out << model.vocab.words[i] << ' ' << format_full(model.word_counts[i]) << '\n';

  auto write_mat = [&](const Mat& m) {
    for (int i = 0; i < m.rows; ++i) {
      for (int j = 0; j < m.cols; ++j) out << (j ? " " : "") << format_full(m(i, j));
      out << '\n';
    }
  };
  write_mat(model.word_in);
  write_mat(model.word_out);

  out << model.atom_ids.size() << '\n';
  for (const auto& [id, vec] : model.atom_ids) {
    out << id;
    for (double v : vec) out << ' ' << format_full(v);
    out << '\n';
  }

  out << model.epoch_loss.size();
  for (double v : model.epoch_loss) out << ' ' << format_full(v);
  out << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

PvdmModel load_pvdm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "metastim-pvdm" || version != 1)
    throw DataError("not a PVDM model file: " + path.string());

  PvdmModel m;
  in >> m.params.vec_size >> m.params.window >> m.params.negatives >> m.params.epochs >>
      m.params.lr >> m.params.seed;
  int vocab_size = 0;
  in >> vocab_size;
  if (!in || vocab_size < 1 || m.params.vec_size < 1)
    throw DataError("corrupt PVDM model header: " + path.string());

  m.word_counts.resize(vocab_size);
  for (int i = 0; i < vocab_size; ++i) {
    std::string w;
    in >> w >> m.word_counts[i];
    m.vocab.add(w);
  }
  if (m.vocab.size() != vocab_size)
    throw DataError("duplicate vocabulary entries in " + path.string());

  auto read_mat = [&](int rows, int cols) {
    Mat mat(rows, cols);
    for (double& v : mat.a) in >> v;
    return mat;
  };
  m.word_in = read_mat(vocab_size, m.params.vec_size);
  m.word_out = read_mat(vocab_size, m.params.vec_size);

  int atom_count = 0;
  in >> atom_count;
  for (int i = 0; i < atom_count; ++i) {
    int id = 0;
    in >> id;
    VecD v(m.params.vec_size);
    for (double& x : v) in >> x;
    m.atom_ids[id] = std::move(v);
  }

  int loss_count = 0;
  in >> loss_count;
  m.epoch_loss.resize(std::max(0, loss_count));
  for (double& x : m.epoch_loss) in >> x;

  if (!in) throw DataError("corrupt PVDM model file: " + path.string());
  return m;
}

} // namespace metastim
