#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "metastim/corpus.hpp"
#include "metastim/linalg.hpp"
#include "metastim/wordvec.hpp"

namespace metastim {

enum class AtomMethod { BowSum, BowMean, Nabla, Pvdm };

std::string to_string(AtomMethod m);
AtomMethod atom_method_from(const std::string& s);

struct AtomVector {
  VecD values;
  AtomMethod method = AtomMethod::BowSum;
  int dim = 0;  // == values.size()
};

/// Difference triangle over an atom's word vectors. levels[0] holds the
/// (weighted) word vectors themselves; levels[j][i] = levels[j-1][i+1] -
/// levels[j-1][i], so an atom of n tokens yields n levels of shrinking width.
struct NablaTriangle {
  std::vector<std::vector<VecD>> levels;
};

enum class BowMode { Sum, Mean };

/// Per-token vectors in atom order. A token whose stem falls in the keyword
/// set is scaled by keywords.weight; out-of-vocabulary tokens are dropped.
/// Throws DataError ("unembeddable atom") when nothing survives.
std::vector<VecD> weight_tokens(const Atom& atom, const EmbeddingTable& table,
                                const KeywordSet& keywords);

AtomVector embed_bow(const Atom& atom, const EmbeddingTable& table, const KeywordSet& keywords,
                     BowMode mode);

NablaTriangle nabla_table(const Atom& atom, const EmbeddingTable& table,
                          const KeywordSet& keywords);

/// Sum over one level of the difference triangle. Level 1 telescopes to
/// e_n - e_1; level 0 equals the bag-of-words sum.
AtomVector embed_nabla(const Atom& atom, const EmbeddingTable& table, const KeywordSet& keywords,
                       int level = 1);

/// Concatenation of the level-1..level-n sums (dim = n * table dim).
AtomVector embed_nabla_concat(const Atom& atom, const EmbeddingTable& table,
                              const KeywordSet& keywords, int levels);

struct PvdmParams {
  int vec_size = 16;
  int window = 4;
  int negatives = 5;
  int epochs = 20;
  double lr = 0.05;
  std::uint64_t seed = 1;

  bool operator==(const PvdmParams&) const = default;
};

/// Distributed-memory paragraph vectors: each atom carries an ID vector that
/// is averaged with the context word vectors to predict the target token
/// under a negative-sampling objective. The embedding table acts purely as
/// the vocabulary gate so all four atom methods share one OOV rule.
/// Keyword-matching context vectors are scaled by keywords.weight, mirroring
/// the inference path.
struct PvdmModel {
  Vocab vocab;
  VecD word_counts;  // unigram counts behind the noise distribution
  Mat word_in;       // context vectors, |V| x vec_size
  Mat word_out;      // prediction vectors, |V| x vec_size
  std::map<int, VecD> atom_ids;
  PvdmParams params;
  VecD epoch_loss;  // fixed-draw evaluation after each epoch
};

bool operator==(const PvdmModel& a, const PvdmModel& b);

PvdmModel train_pvdm(const std::vector<Atom>& atoms, const EmbeddingTable& table,
                     const PvdmParams& params, const KeywordSet& keywords = {});

/// Optimizes a fresh ID vector for an unseen atom with every word matrix
/// frozen; `steps` full passes over the atom. Keyword-matching context
/// vectors are scaled by keywords.weight during the forward average.
AtomVector infer_pvdm(const PvdmModel& model, const Atom& atom, int steps, double lr,
                      std::uint64_t seed, const KeywordSet& keywords = {});

void save_pvdm(const PvdmModel& model, const std::filesystem::path& path);
PvdmModel load_pvdm(const std::filesystem::path& path);

} // namespace metastim
