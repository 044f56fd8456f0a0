#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "convlens/error.hpp"
#include "convlens/numerics.hpp"

namespace convlens {

constexpr int32_t kPadId = 0;
constexpr int32_t kUnkId = 1;

// Token/id mapping with reserved PAD=0 and UNK=1.
class Vocabulary {
 public:
  Vocabulary();

  // Returns the existing id when the token is already present.
  int32_t add(const std::string& token);
  // UNK for unknown tokens.
  int32_t id(const std::string& token) const;
  const std::string& token(int32_t id) const;
  bool contains(const std::string& token) const;
  int32_t size() const { return static_cast<int32_t>(tokens_.size()); }

  std::vector<int32_t> ids(const std::vector<std::string>& tokens) const;
  std::vector<std::string> tokens(const std::vector<int32_t>& ids) const;

 private:
  std::unordered_map<std::string, int32_t> ids_;
  std::vector<std::string> tokens_;
};

struct Document {
  std::vector<int32_t> token_ids;
  int label = 0;
};

struct LabeledCorpus {
  std::vector<Document> documents;
  std::string split;  // train/dev/test tag
  int num_classes = 0;
};

struct EmbeddingTable {
  DenseMatrix matrix;  // vocab_size x dim; PAD row stays all zeros
  int dim = 0;

  std::span<const double> row(int32_t id) const { return matrix.row(id); }
  std::span<double> row(int32_t id) { return matrix.row(id); }
};

// Lowercases, splits punctuation into separate tokens, splits contractions
// ("didn't" -> "did" "n't", "i'm" -> "i" "'m").
std::vector<std::string> tokenize(const std::string& text);

// Tokens with frequency >= min_count get ids, assigned by descending
// frequency (ties by token). Everything else maps to UNK.
Vocabulary build_vocabulary(const std::vector<std::string>& texts, int min_count);

// GloVe text format: "token v1 ... vd" per line. Vocabulary tokens missing
// from the file are drawn from uniform(-0.25, 0.25); PAD stays zero.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, SeededRng& rng);

// Uniform(-0.25, 0.25) init for every non-PAD row.
EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, SeededRng& rng);

// Prepends and appends (max_width - 1) PAD ids.
Document pad_document(const Document& doc, int max_width);

// TSV, one "label<TAB>text" per line.
LabeledCorpus load_tsv_corpus(const std::string& path, const Vocabulary& vocab,
                              const std::string& split = "");
std::pair<LabeledCorpus, Vocabulary> load_tsv_corpus_building_vocab(
    const std::string& path, int min_count, const std::string& split = "");

}  // namespace convlens
