#pragma once

#include <span>
#include <string>
#include <vector>

#include "convlens/model.hpp"

namespace convlens {

// Per-slot dot products for one ngram against one filter. The bias is left
// out: it shifts every ngram equally and says nothing about which words the
// filter is matching.
struct SlotActivationVector {
  std::vector<int32_t> ngram_ids;
  int filter_id = 0;
  DenseVector activations;
  double total = 0.0;  // sum of activations; total + bias == ngram_score
};

SlotActivationVector slot_decompose(std::span<const int32_t> ngram_ids,
                                    const ConvFilter& filter,
                                    const EmbeddingTable& embeddings);

struct SlotWord {
  int32_t token_id = 0;
  std::string token;
  double score = 0.0;
};

struct SlotTopWords {
  int filter_id = 0;
  std::vector<std::vector<SlotWord>> per_slot;  // scores non-increasing
};

// Top k vocabulary words per slot by <embedding, filter slot>; PAD excluded,
// ties by token id.
SlotTopWords top_words_per_slot(const ConvFilter& filter, const Vocabulary& vocab,
                                const EmbeddingTable& embeddings, int k);

// Sum over slots of the best single-word activation (PAD excluded, bias
// excluded): the score of the filter's best possible ngram.
double max_possible_score(const ConvFilter& filter, const Vocabulary& vocab,
                          const EmbeddingTable& embeddings);

// The per-slot argmax words behind max_possible_score (ties by token id).
std::vector<int32_t> top_possible_ngram(const ConvFilter& filter,
                                        const Vocabulary& vocab,
                                        const EmbeddingTable& embeddings);

// Distinct ngrams of one width drawn from corpus documents, padded the same
// way forward() pads them. Sorted lexicographically by token ids.
struct NgramIndex {
  int width = 0;
  std::vector<std::vector<int32_t>> ngrams;
};

NgramIndex build_ngram_index(const LabeledCorpus& corpus, int width, int pad_width);

struct ScoredNgram {
  std::vector<int32_t> ids;
  double score = 0.0;  // ngram_score, bias included
  SlotActivationVector slots;
};

// Top k index ngrams by score; ties by ids ascending.
std::vector<ScoredNgram> top_natural_ngrams(const ConvFilter& filter,
                                            const NgramIndex& index,
                                            const EmbeddingTable& embeddings, int k);

struct FilterGap {
  int filter_id = 0;
  double top_natural_total = 0.0;  // best corpus ngram, slot-sum basis
  double max_possible = 0.0;
  double gap = 0.0;  // 1 - natural/possible on slot sums
  double gap_with_bias = 0.0;
};

struct GapReport {
  std::vector<FilterGap> per_filter;
  double mean_gap = 0.0;
  double mean_gap_with_bias = 0.0;
};

GapReport natural_possible_gap(const CnnModel& model, const LabeledCorpus& corpus);

}  // namespace convlens
