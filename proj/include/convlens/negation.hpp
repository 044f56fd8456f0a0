#pragma once

#include <span>
#include <vector>

#include "convlens/cluster.hpp"

namespace convlens {

// A naturally occurring below-threshold ngram a few substitutions away from
// an above-threshold one. Case 2 means the changed slots alone (all of them
// scoring negative) drag an otherwise-passing ngram below the threshold.
struct NegativeNgram {
  std::vector<int32_t> base_ids;
  std::vector<int32_t> variant_ids;
  std::vector<int> changed_slots;
  double variant_score = 0.0;  // bias included
  SlotActivationVector variant_slots;
  int base_rank = 0;
  int case_tag = 1;
};

// Count of differing positions; widths must match.
int hamming(std::span<const int32_t> a, std::span<const int32_t> b);

int classify_case(const NegativeNgram& neg, const ConvFilter& filter, double t);

// For each base ngram (in rank order), the bottom_k lowest-scoring corpus
// ngrams below the threshold within hamming distance k. Bases that do not
// pass the threshold themselves are skipped.
std::vector<NegativeNgram> find_negative_ngrams(
    const ConvFilter& filter, const FilterProfile& profile, const NgramIndex& index,
    const EmbeddingTable& embeddings,
    const std::vector<std::vector<int32_t>>& base_ngrams, int k = 1, int bottom_k = 5);

// Convenience: bases = each cluster's top ngrams, in cluster order.
std::vector<NegativeNgram> find_negative_ngrams(
    const ConvFilter& filter, const FilterProfile& profile, const NgramIndex& index,
    const EmbeddingTable& embeddings, const FilterClustering& clustering, int k = 1,
    int bottom_k = 5);

}  // namespace convlens
