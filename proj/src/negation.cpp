#include "convlens/negation.hpp"

#include <algorithm>
#include <stdexcept>

namespace convlens {

int hamming(std::span<const int32_t> a, std::span<const int32_t> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("hamming: width mismatch");
  }
  int count = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      ++count;
    }
  }
  return count;
}

int classify_case(const NegativeNgram& neg, const ConvFilter& filter, double t) {
  if (neg.changed_slots.empty()) {
    return 1;
  }
  double negative_sum = 0.0;
  for (int slot : neg.changed_slots) {
    double a = neg.variant_slots.activations[static_cast<size_t>(slot)];
    if (a >= 0.0) {
      return 1;  // a non-negative changed slot means negation isn't the culprit
    }
    negative_sum += a;
  }
  double sans_negative = neg.variant_slots.total + filter.bias - negative_sum;
  return sans_negative >= t ? 2 : 1;
}

std::vector<NegativeNgram> find_negative_ngrams(
    const ConvFilter& filter, const FilterProfile& profile, const NgramIndex& index,
    const EmbeddingTable& embeddings,
    const std::vector<std::vector<int32_t>>& base_ngrams, int k, int bottom_k) {
  if (!profile.informative()) {
    throw std::invalid_argument("find_negative_ngrams: filter has no finite threshold");
  }
  if (index.width != filter.width) {
    throw std::invalid_argument("find_negative_ngrams: index width mismatch");
  }
  if (k < 1 || bottom_k < 1) {
    throw std::invalid_argument("find_negative_ngrams: k and bottom_k must be >= 1");
  }
  double t = profile.threshold;

  // score every index ngram once; bases then share the scan
  std::vector<SlotActivationVector> below_slots;
  std::vector<double> below_scores;
  for (const auto& ids : index.ngrams) {
    SlotActivationVector slots = slot_decompose(ids, filter, embeddings);
    double score = slots.total + filter.bias;
    if (score < t) {
      below_slots.push_back(std::move(slots));
      below_scores.push_back(score);
    }
  }

  std::vector<NegativeNgram> results;
  for (size_t rank = 0; rank < base_ngrams.size(); ++rank) {
    const auto& base = base_ngrams[rank];
    if (static_cast<int>(base.size()) != filter.width) {
      throw std::invalid_argument("find_negative_ngrams: base width mismatch");
    }
    double base_score = slot_decompose(base, filter, embeddings).total + filter.bias;
    if (base_score < t) {
      continue;
    }
    std::vector<NegativeNgram> variants;
    for (size_t v = 0; v < below_slots.size(); ++v) {
      int dist = hamming(base, below_slots[v].ngram_ids);
      if (dist < 1 || dist > k) {
        continue;
      }
      NegativeNgram neg;
      neg.base_ids = base;
      neg.variant_ids = below_slots[v].ngram_ids;
      for (int i = 0; i < filter.width; ++i) {
        if (base[static_cast<size_t>(i)] != neg.variant_ids[static_cast<size_t>(i)]) {
          neg.changed_slots.push_back(i);
        }
      }
      neg.variant_score = below_scores[v];
      neg.variant_slots = below_slots[v];
      neg.base_rank = static_cast<int>(rank);
      neg.case_tag = classify_case(neg, filter, t);
      variants.push_back(std::move(neg));
    }
    std::sort(variants.begin(), variants.end(),
              [](const NegativeNgram& a, const NegativeNgram& b) {
                if (a.variant_score != b.variant_score) {
                  return a.variant_score < b.variant_score;
                }
                return a.variant_ids < b.variant_ids;
              });
    if (static_cast<int>(variants.size()) > bottom_k) {
      variants.resize(static_cast<size_t>(bottom_k));
    }
    for (auto& neg : variants) {
      results.push_back(std::move(neg));
    }
  }
  return results;
}

std::vector<NegativeNgram> find_negative_ngrams(
    const ConvFilter& filter, const FilterProfile& profile, const NgramIndex& index,
    const EmbeddingTable& embeddings, const FilterClustering& clustering, int k,
    int bottom_k) {
  std::vector<std::vector<int32_t>> bases;
  for (const auto& cluster : clustering.clusters) {
    for (const auto& ngram : cluster.top_ngrams) {
      if (std::find(bases.begin(), bases.end(), ngram.ids) == bases.end()) {
        bases.push_back(ngram.ids);
      }
    }
  }
  return find_negative_ngrams(filter, profile, index, embeddings, bases, k, bottom_k);
}

}  // namespace convlens
