#include "convlens/slots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "convlens/corpus.hpp"

namespace convlens {

SlotActivationVector slot_decompose(std::span<const int32_t> ngram_ids,
                                    const ConvFilter& filter,
                                    const EmbeddingTable& embeddings) {
  if (static_cast<int>(ngram_ids.size()) != filter.width) {
    throw std::invalid_argument("slot_decompose: ngram width does not match filter");
  }
  SlotActivationVector result;
  result.ngram_ids.assign(ngram_ids.begin(), ngram_ids.end());
  result.filter_id = filter.filter_id;
  result.activations.resize(ngram_ids.size());
  // same accumulation order as ngram_score, so total + bias matches it exactly
  for (int i = 0; i < filter.width; ++i) {
    double a = slot_dot(embeddings.row(ngram_ids[static_cast<size_t>(i)]), filter, i);
    result.activations[static_cast<size_t>(i)] = a;
    result.total += a;
  }
  return result;
}

SlotTopWords top_words_per_slot(const ConvFilter& filter, const Vocabulary& vocab,
                                const EmbeddingTable& embeddings, int k) {
  if (k < 1) {
    throw std::invalid_argument("top_words_per_slot: k must be >= 1");
  }
  SlotTopWords result;
  result.filter_id = filter.filter_id;
  result.per_slot.resize(static_cast<size_t>(filter.width));
  for (int i = 0; i < filter.width; ++i) {
    std::vector<SlotWord> scored;
    scored.reserve(static_cast<size_t>(vocab.size()) - 1);
    for (int32_t id = 0; id < vocab.size(); ++id) {
      if (id == kPadId) {
        continue;
      }
      scored.push_back({id, vocab.token(id), slot_dot(embeddings.row(id), filter, i)});
    }
    std::sort(scored.begin(), scored.end(), [](const SlotWord& a, const SlotWord& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.token_id < b.token_id;
    });
    if (static_cast<int>(scored.size()) > k) {
      scored.resize(static_cast<size_t>(k));
    }
    result.per_slot[static_cast<size_t>(i)] = std::move(scored);
  }
  return result;
}

std::vector<int32_t> top_possible_ngram(const ConvFilter& filter,
                                        const Vocabulary& vocab,
                                        const EmbeddingTable& embeddings) {
  if (vocab.size() < 2) {
    throw std::invalid_argument("top_possible_ngram: vocabulary has no real words");
  }
  std::vector<int32_t> ids(static_cast<size_t>(filter.width));
  for (int i = 0; i < filter.width; ++i) {
    int32_t best_id = -1;
    double best = 0.0;
    for (int32_t id = 0; id < vocab.size(); ++id) {
      if (id == kPadId) {
        continue;
      }
      double a = slot_dot(embeddings.row(id), filter, i);
      if (best_id < 0 || a > best) {
        best_id = id;
        best = a;
      }
    }
    ids[static_cast<size_t>(i)] = best_id;
  }
  return ids;
}

double max_possible_score(const ConvFilter& filter, const Vocabulary& vocab,
                          const EmbeddingTable& embeddings) {
  std::vector<int32_t> ids = top_possible_ngram(filter, vocab, embeddings);
  // slot-order accumulation, matching slot_decompose
  double total = 0.0;
  for (int i = 0; i < filter.width; ++i) {
    total += slot_dot(embeddings.row(ids[static_cast<size_t>(i)]), filter, i);
  }
  return total;
}

NgramIndex build_ngram_index(const LabeledCorpus& corpus, int width, int pad_width) {
  if (width < 1 || pad_width < width) {
    throw std::invalid_argument("build_ngram_index: invalid widths");
  }
  if (corpus.documents.empty()) {
    throw DataError("build_ngram_index: empty corpus");
  }
  std::set<std::vector<int32_t>> seen;
  for (const auto& doc : corpus.documents) {
    Document padded = pad_document(doc, pad_width);
    const auto& ids = padded.token_ids;
    if (static_cast<int>(ids.size()) < width) {
      continue;
    }
    for (size_t pos = 0; pos + static_cast<size_t>(width) <= ids.size(); ++pos) {
      seen.emplace(ids.begin() + static_cast<ptrdiff_t>(pos),
                   ids.begin() + static_cast<ptrdiff_t>(pos) + width);
    }
  }
  NgramIndex index;
  index.width = width;
  index.ngrams.assign(seen.begin(), seen.end());
  return index;
}

std::vector<ScoredNgram> top_natural_ngrams(const ConvFilter& filter,
                                            const NgramIndex& index,
                                            const EmbeddingTable& embeddings, int k) {
  if (index.width != filter.width) {
    throw std::invalid_argument("top_natural_ngrams: index width does not match filter");
  }
  if (k < 1) {
    throw std::invalid_argument("top_natural_ngrams: k must be >= 1");
  }
  std::vector<ScoredNgram> scored;
  scored.reserve(index.ngrams.size());
  for (const auto& ids : index.ngrams) {
    ScoredNgram entry;
    entry.slots = slot_decompose(ids, filter, embeddings);
    entry.score = entry.slots.total + filter.bias;
    entry.ids = ids;
    scored.push_back(std::move(entry));
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredNgram& a, const ScoredNgram& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  });
  if (static_cast<int>(scored.size()) > k) {
    scored.resize(static_cast<size_t>(k));
  }
  return scored;
}

GapReport natural_possible_gap(const CnnModel& model, const LabeledCorpus& corpus) {
  GapReport report;
  std::map<int, NgramIndex> by_width;
  for (int width : model.widths()) {
    by_width.emplace(width, build_ngram_index(corpus, width, model.max_width()));
  }
  double gap_sum = 0.0;
  double gap_bias_sum = 0.0;
  int counted = 0;
  for (const auto& filter : model.filters) {
    auto best = top_natural_ngrams(filter, by_width.at(filter.width), model.embeddings, 1);
    FilterGap row;
    row.filter_id = filter.filter_id;
    row.top_natural_total = best.front().slots.total;
    row.max_possible = max_possible_score(filter, model.vocab, model.embeddings);
    if (row.max_possible != 0.0) {
      row.gap = 1.0 - row.top_natural_total / row.max_possible;
    } else {
      row.gap = std::numeric_limits<double>::quiet_NaN();
    }
    double possible_with_bias = row.max_possible + filter.bias;
    if (possible_with_bias != 0.0) {
      row.gap_with_bias = 1.0 - best.front().score / possible_with_bias;
    } else {
      row.gap_with_bias = std::numeric_limits<double>::quiet_NaN();
    }
    if (std::isfinite(row.gap) && std::isfinite(row.gap_with_bias)) {
      gap_sum += row.gap;
      gap_bias_sum += row.gap_with_bias;
      ++counted;
    }
    report.per_filter.push_back(row);
  }
  if (counted > 0) {
    report.mean_gap = gap_sum / counted;
    report.mean_gap_with_bias = gap_bias_sum / counted;
  } else {
    report.mean_gap = std::numeric_limits<double>::quiet_NaN();
    report.mean_gap_with_bias = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace convlens
