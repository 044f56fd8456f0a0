#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "convlens/negation.hpp"

namespace convlens {

struct FilterSummary {
  int filter_id = 0;
  int width = 0;
  int class_id = 0;
  bool informative = false;
  double threshold = 0.0;        // +inf when uninformative
  double achieved_purity = 0.0;  // NaN when uninformative
  double coverage = 0.0;
  double bandwidth = 0.0;
  int point_count = 0;
  std::vector<NgramCluster> clusters;
  std::vector<NegativeNgram> negatives;
};

struct ExplanationRow {
  int filter_id = 0;
  int class_id = 0;
  std::vector<int32_t> winning_ids;
  std::vector<std::string> winning_tokens;
  DenseVector slot_scores;
  double score = 0.0;  // slot sum + bias; equals the filter's pre-ReLU max
  bool passed_threshold = false;
  bool case2_negative = false;
};

struct PredictionExplanation {
  std::string text;
  int predicted_class = 0;
  double probability = 0.0;
  std::vector<ExplanationRow> rows;  // one per filter
};

// One summary per filter. Uninformative filters (t = +inf) keep empty
// cluster/negative lists.
std::vector<FilterSummary> summarize_model(
    const CnnModel& model, std::span<const FilterProfile> profiles,
    std::span<const FilterClustering> clusterings,
    const std::vector<std::vector<NegativeNgram>>& negatives);

// Explanation of a single prediction from forward provenance. original_text,
// when given, is carried into the report; otherwise tokens are rejoined.
PredictionExplanation explain_prediction(const Document& doc, const CnnModel& model,
                                         std::span<const FilterProfile> profiles,
                                         const std::string* original_text = nullptr);

// JSON conversions (lossless; +inf/NaN map to null and back)
nlohmann::json profile_to_json(const FilterProfile& profile);
FilterProfile profile_from_json(const nlohmann::json& j);

nlohmann::json clustering_to_json(const FilterClustering& clustering,
                                  const Vocabulary& vocab);
FilterClustering clustering_from_json(const nlohmann::json& j);

nlohmann::json negative_to_json(const NegativeNgram& neg, const Vocabulary& vocab);
NegativeNgram negative_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const FilterSummary& summary, const Vocabulary& vocab);
FilterSummary summary_from_json(const nlohmann::json& j);

nlohmann::json explanation_to_json(const PredictionExplanation& explanation);
PredictionExplanation explanation_from_json(const nlohmann::json& j);

// Aligned plain-text tables; threshold-passing ngrams render as *ngram*,
// case-2 negatives as _ngram_.
std::string render_text(std::span<const FilterSummary> summaries,
                        const Vocabulary& vocab);
std::string render_text(const PredictionExplanation& explanation);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace convlens
