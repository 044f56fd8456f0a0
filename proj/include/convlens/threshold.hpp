#pragma once

#include <optional>
#include <span>
#include <vector>

#include "convlens/model.hpp"

namespace convlens {

// One observation for fitting a filter's threshold: the filter's pooled
// (post-ReLU) value on a document, and whether the model's prediction on
// that document matched the filter's class identity.
struct ThresholdPair {
  double p = 0.0;
  bool correlated = false;
};

struct ThresholdDataset {
  std::vector<std::vector<ThresholdPair>> per_filter;  // [filter][document]
};

struct ThresholdChoice {
  double t = 0.0;          // +inf sentinel when no candidate reaches the target
  double purity = 0.0;     // NaN on the sentinel
  double coverage = 0.0;
};

struct FilterProfile {
  int filter_id = 0;
  int class_id = 0;
  double threshold = 0.0;       // +inf when uninformative
  double achieved_purity = 0.0; // NaN when uninformative
  double coverage = 0.0;

  bool informative() const;
};

// argmax over column j of W; ties break to the lowest class index.
int class_identity(const DenseMatrix& head, int j);
std::vector<int> filter_class_ids(const CnnModel& model);

ThresholdDataset build_threshold_dataset(const CnnModel& model,
                                         const LabeledCorpus& corpus);

// Fraction of pairs at or above t that are correlated; nullopt when no pair
// reaches t.
std::optional<double> purity(std::span<const ThresholdPair> pairs, double t);

// Lowest candidate threshold (distinct observed values plus 0) whose purity
// reaches the target.
ThresholdChoice select_threshold(std::span<const ThresholdPair> pairs,
                                 double target_purity = 0.75);

std::vector<FilterProfile> profiles_from_dataset(const ThresholdDataset& dataset,
                                                 const std::vector<int>& class_ids,
                                                 double target_purity);
std::vector<FilterProfile> derive_profiles(const CnnModel& model,
                                           const LabeledCorpus& corpus,
                                           double target_purity = 0.75);

// forward() with the ReLU replaced by each filter's threshold gate.
ForwardResult thresholded_forward(const Document& doc, const CnnModel& model,
                                  std::span<const FilterProfile> profiles);

struct ThresholdedEval {
  double accuracy = 0.0;
  double mean_coverage = 0.0;  // per-filter pass fractions, averaged over filters
};

ThresholdedEval evaluate_thresholded(const CnnModel& model,
                                     std::span<const FilterProfile> profiles,
                                     const LabeledCorpus& corpus);

struct SweepRow {
  double target_purity = 0.0;
  double accuracy = 0.0;
  double mean_coverage = 0.0;
  int informative_filters = 0;
};

// Re-derives profiles on fit_corpus for targets 0, step, 2*step, ..., 1 and
// evaluates each on eval_corpus.
std::vector<SweepRow> purity_sweep(const CnnModel& model,
                                   const LabeledCorpus& fit_corpus,
                                   const LabeledCorpus& eval_corpus,
                                   double step = 0.05);

}  // namespace convlens
