#include "convlens/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace convlens {

bool FilterProfile::informative() const { return std::isfinite(threshold); }

int class_identity(const DenseMatrix& head, int j) {
  if (j < 0 || j >= head.cols) {
    throw std::invalid_argument("class_identity: filter index out of range");
  }
  int best = 0;
  for (int k = 1; k < head.rows; ++k) {
    if (head(k, j) > head(best, j)) {
      best = k;
    }
  }
  return best;
}

std::vector<int> filter_class_ids(const CnnModel& model) {
  std::vector<int> ids(static_cast<size_t>(model.num_filters()));
  for (int j = 0; j < model.num_filters(); ++j) {
    ids[static_cast<size_t>(j)] = class_identity(model.head, j);
  }
  return ids;
}

ThresholdDataset build_threshold_dataset(const CnnModel& model,
                                         const LabeledCorpus& corpus) {
  if (corpus.documents.empty()) {
    throw DataError("build_threshold_dataset: empty corpus");
  }
  std::vector<int> class_ids = filter_class_ids(model);
  ThresholdDataset dataset;
  dataset.per_filter.resize(static_cast<size_t>(model.num_filters()));
  for (auto& column : dataset.per_filter) {
    column.reserve(corpus.documents.size());
  }
  for (const auto& doc : corpus.documents) {
    ForwardResult fwd = forward(doc, model);
    int pred = static_cast<int>(argmax(fwd.probs));
    for (int j = 0; j < model.num_filters(); ++j) {
      dataset.per_filter[static_cast<size_t>(j)].push_back(
          {fwd.pool.pooled[static_cast<size_t>(j)], pred == class_ids[static_cast<size_t>(j)]});
    }
  }
  return dataset;
}

std::optional<double> purity(std::span<const ThresholdPair> pairs, double t) {
  size_t above = 0;
  size_t correlated = 0;
  for (const auto& pair : pairs) {
    if (pair.p >= t) {
      ++above;
      if (pair.correlated) {
        ++correlated;
      }
    }
  }
  if (above == 0) {
    return std::nullopt;
  }
  return static_cast<double>(correlated) / static_cast<double>(above);
}

ThresholdChoice select_threshold(std::span<const ThresholdPair> pairs,
                                 double target_purity) {
  std::vector<double> candidates;
  candidates.reserve(pairs.size() + 1);
  candidates.push_back(0.0);
  for (const auto& pair : pairs) {
    candidates.push_back(pair.p);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  for (double t : candidates) {
    std::optional<double> pur = purity(pairs, t);
    if (pur.has_value() && *pur >= target_purity) {
      size_t above = 0;
      for (const auto& pair : pairs) {
        if (pair.p >= t) {
          ++above;
        }
      }
      double coverage = pairs.empty()
                            ? 0.0
                            : static_cast<double>(above) / static_cast<double>(pairs.size());
      return {t, *pur, coverage};
    }
  }
  return {std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::quiet_NaN(), 0.0};
}

std::vector<FilterProfile> profiles_from_dataset(const ThresholdDataset& dataset,
                                                 const std::vector<int>& class_ids,
                                                 double target_purity) {
  if (dataset.per_filter.size() != class_ids.size()) {
    throw std::invalid_argument("profiles_from_dataset: filter count mismatch");
  }
  std::vector<FilterProfile> profiles(dataset.per_filter.size());
  for (size_t j = 0; j < dataset.per_filter.size(); ++j) {
    ThresholdChoice choice = select_threshold(dataset.per_filter[j], target_purity);
    profiles[j] = {static_cast<int>(j), class_ids[j], choice.t, choice.purity,
                   choice.coverage};
  }
  return profiles;
}

std::vector<FilterProfile> derive_profiles(const CnnModel& model,
                                           const LabeledCorpus& corpus,
                                           double target_purity) {
  return profiles_from_dataset(build_threshold_dataset(model, corpus),
                               filter_class_ids(model), target_purity);
}

namespace {

DenseVector threshold_vector(const CnnModel& model,
                             std::span<const FilterProfile> profiles) {
  if (static_cast<int>(profiles.size()) != model.num_filters()) {
    throw std::invalid_argument("profiles do not cover every filter");
  }
  DenseVector thresholds(profiles.size());
  for (size_t j = 0; j < profiles.size(); ++j) {
    if (profiles[j].filter_id != static_cast<int>(j)) {
      throw std::invalid_argument("profiles must be ordered by filter id");
    }
    thresholds[j] = profiles[j].threshold;
  }
  return thresholds;
}

}  // namespace

ForwardResult thresholded_forward(const Document& doc, const CnnModel& model,
                                  std::span<const FilterProfile> profiles) {
  DenseVector thresholds = threshold_vector(model, profiles);
  return forward(doc, model, thresholds);
}

ThresholdedEval evaluate_thresholded(const CnnModel& model,
                                     std::span<const FilterProfile> profiles,
                                     const LabeledCorpus& corpus) {
  if (corpus.documents.empty()) {
    throw DataError("evaluate_thresholded: empty corpus");
  }
  DenseVector thresholds = threshold_vector(model, profiles);
  size_t correct = 0;
  std::vector<size_t> passing(profiles.size(), 0);
  for (const auto& doc : corpus.documents) {
    ForwardResult fwd = forward(doc, model, thresholds);
    if (static_cast<int>(argmax(fwd.probs)) == doc.label) {
      ++correct;
    }
    for (size_t j = 0; j < profiles.size(); ++j) {
      double post_relu = std::max(fwd.pool.pre_relu[j], 0.0);
      if (post_relu >= thresholds[j]) {
        ++passing[j];
      }
    }
  }
  double docs = static_cast<double>(corpus.documents.size());
  double coverage_sum = 0.0;
  for (size_t count : passing) {
    coverage_sum += static_cast<double>(count) / docs;
  }
  return {static_cast<double>(correct) / docs,
          profiles.empty() ? 0.0 : coverage_sum / static_cast<double>(profiles.size())};
}

std::vector<SweepRow> purity_sweep(const CnnModel& model,
                                   const LabeledCorpus& fit_corpus,
                                   const LabeledCorpus& eval_corpus,
                                   double step) {
  if (step <= 0.0 || step > 1.0) {
    throw std::invalid_argument("purity_sweep: step must lie in (0, 1]");
  }
  ThresholdDataset dataset = build_threshold_dataset(model, fit_corpus);
  std::vector<int> class_ids = filter_class_ids(model);
  std::vector<SweepRow> rows;
  // walk an integer grid so 0.05 steps land exactly on 1.0
  int steps = static_cast<int>(std::llround(1.0 / step));
  for (int i = 0; i <= steps; ++i) {
    double target = std::min(1.0, static_cast<double>(i) * step);
    auto profiles = profiles_from_dataset(dataset, class_ids, target);
    ThresholdedEval eval = evaluate_thresholded(model, profiles, eval_corpus);
    int informative = 0;
    for (const auto& profile : profiles) {
      if (profile.informative()) {
        ++informative;
      }
    }
    rows.push_back({target, eval.accuracy, eval.mean_coverage, informative});
  }
  return rows;
}

}  // namespace convlens
