#include "convlens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace convlens {

namespace {

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) {
    return v;
  }
  return nullptr;
}

double number_or(const nlohmann::json& j, double fallback) {
  if (j.is_null()) {
    return fallback;
  }
  return j.get<double>();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_vector(const DenseVector& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += fmt(v[i]);
  }
  out += "]";
  return out;
}

std::string marked(const std::string& ngram, bool bold, bool italic) {
  if (bold) {
    return "*" + ngram + "*";
  }
  if (italic) {
    return "_" + ngram + "_";
  }
  return ngram;
}

nlohmann::json ids_to_json(const std::vector<int32_t>& ids) {
  return nlohmann::json(ids);
}

std::vector<int32_t> ids_from_json(const nlohmann::json& j) {
  return j.get<std::vector<int32_t>>();
}

nlohmann::json scored_ngram_to_json(const ScoredNgram& ngram, const Vocabulary& vocab) {
  nlohmann::json j;
  j["ids"] = ids_to_json(ngram.ids);
  j["tokens"] = vocab.tokens(ngram.ids);
  j["score"] = ngram.score;
  j["slots"] = ngram.slots.activations;
  j["total"] = ngram.slots.total;
  j["filter_id"] = ngram.slots.filter_id;
  return j;
}

ScoredNgram scored_ngram_from_json(const nlohmann::json& j) {
  ScoredNgram ngram;
  ngram.ids = ids_from_json(j.at("ids"));
  ngram.score = j.at("score").get<double>();
  ngram.slots.ngram_ids = ngram.ids;
  ngram.slots.filter_id = j.at("filter_id").get<int>();
  ngram.slots.activations = j.at("slots").get<DenseVector>();
  ngram.slots.total = j.at("total").get<double>();
  return ngram;
}

}  // namespace

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    out += tokens[i];
  }
  return out;
}

std::vector<FilterSummary> summarize_model(
    const CnnModel& model, std::span<const FilterProfile> profiles,
    std::span<const FilterClustering> clusterings,
    const std::vector<std::vector<NegativeNgram>>& negatives) {
  size_t m = static_cast<size_t>(model.num_filters());
  if (profiles.size() != m || clusterings.size() != m || negatives.size() != m) {
    throw std::invalid_argument("summarize_model: per-filter inputs must cover every filter");
  }
  std::vector<FilterSummary> summaries(m);
  for (size_t j = 0; j < m; ++j) {
    if (profiles[j].filter_id != static_cast<int>(j) ||
        clusterings[j].filter_id != static_cast<int>(j)) {
      throw std::invalid_argument("summarize_model: inputs must be ordered by filter id");
    }
    FilterSummary& s = summaries[j];
    s.filter_id = static_cast<int>(j);
    s.width = model.filters[j].width;
    s.class_id = profiles[j].class_id;
    s.informative = profiles[j].informative();
    s.threshold = profiles[j].threshold;
    s.achieved_purity = profiles[j].achieved_purity;
    s.coverage = profiles[j].coverage;
    if (s.informative) {
      s.bandwidth = clusterings[j].bandwidth;
      s.point_count = clusterings[j].point_count;
      s.clusters = clusterings[j].clusters;
      s.negatives = negatives[j];
    }
  }
  return summaries;
}

PredictionExplanation explain_prediction(const Document& doc, const CnnModel& model,
                                         std::span<const FilterProfile> profiles,
                                         const std::string* original_text) {
  if (static_cast<int>(profiles.size()) != model.num_filters()) {
    throw std::invalid_argument("explain_prediction: profiles must cover every filter");
  }
  ForwardResult fwd = forward(doc, model);
  PredictionExplanation out;
  out.predicted_class = static_cast<int>(argmax(fwd.probs));
  out.probability = fwd.probs[static_cast<size_t>(out.predicted_class)];
  out.text = original_text ? *original_text : join_tokens(model.vocab.tokens(doc.token_ids));

  for (int j = 0; j < model.num_filters(); ++j) {
    const ConvFilter& filter = model.filters[static_cast<size_t>(j)];
    const auto& winner = fwd.pool.provenance[static_cast<size_t>(j)].ngram_ids;
    SlotActivationVector slots = slot_decompose(winner, filter, model.embeddings);
    ExplanationRow row;
    row.filter_id = j;
    row.class_id = profiles[static_cast<size_t>(j)].class_id;
    row.winning_ids = winner;
    row.winning_tokens = model.vocab.tokens(winner);
    row.slot_scores = slots.activations;
    row.score = slots.total + filter.bias;
    double t = profiles[static_cast<size_t>(j)].threshold;
    row.passed_threshold = fwd.pool.pre_relu[static_cast<size_t>(j)] >= t;
    if (!row.passed_threshold && std::isfinite(t)) {
      // Case 2 pattern: the negative slots alone hold the ngram below t
      double negative_sum = 0.0;
      bool any_negative = false;
      for (double a : slots.activations) {
        if (a < 0.0) {
          negative_sum += a;
          any_negative = true;
        }
      }
      row.case2_negative = any_negative && (row.score - negative_sum) >= t;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

nlohmann::json profile_to_json(const FilterProfile& profile) {
  nlohmann::json j;
  j["filter_id"] = profile.filter_id;
  j["class_id"] = profile.class_id;
  j["informative"] = profile.informative();
  j["threshold"] = finite_or_null(profile.threshold);
  j["purity"] = finite_or_null(profile.achieved_purity);
  j["coverage"] = profile.coverage;
  return j;
}

FilterProfile profile_from_json(const nlohmann::json& j) {
  FilterProfile profile;
  profile.filter_id = j.at("filter_id").get<int>();
  profile.class_id = j.at("class_id").get<int>();
  profile.threshold =
      number_or(j.at("threshold"), std::numeric_limits<double>::infinity());
  profile.achieved_purity =
      number_or(j.at("purity"), std::numeric_limits<double>::quiet_NaN());
  profile.coverage = j.at("coverage").get<double>();
  if (j.at("informative").get<bool>() != profile.informative()) {
    throw DataError("profile record: informative flag contradicts threshold");
  }
  return profile;
}

nlohmann::json clustering_to_json(const FilterClustering& clustering,
                                  const Vocabulary& vocab) {
  nlohmann::json j;
  j["filter_id"] = clustering.filter_id;
  j["point_count"] = clustering.point_count;
  j["bandwidth"] = clustering.bandwidth;
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cluster : clustering.clusters) {
    nlohmann::json c;
    c["centroid"] = cluster.centroid;
    c["size"] = cluster.size;
    c["size_fraction"] = cluster.size_fraction;
    nlohmann::json top = nlohmann::json::array();
    for (const auto& ngram : cluster.top_ngrams) {
      top.push_back(scored_ngram_to_json(ngram, vocab));
    }
    c["top_ngrams"] = std::move(top);
    clusters.push_back(std::move(c));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

FilterClustering clustering_from_json(const nlohmann::json& j) {
  FilterClustering clustering;
  clustering.filter_id = j.at("filter_id").get<int>();
  clustering.point_count = j.at("point_count").get<int>();
  clustering.bandwidth = j.at("bandwidth").get<double>();
  for (const auto& c : j.at("clusters")) {
    NgramCluster cluster;
    cluster.centroid = c.at("centroid").get<DenseVector>();
    cluster.size = c.at("size").get<int>();
    cluster.size_fraction = c.at("size_fraction").get<double>();
    for (const auto& n : c.at("top_ngrams")) {
      cluster.top_ngrams.push_back(scored_ngram_from_json(n));
    }
    clustering.clusters.push_back(std::move(cluster));
  }
  return clustering;
}

nlohmann::json negative_to_json(const NegativeNgram& neg, const Vocabulary& vocab) {
  nlohmann::json j;
  j["base_ids"] = ids_to_json(neg.base_ids);
  j["base_tokens"] = vocab.tokens(neg.base_ids);
  j["variant_ids"] = ids_to_json(neg.variant_ids);
  j["variant_tokens"] = vocab.tokens(neg.variant_ids);
  j["changed_slots"] = neg.changed_slots;
  j["score"] = neg.variant_score;
  j["slots"] = neg.variant_slots.activations;
  j["total"] = neg.variant_slots.total;
  j["filter_id"] = neg.variant_slots.filter_id;
  j["base_rank"] = neg.base_rank;
  j["case"] = neg.case_tag;
  return j;
}

NegativeNgram negative_from_json(const nlohmann::json& j) {
  NegativeNgram neg;
  neg.base_ids = ids_from_json(j.at("base_ids"));
  neg.variant_ids = ids_from_json(j.at("variant_ids"));
  neg.changed_slots = j.at("changed_slots").get<std::vector<int>>();
  neg.variant_score = j.at("score").get<double>();
  neg.variant_slots.ngram_ids = neg.variant_ids;
  neg.variant_slots.filter_id = j.at("filter_id").get<int>();
  neg.variant_slots.activations = j.at("slots").get<DenseVector>();
  neg.variant_slots.total = j.at("total").get<double>();
  neg.base_rank = j.at("base_rank").get<int>();
  neg.case_tag = j.at("case").get<int>();
  if (neg.case_tag != 1 && neg.case_tag != 2) {
    throw DataError("negative record: case must be 1 or 2");
  }
  return neg;
}

nlohmann::json summary_to_json(const FilterSummary& summary, const Vocabulary& vocab) {
  nlohmann::json j;
  j["filter_id"] = summary.filter_id;
  j["width"] = summary.width;
  j["class_id"] = summary.class_id;
  j["informative"] = summary.informative;
  j["threshold"] = finite_or_null(summary.threshold);
  j["purity"] = finite_or_null(summary.achieved_purity);
  j["coverage"] = summary.coverage;
  j["bandwidth"] = summary.bandwidth;
  j["point_count"] = summary.point_count;
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cluster : summary.clusters) {
    nlohmann::json c;
    c["centroid"] = cluster.centroid;
    c["size"] = cluster.size;
    c["size_fraction"] = cluster.size_fraction;
    nlohmann::json top = nlohmann::json::array();
    for (const auto& ngram : cluster.top_ngrams) {
      top.push_back(scored_ngram_to_json(ngram, vocab));
    }
    c["top_ngrams"] = std::move(top);
    clusters.push_back(std::move(c));
  }
  j["clusters"] = std::move(clusters);
  nlohmann::json negatives = nlohmann::json::array();
  for (const auto& neg : summary.negatives) {
    negatives.push_back(negative_to_json(neg, vocab));
  }
  j["negatives"] = std::move(negatives);
  return j;
}

FilterSummary summary_from_json(const nlohmann::json& j) {
  FilterSummary summary;
  summary.filter_id = j.at("filter_id").get<int>();
  summary.width = j.at("width").get<int>();
  summary.class_id = j.at("class_id").get<int>();
  summary.informative = j.at("informative").get<bool>();
  summary.threshold =
      number_or(j.at("threshold"), std::numeric_limits<double>::infinity());
  summary.achieved_purity =
      number_or(j.at("purity"), std::numeric_limits<double>::quiet_NaN());
  summary.coverage = j.at("coverage").get<double>();
  summary.bandwidth = j.at("bandwidth").get<double>();
  summary.point_count = j.at("point_count").get<int>();
  for (const auto& c : j.at("clusters")) {
    NgramCluster cluster;
    cluster.centroid = c.at("centroid").get<DenseVector>();
    cluster.size = c.at("size").get<int>();
    cluster.size_fraction = c.at("size_fraction").get<double>();
    for (const auto& n : c.at("top_ngrams")) {
      cluster.top_ngrams.push_back(scored_ngram_from_json(n));
    }
    summary.clusters.push_back(std::move(cluster));
  }
  for (const auto& n : j.at("negatives")) {
    summary.negatives.push_back(negative_from_json(n));
  }
  return summary;
}

nlohmann::json explanation_to_json(const PredictionExplanation& explanation) {
  nlohmann::json j;
  j["text"] = explanation.text;
  j["predicted_class"] = explanation.predicted_class;
  j["probability"] = explanation.probability;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : explanation.rows) {
    nlohmann::json r;
    r["filter_id"] = row.filter_id;
    r["class_id"] = row.class_id;
    r["ids"] = ids_to_json(row.winning_ids);
    r["tokens"] = row.winning_tokens;
    r["slots"] = row.slot_scores;
    r["score"] = row.score;
    r["passed_threshold"] = row.passed_threshold;
    r["case2_negative"] = row.case2_negative;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

PredictionExplanation explanation_from_json(const nlohmann::json& j) {
  PredictionExplanation explanation;
  explanation.text = j.at("text").get<std::string>();
  explanation.predicted_class = j.at("predicted_class").get<int>();
  explanation.probability = j.at("probability").get<double>();
  for (const auto& r : j.at("rows")) {
    ExplanationRow row;
    row.filter_id = r.at("filter_id").get<int>();
    row.class_id = r.at("class_id").get<int>();
    row.winning_ids = ids_from_json(r.at("ids"));
    row.winning_tokens = r.at("tokens").get<std::vector<std::string>>();
    row.slot_scores = r.at("slots").get<DenseVector>();
    row.score = r.at("score").get<double>();
    row.passed_threshold = r.at("passed_threshold").get<bool>();
    row.case2_negative = r.at("case2_negative").get<bool>();
    explanation.rows.push_back(std::move(row));
  }
  return explanation;
}

std::string render_text(std::span<const FilterSummary> summaries,
                        const Vocabulary& vocab) {
  std::string out;
  for (const auto& s : summaries) {
    out += "== filter " + std::to_string(s.filter_id) + " (width " +
           std::to_string(s.width) + ") -> class " + std::to_string(s.class_id) +
           " ==\n";
    if (!s.informative) {
      out += "uninformative: no threshold met the purity target\n\n";
      continue;
    }
    out += "threshold " + fmt(s.threshold) + "  purity " + fmt(s.achieved_purity) +
           "  coverage " + fmt(s.coverage) + "\n";
    out += "clusters (" + std::to_string(s.point_count) + " passing ngrams, bandwidth " +
           fmt(s.bandwidth) + "):\n";
    for (size_t c = 0; c < s.clusters.size(); ++c) {
      const auto& cluster = s.clusters[c];
      out += "  [" + std::to_string(c) + "] size " +
             fmt(100.0 * cluster.size_fraction) + "% (" + std::to_string(cluster.size) +
             ")  centroid " + fmt_vector(cluster.centroid) + "\n";
      for (const auto& ngram : cluster.top_ngrams) {
        out += "      " + marked(join_tokens(vocab.tokens(ngram.ids)), true, false) +
               "  " + fmt(ngram.score) + "  " + fmt_vector(ngram.slots.activations) +
               "\n";
      }
    }
    if (!s.negatives.empty()) {
      out += "negatives:\n";
      for (const auto& neg : s.negatives) {
        out += "  " +
               marked(join_tokens(vocab.tokens(neg.variant_ids)), false,
                      neg.case_tag == 2) +
               "  " + fmt(neg.variant_score) + "  case " + std::to_string(neg.case_tag) +
               "  base " + marked(join_tokens(vocab.tokens(neg.base_ids)), true, false) +
               "\n";
      }
    }
    out += "\n";
  }
  return out;
}

std::string render_text(const PredictionExplanation& explanation) {
  std::string out;
  out += "text: " + explanation.text + "\n";
  out += "predicted class " + std::to_string(explanation.predicted_class) + "  (p=" +
         fmt(explanation.probability) + ")\n\n";

  std::vector<std::string> ngrams;
  size_t ngram_width = 5;
  for (const auto& row : explanation.rows) {
    ngrams.push_back(marked(join_tokens(row.winning_tokens), row.passed_threshold,
                            row.case2_negative));
    ngram_width = std::max(ngram_width, ngrams.back().size());
  }
  out += "filter  class  score   ngram";
  out.append(ngram_width - 5 + 2, ' ');
  out += "slots\n";
  for (size_t i = 0; i < explanation.rows.size(); ++i) {
    const auto& row = explanation.rows[i];
    char head[64];
    std::snprintf(head, sizeof(head), "%6d  %5d  %6s  ", row.filter_id, row.class_id,
                  fmt(row.score).c_str());
    out += head;
    out += ngrams[i];
    out.append(ngram_width - ngrams[i].size() + 2, ' ');
    out += fmt_vector(row.slot_scores);
    out += "\n";
  }
  return out;
}

}  // namespace convlens
