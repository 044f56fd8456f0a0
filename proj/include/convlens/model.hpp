#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "convlens/corpus.hpp"
#include "convlens/numerics.hpp"

namespace convlens {

struct ConvFilter {
  int width = 0;
  DenseMatrix weights;  // d rows x width cols; column i is slot i
  double bias = 0.0;
  int filter_id = 0;
};

// <embedding, slot i of the filter weights>. Every score in the project is
// assembled from this primitive so equal inputs give bit-equal results.
double slot_dot(std::span<const double> embedding, const ConvFilter& f, int slot);

// Sum of slot dots over the ngram, plus the filter bias.
double ngram_score(std::span<const int32_t> ngram_ids, const ConvFilter& f,
                   const EmbeddingTable& embeddings);

struct CnnModel {
  Vocabulary vocab;
  EmbeddingTable embeddings;
  std::vector<ConvFilter> filters;  // filter_id == position
  DenseMatrix head;                 // c x m
  DenseVector head_bias;            // length c, zero unless trained
  bool head_bias_enabled = true;

  int num_filters() const { return static_cast<int>(filters.size()); }
  int num_classes() const { return head.rows; }
  int embedding_dim() const { return embeddings.dim; }
  int max_width() const;
  std::vector<int> widths() const;  // distinct, ascending
};

struct ConvMap {
  // scores[j][i]: filter j on the ngram starting at padded position i;
  // row j has padded_length - width_j + 1 entries
  std::vector<std::vector<double>> scores;
};

struct PoolProvenance {
  int position = 0;  // start position in the padded document
  std::vector<int32_t> ngram_ids;
};

struct PoolResult {
  DenseVector pooled;    // post-gate (ReLU, or per-filter threshold)
  DenseVector pre_relu;  // raw per-filter maxima
  std::vector<PoolProvenance> provenance;
};

struct ForwardResult {
  DenseVector logits;
  DenseVector probs;
  PoolResult pool;
  ConvMap conv;
  std::vector<int32_t> padded_ids;
};

// Pads the document to the model's max filter width internally. Max-pool
// ties break to the lowest start position.
ForwardResult forward(const Document& doc, const CnnModel& model);

// Same pipeline with the ReLU gate replaced by per-filter thresholds:
// pooled_j = pre_relu_j if pre_relu_j >= thresholds[j] else 0.
ForwardResult forward(const Document& doc, const CnnModel& model,
                      std::span<const double> pool_thresholds);

int predict(const Document& doc, const CnnModel& model);

// Versioned binary format; round trip is bit-exact on all floats. The
// header can carry hashes of the files the model was built from.
std::vector<uint8_t> serialize_model(const CnnModel& model,
                                     const std::map<std::string, uint64_t>& inputs = {});
CnnModel deserialize_model(const std::vector<uint8_t>& bytes);
std::map<std::string, uint64_t> deserialize_model_inputs(
    const std::vector<uint8_t>& bytes);

void save_model(const CnnModel& model, const std::string& path,
                const std::map<std::string, uint64_t>& inputs = {});
CnnModel load_model(const std::string& path);

}  // namespace convlens
