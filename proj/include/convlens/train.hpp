#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "convlens/model.hpp"

namespace convlens {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 50;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t seed = 42;
  bool fine_tune_embeddings = true;
};

struct TrainMetrics {
  std::vector<double> train_loss;    // mean per-example loss, one per epoch
  std::vector<double> dev_accuracy;  // NaN entries when no dev corpus given
  int best_epoch = -1;
};

// -log probs[label]
double cross_entropy(const DenseVector& probs, int label);
// log-sum-exp form; what training and the gradient checker differentiate
double cross_entropy_logits(const DenseVector& logits, int label);

struct Gradients {
  DenseMatrix head;                         // c x m
  DenseVector head_bias;                    // c
  std::vector<DenseMatrix> filter_weights;  // per filter, d x width
  DenseVector filter_bias;                  // m
  std::map<int32_t, DenseVector> embedding_rows;  // touched rows; never PAD
};

Gradients zero_gradients(const CnnModel& model);
void accumulate(Gradients& acc, const Gradients& g);
void scale(Gradients& g, double factor);

// Single-example gradients. Gradient flows only through each filter's
// argmax ngram, and only when pre_relu > 0 (zero at exactly 0).
Gradients backward(const Document& doc, int label, const CnnModel& model,
                   bool fine_tune_embeddings = true, double* loss_out = nullptr);

struct AdamState {
  int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// Standard Adam update with bias correction.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const TrainConfig& config);

// Mini-batch Adam over shuffled epochs; deterministic under a fixed seed.
// Restores the best-dev-accuracy snapshot at the end when dev is given.
TrainMetrics train(const LabeledCorpus& train_corpus, const LabeledCorpus* dev_corpus,
                   CnnModel& model, const TrainConfig& config);

double evaluate_accuracy(const CnnModel& model, const LabeledCorpus& corpus);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // parameters sitting on a ReLU/max-pool kink
};

// Central finite differences against backward() over the mean loss of the
// given documents. Parameters whose perturbation flips a pooling argmax or
// ReLU gate, or that sit within kink_tol of a gate boundary, are skipped.
GradCheckResult gradient_check(CnnModel model, const std::vector<Document>& docs,
                               const std::vector<int>& labels, double eps = 1e-5,
                               double kink_tol = 1e-7);

// filters_per_width: (width, count) pairs. Weights and head are drawn from
// uniform(-0.1, 0.1); biases start at zero.
CnnModel init_model(Vocabulary vocab, EmbeddingTable embeddings,
                    const std::vector<std::pair<int, int>>& filters_per_width,
                    int num_classes, bool head_bias_enabled, SeededRng& rng);

}  // namespace convlens
