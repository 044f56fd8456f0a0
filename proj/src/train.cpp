#include "convlens/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace convlens {

double cross_entropy(const DenseVector& probs, int label) {
  if (label < 0 || static_cast<size_t>(label) >= probs.size()) {
    throw std::invalid_argument("cross_entropy: label out of range");
  }
  return -std::log(probs[static_cast<size_t>(label)]);
}

double cross_entropy_logits(const DenseVector& logits, int label) {
  if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
    throw std::invalid_argument("cross_entropy: label out of range");
  }
  double zmax = logits[argmax(logits)];
  double sum = 0.0;
  for (double z : logits) {
    sum += std::exp(z - zmax);
  }
  return std::log(sum) - (logits[static_cast<size_t>(label)] - zmax);
}

Gradients zero_gradients(const CnnModel& model) {
  Gradients g;
  g.head = DenseMatrix(model.num_classes(), model.num_filters());
  g.head_bias.assign(static_cast<size_t>(model.num_classes()), 0.0);
  g.filter_weights.reserve(model.filters.size());
  for (const auto& f : model.filters) {
    g.filter_weights.emplace_back(f.weights.rows, f.weights.cols);
  }
  g.filter_bias.assign(model.filters.size(), 0.0);
  return g;
}

void accumulate(Gradients& acc, const Gradients& g) {
  for (size_t i = 0; i < acc.head.values.size(); ++i) {
    acc.head.values[i] += g.head.values[i];
  }
  for (size_t i = 0; i < acc.head_bias.size(); ++i) {
    acc.head_bias[i] += g.head_bias[i];
  }
  for (size_t j = 0; j < acc.filter_weights.size(); ++j) {
    auto& a = acc.filter_weights[j].values;
    const auto& b = g.filter_weights[j].values;
    for (size_t i = 0; i < a.size(); ++i) {
      a[i] += b[i];
    }
    acc.filter_bias[j] += g.filter_bias[j];
  }
  for (const auto& [row, grad] : g.embedding_rows) {
    auto [it, inserted] = acc.embedding_rows.try_emplace(row, grad.size(), 0.0);
    for (size_t i = 0; i < grad.size(); ++i) {
      it->second[i] += grad[i];
    }
  }
}

void scale(Gradients& g, double factor) {
  for (double& v : g.head.values) v *= factor;
  for (double& v : g.head_bias) v *= factor;
  for (auto& w : g.filter_weights) {
    for (double& v : w.values) v *= factor;
  }
  for (double& v : g.filter_bias) v *= factor;
  for (auto& [row, grad] : g.embedding_rows) {
    for (double& v : grad) v *= factor;
  }
}

Gradients backward(const Document& doc, int label, const CnnModel& model,
                   bool fine_tune_embeddings, double* loss_out) {
  ForwardResult fwd = forward(doc, model);
  if (loss_out != nullptr) {
    *loss_out = cross_entropy_logits(fwd.logits, label);
  }

  int c = model.num_classes();
  int m = model.num_filters();
  if (label < 0 || label >= c) {
    throw std::invalid_argument("backward: label out of range");
  }

  Gradients g = zero_gradients(model);

  DenseVector dlogits(fwd.probs);
  dlogits[static_cast<size_t>(label)] -= 1.0;

  for (int k = 0; k < c; ++k) {
    for (int j = 0; j < m; ++j) {
      g.head(k, j) = dlogits[static_cast<size_t>(k)] * fwd.pool.pooled[static_cast<size_t>(j)];
    }
    if (model.head_bias_enabled) {
      g.head_bias[static_cast<size_t>(k)] = dlogits[static_cast<size_t>(k)];
    }
  }

  for (int j = 0; j < m; ++j) {
    // max-pool routes to the argmax ngram; ReLU gate kills pre_relu <= 0
    if (fwd.pool.pre_relu[static_cast<size_t>(j)] <= 0.0) {
      continue;
    }
    double dpre = 0.0;
    for (int k = 0; k < c; ++k) {
      dpre += dlogits[static_cast<size_t>(k)] * model.head(k, j);
    }
    const ConvFilter& f = model.filters[static_cast<size_t>(j)];
    const auto& window = fwd.pool.provenance[static_cast<size_t>(j)].ngram_ids;
    g.filter_bias[static_cast<size_t>(j)] = dpre;
    auto& gw = g.filter_weights[static_cast<size_t>(j)];
    for (int i = 0; i < f.width; ++i) {
      int32_t word = window[static_cast<size_t>(i)];
      auto emb = model.embeddings.row(word);
      for (int r = 0; r < f.weights.rows; ++r) {
        gw(r, i) += dpre * emb[static_cast<size_t>(r)];
      }
      if (fine_tune_embeddings && word != kPadId) {
        auto [it, inserted] =
            g.embedding_rows.try_emplace(word, static_cast<size_t>(f.weights.rows), 0.0);
        for (int r = 0; r < f.weights.rows; ++r) {
          it->second[static_cast<size_t>(r)] += dpre * f.weights(r, i);
        }
      }
    }
  }
  return g;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }
  state.step += 1;
  double b1 = config.beta1;
  double b2 = config.beta2;
  double b1t = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    double mhat = state.m[i] / b1t;
    double vhat = state.v[i] / b2t;
    params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

namespace {

void validate_config(const TrainConfig& config) {
  if (config.learning_rate <= 0.0) {
    throw std::invalid_argument("train: learning_rate must be positive");
  }
  if (config.beta1 <= 0.0 || config.beta1 >= 1.0 || config.beta2 <= 0.0 ||
      config.beta2 >= 1.0) {
    throw std::invalid_argument("train: betas must lie in (0, 1)");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  }
}

// Keeps Adam state for every parameter group across batches.
struct OptimizerStates {
  AdamState head;
  AdamState head_bias;
  std::vector<AdamState> filter_weights;
  AdamState filter_bias;
  AdamState embeddings;
};

void apply_batch(CnnModel& model, const Gradients& g, OptimizerStates& states,
                 const TrainConfig& config) {
  adam_step(model.head.values, g.head.values, states.head, config);
  if (model.head_bias_enabled) {
    adam_step(model.head_bias, g.head_bias, states.head_bias, config);
  }
  for (size_t j = 0; j < model.filters.size(); ++j) {
    adam_step(model.filters[j].weights.values, g.filter_weights[j].values,
              states.filter_weights[j], config);
  }
  std::vector<double> biases(model.filters.size());
  for (size_t j = 0; j < model.filters.size(); ++j) {
    biases[j] = model.filters[j].bias;
  }
  adam_step(biases, g.filter_bias, states.filter_bias, config);
  for (size_t j = 0; j < model.filters.size(); ++j) {
    model.filters[j].bias = biases[j];
  }
  if (config.fine_tune_embeddings) {
    std::vector<double> dense(model.embeddings.matrix.values.size(), 0.0);
    int d = model.embeddings.dim;
    for (const auto& [row, grad] : g.embedding_rows) {
      std::copy(grad.begin(), grad.end(),
                dense.begin() + static_cast<size_t>(row) * static_cast<size_t>(d));
    }
    adam_step(model.embeddings.matrix.values, dense, states.embeddings, config);
    // PAD never receives gradient, but pin it to zero regardless
    auto pad_row = model.embeddings.row(kPadId);
    std::fill(pad_row.begin(), pad_row.end(), 0.0);
  }
}

}  // namespace

TrainMetrics train(const LabeledCorpus& train_corpus, const LabeledCorpus* dev_corpus,
                   CnnModel& model, const TrainConfig& config) {
  validate_config(config);
  if (train_corpus.documents.empty()) {
    throw DataError("train: empty corpus");
  }
  for (const auto& doc : train_corpus.documents) {
    if (doc.label >= model.num_classes()) {
      throw DataError("train: label exceeds model class count");
    }
  }

  SeededRng rng(config.seed);
  OptimizerStates states;
  states.filter_weights.resize(model.filters.size());

  TrainMetrics metrics;
  metrics.train_loss.reserve(static_cast<size_t>(config.epochs));
  metrics.dev_accuracy.reserve(static_cast<size_t>(config.epochs));

  std::vector<size_t> order(train_corpus.documents.size());
  std::iota(order.begin(), order.end(), size_t{0});

  double best_acc = -1.0;
  std::vector<uint8_t> best_snapshot;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      Gradients batch = zero_gradients(model);
      for (size_t i = start; i < end; ++i) {
        const Document& doc = train_corpus.documents[order[i]];
        double loss = 0.0;
        Gradients g = backward(doc, doc.label, model, config.fine_tune_embeddings, &loss);
        accumulate(batch, g);
        loss_sum += loss;
      }
      scale(batch, 1.0 / static_cast<double>(end - start));
      apply_batch(model, batch, states, config);
    }
    metrics.train_loss.push_back(loss_sum / static_cast<double>(order.size()));

    if (dev_corpus != nullptr) {
      double acc = evaluate_accuracy(model, *dev_corpus);
      metrics.dev_accuracy.push_back(acc);
      if (acc > best_acc) {
        best_acc = acc;
        best_snapshot = serialize_model(model);
        metrics.best_epoch = epoch;
      }
    } else {
      metrics.dev_accuracy.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }

  if (!best_snapshot.empty()) {
    model = deserialize_model(best_snapshot);
  }
  return metrics;
}

double evaluate_accuracy(const CnnModel& model, const LabeledCorpus& corpus) {
  if (corpus.documents.empty()) {
    throw DataError("evaluate_accuracy: empty corpus");
  }
  size_t correct = 0;
  for (const auto& doc : corpus.documents) {
    if (predict(doc, model) == doc.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.documents.size());
}

namespace {

struct PoolState {
  std::vector<int> positions;  // per (doc, filter)
  std::vector<bool> gates;
  bool near_kink = false;

  bool branches_differ(const PoolState& other) const {
    return positions != other.positions || gates != other.gates;
  }
};

double mean_loss_and_state(const CnnModel& model, const std::vector<Document>& docs,
                           const std::vector<int>& labels, double kink_tol,
                           PoolState& state) {
  double loss = 0.0;
  for (size_t i = 0; i < docs.size(); ++i) {
    ForwardResult fwd = forward(docs[i], model);
    loss += cross_entropy_logits(fwd.logits, labels[i]);
    for (size_t j = 0; j < fwd.pool.pre_relu.size(); ++j) {
      state.positions.push_back(fwd.pool.provenance[j].position);
      state.gates.push_back(fwd.pool.pre_relu[j] > 0.0);
      if (std::abs(fwd.pool.pre_relu[j]) < kink_tol) {
        state.near_kink = true;
      }
    }
  }
  return loss / static_cast<double>(docs.size());
}

}  // namespace

GradCheckResult gradient_check(CnnModel model, const std::vector<Document>& docs,
                               const std::vector<int>& labels, double eps,
                               double kink_tol) {
  if (docs.size() != labels.size() || docs.empty()) {
    throw std::invalid_argument("gradient_check: need matching nonempty docs/labels");
  }

  Gradients analytic = zero_gradients(model);
  for (size_t i = 0; i < docs.size(); ++i) {
    accumulate(analytic, backward(docs[i], labels[i], model, true, nullptr));
  }
  scale(analytic, 1.0 / static_cast<double>(docs.size()));

  GradCheckResult result;
  auto check_param = [&](double* p, double analytic_grad) {
    double orig = *p;
    PoolState plus_state, minus_state;
    *p = orig + eps;
    double loss_plus = mean_loss_and_state(model, docs, labels, kink_tol, plus_state);
    *p = orig - eps;
    double loss_minus = mean_loss_and_state(model, docs, labels, kink_tol, minus_state);
    *p = orig;
    if (plus_state.near_kink || minus_state.near_kink ||
        plus_state.branches_differ(minus_state)) {
      ++result.skipped;
      return;
    }
    double fd = (loss_plus - loss_minus) / (2.0 * eps);
    double denom = std::max({1e-6, std::abs(fd), std::abs(analytic_grad)});
    double rel = std::abs(fd - analytic_grad) / denom;
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  };

  for (size_t i = 0; i < model.head.values.size(); ++i) {
    check_param(&model.head.values[i], analytic.head.values[i]);
  }
  if (model.head_bias_enabled) {
    for (size_t i = 0; i < model.head_bias.size(); ++i) {
      check_param(&model.head_bias[i], analytic.head_bias[i]);
    }
  }
  for (size_t j = 0; j < model.filters.size(); ++j) {
    for (size_t i = 0; i < model.filters[j].weights.values.size(); ++i) {
      check_param(&model.filters[j].weights.values[i],
                  analytic.filter_weights[j].values[i]);
    }
    check_param(&model.filters[j].bias, analytic.filter_bias[j]);
  }
  int d = model.embeddings.dim;
  for (const auto& [row, grad] : analytic.embedding_rows) {
    auto emb_row = model.embeddings.row(row);
    for (int r = 0; r < d; ++r) {
      check_param(&emb_row[static_cast<size_t>(r)], grad[static_cast<size_t>(r)]);
    }
  }
  return result;
}

CnnModel init_model(Vocabulary vocab, EmbeddingTable embeddings,
                    const std::vector<std::pair<int, int>>& filters_per_width,
                    int num_classes, bool head_bias_enabled, SeededRng& rng) {
  if (num_classes < 2) {
    throw std::invalid_argument("init_model: need at least two classes");
  }
  if (embeddings.matrix.rows != vocab.size() || embeddings.dim < 1) {
    throw std::invalid_argument("init_model: embedding table does not match vocabulary");
  }
  CnnModel model;
  model.vocab = std::move(vocab);
  model.embeddings = std::move(embeddings);
  model.head_bias_enabled = head_bias_enabled;

  int d = model.embeddings.dim;
  int next_id = 0;
  for (const auto& [width, count] : filters_per_width) {
    if (width < 1 || count < 0) {
      throw std::invalid_argument("init_model: invalid filter spec");
    }
    for (int k = 0; k < count; ++k) {
      ConvFilter f;
      f.width = width;
      f.filter_id = next_id++;
      f.weights = DenseMatrix(d, width);
      for (double& v : f.weights.values) {
        v = rng.uniform(-0.1, 0.1);
      }
      model.filters.push_back(std::move(f));
    }
  }
  if (model.filters.empty()) {
    throw std::invalid_argument("init_model: no filters");
  }

  model.head = DenseMatrix(num_classes, static_cast<int>(model.filters.size()));
  for (double& v : model.head.values) {
    v = rng.uniform(-0.1, 0.1);
  }
  model.head_bias.assign(static_cast<size_t>(num_classes), 0.0);
  return model;
}

}  // namespace convlens
