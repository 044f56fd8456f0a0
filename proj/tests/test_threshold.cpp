#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "convlens/threshold.hpp"
#include "convlens/train.hpp"

using namespace convlens;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ThresholdPair> make_pairs(
    const std::vector<std::pair<double, bool>>& raw) {
  std::vector<ThresholdPair> pairs;
  for (const auto& [p, c] : raw) {
    pairs.push_back({p, c});
  }
  return pairs;
}

// Exhaustive reference: try every candidate (0 plus observed values) by brute
// force and keep the lowest that reaches the target.
ThresholdChoice select_oracle(const std::vector<ThresholdPair>& pairs,
                              double target) {
  std::vector<double> candidates = {0.0};
  for (const auto& pr : pairs) {
    candidates.push_back(pr.p);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  for (double t : candidates) {
    int above = 0;
    int correlated = 0;
    for (const auto& pr : pairs) {
      if (pr.p >= t) {
        ++above;
        if (pr.correlated) {
          ++correlated;
        }
      }
    }
    if (above == 0) {
      continue;
    }
    double pur = static_cast<double>(correlated) / above;
    if (pur >= target) {
      int covered = 0;
      for (const auto& pr : pairs) {
        if (pr.p >= t) {
          ++covered;
        }
      }
      return {t, pur, pairs.empty() ? 0.0
                                    : static_cast<double>(covered) / pairs.size()};
    }
  }
  return {kInf, std::numeric_limits<double>::quiet_NaN(), 0.0};
}

CnnModel tiny_model() {
  Vocabulary vocab;
  vocab.add("good");  // id 2
  vocab.add("bad");   // id 3
  CnnModel model;
  model.vocab = vocab;
  model.embeddings.dim = 1;
  model.embeddings.matrix = DenseMatrix(4, 1);
  model.embeddings.matrix(2, 0) = 1.0;
  model.embeddings.matrix(3, 0) = -1.0;
  ConvFilter f;
  f.width = 1;
  f.filter_id = 0;
  f.bias = 0.0;
  f.weights = DenseMatrix(1, 1);
  f.weights(0, 0) = 1.0;  // score = embedding value
  model.filters.push_back(f);
  model.head = DenseMatrix(2, 1);
  model.head(0, 0) = -1.0;
  model.head(1, 0) = 1.0;  // filter votes class 1
  model.head_bias = {0.0, 0.0};
  model.head_bias_enabled = true;
  return model;
}

}  // namespace

TEST_CASE("class_identity picks the largest head weight, ties to lowest class") {
  DenseMatrix head(3, 2);
  head(0, 0) = 0.2;
  head(1, 0) = 0.9;
  head(2, 0) = -0.5;
  head(0, 1) = 0.7;
  head(1, 1) = 0.7;
  head(2, 1) = 0.1;
  CHECK(class_identity(head, 0) == 1);
  CHECK(class_identity(head, 1) == 0);  // tie between classes 0 and 1
}

TEST_CASE("purity counts correlated pairs at or above t") {
  auto pairs = make_pairs({{1.0, true}, {2.0, false}, {3.0, true}});
  CHECK(purity(pairs, 0.0).value() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(purity(pairs, 1.5).value() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(purity(pairs, 2.5).value() == 1.0);
  CHECK(purity(pairs, 3.0).value() == 1.0);  // boundary is inclusive
  CHECK_FALSE(purity(pairs, 4.0).has_value());
  CHECK_FALSE(purity({}, 0.0).has_value());
}

TEST_CASE("select_threshold hand cases") {
  // at t=0 purity is 1/2; dropping the low uncorrelated pair reaches 1
  auto pairs = make_pairs({{0.5, false}, {2.0, true}});
  ThresholdChoice choice = select_threshold(pairs, 0.75);
  CHECK(choice.t == 2.0);
  CHECK(choice.purity == 1.0);
  CHECK(choice.coverage == 0.5);

  // already pure at zero: picks the lowest candidate
  auto easy = make_pairs({{1.0, true}, {2.0, true}});
  ThresholdChoice low = select_threshold(easy, 0.75);
  CHECK(low.t == 0.0);
  CHECK(low.purity == 1.0);
  CHECK(low.coverage == 1.0);

  // nothing ever reaches the target: sentinel
  auto hopeless = make_pairs({{1.0, false}, {2.0, false}});
  ThresholdChoice sentinel = select_threshold(hopeless, 0.75);
  CHECK(std::isinf(sentinel.t));
  CHECK(sentinel.t > 0.0);
  CHECK(std::isnan(sentinel.purity));
  CHECK(sentinel.coverage == 0.0);

  ThresholdChoice empty = select_threshold({}, 0.75);
  CHECK(std::isinf(empty.t));
}

TEST_CASE("select_threshold matches the exhaustive oracle") {
  SeededRng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ThresholdPair> pairs;
    for (int i = 0; i < 20; ++i) {
      double p = rng.uniform(0.0, 4.0);
      if (rng.uniform01() < 0.2) {
        p = 0.0;  // exercise ties with the zero candidate
      }
      pairs.push_back({p, rng.uniform01() < 0.6});
    }
    double target = rng.uniform(0.3, 1.0);
    ThresholdChoice got = select_threshold(pairs, target);
    ThresholdChoice want = select_oracle(pairs, target);
    if (std::isinf(want.t)) {
      CHECK(std::isinf(got.t));
      CHECK(std::isnan(got.purity));
      CHECK(got.coverage == 0.0);
    } else {
      CHECK(got.t == want.t);
      CHECK(got.purity == want.purity);
      CHECK(got.coverage == want.coverage);
    }

    // order of observations must not matter
    rng.shuffle(pairs);
    ThresholdChoice reshuffled = select_threshold(pairs, target);
    CHECK(reshuffled.t == got.t);
    CHECK((std::isnan(reshuffled.purity) == std::isnan(got.purity)));
    CHECK(reshuffled.coverage == got.coverage);
  }
}

TEST_CASE("raising the target never lowers t or raises coverage") {
  SeededRng rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ThresholdPair> pairs;
    for (int i = 0; i < 40; ++i) {
      pairs.push_back({rng.uniform(0.0, 3.0), rng.uniform01() < 0.5});
    }
    double prev_t = 0.0;
    double prev_cov = 2.0;
    for (double target = 0.0; target <= 1.0; target += 0.1) {
      ThresholdChoice choice = select_threshold(pairs, target);
      CHECK(choice.t >= prev_t);
      CHECK(choice.coverage <= prev_cov);
      prev_t = choice.t;
      prev_cov = choice.coverage;
    }
  }
}

TEST_CASE("build_threshold_dataset records pooled values and correlation") {
  CnnModel model = tiny_model();
  LabeledCorpus corpus;
  corpus.num_classes = 2;
  Document pos;  // "good good" -> pooled 1, prediction class 1 == identity
  pos.token_ids = {2, 2};
  pos.label = 1;
  Document neg;  // "bad" -> pooled 0 (ReLU), prediction class 0 != identity
  neg.token_ids = {3};
  neg.label = 0;
  corpus.documents = {pos, neg};

  ThresholdDataset dataset = build_threshold_dataset(model, corpus);
  REQUIRE(dataset.per_filter.size() == 1);
  REQUIRE(dataset.per_filter[0].size() == 2);
  CHECK(dataset.per_filter[0][0].p == 1.0);
  CHECK(dataset.per_filter[0][0].correlated);
  CHECK(dataset.per_filter[0][1].p == 0.0);
  CHECK_FALSE(dataset.per_filter[0][1].correlated);

  // correlation compares against the model's own prediction, not the label
  Document mislabeled = pos;
  mislabeled.label = 0;
  corpus.documents = {mislabeled};
  ThresholdDataset again = build_threshold_dataset(model, corpus);
  CHECK(again.per_filter[0][0].correlated);
}

TEST_CASE("derive_profiles composes dataset, identities, and selection") {
  SeededRng rng(73);
  Vocabulary vocab;
  for (int i = 0; i < 12; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  EmbeddingTable emb = random_embeddings(vocab, 4, rng);
  CnnModel model = init_model(std::move(vocab), std::move(emb), {{2, 2}, {3, 1}}, 2,
                              true, rng);

  LabeledCorpus corpus;
  corpus.num_classes = 2;
  for (int i = 0; i < 30; ++i) {
    Document doc;
    int len = 2 + rng.uniform_int(6);
    for (int t = 0; t < len; ++t) {
      doc.token_ids.push_back(2 + rng.uniform_int(12));
    }
    doc.label = i % 2;
    corpus.documents.push_back(std::move(doc));
  }

  std::vector<FilterProfile> direct = derive_profiles(model, corpus, 0.6);
  ThresholdDataset dataset = build_threshold_dataset(model, corpus);
  std::vector<FilterProfile> composed =
      profiles_from_dataset(dataset, filter_class_ids(model), 0.6);

  REQUIRE(direct.size() == composed.size());
  REQUIRE(direct.size() == static_cast<size_t>(model.num_filters()));
  for (size_t j = 0; j < direct.size(); ++j) {
    CHECK(direct[j].filter_id == composed[j].filter_id);
    CHECK(direct[j].filter_id == static_cast<int>(j));
    CHECK(direct[j].class_id == composed[j].class_id);
    CHECK(direct[j].class_id == class_identity(model.head, static_cast<int>(j)));
    CHECK(direct[j].threshold == composed[j].threshold);
    CHECK((std::isnan(direct[j].achieved_purity) ==
           std::isnan(composed[j].achieved_purity)));
    if (!std::isnan(direct[j].achieved_purity)) {
      CHECK(direct[j].achieved_purity == composed[j].achieved_purity);
    }
    CHECK(direct[j].coverage == composed[j].coverage);
    CHECK(direct[j].informative() == std::isfinite(direct[j].threshold));

    // profile agrees with running selection on that filter's pairs alone
    ThresholdChoice choice = select_threshold(dataset.per_filter[j], 0.6);
    CHECK(direct[j].threshold == choice.t);
    CHECK(direct[j].coverage == choice.coverage);
  }
}

TEST_CASE("thresholded_forward at t=0 reproduces the ReLU forward pass") {
  SeededRng rng(74);
  Vocabulary vocab;
  for (int i = 0; i < 10; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  EmbeddingTable emb = random_embeddings(vocab, 3, rng);
  CnnModel model = init_model(std::move(vocab), std::move(emb), {{2, 2}}, 2, true,
                              rng);

  std::vector<FilterProfile> zero_profiles;
  for (int j = 0; j < model.num_filters(); ++j) {
    zero_profiles.push_back({j, class_identity(model.head, j), 0.0, 1.0, 1.0});
  }

  for (int trial = 0; trial < 50; ++trial) {
    Document doc;
    int len = 1 + rng.uniform_int(8);
    for (int t = 0; t < len; ++t) {
      doc.token_ids.push_back(2 + rng.uniform_int(10));
    }
    ForwardResult relu = forward(doc, model);
    ForwardResult gated = thresholded_forward(doc, model, zero_profiles);
    CHECK(relu.logits == gated.logits);
    CHECK(relu.pool.pooled == gated.pool.pooled);
    CHECK(relu.pool.pre_relu == gated.pool.pre_relu);
  }
}

TEST_CASE("thresholded_forward with infinite thresholds leaves only head bias") {
  SeededRng rng(75);
  Vocabulary vocab;
  for (int i = 0; i < 6; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  EmbeddingTable emb = random_embeddings(vocab, 3, rng);
  CnnModel model = init_model(std::move(vocab), std::move(emb), {{2, 2}}, 2, true,
                              rng);
  model.head_bias = {0.25, -0.75};

  std::vector<FilterProfile> blocked;
  for (int j = 0; j < model.num_filters(); ++j) {
    blocked.push_back({j, class_identity(model.head, j), kInf,
                       std::numeric_limits<double>::quiet_NaN(), 0.0});
  }

  Document doc;
  doc.token_ids = {2, 3, 4};
  ForwardResult result = thresholded_forward(doc, model, blocked);
  CHECK(result.logits == model.head_bias);
  for (double v : result.pool.pooled) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("thresholded_forward keeps sub-threshold scores out but not pre_relu") {
  CnnModel model = tiny_model();
  Document doc;
  doc.token_ids = {2};  // score 1.0

  std::vector<FilterProfile> pass = {{0, 1, 1.0, 1.0, 1.0}};
  ForwardResult passed = thresholded_forward(doc, model, pass);
  CHECK(passed.pool.pooled[0] == 1.0);  // >= is inclusive

  std::vector<FilterProfile> block = {{0, 1, 1.5, 1.0, 1.0}};
  ForwardResult gated = thresholded_forward(doc, model, block);
  CHECK(gated.pool.pooled[0] == 0.0);
  CHECK(gated.pool.pre_relu[0] == 1.0);  // raw value still reported

  std::vector<FilterProfile> wrong_arity = {{0, 1, 0.0, 1.0, 1.0},
                                            {1, 1, 0.0, 1.0, 1.0}};
  CHECK_THROWS_AS(thresholded_forward(doc, model, wrong_arity),
                  std::invalid_argument);
}

TEST_CASE("evaluate_thresholded at t=0 gives full coverage and ReLU accuracy") {
  SeededRng rng(76);
  Vocabulary vocab;
  for (int i = 0; i < 10; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  EmbeddingTable emb = random_embeddings(vocab, 3, rng);
  CnnModel model = init_model(std::move(vocab), std::move(emb), {{2, 2}}, 2, true,
                              rng);
  LabeledCorpus corpus;
  corpus.num_classes = 2;
  for (int i = 0; i < 20; ++i) {
    Document doc;
    int len = 2 + rng.uniform_int(5);
    for (int t = 0; t < len; ++t) {
      doc.token_ids.push_back(2 + rng.uniform_int(10));
    }
    doc.label = i % 2;
    corpus.documents.push_back(std::move(doc));
  }

  std::vector<FilterProfile> zero_profiles;
  for (int j = 0; j < model.num_filters(); ++j) {
    zero_profiles.push_back({j, class_identity(model.head, j), 0.0, 1.0, 1.0});
  }
  ThresholdedEval eval = evaluate_thresholded(model, zero_profiles, corpus);
  CHECK(eval.mean_coverage == 1.0);
  CHECK(eval.accuracy == evaluate_accuracy(model, corpus));
}

TEST_CASE("purity_sweep covers the full target range") {
  SeededRng rng(77);
  Vocabulary vocab;
  for (int i = 0; i < 10; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  EmbeddingTable emb = random_embeddings(vocab, 3, rng);
  CnnModel model = init_model(std::move(vocab), std::move(emb), {{2, 2}}, 2, true,
                              rng);
  LabeledCorpus corpus;
  corpus.num_classes = 2;
  for (int i = 0; i < 24; ++i) {
    Document doc;
    int len = 2 + rng.uniform_int(5);
    for (int t = 0; t < len; ++t) {
      doc.token_ids.push_back(2 + rng.uniform_int(10));
    }
    doc.label = i % 2;
    corpus.documents.push_back(std::move(doc));
  }

  std::vector<SweepRow> rows = purity_sweep(model, corpus, corpus, 0.25);
  REQUIRE(rows.size() == 5);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].target_purity ==
          doctest::Approx(0.25 * static_cast<double>(i)).epsilon(1e-12));
    CHECK(rows[i].mean_coverage >= 0.0);
    CHECK(rows[i].mean_coverage <= 1.0);
    CHECK(rows[i].informative_filters >= 0);
    CHECK(rows[i].informative_filters <= model.num_filters());
    if (i > 0) {
      // a stricter target can only shrink what passes the gate
      CHECK(rows[i].mean_coverage <= rows[i - 1].mean_coverage + 1e-12);
      CHECK(rows[i].informative_filters <= rows[i - 1].informative_filters);
    }
  }
  CHECK(rows.front().target_purity == 0.0);
  CHECK(rows.back().target_purity == 1.0);
}
