#include "convlens/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "convlens/artifacts.hpp"
#include "convlens/cluster.hpp"
#include "convlens/negation.hpp"
#include "convlens/report.hpp"
#include "convlens/slots.hpp"
#include "convlens/synthetic.hpp"
#include "convlens/threshold.hpp"
#include "convlens/train.hpp"

namespace convlens {

namespace {

constexpr const char* kProfilesSchema = "convlens/profiles/1";
constexpr const char* kSlotsSchema = "convlens/slots/1";
constexpr const char* kClustersSchema = "convlens/clusters/1";
constexpr const char* kNegativesSchema = "convlens/negatives/1";
constexpr const char* kSummarySchema = "convlens/summary/1";
constexpr const char* kExplanationsSchema = "convlens/explanations/1";
constexpr const char* kEvalSchema = "convlens/eval/1";

uint64_t resolve_default_seed() {
  const char* env = std::getenv("CONVLENS_SEED");
  if (env == nullptr || *env == '\0') {
    return 42;
  }
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw DataError("CONVLENS_SEED must be an unsigned integer");
  }
  return static_cast<uint64_t>(v);
}

std::vector<std::pair<int, int>> parse_filter_spec(const std::string& spec) {
  std::vector<std::pair<int, int>> result;
  std::istringstream stream(spec);
  std::string part;
  while (std::getline(stream, part, ',')) {
    size_t colon = part.find(':');
    if (colon == std::string::npos) {
      throw CLI::ValidationError("--filters", "expected width:count pairs, got " + part);
    }
    try {
      int width = std::stoi(part.substr(0, colon));
      int count = std::stoi(part.substr(colon + 1));
      if (width < 1 || count < 1) {
        throw CLI::ValidationError("--filters", "width and count must be positive");
      }
      result.emplace_back(width, count);
    } catch (const std::invalid_argument&) {
      throw CLI::ValidationError("--filters", "expected width:count pairs, got " + part);
    } catch (const std::out_of_range&) {
      throw CLI::ValidationError("--filters", "value out of range in " + part);
    }
  }
  if (result.empty()) {
    throw CLI::ValidationError("--filters", "no filters given");
  }
  return result;
}

// CLI11 only processes set_config on the root app, so subcommand configs are
// applied by hand: values fill options the command line left untouched, which
// keeps the priority order CLI flag > config file > environment > default.
void apply_config_overlay(CLI::App* cmd, const std::string& path) {
  if (path.empty()) {
    return;
  }
  std::istringstream stream(read_text_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::string where = path + ":" + std::to_string(line_no);
    std::string trimmed = CLI::detail::trim_copy(line);
    if (trimmed.empty() || trimmed[0] == '#') {
      continue;
    }
    size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw DataError(where + ": expected key=value");
    }
    std::string key = CLI::detail::trim_copy(trimmed.substr(0, eq));
    std::string value = CLI::detail::trim_copy(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw DataError(where + ": empty key");
    }
    if (key == "config") {
      throw DataError(where + ": config files cannot nest");
    }
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw DataError(where + ": unknown key " + key);
    }
    if (opt->count() > 0) {
      continue;
    }
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error&) {
      throw DataError(where + ": bad value for " + key);
    }
  }
}

void log_config(const std::string& command,
                const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream line;
  line << "[convlens] " << command << ":";
  for (const auto& [key, value] : entries) {
    line << ' ' << key << '=' << (value.empty() ? "-" : value);
  }
  std::cerr << line.str() << '\n';
}

LabeledCorpus load_corpus_for_model(const std::string& path, const CnnModel& model,
                                    const std::string& split) {
  LabeledCorpus corpus = load_tsv_corpus(path, model.vocab, split);
  if (corpus.num_classes > model.num_classes()) {
    throw DataError(path + ": labels exceed the model's class count");
  }
  return corpus;
}

std::vector<FilterProfile> read_profiles(const std::string& path,
                                         const CnnModel& model) {
  nlohmann::json envelope = read_artifact(path, kProfilesSchema);
  std::vector<FilterProfile> profiles;
  for (const auto& j : envelope.at("data").at("profiles")) {
    profiles.push_back(profile_from_json(j));
  }
  if (static_cast<int>(profiles.size()) != model.num_filters()) {
    throw DataError(path + ": profile count does not match the model");
  }
  for (size_t j = 0; j < profiles.size(); ++j) {
    if (profiles[j].filter_id != static_cast<int>(j)) {
      throw DataError(path + ": profiles out of order");
    }
  }
  return profiles;
}

std::vector<FilterClustering> read_clusterings(const std::string& path,
                                               const CnnModel& model) {
  nlohmann::json envelope = read_artifact(path, kClustersSchema);
  std::vector<FilterClustering> clusterings;
  for (const auto& j : envelope.at("data").at("filters")) {
    clusterings.push_back(clustering_from_json(j));
  }
  if (static_cast<int>(clusterings.size()) != model.num_filters()) {
    throw DataError(path + ": clustering count does not match the model");
  }
  return clusterings;
}

std::vector<std::vector<NegativeNgram>> read_negatives(const std::string& path,
                                                       const CnnModel& model) {
  nlohmann::json envelope = read_artifact(path, kNegativesSchema);
  std::vector<std::vector<NegativeNgram>> negatives;
  for (const auto& j : envelope.at("data").at("filters")) {
    std::vector<NegativeNgram> per_filter;
    for (const auto& n : j.at("negatives")) {
      per_filter.push_back(negative_from_json(n));
    }
    negatives.push_back(std::move(per_filter));
  }
  if (static_cast<int>(negatives.size()) != model.num_filters()) {
    throw DataError(path + ": negatives count does not match the model");
  }
  return negatives;
}

std::map<int, NgramIndex> build_width_indexes(const CnnModel& model,
                                              const LabeledCorpus& corpus) {
  std::map<int, NgramIndex> indexes;
  for (int width : model.widths()) {
    indexes.emplace(width, build_ngram_index(corpus, width, model.max_width()));
  }
  return indexes;
}

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string dev;
  std::string out;
  std::string embeddings;
  std::string filters = "2:4,3:3,4:3";
  int dim = 50;
  int min_count = 2;
  int epochs = 10;
  int batch_size = 50;
  double lr = 1e-3;
  uint64_t seed = 42;
  bool no_head_bias = false;
  bool freeze_embeddings = false;
};

void run_train(const TrainArgs& args) {
  log_config("train", {{"config", args.config},
                       {"corpus", args.corpus},
                       {"dev", args.dev},
                       {"out", args.out},
                       {"embeddings", args.embeddings},
                       {"dim", std::to_string(args.dim)},
                       {"filters", args.filters},
                       {"min_count", std::to_string(args.min_count)},
                       {"epochs", std::to_string(args.epochs)},
                       {"batch_size", std::to_string(args.batch_size)},
                       {"lr", std::to_string(args.lr)},
                       {"seed", std::to_string(args.seed)},
                       {"head_bias", args.no_head_bias ? "off" : "on"},
                       {"fine_tune", args.freeze_embeddings ? "off" : "on"}});

  auto filter_spec = parse_filter_spec(args.filters);
  auto [train_corpus, vocab] =
      load_tsv_corpus_building_vocab(args.corpus, args.min_count, "train");

  SeededRng rng(args.seed);
  EmbeddingTable embeddings =
      args.embeddings.empty()
          ? random_embeddings(vocab, args.dim, rng)
          : load_embeddings(args.embeddings, vocab, args.dim, rng);

  CnnModel model = init_model(std::move(vocab), std::move(embeddings), filter_spec,
                              train_corpus.num_classes, !args.no_head_bias, rng);

  LabeledCorpus dev_corpus;
  bool has_dev = !args.dev.empty();
  if (has_dev) {
    dev_corpus = load_corpus_for_model(args.dev, model, "dev");
  }

  TrainConfig config;
  config.epochs = args.epochs;
  config.batch_size = args.batch_size;
  config.learning_rate = args.lr;
  config.seed = args.seed;
  config.fine_tune_embeddings = !args.freeze_embeddings;

  TrainMetrics metrics =
      train(train_corpus, has_dev ? &dev_corpus : nullptr, model, config);

  std::map<std::string, uint64_t> inputs;
  inputs[args.corpus] = hash_file(args.corpus);
  if (has_dev) {
    inputs[args.dev] = hash_file(args.dev);
  }
  if (!args.embeddings.empty()) {
    inputs[args.embeddings] = hash_file(args.embeddings);
  }
  save_model(model, args.out, inputs);

  std::cout << "train_loss " << metrics.train_loss.back() << '\n';
  if (has_dev) {
    std::cout << "best_epoch " << metrics.best_epoch << '\n';
    std::cout << "dev_accuracy "
              << metrics.dev_accuracy[static_cast<size_t>(metrics.best_epoch)] << '\n';
  }
  std::cout << "model " << args.out << '\n';
}

struct EvalArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string profiles;
  std::string out;
};

void run_eval(const EvalArgs& args) {
  log_config("eval", {{"config", args.config},
                      {"model", args.model},
                      {"corpus", args.corpus},
                      {"profiles", args.profiles},
                      {"out", args.out}});
  CnnModel model = load_model(args.model);
  LabeledCorpus corpus = load_corpus_for_model(args.corpus, model, "eval");
  double relu_accuracy = evaluate_accuracy(model, corpus);
  std::cout << "relu_accuracy " << relu_accuracy << '\n';

  nlohmann::json data;
  data["relu_accuracy"] = relu_accuracy;
  data["thresholded_accuracy"] = nullptr;
  data["mean_coverage"] = nullptr;
  std::vector<std::string> input_paths = {args.model, args.corpus};
  if (!args.profiles.empty()) {
    auto profiles = read_profiles(args.profiles, model);
    ThresholdedEval eval = evaluate_thresholded(model, profiles, corpus);
    std::cout << "thresholded_accuracy " << eval.accuracy << '\n';
    std::cout << "mean_coverage " << eval.mean_coverage << '\n';
    data["thresholded_accuracy"] = eval.accuracy;
    data["mean_coverage"] = eval.mean_coverage;
    input_paths.push_back(args.profiles);
  }
  if (!args.out.empty()) {
    write_artifact(args.out, make_envelope(kEvalSchema, input_paths, std::move(data)));
  }
}

struct ThresholdArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string out;
  double purity = 0.75;
  bool sweep = false;
  double sweep_step = 0.05;
};

void run_thresholds(const ThresholdArgs& args) {
  log_config("analyze thresholds", {{"config", args.config},
                                    {"model", args.model},
                                    {"corpus", args.corpus},
                                    {"out", args.out},
                                    {"purity", std::to_string(args.purity)},
                                    {"sweep", args.sweep ? "on" : "off"}});
  CnnModel model = load_model(args.model);
  LabeledCorpus corpus = load_corpus_for_model(args.corpus, model, "fit");
  auto profiles = derive_profiles(model, corpus, args.purity);

  nlohmann::json data;
  data["target_purity"] = args.purity;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& profile : profiles) {
    rows.push_back(profile_to_json(profile));
  }
  data["profiles"] = std::move(rows);
  data["sweep"] = nullptr;
  if (args.sweep) {
    nlohmann::json sweep_rows = nlohmann::json::array();
    for (const auto& row : purity_sweep(model, corpus, corpus, args.sweep_step)) {
      nlohmann::json r;
      r["target_purity"] = row.target_purity;
      r["accuracy"] = row.accuracy;
      r["mean_coverage"] = row.mean_coverage;
      r["informative_filters"] = row.informative_filters;
      sweep_rows.push_back(std::move(r));
      std::cout << "sweep purity=" << row.target_purity << " accuracy=" << row.accuracy
                << " coverage=" << row.mean_coverage
                << " informative=" << row.informative_filters << '\n';
    }
    data["sweep"] = std::move(sweep_rows);
  }
  write_artifact(args.out,
                 make_envelope(kProfilesSchema, {args.model, args.corpus}, std::move(data)));
  std::cout << "profiles " << args.out << '\n';
}

struct SlotsArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string out;
  int topk = 7;
};

void run_slots(const SlotsArgs& args) {
  log_config("analyze slots", {{"config", args.config},
                               {"model", args.model},
                               {"corpus", args.corpus},
                               {"out", args.out},
                               {"topk", std::to_string(args.topk)}});
  CnnModel model = load_model(args.model);
  LabeledCorpus corpus = load_corpus_for_model(args.corpus, model, "analyze");
  auto indexes = build_width_indexes(model, corpus);
  GapReport gaps = natural_possible_gap(model, corpus);

  nlohmann::json filters = nlohmann::json::array();
  for (const auto& filter : model.filters) {
    nlohmann::json f;
    f["filter_id"] = filter.filter_id;
    f["width"] = filter.width;

    SlotTopWords words = top_words_per_slot(filter, model.vocab, model.embeddings,
                                            args.topk);
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& slot : words.per_slot) {
      nlohmann::json entries = nlohmann::json::array();
      for (const auto& word : slot) {
        nlohmann::json e;
        e["token_id"] = word.token_id;
        e["token"] = word.token;
        e["score"] = word.score;
        entries.push_back(std::move(e));
      }
      slots.push_back(std::move(entries));
    }
    f["top_words"] = std::move(slots);

    std::vector<int32_t> best_ids =
        top_possible_ngram(filter, model.vocab, model.embeddings);
    f["top_possible_ngram"] = model.vocab.tokens(best_ids);
    f["max_possible"] = max_possible_score(filter, model.vocab, model.embeddings);

    nlohmann::json natural = nlohmann::json::array();
    for (const auto& ngram : top_natural_ngrams(filter, indexes.at(filter.width),
                                                model.embeddings, args.topk)) {
      nlohmann::json n;
      n["ids"] = ngram.ids;
      n["tokens"] = model.vocab.tokens(ngram.ids);
      n["score"] = ngram.score;
      n["slots"] = ngram.slots.activations;
      n["total"] = ngram.slots.total;
      natural.push_back(std::move(n));
    }
    f["top_natural"] = std::move(natural);

    const FilterGap& gap = gaps.per_filter[static_cast<size_t>(filter.filter_id)];
    f["gap"] = gap.gap;
    f["gap_with_bias"] = gap.gap_with_bias;
    filters.push_back(std::move(f));
  }

  nlohmann::json data;
  data["topk"] = args.topk;
  data["filters"] = std::move(filters);
  data["mean_gap"] = gaps.mean_gap;
  data["mean_gap_with_bias"] = gaps.mean_gap_with_bias;
  write_artifact(args.out,
                 make_envelope(kSlotsSchema, {args.model, args.corpus}, std::move(data)));
  std::cout << "mean_gap " << gaps.mean_gap << '\n';
  std::cout << "slots " << args.out << '\n';
}

struct ClustersArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string profiles;
  std::string out;
  int topk = 5;
  double bandwidth = 0.0;
};

void run_clusters(const ClustersArgs& args) {
  log_config("analyze clusters", {{"config", args.config},
                                  {"model", args.model},
                                  {"corpus", args.corpus},
                                  {"profiles", args.profiles},
                                  {"out", args.out},
                                  {"topk", std::to_string(args.topk)},
                                  {"bandwidth", std::to_string(args.bandwidth)}});
  CnnModel model = load_model(args.model);
  LabeledCorpus corpus = load_corpus_for_model(args.corpus, model, "analyze");
  auto profiles = read_profiles(args.profiles, model);
  auto indexes = build_width_indexes(model, corpus);

  nlohmann::json filters = nlohmann::json::array();
  for (const auto& filter : model.filters) {
    const FilterProfile& profile = profiles[static_cast<size_t>(filter.filter_id)];
    FilterClustering clustering;
    clustering.filter_id = filter.filter_id;
    if (profile.informative()) {
      clustering = cluster_filter_ngrams(filter, indexes.at(filter.width),
                                         model.embeddings, profile, args.topk,
                                         args.bandwidth);
    }
    nlohmann::json j = clustering_to_json(clustering, model.vocab);
    j["informative"] = profile.informative();
    filters.push_back(std::move(j));
  }

  nlohmann::json data;
  data["topk"] = args.topk;
  data["filters"] = std::move(filters);
  write_artifact(args.out,
                 make_envelope(kClustersSchema, {args.model, args.corpus, args.profiles},
                               std::move(data)));
  std::cout << "clusters " << args.out << '\n';
}

struct NegativesArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string profiles;
  std::string clusters;
  std::string out;
  int hamming = 1;
  int bottom_k = 5;
};

void run_negatives(const NegativesArgs& args) {
  log_config("analyze negatives", {{"config", args.config},
                                   {"model", args.model},
                                   {"corpus", args.corpus},
                                   {"profiles", args.profiles},
                                   {"clusters", args.clusters},
                                   {"out", args.out},
                                   {"hamming", std::to_string(args.hamming)},
                                   {"bottom_k", std::to_string(args.bottom_k)}});
  CnnModel model = load_model(args.model);
  LabeledCorpus corpus = load_corpus_for_model(args.corpus, model, "analyze");
  auto profiles = read_profiles(args.profiles, model);
  auto clusterings = read_clusterings(args.clusters, model);
  auto indexes = build_width_indexes(model, corpus);

  nlohmann::json filters = nlohmann::json::array();
  for (const auto& filter : model.filters) {
    const FilterProfile& profile = profiles[static_cast<size_t>(filter.filter_id)];
    nlohmann::json f;
    f["filter_id"] = filter.filter_id;
    f["informative"] = profile.informative();
    nlohmann::json rows = nlohmann::json::array();
    if (profile.informative()) {
      auto negatives = find_negative_ngrams(
          filter, profile, indexes.at(filter.width), model.embeddings,
          clusterings[static_cast<size_t>(filter.filter_id)], args.hamming,
          args.bottom_k);
      for (const auto& neg : negatives) {
        rows.push_back(negative_to_json(neg, model.vocab));
      }
    }
    f["negatives"] = std::move(rows);
    filters.push_back(std::move(f));
  }

  nlohmann::json data;
  data["hamming"] = args.hamming;
  data["bottom_k"] = args.bottom_k;
  data["filters"] = std::move(filters);
  write_artifact(
      args.out,
      make_envelope(kNegativesSchema,
                    {args.model, args.corpus, args.profiles, args.clusters},
                    std::move(data)));
  std::cout << "negatives " << args.out << '\n';
}

struct SummarizeArgs {
  std::string config;
  std::string model;
  std::string corpus;
  std::string profiles;
  std::string clusters;
  std::string negatives;
  std::string format = "text";
  std::string out;
};

void run_summarize(const SummarizeArgs& args) {
  log_config("summarize", {{"config", args.config},
                           {"model", args.model},
                           {"corpus", args.corpus},
                           {"profiles", args.profiles},
                           {"clusters", args.clusters},
                           {"negatives", args.negatives},
                           {"format", args.format},
                           {"out", args.out}});
  if (args.format != "text" && args.format != "json") {
    throw CLI::ValidationError("--format", "must be text or json");
  }
  CnnModel model = load_model(args.model);
  auto profiles = read_profiles(args.profiles, model);
  auto clusterings = read_clusterings(args.clusters, model);
  auto negatives = read_negatives(args.negatives, model);
  auto summaries = summarize_model(model, profiles, clusterings, negatives);

  std::vector<std::string> input_paths = {args.model, args.profiles, args.clusters,
                                          args.negatives};
  if (!args.corpus.empty()) {
    input_paths.insert(input_paths.begin() + 1, args.corpus);
  }

  if (args.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& summary : summaries) {
      rows.push_back(summary_to_json(summary, model.vocab));
    }
    nlohmann::json data;
    data["filters"] = std::move(rows);
    nlohmann::json envelope = make_envelope(kSummarySchema, input_paths, std::move(data));
    if (args.out.empty()) {
      std::cout << envelope.dump(2) << '\n';
    } else {
      write_artifact(args.out, envelope);
      std::cout << "summary " << args.out << '\n';
    }
    return;
  }

  std::string text = render_text(summaries, model.vocab);
  if (args.out.empty()) {
    std::cout << text;
  } else {
    std::string header = "# convlens/summary-text/1\n";
    for (const auto& path : input_paths) {
      header += "# input " + path + " " + hash_hex(hash_file(path)) + "\n";
    }
    write_text_file(args.out, header + "\n" + text);
    std::cout << "summary " << args.out << '\n';
  }
}

struct ExplainArgs {
  std::string config;
  std::string model;
  std::string profiles;
  std::string text;
  std::string file;
  std::string format = "text";
  std::string out;
};

void run_explain(const ExplainArgs& args) {
  log_config("explain", {{"config", args.config},
                         {"model", args.model},
                         {"profiles", args.profiles},
                         {"text", args.text.empty() ? "" : "(inline)"},
                         {"file", args.file},
                         {"format", args.format},
                         {"out", args.out}});
  if (args.format != "text" && args.format != "json") {
    throw CLI::ValidationError("--format", "must be text or json");
  }
  if (args.text.empty() == args.file.empty()) {
    throw CLI::ValidationError("explain", "give exactly one of --text or --file");
  }
  CnnModel model = load_model(args.model);
  auto profiles = read_profiles(args.profiles, model);

  std::vector<PredictionExplanation> explanations;
  if (!args.text.empty()) {
    Document doc;
    doc.token_ids = model.vocab.ids(tokenize(args.text));
    if (doc.token_ids.empty()) {
      throw DataError("explain: text has no tokens");
    }
    explanations.push_back(explain_prediction(doc, model, profiles, &args.text));
  } else {
    LabeledCorpus corpus = load_corpus_for_model(args.file, model, "explain");
    for (const auto& doc : corpus.documents) {
      explanations.push_back(explain_prediction(doc, model, profiles));
    }
  }

  std::vector<std::string> input_paths = {args.model, args.profiles};
  if (!args.file.empty()) {
    input_paths.push_back(args.file);
  }

  if (args.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& explanation : explanations) {
      rows.push_back(explanation_to_json(explanation));
    }
    nlohmann::json data;
    data["explanations"] = std::move(rows);
    nlohmann::json envelope =
        make_envelope(kExplanationsSchema, input_paths, std::move(data));
    if (args.out.empty()) {
      std::cout << envelope.dump(2) << '\n';
    } else {
      write_artifact(args.out, envelope);
      std::cout << "explanations " << args.out << '\n';
    }
    return;
  }

  std::string text;
  for (const auto& explanation : explanations) {
    text += render_text(explanation);
    text += "\n";
  }
  if (args.out.empty()) {
    std::cout << text;
  } else {
    std::string header = "# convlens/explanations-text/1\n";
    for (const auto& path : input_paths) {
      header += "# input " + path + " " + hash_hex(hash_file(path)) + "\n";
    }
    write_text_file(args.out, header + "\n" + text);
    std::cout << "explanations " << args.out << '\n';
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  try {
    uint64_t default_seed = resolve_default_seed();

    CLI::App app{"train and explain a small 1D convolutional text classifier"};
    app.name("convlens");
    app.require_subcommand(1);

    TrainArgs train_args;
    train_args.seed = default_seed;
    auto* train_cmd = app.add_subcommand("train", "train a model on a TSV corpus");
    train_cmd->add_option("--config", train_args.config,
                          "key=value overlay; command-line flags win");
    train_cmd->add_option("--corpus", train_args.corpus, "training TSV")->required();
    train_cmd->add_option("--dev", train_args.dev, "dev TSV for checkpoint selection");
    train_cmd->add_option("--out", train_args.out, "model output path")->required();
    train_cmd->add_option("--embeddings", train_args.embeddings,
                          "pretrained embeddings (GloVe text format)");
    train_cmd->add_option("--dim", train_args.dim, "embedding dimension");
    train_cmd->add_option("--filters", train_args.filters, "width:count list");
    train_cmd->add_option("--min-count", train_args.min_count, "vocabulary cutoff");
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    train_cmd->add_option("--batch-size", train_args.batch_size, "batch size");
    train_cmd->add_option("--lr", train_args.lr, "Adam learning rate");
    train_cmd->add_option("--seed", train_args.seed, "random seed");
    train_cmd->add_flag("--no-head-bias", train_args.no_head_bias,
                        "train without a classifier bias");
    train_cmd->add_flag("--freeze-embeddings", train_args.freeze_embeddings,
                        "do not fine-tune embeddings");
    train_cmd->callback([&] {
      apply_config_overlay(train_cmd, train_args.config);
      run_train(train_args);
    });

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate accuracy on a TSV corpus");
    eval_cmd->add_option("--config", eval_args.config,
                         "key=value overlay; command-line flags win");
    eval_cmd->add_option("--model", eval_args.model, "model file")->required();
    eval_cmd->add_option("--corpus", eval_args.corpus, "TSV corpus")->required();
    eval_cmd->add_option("--profiles", eval_args.profiles,
                         "threshold profiles for the ablation comparison");
    eval_cmd->add_option("--out", eval_args.out, "optional JSON artifact");
    eval_cmd->callback([&] {
      apply_config_overlay(eval_cmd, eval_args.config);
      run_eval(eval_args);
    });

    auto* analyze = app.add_subcommand("analyze", "model analyses");
    analyze->require_subcommand(1);

    ThresholdArgs threshold_args;
    auto* thresholds_cmd =
        analyze->add_subcommand("thresholds", "derive per-filter thresholds");
    thresholds_cmd->add_option("--config", threshold_args.config,
                               "key=value overlay; command-line flags win");
    thresholds_cmd->add_option("--model", threshold_args.model, "model file")->required();
    thresholds_cmd->add_option("--corpus", threshold_args.corpus, "fit TSV")->required();
    thresholds_cmd->add_option("--out", threshold_args.out, "profiles JSON")->required();
    thresholds_cmd->add_option("--purity", threshold_args.purity, "target purity");
    thresholds_cmd->add_flag("--sweep", threshold_args.sweep,
                             "sweep purity targets and report accuracy/coverage");
    thresholds_cmd->add_option("--sweep-step", threshold_args.sweep_step,
                               "purity sweep step");
    thresholds_cmd->callback([&] {
      apply_config_overlay(thresholds_cmd, threshold_args.config);
      run_thresholds(threshold_args);
    });

    SlotsArgs slots_args;
    auto* slots_cmd = analyze->add_subcommand("slots", "slot decomposition analysis");
    slots_cmd->add_option("--config", slots_args.config,
                          "key=value overlay; command-line flags win");
    slots_cmd->add_option("--model", slots_args.model, "model file")->required();
    slots_cmd->add_option("--corpus", slots_args.corpus, "TSV corpus")->required();
    slots_cmd->add_option("--out", slots_args.out, "slots JSON")->required();
    slots_cmd->add_option("--topk", slots_args.topk, "top words / ngrams per filter");
    slots_cmd->callback([&] {
      apply_config_overlay(slots_cmd, slots_args.config);
      run_slots(slots_args);
    });

    ClustersArgs clusters_args;
    auto* clusters_cmd =
        analyze->add_subcommand("clusters", "cluster threshold-passing ngrams");
    clusters_cmd->add_option("--config", clusters_args.config,
                             "key=value overlay; command-line flags win");
    clusters_cmd->add_option("--model", clusters_args.model, "model file")->required();
    clusters_cmd->add_option("--corpus", clusters_args.corpus, "TSV corpus")->required();
    clusters_cmd->add_option("--profiles", clusters_args.profiles, "profiles JSON")
        ->required();
    clusters_cmd->add_option("--out", clusters_args.out, "clusters JSON")->required();
    clusters_cmd->add_option("--topk", clusters_args.topk, "top ngrams per cluster");
    clusters_cmd->add_option("--bandwidth", clusters_args.bandwidth,
                             "mean shift bandwidth (0 = estimate)");
    clusters_cmd->callback([&] {
      apply_config_overlay(clusters_cmd, clusters_args.config);
      run_clusters(clusters_args);
    });

    NegativesArgs negatives_args;
    auto* negatives_cmd =
        analyze->add_subcommand("negatives", "find negated ngram variants");
    negatives_cmd->add_option("--config", negatives_args.config,
                              "key=value overlay; command-line flags win");
    negatives_cmd->add_option("--model", negatives_args.model, "model file")->required();
    negatives_cmd->add_option("--corpus", negatives_args.corpus, "TSV corpus")
        ->required();
    negatives_cmd->add_option("--profiles", negatives_args.profiles, "profiles JSON")
        ->required();
    negatives_cmd->add_option("--clusters", negatives_args.clusters, "clusters JSON")
        ->required();
    negatives_cmd->add_option("--out", negatives_args.out, "negatives JSON")->required();
    negatives_cmd->add_option("--hamming", negatives_args.hamming,
                              "max substitutions from the base ngram");
    negatives_cmd->add_option("--bottom-k", negatives_args.bottom_k,
                              "variants kept per base ngram");
    negatives_cmd->callback([&] {
      apply_config_overlay(negatives_cmd, negatives_args.config);
      run_negatives(negatives_args);
    });

    SummarizeArgs summarize_args;
    auto* summarize_cmd =
        app.add_subcommand("summarize", "assemble per-filter summaries");
    summarize_cmd->add_option("--config", summarize_args.config,
                              "key=value overlay; command-line flags win");
    summarize_cmd->add_option("--model", summarize_args.model, "model file")->required();
    summarize_cmd->add_option("--corpus", summarize_args.corpus,
                              "corpus the analyses were run on (hashed into outputs)");
    summarize_cmd->add_option("--profiles", summarize_args.profiles, "profiles JSON")
        ->required();
    summarize_cmd->add_option("--clusters", summarize_args.clusters, "clusters JSON")
        ->required();
    summarize_cmd->add_option("--negatives", summarize_args.negatives, "negatives JSON")
        ->required();
    summarize_cmd->add_option("--format", summarize_args.format, "text or json");
    summarize_cmd->add_option("--out", summarize_args.out,
                              "output path (stdout when omitted)");
    summarize_cmd->callback([&] {
      apply_config_overlay(summarize_cmd, summarize_args.config);
      run_summarize(summarize_args);
    });

    ExplainArgs explain_args;
    auto* explain_cmd = app.add_subcommand("explain", "explain predictions");
    explain_cmd->add_option("--config", explain_args.config,
                            "key=value overlay; command-line flags win");
    explain_cmd->add_option("--model", explain_args.model, "model file")->required();
    explain_cmd->add_option("--profiles", explain_args.profiles, "profiles JSON")
        ->required();
    explain_cmd->add_option("--text", explain_args.text, "one raw text to explain");
    explain_cmd->add_option("--file", explain_args.file, "TSV of documents to explain");
    explain_cmd->add_option("--format", explain_args.format, "text or json");
    explain_cmd->add_option("--out", explain_args.out,
                            "output path (stdout when omitted)");
    explain_cmd->callback([&] {
      apply_config_overlay(explain_cmd, explain_args.config);
      run_explain(explain_args);
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 1;
    }
    return 0;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace convlens
