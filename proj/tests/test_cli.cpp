#include "doctest.h"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "convlens/artifacts.hpp"
#include "convlens/cli.hpp"
#include "convlens/synthetic.hpp"
#include "json.hpp"

using namespace convlens;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("convlens_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// dispatch() talks straight to stdout/stderr, so swap the fds around the call
// and read the streams back from temp files.  No assertions while redirected:
// a failing CHECK would print into the capture file.
RunResult run_cli(const std::vector<std::string>& args, const TempDir& dir) {
  std::string out_path = dir.file("__stdout.txt");
  std::string err_path = dir.file("__stderr.txt");
  std::fflush(stdout);
  std::fflush(stderr);
  std::cout.flush();
  std::cerr.flush();
  int saved_out = ::dup(1);
  int saved_err = ::dup(2);
  int out_fd = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  int err_fd = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  ::dup2(out_fd, 1);
  ::dup2(err_fd, 2);
  ::close(out_fd);
  ::close(err_fd);

  RunResult result;
  result.code = dispatch(args);

  std::fflush(stdout);
  std::fflush(stderr);
  std::cout.flush();
  std::cerr.flush();
  ::dup2(saved_out, 1);
  ::dup2(saved_err, 2);
  ::close(saved_out);
  ::close(saved_err);
  REQUIRE(saved_out >= 0);
  REQUIRE(saved_err >= 0);
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

bool is_hash16(const std::string& s) {
  if (s.size() != 16) {
    return false;
  }
  for (char c : s) {
    if (!std::isxdigit(static_cast<unsigned char>(c)) ||
        (std::isalpha(static_cast<unsigned char>(c)) && !std::islower(static_cast<unsigned char>(c)))) {
      return false;
    }
  }
  return true;
}

// Parses the artifact at `path`, checks schema + input hashes, returns "data".
json check_envelope(const std::string& path, const std::string& schema,
                    const std::vector<std::string>& input_paths) {
  CAPTURE(path);
  REQUIRE(fs::exists(path));
  json envelope = json::parse(slurp(path));
  REQUIRE(envelope.contains("schema"));
  CHECK(envelope.at("schema").get<std::string>() == schema);
  REQUIRE(envelope.contains("inputs"));
  const json& inputs = envelope.at("inputs");
  CHECK(inputs.size() == input_paths.size());
  for (const auto& input : input_paths) {
    CAPTURE(input);
    REQUIRE(inputs.contains(input));
    std::string recorded = inputs.at(input).get<std::string>();
    CHECK(is_hash16(recorded));
    CHECK(recorded == hash_hex(hash_file(input)));
  }
  REQUIRE(envelope.contains("data"));
  // read_artifact must accept its own output.
  CHECK_NOTHROW(read_artifact(path, schema));
  return envelope.at("data");
}

std::string data_file(const std::string& name) {
  return std::string(CONVLENS_DATA_DIR) + "/" + name;
}

void write_small_corpus(const TempDir& dir, std::string& train, std::string& dev) {
  SyntheticConfig cfg;
  cfg.train_docs = 60;
  cfg.dev_docs = 20;
  cfg.test_docs = 10;
  cfg.seed = 3;
  SyntheticCorpus corpus = generate_synthetic(cfg);
  train = dir.file("small_train.tsv");
  dev = dir.file("small_dev.tsv");
  write_tsv(train, corpus.train);
  write_tsv(dev, corpus.dev);
}

std::vector<std::string> train_small(const std::string& train, const std::string& out) {
  return {"train",      "--corpus", train, "--out",    out,   "--dim", "6",
          "--filters",  "2:1",      "--min-count", "2", "--epochs", "1",
          "--batch-size", "20"};
}

}  // namespace

TEST_CASE("cli pipeline chains artifacts with verified envelopes") {
  TempDir dir;
  std::string train_tsv = data_file("synth_train.tsv");
  std::string dev_tsv = data_file("synth_dev.tsv");
  std::string test_tsv = data_file("synth_test.tsv");
  REQUIRE(fs::exists(train_tsv));

  std::string model = dir.file("model.cvln");
  RunResult r = run_cli({"train", "--corpus", train_tsv, "--dev", dev_tsv,
                         "--out", model, "--dim", "8", "--filters", "2:2,3:2",
                         "--min-count", "2", "--epochs", "3", "--seed", "9"},
                        dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(fs::exists(model));
  CHECK(r.out.find("train_loss ") != std::string::npos);
  CHECK(r.out.find("best_epoch ") != std::string::npos);
  CHECK(r.out.find("dev_accuracy ") != std::string::npos);
  CHECK(r.out.find("model " + model) != std::string::npos);
  CHECK(r.err.find("[convlens] train:") != std::string::npos);

  std::string profiles = dir.file("profiles.json");
  r = run_cli({"analyze", "thresholds", "--model", model, "--corpus", train_tsv,
               "--out", profiles, "--purity", "0.9"},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("profiles " + profiles) != std::string::npos);
  json pdata = check_envelope(profiles, "convlens/profiles/1", {model, train_tsv});
  CHECK(pdata.at("target_purity").get<double>() == doctest::Approx(0.9));
  REQUIRE(pdata.at("profiles").is_array());
  CHECK(pdata.at("profiles").size() == 4);
  CHECK(pdata.at("sweep").is_null());

  std::string slots = dir.file("slots.json");
  r = run_cli({"analyze", "slots", "--model", model, "--corpus", train_tsv,
               "--out", slots, "--topk", "5"},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("mean_gap ") != std::string::npos);
  CHECK(r.out.find("slots " + slots) != std::string::npos);
  json sdata = check_envelope(slots, "convlens/slots/1", {model, train_tsv});
  CHECK(sdata.at("topk").get<int>() == 5);
  CHECK(sdata.at("filters").size() == 4);
  CHECK(sdata.at("mean_gap").is_number());
  CHECK(sdata.at("mean_gap_with_bias").is_number());

  std::string clusters = dir.file("clusters.json");
  r = run_cli({"analyze", "clusters", "--model", model, "--corpus", train_tsv,
               "--profiles", profiles, "--out", clusters, "--topk", "4"},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("clusters " + clusters) != std::string::npos);
  json cdata =
      check_envelope(clusters, "convlens/clusters/1", {model, train_tsv, profiles});
  CHECK(cdata.at("topk").get<int>() == 4);
  CHECK(cdata.at("filters").size() == 4);

  std::string negatives = dir.file("negatives.json");
  r = run_cli({"analyze", "negatives", "--model", model, "--corpus", train_tsv,
               "--profiles", profiles, "--clusters", clusters, "--out", negatives,
               "--hamming", "1", "--bottom-k", "5"},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("negatives " + negatives) != std::string::npos);
  json ndata = check_envelope(negatives, "convlens/negatives/1",
                              {model, train_tsv, profiles, clusters});
  CHECK(ndata.at("hamming").get<int>() == 1);
  CHECK(ndata.at("bottom_k").get<int>() == 5);
  CHECK(ndata.at("filters").size() == 4);

  // summarize: json goes to stdout when --out is absent.
  r = run_cli({"summarize", "--model", model, "--profiles", profiles, "--clusters",
               clusters, "--negatives", negatives, "--format", "json"},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  json summary = json::parse(r.out);
  CHECK(summary.at("schema").get<std::string>() == "convlens/summary/1");
  CHECK(summary.at("data").at("filters").size() == 4);

  std::string summary_json = dir.file("summary.json");
  r = run_cli({"summarize", "--model", model, "--profiles", profiles, "--clusters",
               clusters, "--negatives", negatives, "--format", "json", "--out",
               summary_json},
              dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("summary " + summary_json) != std::string::npos);
  json mdata = check_envelope(summary_json, "convlens/summary/1",
                              {model, profiles, clusters, negatives});
  CHECK(mdata.at("filters").size() == 4);

  std::string summary_txt = dir.file("summary.txt");
  r = run_cli({"summarize", "--model", model, "--profiles", profiles, "--clusters",
               clusters, "--negatives", negatives, "--format", "text", "--out",
               summary_txt},
              dir);
  CHECK(r.code == 0);
  std::string text = slurp(summary_txt);
  CHECK(text.rfind("# convlens/summary-text/1\n", 0) == 0);
  CHECK(text.find("# input " + model + " ") != std::string::npos);
  CHECK(text.find("== filter 0 ") != std::string::npos);

  std::string expl = dir.file("explain.json");
  r = run_cli({"explain", "--model", model, "--profiles", profiles, "--text",
               "the plot was gripping and the cast superb", "--format", "json",
               "--out", expl},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("explanations " + expl) != std::string::npos);
  json edata = check_envelope(expl, "convlens/explanations/1", {model, profiles});
  REQUIRE(edata.at("explanations").size() == 1);
  const json& row = edata.at("explanations")[0];
  CHECK(row.at("rows").size() == 4);
  CHECK(row.at("predicted_class").is_number_integer());

  r = run_cli({"explain", "--model", model, "--profiles", profiles, "--text",
               "the plot was gripping", "--format", "text"},
              dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("text: the plot was gripping") != std::string::npos);
  CHECK(r.out.find("predicted class ") != std::string::npos);

  std::string eval_json = dir.file("eval.json");
  r = run_cli({"eval", "--model", model, "--corpus", test_tsv, "--profiles",
               profiles, "--out", eval_json},
              dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("relu_accuracy ") != std::string::npos);
  CHECK(r.out.find("thresholded_accuracy ") != std::string::npos);
  CHECK(r.out.find("mean_coverage ") != std::string::npos);
  json evdata =
      check_envelope(eval_json, "convlens/eval/1", {model, test_tsv, profiles});
  double relu = evdata.at("relu_accuracy").get<double>();
  CHECK(relu >= 0.8);  // three epochs on the separable bundled corpus
  CHECK(evdata.at("thresholded_accuracy").is_number());
  double coverage = evdata.at("mean_coverage").get<double>();
  CHECK(coverage >= 0.0);
  CHECK(coverage <= 1.0);

  // without profiles the thresholded fields stay null
  std::string eval_plain = dir.file("eval_plain.json");
  r = run_cli({"eval", "--model", model, "--corpus", test_tsv, "--out", eval_plain},
              dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("thresholded_accuracy") == std::string::npos);
  json plain = check_envelope(eval_plain, "convlens/eval/1", {model, test_tsv});
  CHECK(plain.at("thresholded_accuracy").is_null());
  CHECK(plain.at("mean_coverage").is_null());
}

TEST_CASE("cli reruns with one seed are byte-identical") {
  TempDir dir;
  std::string train_tsv;
  std::string dev_tsv;
  write_small_corpus(dir, train_tsv, dev_tsv);

  std::string model_a = dir.file("a.cvln");
  std::string model_b = dir.file("b.cvln");
  auto args_a = train_small(train_tsv, model_a);
  auto args_b = train_small(train_tsv, model_b);
  args_a.insert(args_a.end(), {"--seed", "11"});
  args_b.insert(args_b.end(), {"--seed", "11"});
  REQUIRE(run_cli(args_a, dir).code == 0);
  REQUIRE(run_cli(args_b, dir).code == 0);
  std::string bytes_a = slurp(model_a);
  CHECK(!bytes_a.empty());
  CHECK(bytes_a == slurp(model_b));

  std::string prof_a = dir.file("prof_a.json");
  std::string prof_b = dir.file("prof_b.json");
  REQUIRE(run_cli({"analyze", "thresholds", "--model", model_a, "--corpus",
                   train_tsv, "--out", prof_a},
                  dir)
              .code == 0);
  REQUIRE(run_cli({"analyze", "thresholds", "--model", model_a, "--corpus",
                   train_tsv, "--out", prof_b},
                  dir)
              .code == 0);
  CHECK(slurp(prof_a) == slurp(prof_b));

  std::string model_c = dir.file("c.cvln");
  auto args_c = train_small(train_tsv, model_c);
  args_c.insert(args_c.end(), {"--seed", "12"});
  REQUIRE(run_cli(args_c, dir).code == 0);
  CHECK(bytes_a != slurp(model_c));
}

TEST_CASE("cli exit codes split usage errors from data errors") {
  TempDir dir;

  RunResult r = run_cli({"bogus"}, dir);
  CHECK(r.code == 1);
  CHECK(!r.err.empty());

  r = run_cli({}, dir);
  CHECK(r.code == 1);

  r = run_cli({"--help"}, dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("train") != std::string::npos);

  r = run_cli({"train", "--help"}, dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("--corpus") != std::string::npos);

  r = run_cli({"analyze"}, dir);
  CHECK(r.code == 1);

  // missing required option
  r = run_cli({"train", "--out", dir.file("m.cvln")}, dir);
  CHECK(r.code == 1);

  // bad option value caught at parse time
  std::string train_tsv;
  std::string dev_tsv;
  write_small_corpus(dir, train_tsv, dev_tsv);
  r = run_cli({"train", "--corpus", train_tsv, "--out", dir.file("m.cvln"),
               "--filters", "nope"},
              dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("width:count") != std::string::npos);

  // well-formed invocation, missing file: a data error
  r = run_cli({"train", "--corpus", dir.file("absent.tsv"), "--out",
               dir.file("m.cvln")},
              dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("error:") != std::string::npos);

  r = run_cli({"eval", "--model", dir.file("absent.cvln"), "--corpus", train_tsv},
              dir);
  CHECK(r.code == 2);

  // explain wants exactly one input source
  std::string model = dir.file("m.cvln");
  REQUIRE(run_cli(train_small(train_tsv, model), dir).code == 0);
  std::string profiles = dir.file("p.json");
  REQUIRE(run_cli({"analyze", "thresholds", "--model", model, "--corpus",
                   train_tsv, "--out", profiles},
                  dir)
              .code == 0);
  r = run_cli({"explain", "--model", model, "--profiles", profiles}, dir);
  CHECK(r.code == 1);
  r = run_cli({"explain", "--model", model, "--profiles", profiles, "--text", "hi",
               "--file", train_tsv},
              dir);
  CHECK(r.code == 1);

  // schema mismatch: model artifact fed where profiles belong
  r = run_cli({"explain", "--model", model, "--profiles", model, "--text", "hi"},
              dir);
  CHECK(r.code == 2);

  // unknown format string
  r = run_cli({"summarize", "--model", model, "--profiles", profiles,
               "--clusters", profiles, "--negatives", profiles, "--format", "xml"},
              dir);
  CHECK(r.code == 1);
}

TEST_CASE("cli config file fills gaps without overriding flags") {
  TempDir dir;
  std::string train_tsv;
  std::string dev_tsv;
  write_small_corpus(dir, train_tsv, dev_tsv);

  std::string cfg = dir.file("train.cfg");
  write_text_file(cfg,
                  "# tiny run\n"
                  "\n"
                  "epochs = 1\n"
                  "seed = 7\n");

  // config values apply when the flag is absent
  std::string from_cfg = dir.file("from_cfg.cvln");
  RunResult r = run_cli({"train", "--config", cfg, "--corpus", train_tsv, "--out",
                         from_cfg, "--dim", "6", "--filters", "2:1",
                         "--min-count", "2", "--batch-size", "20"},
                        dir);
  CAPTURE(r.err);
  CHECK(r.code == 0);
  CHECK(r.err.find("epochs=1") != std::string::npos);
  CHECK(r.err.find("seed=7") != std::string::npos);

  std::string from_flags = dir.file("from_flags.cvln");
  auto flag_args = train_small(train_tsv, from_flags);
  flag_args.insert(flag_args.end(), {"--seed", "7"});
  REQUIRE(run_cli(flag_args, dir).code == 0);
  CHECK(slurp(from_cfg) == slurp(from_flags));

  // the command line wins over the config file
  std::string cli_wins = dir.file("cli_wins.cvln");
  r = run_cli({"train", "--config", cfg, "--corpus", train_tsv, "--out", cli_wins,
               "--dim", "6", "--filters", "2:1", "--min-count", "2",
               "--batch-size", "20", "--seed", "5"},
              dir);
  CHECK(r.code == 0);
  std::string seed5 = dir.file("seed5.cvln");
  auto seed5_args = train_small(train_tsv, seed5);
  seed5_args.insert(seed5_args.end(), {"--seed", "5"});
  REQUIRE(run_cli(seed5_args, dir).code == 0);
  CHECK(slurp(cli_wins) == slurp(seed5));
  CHECK(slurp(cli_wins) != slurp(from_cfg));

  // CONVLENS_SEED seeds the default; config still beats it
  ::setenv("CONVLENS_SEED", "7", 1);
  std::string from_env = dir.file("from_env.cvln");
  REQUIRE(run_cli(train_small(train_tsv, from_env), dir).code == 0);
  CHECK(slurp(from_env) == slurp(from_cfg));

  ::setenv("CONVLENS_SEED", "13", 1);
  std::string env_vs_cfg = dir.file("env_vs_cfg.cvln");
  r = run_cli({"train", "--config", cfg, "--corpus", train_tsv, "--out",
               env_vs_cfg, "--dim", "6", "--filters", "2:1", "--min-count", "2",
               "--batch-size", "20"},
              dir);
  CHECK(r.code == 0);
  CHECK(slurp(env_vs_cfg) == slurp(from_cfg));

  ::setenv("CONVLENS_SEED", "twelve", 1);
  r = run_cli(train_small(train_tsv, dir.file("bad_env.cvln")), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("CONVLENS_SEED") != std::string::npos);
  ::unsetenv("CONVLENS_SEED");

  // config parse failures are data errors
  auto cfg_error = [&](const std::string& body, const std::string& needle) {
    std::string path = dir.file("broken.cfg");
    write_text_file(path, body);
    RunResult res = run_cli({"train", "--config", path, "--corpus", train_tsv,
                             "--out", dir.file("broken.cvln")},
                            dir);
    CAPTURE(body);
    CAPTURE(res.err);
    CHECK(res.code == 2);
    CHECK(res.err.find(needle) != std::string::npos);
  };
  cfg_error("bogus = 3\n", "unknown key bogus");
  cfg_error("epochs 1\n", "expected key=value");
  cfg_error("config = other.cfg\n", "config files cannot nest");
  cfg_error("epochs = banana\n", "bad value for epochs");
  cfg_error(" = 3\n", "empty key");

  r = run_cli({"train", "--config", dir.file("missing.cfg"), "--corpus", train_tsv,
               "--out", dir.file("x.cvln")},
              dir);
  CHECK(r.code == 2);
}
