#include <iostream>

#include "CLI11.hpp"

#include "convlens/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the bundled synthetic sentiment corpus"};
  std::string out_dir = "data";
  convlens::SyntheticConfig config;
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--train", config.train_docs, "training documents");
  app.add_option("--dev", config.dev_docs, "dev documents");
  app.add_option("--test", config.test_docs, "test documents");
  app.add_option("--seed", config.seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    convlens::SyntheticCorpus corpus = convlens::generate_synthetic(config);
    convlens::write_tsv(out_dir + "/synth_train.tsv", corpus.train);
    convlens::write_tsv(out_dir + "/synth_dev.tsv", corpus.dev);
    convlens::write_tsv(out_dir + "/synth_test.tsv", corpus.test);
    std::cout << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/"
              << corpus.test.size() << " docs to " << out_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
