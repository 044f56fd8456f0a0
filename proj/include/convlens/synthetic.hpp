#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace convlens {

// Two-class sentiment-style corpus with phrase-level (not word-level)
// separability: "works great" is positive while "not great" is negative, so
// a bag of words cannot solve it but a width-2 filter can.
struct SyntheticConfig {
  int train_docs = 2400;
  int dev_docs = 400;
  int test_docs = 400;
  uint64_t seed = 7;
};

using LabeledText = std::pair<int, std::string>;

struct SyntheticCorpus {
  std::vector<LabeledText> train;
  std::vector<LabeledText> dev;
  std::vector<LabeledText> test;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

// label<TAB>text lines
void write_tsv(const std::string& path, const std::vector<LabeledText>& rows);

}  // namespace convlens
