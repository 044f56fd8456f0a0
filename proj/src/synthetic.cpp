#include "convlens/synthetic.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include "convlens/error.hpp"
#include "convlens/numerics.hpp"

namespace convlens {

namespace {

constexpr std::array<const char*, 26> kFillers = {
    "the",    "a",       "it",      "this",    "that",  "my",     "new",
    "old",    "box",     "device",  "product", "thing", "came",   "arrived",
    "today",  "yesterday", "again", "setup",   "battery", "screen", "price",
    "store",  "order",   "quickly", "slowly",  "with"};

constexpr std::array<const char*, 6> kPositiveTriggers = {
    "works great",        "looks great",        "really love it",
    "absolutely perfect", "still working perfectly", "worth every penny"};

constexpr std::array<const char*, 5> kNegativeTriggers = {
    "totally broken", "really hate it", "absolutely terrible",
    "stopped working completely", "waste of money"};

// Negated positives: hamming-1 siblings of positive triggers, plus a
// contraction that exercises the tokenizer.
constexpr std::array<const char*, 4> kNegatedTriggers = {
    "not great", "not perfect", "didn't work", "never worked"};

std::string make_doc(SeededRng& rng, int label) {
  std::string trigger;
  if (label == 1) {
    trigger = kPositiveTriggers[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(kPositiveTriggers.size())))];
  } else if (rng.uniform01() < 0.3) {
    trigger = kNegatedTriggers[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(kNegatedTriggers.size())))];
  } else {
    trigger = kNegativeTriggers[static_cast<size_t>(
        rng.uniform_int(static_cast<int>(kNegativeTriggers.size())))];
  }

  std::string text;
  int prefix = 2 + rng.uniform_int(3);
  for (int i = 0; i < prefix; ++i) {
    text += kFillers[static_cast<size_t>(rng.uniform_int(static_cast<int>(kFillers.size())))];
    text += ' ';
  }
  text += trigger;
  int suffix = 2 + rng.uniform_int(3);
  for (int i = 0; i < suffix; ++i) {
    text += ' ';
    text += kFillers[static_cast<size_t>(rng.uniform_int(static_cast<int>(kFillers.size())))];
  }
  text += rng.uniform01() < 0.8 ? " ." : " !";
  return text;
}

std::vector<LabeledText> make_split(SeededRng& rng, int count) {
  std::vector<LabeledText> rows;
  rows.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    int label = i % 2;
    rows.emplace_back(label, make_doc(rng, label));
  }
  return rows;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& config) {
  if (config.train_docs < 1 || config.dev_docs < 1 || config.test_docs < 1) {
    throw std::invalid_argument("generate_synthetic: all splits need at least one doc");
  }
  SeededRng rng(config.seed);
  SyntheticCorpus corpus;
  corpus.train = make_split(rng, config.train_docs);
  corpus.dev = make_split(rng, config.dev_docs);
  corpus.test = make_split(rng, config.test_docs);
  return corpus;
}

void write_tsv(const std::string& path, const std::vector<LabeledText>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("write_tsv: cannot open " + path);
  }
  for (const auto& [label, text] : rows) {
    out << label << '\t' << text << '\n';
  }
  if (!out) {
    throw DataError("write_tsv: write failed for " + path);
  }
}

}  // namespace convlens
