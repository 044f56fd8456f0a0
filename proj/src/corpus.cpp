#include "convlens/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace convlens {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;  // non-ASCII bytes stay in the word
}

// Splits trailing contractions off a word run: "didn't" -> "did" "n't",
// "i'm" -> "i" "'m". Applied repeatedly so "couldn't've" fully splits.
void split_contractions(const std::string& run, std::vector<std::string>& out) {
  static const char* kSuffixes[] = {"n't", "'m", "'s", "'re", "'ve", "'ll", "'d"};
  for (const char* suffix : kSuffixes) {
    size_t n = std::char_traits<char>::length(suffix);
    if (run.size() > n && run.compare(run.size() - n, n, suffix) == 0) {
      split_contractions(run.substr(0, run.size() - n), out);
      out.push_back(suffix);
      return;
    }
  }
  out.push_back(run);
}

void tokenize_chunk(const std::string& chunk, std::vector<std::string>& out) {
  size_t i = 0;
  while (i < chunk.size()) {
    unsigned char c = chunk[i];
    bool word = is_word_char(c);
    if (!word && c == '\'') {
      // apostrophes stick to adjacent word characters
      bool prev = i > 0 && is_word_char(chunk[i - 1]);
      bool next = i + 1 < chunk.size() && is_word_char(chunk[i + 1]);
      word = prev || next;
    }
    if (!word) {
      out.emplace_back(1, chunk[i]);
      ++i;
      continue;
    }
    size_t start = i;
    while (i < chunk.size()) {
      unsigned char d = chunk[i];
      if (is_word_char(d)) {
        ++i;
      } else if (d == '\'' &&
                 ((i > start && is_word_char(chunk[i - 1])) ||
                  (i + 1 < chunk.size() && is_word_char(chunk[i + 1])))) {
        ++i;
      } else {
        break;
      }
    }
    split_contractions(chunk.substr(start, i - start), out);
  }
}

int parse_label(const std::string& field, const std::string& where) {
  int value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last || value < 0) {
    throw DataError(where + ": label must be a non-negative integer, got '" + field + "'");
  }
  return value;
}

}  // namespace

Vocabulary::Vocabulary() {
  tokens_ = {"PAD", "UNK"};
  ids_ = {{"PAD", kPadId}, {"UNK", kUnkId}};
}

int32_t Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) {
    return it->second;
  }
  int32_t id = static_cast<int32_t>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

int32_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int32_t id) const {
  return tokens_.at(static_cast<size_t>(id));
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.find(token) != ids_.end();
}

std::vector<int32_t> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int32_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    out.push_back(id(t));
  }
  return out;
}

std::vector<std::string> Vocabulary::tokens(const std::vector<int32_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int32_t i : ids) {
    out.push_back(token(i));
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    std::string chunk = text.substr(start, i - start);
    for (char& ch : chunk) {
      ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    tokenize_chunk(chunk, out);
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts, int min_count) {
  if (min_count < 1) {
    throw std::invalid_argument("build_vocabulary: min_count must be >= 1");
  }
  if (texts.empty()) {
    throw DataError("build_vocabulary: empty corpus");
  }
  std::map<std::string, int64_t> counts;
  for (const auto& text : texts) {
    for (const auto& token : tokenize(text)) {
      ++counts[token];
    }
  }
  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_count) {
      kept.emplace_back(token, count);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : kept) {
    vocab.add(token);
  }
  return vocab;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, SeededRng& rng) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_embeddings: cannot open " + path);
  }
  EmbeddingTable table;
  table.dim = dim;
  table.matrix = DenseMatrix(vocab.size(), dim, 0.0);
  std::vector<bool> found(static_cast<size_t>(vocab.size()), false);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    values.reserve(static_cast<size_t>(dim));
    std::string field;
    while (fields >> field) {
      const char* start = field.c_str();
      char* end = nullptr;
      double v = std::strtod(start, &end);
      if (end != start + field.size()) {
        throw DataError("load_embeddings: " + path + " line " + std::to_string(line_no) +
                        ": non-numeric value '" + field + "'");
      }
      values.push_back(v);
    }
    if (static_cast<int>(values.size()) != dim) {
      throw DataError("load_embeddings: " + path + " line " + std::to_string(line_no) +
                      ": expected " + std::to_string(dim) + " values, got " +
                      std::to_string(values.size()));
    }
    if (!vocab.contains(token)) {
      continue;
    }
    int32_t id = vocab.id(token);
    if (id == kPadId) {
      continue;  // PAD row stays zero
    }
    auto row = table.row(id);
    std::copy(values.begin(), values.end(), row.begin());
    found[static_cast<size_t>(id)] = true;
  }

  // ids drawn in order so a fixed seed reproduces the table
  for (int32_t id = 1; id < vocab.size(); ++id) {
    if (found[static_cast<size_t>(id)]) {
      continue;
    }
    auto row = table.row(id);
    for (double& v : row) {
      v = rng.uniform(-0.25, 0.25);
    }
  }
  return table;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, SeededRng& rng) {
  EmbeddingTable table;
  table.dim = dim;
  table.matrix = DenseMatrix(vocab.size(), dim, 0.0);
  for (int32_t id = 1; id < vocab.size(); ++id) {
    auto row = table.row(id);
    for (double& v : row) {
      v = rng.uniform(-0.25, 0.25);
    }
  }
  return table;
}

Document pad_document(const Document& doc, int max_width) {
  if (max_width < 1) {
    throw std::invalid_argument("pad_document: max_width must be >= 1");
  }
  int pad = max_width - 1;
  Document out;
  out.label = doc.label;
  out.token_ids.reserve(doc.token_ids.size() + 2 * static_cast<size_t>(pad));
  out.token_ids.assign(static_cast<size_t>(pad), kPadId);
  out.token_ids.insert(out.token_ids.end(), doc.token_ids.begin(), doc.token_ids.end());
  out.token_ids.insert(out.token_ids.end(), static_cast<size_t>(pad), kPadId);
  return out;
}

namespace {

struct RawCorpus {
  std::vector<int> labels;
  std::vector<std::string> texts;
};

RawCorpus read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_tsv_corpus: cannot open " + path);
  }
  RawCorpus raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::string where = path + " line " + std::to_string(line_no);
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(where + ": missing tab separator");
    }
    raw.labels.push_back(parse_label(line.substr(0, tab), where));
    std::string text = line.substr(tab + 1);
    if (tokenize(text).empty()) {
      throw DataError(where + ": empty text");
    }
    raw.texts.push_back(std::move(text));
  }
  if (raw.texts.empty()) {
    throw DataError("load_tsv_corpus: " + path + " holds no documents");
  }
  return raw;
}

LabeledCorpus assemble(const RawCorpus& raw, const Vocabulary& vocab,
                       const std::string& split) {
  LabeledCorpus corpus;
  corpus.split = split;
  corpus.documents.reserve(raw.texts.size());
  int max_label = 0;
  for (size_t i = 0; i < raw.texts.size(); ++i) {
    Document doc;
    doc.label = raw.labels[i];
    doc.token_ids = vocab.ids(tokenize(raw.texts[i]));
    max_label = std::max(max_label, doc.label);
    corpus.documents.push_back(std::move(doc));
  }
  corpus.num_classes = max_label + 1;
  return corpus;
}

}  // namespace

LabeledCorpus load_tsv_corpus(const std::string& path, const Vocabulary& vocab,
                              const std::string& split) {
  return assemble(read_tsv(path), vocab, split);
}

std::pair<LabeledCorpus, Vocabulary> load_tsv_corpus_building_vocab(
    const std::string& path, int min_count, const std::string& split) {
  RawCorpus raw = read_tsv(path);
  Vocabulary vocab = build_vocabulary(raw.texts, min_count);
  return {assemble(raw, vocab, split), vocab};
}

}  // namespace convlens
