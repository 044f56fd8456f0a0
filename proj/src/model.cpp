#include "convlens/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace convlens {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'L', 'N'};
constexpr uint32_t kFormatVersion = 1;

struct ByteWriter {
  std::vector<uint8_t> buf;

  void u8(uint8_t v) { buf.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(bits >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
};

struct ByteReader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) {
      throw DataError("deserialize_model: truncated payload");
    }
  }
  uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + static_cast<long>(pos),
                  buf.begin() + static_cast<long>(pos + n));
    pos += n;
    return s;
  }
};

}  // namespace

double slot_dot(std::span<const double> embedding, const ConvFilter& f, int slot) {
  double acc = 0.0;
  for (int r = 0; r < f.weights.rows; ++r) {
    acc += embedding[static_cast<size_t>(r)] * f.weights(r, slot);
  }
  return acc;
}

double ngram_score(std::span<const int32_t> ngram_ids, const ConvFilter& f,
                   const EmbeddingTable& embeddings) {
  if (static_cast<int>(ngram_ids.size()) != f.width) {
    throw std::invalid_argument("ngram_score: ngram length does not match filter width");
  }
  double acc = 0.0;
  for (int i = 0; i < f.width; ++i) {
    acc += slot_dot(embeddings.row(ngram_ids[static_cast<size_t>(i)]), f, i);
  }
  return acc + f.bias;
}

int CnnModel::max_width() const {
  if (filters.empty()) {
    throw std::logic_error("CnnModel: no filters");
  }
  int w = 0;
  for (const auto& f : filters) w = std::max(w, f.width);
  return w;
}

std::vector<int> CnnModel::widths() const {
  std::set<int> distinct;
  for (const auto& f : filters) distinct.insert(f.width);
  return {distinct.begin(), distinct.end()};
}

namespace {

ForwardResult forward_impl(const Document& doc, const CnnModel& model,
                           const double* thresholds) {
  int real_tokens = 0;
  for (int32_t id : doc.token_ids) {
    if (id != kPadId) ++real_tokens;
  }
  if (real_tokens < 1) {
    throw std::invalid_argument("forward: document has no real tokens");
  }

  Document padded = pad_document(doc, model.max_width());
  const auto& ids = padded.token_ids;
  int padded_len = static_cast<int>(ids.size());
  int m = model.num_filters();

  ForwardResult out;
  out.padded_ids = ids;
  out.conv.scores.resize(static_cast<size_t>(m));
  out.pool.pooled.resize(static_cast<size_t>(m));
  out.pool.pre_relu.resize(static_cast<size_t>(m));
  out.pool.provenance.resize(static_cast<size_t>(m));

  for (int j = 0; j < m; ++j) {
    const ConvFilter& f = model.filters[static_cast<size_t>(j)];
    int positions = padded_len - f.width + 1;
    auto& row = out.conv.scores[static_cast<size_t>(j)];
    row.reserve(static_cast<size_t>(positions));
    double best = -std::numeric_limits<double>::infinity();
    int best_pos = 0;
    for (int i = 0; i < positions; ++i) {
      std::span<const int32_t> window(ids.data() + i, static_cast<size_t>(f.width));
      double s = ngram_score(window, f, model.embeddings);
      row.push_back(s);
      if (s > best) {  // strict: ties keep the lowest position
        best = s;
        best_pos = i;
      }
    }
    out.pool.pre_relu[static_cast<size_t>(j)] = best;
    double gated;
    if (thresholds != nullptr) {
      gated = best >= thresholds[j] ? best : 0.0;
    } else {
      gated = best > 0.0 ? best : 0.0;
    }
    out.pool.pooled[static_cast<size_t>(j)] = gated;
    out.pool.provenance[static_cast<size_t>(j)] = PoolProvenance{
        best_pos,
        std::vector<int32_t>(ids.begin() + best_pos, ids.begin() + best_pos + f.width)};
  }

  int c = model.num_classes();
  out.logits.resize(static_cast<size_t>(c));
  for (int k = 0; k < c; ++k) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += model.head(k, j) * out.pool.pooled[static_cast<size_t>(j)];
    }
    out.logits[static_cast<size_t>(k)] = acc + model.head_bias[static_cast<size_t>(k)];
  }
  out.probs = softmax(out.logits);
  return out;
}

}  // namespace

ForwardResult forward(const Document& doc, const CnnModel& model) {
  return forward_impl(doc, model, nullptr);
}

ForwardResult forward(const Document& doc, const CnnModel& model,
                      std::span<const double> pool_thresholds) {
  if (static_cast<int>(pool_thresholds.size()) != model.num_filters()) {
    throw std::invalid_argument("forward: one threshold per filter required");
  }
  return forward_impl(doc, model, pool_thresholds.data());
}

int predict(const Document& doc, const CnnModel& model) {
  ForwardResult r = forward(doc, model);
  return static_cast<int>(argmax(r.logits));
}

std::vector<uint8_t> serialize_model(const CnnModel& model,
                                     const std::map<std::string, uint64_t>& inputs) {
  ByteWriter w;
  w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
  w.u32(kFormatVersion);

  w.u32(static_cast<uint32_t>(inputs.size()));
  for (const auto& [path, hash] : inputs) {
    w.str(path);
    w.u64(hash);
  }

  w.i32(model.embedding_dim());
  w.i32(model.num_classes());
  w.i32(model.num_filters());
  w.u8(model.head_bias_enabled ? 1 : 0);

  w.i32(model.vocab.size());
  for (int32_t id = 0; id < model.vocab.size(); ++id) {
    w.str(model.vocab.token(id));
  }

  for (double v : model.embeddings.matrix.values) {
    w.f64(v);
  }

  for (const auto& f : model.filters) {
    w.i32(f.width);
    w.i32(f.filter_id);
    w.f64(f.bias);
    for (double v : f.weights.values) {
      w.f64(v);
    }
  }

  for (double v : model.head.values) {
    w.f64(v);
  }
  for (double v : model.head_bias) {
    w.f64(v);
  }
  return std::move(w.buf);
}

namespace {

std::map<std::string, uint64_t> read_header(ByteReader& r) {
  r.need(4);
  if (std::memcmp(r.buf.data(), kMagic, 4) != 0) {
    throw DataError("deserialize_model: not a convlens model file");
  }
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError("deserialize_model: unsupported format version " +
                    std::to_string(version));
  }
  uint32_t input_count = r.u32();
  std::map<std::string, uint64_t> inputs;
  for (uint32_t i = 0; i < input_count; ++i) {
    std::string path = r.str();
    inputs[path] = r.u64();
  }
  return inputs;
}

}  // namespace

std::map<std::string, uint64_t> deserialize_model_inputs(
    const std::vector<uint8_t>& bytes) {
  ByteReader r{bytes};
  return read_header(r);
}

CnnModel deserialize_model(const std::vector<uint8_t>& bytes) {
  ByteReader r{bytes};
  read_header(r);

  int d = r.i32();
  int c = r.i32();
  int m = r.i32();
  bool head_bias_enabled = r.u8() != 0;
  if (d <= 0 || c <= 0 || m <= 0) {
    throw DataError("deserialize_model: invalid config block");
  }

  CnnModel model;
  model.head_bias_enabled = head_bias_enabled;

  int32_t vocab_size = r.i32();
  if (vocab_size < 2) {
    throw DataError("deserialize_model: vocabulary must hold PAD and UNK");
  }
  std::string pad = r.str();
  std::string unk = r.str();
  if (pad != "PAD" || unk != "UNK") {
    throw DataError("deserialize_model: reserved vocabulary entries missing");
  }
  for (int32_t id = 2; id < vocab_size; ++id) {
    model.vocab.add(r.str());
  }
  if (model.vocab.size() != vocab_size) {
    throw DataError("deserialize_model: duplicate vocabulary entries");
  }

  model.embeddings.dim = d;
  model.embeddings.matrix = DenseMatrix(vocab_size, d);
  for (double& v : model.embeddings.matrix.values) {
    v = r.f64();
  }

  model.filters.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    ConvFilter& f = model.filters[static_cast<size_t>(j)];
    f.width = r.i32();
    if (f.width < 1) {
      throw DataError("deserialize_model: invalid filter width");
    }
    f.filter_id = r.i32();
    f.bias = r.f64();
    f.weights = DenseMatrix(d, f.width);
    for (double& v : f.weights.values) {
      v = r.f64();
    }
  }

  model.head = DenseMatrix(c, m);
  for (double& v : model.head.values) {
    v = r.f64();
  }
  model.head_bias.resize(static_cast<size_t>(c));
  for (double& v : model.head_bias) {
    v = r.f64();
  }
  if (r.pos != bytes.size()) {
    throw DataError("deserialize_model: trailing bytes after payload");
  }
  return model;
}

void save_model(const CnnModel& model, const std::string& path,
                const std::map<std::string, uint64_t>& inputs) {
  std::vector<uint8_t> bytes = serialize_model(model, inputs);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("save_model: cannot open " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("save_model: write failed for " + path);
  }
}

CnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("load_model: cannot open " + path);
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace convlens
