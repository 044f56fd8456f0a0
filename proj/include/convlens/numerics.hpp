#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace convlens {

using DenseVector = std::vector<double>;

// Row-major dense matrix of 64-bit floats.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  double& operator()(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }

  std::span<const double> row(int r) const {
    return {values.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  std::span<double> row(int r) {
    return {values.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
};

// Deterministic generator (splitmix64). Identical seed gives an identical
// draw sequence on every platform; distributions are derived from raw
// 64-bit draws rather than std:: distribution objects, which are not
// pinned down by the standard.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1), 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0, n); n must be positive
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

double dot(const DenseVector& a, const DenseVector& b);

// Max-subtracted for stability; outputs are positive and sum to 1.
DenseVector softmax(const DenseVector& z);

// Index of the maximum element; ties break to the lowest index.
size_t argmax(std::span<const double> z);

}  // namespace convlens
