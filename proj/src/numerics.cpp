#include "convlens/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace convlens {

double dot(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

DenseVector softmax(const DenseVector& z) {
  if (z.empty()) {
    throw std::invalid_argument("softmax: empty input");
  }
  double zmax = z[argmax(z)];
  DenseVector out(z.size());
  double sum = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    sum += out[i];
  }
  for (double& v : out) {
    v /= sum;
  }
  return out;
}

size_t argmax(std::span<const double> z) {
  if (z.empty()) {
    throw std::invalid_argument("argmax: empty input");
  }
  size_t best = 0;
  for (size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace convlens
