#include "convlens/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace convlens {

namespace {

double sq_distance(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
};

}  // namespace

double estimate_bandwidth(const std::vector<DenseVector>& points) {
  constexpr double kFloor = 1e-6;
  if (points.size() < 2) {
    return kFloor;
  }
  // deterministic strided sample instead of a random one
  size_t stride = (points.size() + 999) / 1000;
  std::vector<const DenseVector*> sample;
  for (size_t i = 0; i < points.size(); i += stride) {
    sample.push_back(&points[i]);
  }
  std::vector<double> distances;
  distances.reserve(sample.size() * (sample.size() - 1) / 2);
  for (size_t i = 0; i < sample.size(); ++i) {
    for (size_t j = i + 1; j < sample.size(); ++j) {
      distances.push_back(std::sqrt(sq_distance(*sample[i], *sample[j])));
    }
  }
  if (distances.empty()) {
    return kFloor;
  }
  std::sort(distances.begin(), distances.end());
  size_t m = distances.size();
  double median = (m % 2 == 1) ? distances[m / 2]
                               : 0.5 * (distances[m / 2 - 1] + distances[m / 2]);
  return std::max(kFloor, 0.5 * median);
}

ClusterResult mean_shift(const std::vector<DenseVector>& points, double bandwidth,
                         double tol, int max_iter) {
  if (points.empty()) {
    throw std::invalid_argument("mean_shift: no points");
  }
  if (bandwidth <= 0.0) {
    throw std::invalid_argument("mean_shift: bandwidth must be positive");
  }
  size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) {
      throw std::invalid_argument("mean_shift: inconsistent point dimensions");
    }
  }

  double inv_two_bw2 = 0.5 / (bandwidth * bandwidth);
  std::vector<DenseVector> modes(points.size());
  DenseVector next(dim);
  for (size_t seed = 0; seed < points.size(); ++seed) {
    DenseVector x = points[seed];
    for (int iter = 0; iter < max_iter; ++iter) {
      std::fill(next.begin(), next.end(), 0.0);
      double wsum = 0.0;
      for (const auto& p : points) {
        double w = std::exp(-sq_distance(x, p) * inv_two_bw2);
        wsum += w;
        for (size_t k = 0; k < dim; ++k) {
          next[k] += w * p[k];
        }
      }
      if (wsum == 0.0) {
        break;  // everything underflowed; the seed is its own mode
      }
      double shift2 = 0.0;
      for (size_t k = 0; k < dim; ++k) {
        next[k] /= wsum;
        double d = next[k] - x[k];
        shift2 += d * d;
      }
      x = next;
      if (shift2 < tol * tol) {
        break;
      }
    }
    modes[seed] = std::move(x);
  }

  // transitive merge keeps the outcome independent of point order
  double merge2 = (bandwidth / 2.0) * (bandwidth / 2.0);
  UnionFind uf(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = i + 1; j < points.size(); ++j) {
      if (sq_distance(modes[i], modes[j]) <= merge2) {
        uf.unite(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }

  std::vector<int> root_to_cluster(points.size(), -1);
  std::vector<std::vector<size_t>> members;
  for (size_t i = 0; i < points.size(); ++i) {
    int root = uf.find(static_cast<int>(i));
    if (root_to_cluster[static_cast<size_t>(root)] < 0) {
      root_to_cluster[static_cast<size_t>(root)] = static_cast<int>(members.size());
      members.emplace_back();
    }
    members[static_cast<size_t>(root_to_cluster[static_cast<size_t>(root)])].push_back(i);
  }

  std::vector<DenseVector> centroids(members.size(), DenseVector(dim, 0.0));
  for (size_t c = 0; c < members.size(); ++c) {
    for (size_t idx : members[c]) {
      for (size_t k = 0; k < dim; ++k) {
        centroids[c][k] += points[idx][k];
      }
    }
    for (size_t k = 0; k < dim; ++k) {
      centroids[c][k] /= static_cast<double>(members[c].size());
    }
  }

  std::vector<size_t> order(members.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (members[a].size() != members[b].size()) {
      return members[a].size() > members[b].size();
    }
    return centroids[a] < centroids[b];
  });

  ClusterResult result;
  result.point_count = static_cast<int>(points.size());
  result.assignments.assign(points.size(), -1);
  std::vector<int> new_index(members.size());
  for (size_t rank = 0; rank < order.size(); ++rank) {
    new_index[order[rank]] = static_cast<int>(rank);
  }
  for (size_t c = 0; c < members.size(); ++c) {
    for (size_t idx : members[c]) {
      result.assignments[idx] = new_index[c];
    }
  }
  for (size_t rank = 0; rank < order.size(); ++rank) {
    size_t c = order[rank];
    result.centroids.push_back(centroids[c]);
    result.sizes.push_back(static_cast<int>(members[c].size()));
    result.size_fractions.push_back(static_cast<double>(members[c].size()) /
                                    static_cast<double>(points.size()));
  }
  return result;
}

FilterClustering cluster_filter_ngrams(const ConvFilter& filter,
                                       const NgramIndex& index,
                                       const EmbeddingTable& embeddings,
                                       const FilterProfile& profile,
                                       int top_k, double bandwidth) {
  if (!profile.informative()) {
    throw std::invalid_argument("cluster_filter_ngrams: filter has no finite threshold");
  }
  if (index.width != filter.width) {
    throw std::invalid_argument("cluster_filter_ngrams: index width mismatch");
  }
  if (top_k < 1) {
    throw std::invalid_argument("cluster_filter_ngrams: top_k must be >= 1");
  }

  std::vector<ScoredNgram> passing;
  for (const auto& ids : index.ngrams) {
    SlotActivationVector slots = slot_decompose(ids, filter, embeddings);
    double score = slots.total + filter.bias;
    if (score >= profile.threshold) {
      passing.push_back({ids, score, std::move(slots)});
    }
  }

  FilterClustering result;
  result.filter_id = filter.filter_id;
  if (passing.empty()) {
    return result;  // empty marker, not an error
  }

  constexpr size_t kMaxPoints = 10000;
  if (passing.size() > kMaxPoints) {
    std::sort(passing.begin(), passing.end(),
              [](const ScoredNgram& a, const ScoredNgram& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.ids < b.ids;
              });
    passing.resize(kMaxPoints);
  }

  std::vector<DenseVector> points;
  points.reserve(passing.size());
  for (const auto& entry : passing) {
    points.push_back(entry.slots.activations);
  }

  double bw = bandwidth > 0.0 ? bandwidth : estimate_bandwidth(points);
  ClusterResult shift = mean_shift(points, bw);

  result.point_count = shift.point_count;
  result.bandwidth = bw;
  result.clusters.resize(shift.centroids.size());
  for (size_t c = 0; c < shift.centroids.size(); ++c) {
    auto& cluster = result.clusters[c];
    cluster.centroid = shift.centroids[c];
    cluster.size = shift.sizes[c];
    cluster.size_fraction = shift.size_fractions[c];
  }
  for (size_t i = 0; i < passing.size(); ++i) {
    result.clusters[static_cast<size_t>(shift.assignments[i])].top_ngrams.push_back(
        passing[i]);
  }
  for (auto& cluster : result.clusters) {
    std::sort(cluster.top_ngrams.begin(), cluster.top_ngrams.end(),
              [](const ScoredNgram& a, const ScoredNgram& b) {
                if (a.slots.total != b.slots.total) return a.slots.total > b.slots.total;
                return a.ids < b.ids;
              });
    if (static_cast<int>(cluster.top_ngrams.size()) > top_k) {
      cluster.top_ngrams.resize(static_cast<size_t>(top_k));
    }
  }
  return result;
}

}  // namespace convlens
