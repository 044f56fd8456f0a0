#pragma once

#include <vector>

#include "convlens/slots.hpp"
#include "convlens/threshold.hpp"

namespace convlens {

struct ClusterResult {
  int point_count = 0;
  std::vector<int> assignments;        // per input point, index into centroids
  std::vector<DenseVector> centroids;  // member means, ordered by size desc
  std::vector<int> sizes;
  std::vector<double> size_fractions;
};

// 0.5 x median pairwise Euclidean distance over a deterministic sample of at
// most 1000 points; never below 1e-6.
double estimate_bandwidth(const std::vector<DenseVector>& points);

// Gaussian-kernel mean shift: hill-climb from every point until the step is
// below tol (or max_iter), merge converged modes within bandwidth/2 of each
// other (transitively), group points by the mode they climbed to.
ClusterResult mean_shift(const std::vector<DenseVector>& points, double bandwidth,
                         double tol = 1e-4, int max_iter = 300);

struct NgramCluster {
  DenseVector centroid;
  int size = 0;
  double size_fraction = 0.0;
  std::vector<ScoredNgram> top_ngrams;  // by total activation, descending
};

struct FilterClustering {
  int filter_id = 0;
  int point_count = 0;  // 0 marks "no threshold-passing ngrams"
  double bandwidth = 0.0;
  std::vector<NgramCluster> clusters;
};

// Clusters the slot activation vectors of index ngrams scoring at or above
// the profile threshold (bias included). bandwidth <= 0 means estimate it.
FilterClustering cluster_filter_ngrams(const ConvFilter& filter,
                                       const NgramIndex& index,
                                       const EmbeddingTable& embeddings,
                                       const FilterProfile& profile,
                                       int top_k = 5, double bandwidth = 0.0);

}  // namespace convlens
