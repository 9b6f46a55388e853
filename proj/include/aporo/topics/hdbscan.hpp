#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace aporo::topics {

/// Dense row-major point set.
struct PointSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  const double* row(std::size_t i) const { return values.data() + i * dim; }
};

/// Projects onto the top principal components. Components are sign-fixed so
/// the largest-magnitude loading is positive, which keeps the output
/// deterministic. Returns the input unchanged when dim <= n_components.
PointSet reduce_pca(const PointSet& points, std::size_t n_components);

struct HdbscanParams {
  std::size_t min_cluster_size = 5;
  /// Neighbourhood size for core distances (self included); 0 means
  /// min_cluster_size.
  std::size_t min_samples = 0;
  /// Permit the root as a cluster even when it splits.
  bool allow_single_cluster = false;
};

struct HdbscanResult {
  /// Cluster index per point, -1 for noise. Clusters are numbered in the
  /// order they were selected from the condensed tree.
  std::vector<int> labels;
  std::size_t n_clusters = 0;
  /// True when nothing was selected and the root fallback was applied.
  bool single_cluster_fallback = false;
};

/// Density-based hierarchical clustering with excess-of-mass selection over
/// the condensed cluster tree (Euclidean metric, mutual reachability).
HdbscanResult hdbscan(const PointSet& points, const HdbscanParams& params);

}  // namespace aporo::topics
