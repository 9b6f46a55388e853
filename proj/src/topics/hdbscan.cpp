#include "aporo/topics/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "aporo/common/error.hpp"

namespace aporo::topics {

PointSet reduce_pca(const PointSet& points, std::size_t n_components) {
  if (points.dim <= n_components || points.n == 0) return points;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> x(points.values.data(), static_cast<Eigen::Index>(points.n),
                          static_cast<Eigen::Index>(points.dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Mat centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / std::max<double>(1.0, points.n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("PCA eigen-decomposition failed");

  const auto d = static_cast<Eigen::Index>(points.dim);
  const auto k = static_cast<Eigen::Index>(n_components);
  Eigen::MatrixXd basis(d, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < d; ++i) {
      if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
    }
    if (v(arg) < 0) v = -v;
    basis.col(c) = v;
  }
  const Mat projected = centered * basis;

  PointSet out;
  out.n = points.n;
  out.dim = n_components;
  out.values.assign(projected.data(), projected.data() + projected.size());
  return out;
}

namespace {

double euclidean(const PointSet& p, std::size_t a, std::size_t b) {
  const double* x = p.row(a);
  const double* y = p.row(b);
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim; ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return std::sqrt(s);
}

struct Edge {
  std::size_t a, b;
  double w;
};

struct Merge {
  std::size_t left, right;
  double dist;
  std::size_t size;
};

struct CondensedRow {
  std::size_t parent, child;
  double lambda;
  std::size_t size;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(2 * n), size_(2 * n, 1), next_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    for (std::size_t i = n; i < 2 * n; ++i) size_[i] = 0;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  std::size_t unite(std::size_t a, std::size_t b) {
    const std::size_t node = next_++;
    parent_[a] = parent_[b] = node;
    size_[node] = size_[a] + size_[b];
    return node;
  }
  std::size_t size(std::size_t x) const { return size_[x]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::size_t next_;
};

double to_lambda(double dist) { return 1.0 / std::max(dist, 1e-12); }

}  // namespace

HdbscanResult hdbscan(const PointSet& points, const HdbscanParams& params) {
  if (params.min_cluster_size < 2) throw ContractViolation("min_cluster_size must be at least 2");
  const std::size_t n = points.n;
  HdbscanResult result;
  result.labels.assign(n, -1);
  if (n < params.min_cluster_size || n < 2) return result;

  const std::size_t min_samples = std::min(n, params.min_samples ? params.min_samples : params.min_cluster_size);

  // Core distances: distance to the min_samples-th nearest point, self included.
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = euclidean(points, i, j);
  }
  std::vector<double> core(n);
  {
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(dist.begin() + static_cast<std::ptrdiff_t>(i * n), n, row.begin());
      std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(min_samples - 1), row.end());
      core[i] = row[min_samples - 1];
    }
  }
  auto mreach = [&](std::size_t a, std::size_t b) { return std::max({core[a], core[b], dist[a * n + b]}); };

  // Prim's MST over the mutual-reachability graph.
  std::vector<Edge> mst;
  mst.reserve(n - 1);
  {
    std::vector<bool> in_tree(n, false);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    std::size_t current = 0;
    in_tree[0] = true;
    for (std::size_t step = 1; step < n; ++step) {
      std::size_t next = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        const double w = mreach(current, j);
        if (w < best[j]) {
          best[j] = w;
          from[j] = current;
        }
        if (next == n || best[j] < best[next]) next = j;
      }
      in_tree[next] = true;
      mst.push_back({from[next], next, best[next]});
      current = next;
    }
  }
  std::stable_sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) { return x.w < y.w; });

  // Single-linkage hierarchy; merge k creates node n + k.
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  {
    UnionFind uf(n);
    for (const auto& e : mst) {
      const std::size_t ra = uf.find(e.a);
      const std::size_t rb = uf.find(e.b);
      const std::size_t node = uf.unite(ra, rb);
      merges.push_back({ra, rb, e.w, uf.size(node)});
    }
  }
  auto node_size = [&](std::size_t node) { return node < n ? std::size_t{1} : merges[node - n].size; };
  auto leaves_of = [&](std::size_t node, auto&& visit) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x < n) {
        visit(x);
      } else {
        stack.push_back(merges[x - n].right);
        stack.push_back(merges[x - n].left);
      }
    }
  };

  // Condensed tree. Cluster labels start at n (the root).
  const std::size_t mcs = params.min_cluster_size;
  const std::size_t root = 2 * n - 2;
  std::vector<CondensedRow> tree;
  std::vector<std::size_t> relabel(2 * n - 1, 0);
  std::size_t next_label = n + 1;
  relabel[root] = n;
  {
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node < n) continue;
      const Merge& m = merges[node - n];
      const double lambda = to_lambda(m.dist);
      const std::size_t lc = node_size(m.left);
      const std::size_t rc = node_size(m.right);
      const std::size_t parent = relabel[node];
      auto spill = [&](std::size_t child) {
        leaves_of(child, [&](std::size_t leaf) { tree.push_back({parent, leaf, lambda, 1}); });
      };
      if (lc >= mcs && rc >= mcs) {
        relabel[m.left] = next_label++;
        tree.push_back({parent, relabel[m.left], lambda, lc});
        relabel[m.right] = next_label++;
        tree.push_back({parent, relabel[m.right], lambda, rc});
        queue.push_back(m.left);
        queue.push_back(m.right);
      } else if (lc < mcs && rc < mcs) {
        spill(m.left);
        spill(m.right);
      } else if (lc < mcs) {
        relabel[m.right] = parent;
        spill(m.left);
        queue.push_back(m.right);
      } else {
        relabel[m.left] = parent;
        spill(m.right);
        queue.push_back(m.left);
      }
    }
  }

  // Stability and excess-of-mass selection.
  const std::size_t n_labels = next_label - n;
  std::vector<double> birth(n_labels, 0.0);
  std::vector<double> stability(n_labels, 0.0);
  std::vector<std::vector<std::size_t>> children(n_labels);
  for (const auto& r : tree) {
    if (r.child >= n) {
      birth[r.child - n] = r.lambda;
      children[r.parent - n].push_back(r.child - n);
    }
  }
  for (const auto& r : tree) {
    stability[r.parent - n] += (r.lambda - birth[r.parent - n]) * static_cast<double>(r.size);
  }
  std::vector<bool> selected(n_labels, true);
  const std::size_t lowest = params.allow_single_cluster ? 0 : 1;
  if (!params.allow_single_cluster) selected[0] = false;
  for (std::size_t c = n_labels; c-- > lowest;) {
    double subtree = 0.0;
    for (std::size_t ch : children[c]) subtree += stability[ch];
    if (!children[c].empty() && subtree > stability[c]) {
      selected[c] = false;
      stability[c] = subtree;
    } else {
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const std::size_t x = stack.back();
        stack.pop_back();
        selected[x] = false;
        stack.insert(stack.end(), children[x].begin(), children[x].end());
      }
    }
  }

  // Label each point by its nearest selected ancestor.
  std::vector<std::size_t> cluster_parent(n_labels, 0);
  for (const auto& r : tree) {
    if (r.child >= n) cluster_parent[r.child - n] = r.parent - n;
  }
  std::vector<int> cluster_index(n_labels, -1);
  int n_clusters = 0;
  for (std::size_t c = 0; c < n_labels; ++c) {
    if (selected[c]) cluster_index[c] = n_clusters++;
  }
  double root_max_lambda = 0.0;
  for (const auto& r : tree) {
    if (r.parent == n) root_max_lambda = std::max(root_max_lambda, r.lambda);
  }
  for (const auto& r : tree) {
    if (r.child >= n) continue;
    std::size_t c = r.parent - n;
    while (!selected[c] && c != 0) c = cluster_parent[c];
    if (!selected[c]) continue;
    if (c == 0 && r.lambda < root_max_lambda) continue;
    result.labels[r.child] = cluster_index[c];
  }
  result.n_clusters = static_cast<std::size_t>(n_clusters);

  // Nothing survived selection: keep the densest root members as one
  // cluster when they are numerous enough (identical points, for example).
  if (n_clusters == 0) {
    std::vector<std::size_t> dense;
    for (const auto& r : tree) {
      if (r.parent == n && r.child < n && r.lambda >= root_max_lambda) dense.push_back(r.child);
    }
    if (dense.size() >= mcs) {
      for (std::size_t p : dense) result.labels[p] = 0;
      result.n_clusters = 1;
      result.single_cluster_fallback = true;
    }
  }
  return result;
}

}  // namespace aporo::topics
