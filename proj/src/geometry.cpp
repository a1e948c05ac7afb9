#include "aspd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "aspd/rng.hpp"

namespace aspd {

PointCloud::PointCloud(std::vector<double> xyz) : xyz_(std::move(xyz)) {
  if (xyz_.size() % 3 != 0) throw DimensionError("point cloud needs 3 coordinates per point");
  for (double v : xyz_) {
    if (!std::isfinite(v)) throw NumericError("point cloud has a non-finite coordinate");
  }
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.cols() != 3) {
    throw DimensionError("point cloud tensor must be n×3, got " + shape_str(t.shape()));
  }
  return PointCloud(std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor PointCloud::to_tensor() const { return Tensor({size(), 3}, xyz_); }

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * 3);
  for (std::size_t i : indices) {
    if (i >= size()) throw IndexError("point index " + std::to_string(i) + " out of range");
    out.insert(out.end(), point(i), point(i) + 3);
  }
  return PointCloud(std::move(out));
}

PointCloud PointCloud::prefix(std::size_t n) const {
  if (n > size()) {
    throw ContractError("cloud has " + std::to_string(size()) + " points, asked for " +
                        std::to_string(n));
  }
  return PointCloud(std::vector<double>(xyz_.begin(), xyz_.begin() + 3 * n));
}

namespace {

void require_nonempty(const PointCloud& c, const char* what) {
  if (c.empty()) throw ContractError(std::string(what) + ": empty point set");
}

}  // namespace

IndexMatrix knn(const PointCloud& queries, const PointCloud& reference, std::size_t k) {
  const std::size_t n = reference.size();
  if (k < 1 || k > n) {
    throw ContractError("knn: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  IndexMatrix out{queries.size(), k, std::vector<std::uint32_t>(queries.size() * k)};
  // Coordinates split into columns so the distance loop vectorizes.
  std::vector<double> xs(n), ys(n), zs(n), dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = reference(i, 0);
    ys[i] = reference(i, 1);
    zs[i] = reference(i, 2);
  }
  // Bounded max-heap on (distance, index): a lexicographic total order, so
  // ties go to the lower index and the result is deterministic. Candidates
  // arrive in index order, so one only enters with a strictly smaller
  // distance than the current k-th.
  std::vector<std::pair<double, std::uint32_t>> heap;
  heap.reserve(k);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double qx = queries(q, 0), qy = queries(q, 1), qz = queries(q, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = xs[i] - qx, dy = ys[i] - qy, dz = zs[i] - qz;
      dist[i] = dx * dx + dy * dy + dz * dz;
    }
    heap.clear();
    for (std::size_t i = 0; i < k; ++i) heap.emplace_back(dist[i], static_cast<std::uint32_t>(i));
    std::make_heap(heap.begin(), heap.end());
    double worst = heap.front().first;
    for (std::size_t i = k; i < n; ++i) {
      if (dist[i] < worst) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {dist[i], static_cast<std::uint32_t>(i)};
        std::push_heap(heap.begin(), heap.end());
        worst = heap.front().first;
      }
    }
    std::sort_heap(heap.begin(), heap.end());
    for (std::size_t j = 0; j < k; ++j) out.data[q * k + j] = heap[j].second;
  }
  return out;
}

IndexSet fps(const PointCloud& cloud, std::size_t m, std::size_t start) {
  const std::size_t n = cloud.size();
  if (m < 1 || m > n) {
    throw ContractError("fps: m=" + std::to_string(m) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (start >= n) throw ContractError("fps: start index " + std::to_string(start) + " out of range");

  IndexSet out;
  out.indices.reserve(m);
  out.indices.push_back(start);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[start] = 1;
  std::size_t last = start;
  for (std::size_t step = 1; step < m; ++step) {
    const double* lp = cloud.point(last);
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = squared_distance(cloud.point(i), lp);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    taken[best] = 1;
    out.indices.push_back(best);
    last = best;
  }
  return out;
}

IndexSet random_sample(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (m < 1 || m > n) {
    throw ContractError("random_sample: m=" + std::to_string(m) + " must lie in [1, " +
                        std::to_string(n) + "]");
  }
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(m);
  return IndexSet{std::move(perm)};
}

namespace {

// Squared distance from every point of a to its nearest point of b, and
// vice versa, in one sweep.
void nearest_both(const PointCloud& a, const PointCloud& b, std::vector<double>& a_to_b,
                  std::vector<double>& b_to_a) {
  a_to_b.assign(a.size(), std::numeric_limits<double>::infinity());
  b_to_a.assign(b.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double* ap = a.point(i);
    double best = a_to_b[i];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = squared_distance(ap, b.point(j));
      if (d < best) best = d;
      if (d < b_to_a[j]) b_to_a[j] = d;
    }
    a_to_b[i] = best;
  }
}

}  // namespace

double chamfer(const PointCloud& p, const PointCloud& s) {
  require_nonempty(p, "chamfer");
  require_nonempty(s, "chamfer");
  std::vector<double> s_to_p, p_to_s;
  nearest_both(s, p, s_to_p, p_to_s);
  const double a = std::accumulate(s_to_p.begin(), s_to_p.end(), 0.0) / static_cast<double>(s.size());
  const double b = std::accumulate(p_to_s.begin(), p_to_s.end(), 0.0) / static_cast<double>(p.size());
  return a + b;
}

double directed_hausdorff(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, "hausdorff");
  require_nonempty(b, "hausdorff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, squared_distance(a.point(i), b.point(j)));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

double hausdorff(const PointCloud& p, const PointCloud& s) {
  require_nonempty(p, "hausdorff");
  require_nonempty(s, "hausdorff");
  std::vector<double> s_to_p, p_to_s;
  nearest_both(s, p, s_to_p, p_to_s);
  const double a = *std::max_element(s_to_p.begin(), s_to_p.end());
  const double b = *std::max_element(p_to_s.begin(), p_to_s.end());
  return std::sqrt(std::max(a, b));
}

PointCloud Normalized::restore(const PointCloud& normalized) const {
  std::vector<double> out(normalized.xyz().begin(), normalized.xyz().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * scale + center[i % 3];
  return PointCloud(std::move(out));
}

Normalized normalize_with_transform(const PointCloud& cloud) {
  require_nonempty(cloud, "normalize_unit_sphere");
  const std::size_t n = cloud.size();
  Normalized out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) out.center[a] += cloud(i, a);
  for (double& c : out.center) c /= static_cast<double>(n);

  std::vector<double> xyz(cloud.xyz().begin(), cloud.xyz().end());
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      xyz[3 * i + a] -= out.center[a];
      sq += xyz[3 * i + a] * xyz[3 * i + a];
    }
    max_norm = std::max(max_norm, std::sqrt(sq));
  }
  if (max_norm > 0.0) {
    for (double& v : xyz) v /= max_norm;
    out.scale = max_norm;
  } else {
    std::fill(xyz.begin(), xyz.end(), 0.0);
  }
  out.cloud = PointCloud(std::move(xyz));
  return out;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  return normalize_with_transform(cloud).cloud;
}

Var apply_offsets(Var presampled, Var offsets) {
  const Tensor& a = presampled.value();
  const Tensor& b = offsets.value();
  if (a.rank() != 2 || a.cols() != 3 || a.shape() != b.shape()) {
    throw DimensionError("apply_offsets: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
  }
  return add(presampled, offsets);
}

}  // namespace aspd
