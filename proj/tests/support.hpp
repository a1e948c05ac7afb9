#pragma once

// Shared helpers for the test binaries: random inputs and brute-force
// reference implementations that the optimized kernels are checked against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "aspd/geometry.hpp"
#include "aspd/rng.hpp"
#include "aspd/tensor.hpp"

namespace aspd::testing {

inline PointCloud random_cloud(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> xyz(3 * n);
  for (double& v : xyz) v = rng.uniform(lo, hi);
  return PointCloud(std::move(xyz));
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(data));
}

inline double dist2(const PointCloud& a, std::size_t i, const PointCloud& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    const double diff = a(i, d) - b(j, d);
    s += diff * diff;
  }
  return s;
}

// Recomputes every candidate's distance to the whole selected set at each
// step; lowest index wins ties.
inline std::vector<std::size_t> fps_oracle(const PointCloud& p, std::size_t m, std::size_t start) {
  std::vector<std::size_t> chosen{start};
  std::vector<bool> used(p.size(), false);
  used[start] = true;
  while (chosen.size() < m) {
    std::size_t best = p.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s : chosen) d = std::min(d, dist2(p, i, p, s));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = true;
    chosen.push_back(best);
  }
  return chosen;
}

// Full sort of all reference points by (distance, index).
inline std::vector<std::vector<std::size_t>> knn_oracle(const PointCloud& q, const PointCloud& r,
                                                        std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<std::size_t> idx(r.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dist2(q, i, r, a) < dist2(q, i, r, b); });
    idx.resize(k);
    out.push_back(idx);
  }
  return out;
}

inline double directed_oracle(const PointCloud& a, const PointCloud& b, bool squared_mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) best = std::min(best, dist2(a, i, b, j));
    acc = squared_mean ? acc + best : std::max(acc, std::sqrt(best));
  }
  return squared_mean ? acc / static_cast<double>(a.size()) : acc;
}

inline double chamfer_oracle(const PointCloud& p, const PointCloud& s) {
  return directed_oracle(s, p, true) + directed_oracle(p, s, true);
}

inline double hausdorff_oracle(const PointCloud& p, const PointCloud& s) {
  return std::max(directed_oracle(p, s, false), directed_oracle(s, p, false));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace aspd::testing
