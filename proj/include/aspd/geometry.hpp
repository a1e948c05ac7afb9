#pragma once

// Point-set kernels: neighbor search, heuristic samplers, set distances.
// Everything here is a pure function of its arguments.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "aspd/tensor.hpp"

namespace aspd {

// n×3 coordinates, row-major.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<double> xyz);
  static PointCloud from_tensor(const Tensor& t);

  std::size_t size() const { return xyz_.size() / 3; }
  bool empty() const { return xyz_.empty(); }
  const double* point(std::size_t i) const { return xyz_.data() + 3 * i; }
  double operator()(std::size_t i, std::size_t axis) const { return xyz_[3 * i + axis]; }
  std::span<const double> xyz() const { return xyz_; }

  Tensor to_tensor() const;
  PointCloud subset(std::span<const std::size_t> indices) const;
  // First n points.
  PointCloud prefix(std::size_t n) const;

  bool operator==(const PointCloud&) const = default;

 private:
  std::vector<double> xyz_;
};

// Ordered, distinct point indices (selection order for FPS).
struct IndexSet {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  std::size_t operator[](std::size_t i) const { return indices[i]; }
  bool operator==(const IndexSet&) const = default;
};

inline double squared_distance(const double* a, const double* b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Row i: the k reference points nearest to query i, ascending by squared
// distance, ties broken by lower index.
IndexMatrix knn(const PointCloud& queries, const PointCloud& reference, std::size_t k);

// Farthest point sampling from `start`, O(n·m) with a running min-distance
// array. Ties go to the lowest index.
IndexSet fps(const PointCloud& cloud, std::size_t m, std::size_t start = 0);

// m distinct indices drawn without replacement (partial Fisher-Yates).
IndexSet random_sample(const PointCloud& cloud, std::size_t m, std::uint64_t seed);

// Mean squared nearest-neighbor distance, both directions, summed.
double chamfer(const PointCloud& p, const PointCloud& s);

// max over a of min over b of |a - b|.
double directed_hausdorff(const PointCloud& a, const PointCloud& b);
double hausdorff(const PointCloud& p, const PointCloud& s);

struct Normalized {
  PointCloud cloud;
  double center[3] = {0.0, 0.0, 0.0};
  double scale = 1.0;

  // Maps normalized coordinates back to the original frame.
  PointCloud restore(const PointCloud& normalized) const;
};

Normalized normalize_with_transform(const PointCloud& cloud);
// Centroid to the origin, max norm to 1. An all-identical cloud maps to
// zeros with scale 1.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

// S = S' + ΔS on the tape.
Var apply_offsets(Var presampled, Var offsets);

}  // namespace aspd
