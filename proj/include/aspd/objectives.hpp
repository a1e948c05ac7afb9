#pragma once

// Training losses and task metrics.

#include <cstddef>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "aspd/geometry.hpp"
#include "aspd/tensor.hpp"

namespace aspd {

// Weights of the compound loss λ·task + α·conf + β·off.
struct LossWeights {
  double lambda = 0.5;
  double alpha = 10.0;
  double beta = 1.0;

  static LossWeights classification() { return {0.5, 10.0, 1.0}; }
  static LossWeights registration() { return {100.0, 10.0, 1.0}; }

  // Finite, nonnegative, at least one nonzero; ConfigError otherwise.
  void validate() const;
};

// −log p[label] for a probability vector (entries ≥ 0, summing to 1).
double cross_entropy(std::span<const double> probs, std::size_t label);
// Same loss from unnormalized logits (1×N or N), via a stable log-softmax.
Var cross_entropy_logits(Var logits, std::size_t label);

// Chamfer distance between two n×3 / m×3 nodes with gradients to both.
Var conformity_loss(Var p, Var s);

// Mean per-pair displacement length (1/m)·Σ|s - s'|. The backward pass uses
// d/sqrt(|d|² + 1e-12), so zero-length pairs contribute a zero gradient.
Var offset_loss(Var presampled, Var refined);

double compound_loss(double task, double conf, double off, const LossWeights& w);
Var compound_loss(Var task, Var conf, Var off, const LossWeights& w);

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  Quaternion normalized() const;
};

class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}
  // Throws ContractError unless orthonormal with det +1 (within 1e-6).
  explicit RotationMatrix(const Eigen::Matrix3d& m);

  static RotationMatrix from_quaternion(const Quaternion& q);
  const Eigen::Matrix3d& matrix() const { return m_; }

 private:
  Eigen::Matrix3d m_;
};

// ‖R_pred⁻¹·R_gt − I‖²_F.
double rotation_loss(const RotationMatrix& pred, const RotationMatrix& gt);

// Chamfer(source, template) plus the rotation term.
double registration_task_loss(const PointCloud& source, const PointCloud& templ,
                              const RotationMatrix& pred, const RotationMatrix& gt);

// Rotation error in degrees, 2·acos(2⟨q_pred, q_gt⟩² − 1). With
// `geodesic` set the leading factor 2 is dropped, giving the usual
// quaternion geodesic angle.
double rotation_error(const Quaternion& pred, const Quaternion& gt, bool geodesic = false);
double mean_rotation_error(std::span<const std::pair<Quaternion, Quaternion>> pairs,
                           bool geodesic = false);

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

}  // namespace aspd
