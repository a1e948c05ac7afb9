#include "aspd/objectives.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace aspd {

void LossWeights::validate() const {
  for (double v : {lambda, alpha, beta}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
  }
  if (lambda == 0.0 && alpha == 0.0 && beta == 0.0) throw ConfigError("all loss weights are zero");
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ContractError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ContractError("probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ContractError("probabilities must sum to 1");
  if (probs[label] <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(probs[label]);
}

Var cross_entropy_logits(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  const std::size_t n = z.size();
  if (z.rank() > 2 || (z.rank() == 2 && z.rows() != 1)) {
    throw DimensionError("cross_entropy: logits must be a vector, got " + shape_str(z.shape()));
  }
  if (label >= n) {
    throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(n) +
                        " classes");
  }
  const double zmax = *std::max_element(z.data().begin(), z.data().end());
  double denom = 0.0;
  for (double v : z.data()) denom += std::exp(v - zmax);
  const double log_z = zmax + std::log(denom);
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) probs[i] = std::exp(z[i] - log_z);
  const std::size_t zid = logits.id;
  return logits.tape->record(OpKind::kCrossEntropy, Tensor::scalar(log_z - z[label]), {zid},
                             [zid, label, probs = std::move(probs)](Tape& t, std::size_t,
                                                                    std::span<const double> g) {
                               auto& gz = t.grad_buffer(zid);
                               for (std::size_t i = 0; i < probs.size(); ++i) {
                                 gz[i] += g[0] * (probs[i] - (i == label ? 1.0 : 0.0));
                               }
                             });
}

Var conformity_loss(Var p, Var s) {
  const Tensor& pv = p.value();
  const Tensor& sv = s.value();
  for (const Tensor* t : {&pv, &sv}) {
    if (t->rank() != 2 || t->cols() != 3) throw DimensionError("conformity_loss: expected n×3, got " + shape_str(t->shape()));
    if (t->rows() == 0) throw ContractError("conformity_loss: empty point set");
  }
  if (p.tape != s.tape) throw TapeError("operands live on different tapes");
  const std::size_t n = pv.rows(), m = sv.rows();
  std::vector<std::uint32_t> s_near(m), p_near(n);
  std::vector<double> s_best(m, std::numeric_limits<double>::infinity());
  std::vector<double> p_best(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < m; ++j) {
    const double* sp = sv.ptr() + 3 * j;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(sp, pv.ptr() + 3 * i);
      if (d < s_best[j]) {
        s_best[j] = d;
        s_near[j] = static_cast<std::uint32_t>(i);
      }
      if (d < p_best[i]) {
        p_best[i] = d;
        p_near[i] = static_cast<std::uint32_t>(j);
      }
    }
  }
  const double value = std::accumulate(s_best.begin(), s_best.end(), 0.0) / static_cast<double>(m) +
                       std::accumulate(p_best.begin(), p_best.end(), 0.0) / static_cast<double>(n);
  const std::size_t pid = p.id, sid = s.id;
  return p.tape->record(
      OpKind::kChamfer, Tensor::scalar(value), {pid, sid},
      [pid, sid, n, m, s_near = std::move(s_near), p_near = std::move(p_near)](
          Tape& t, std::size_t, std::span<const double> g) {
        const Tensor& pv = t.value(pid);
        const Tensor& sv = t.value(sid);
        std::vector<double> gp(3 * n, 0.0), gs(3 * m, 0.0);
        const double ws = 2.0 * g[0] / static_cast<double>(m);
        const double wp = 2.0 * g[0] / static_cast<double>(n);
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t i = s_near[j];
          for (std::size_t a = 0; a < 3; ++a) {
            const double d = ws * (sv[3 * j + a] - pv[3 * i + a]);
            gs[3 * j + a] += d;
            gp[3 * i + a] -= d;
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = p_near[i];
          for (std::size_t a = 0; a < 3; ++a) {
            const double d = wp * (pv[3 * i + a] - sv[3 * j + a]);
            gp[3 * i + a] += d;
            gs[3 * j + a] -= d;
          }
        }
        if (t.requires_grad(pid)) t.accumulate(pid, gp);
        if (t.requires_grad(sid)) t.accumulate(sid, gs);
      });
}

Var offset_loss(Var presampled, Var refined) {
  const Tensor& a = presampled.value();
  const Tensor& b = refined.value();
  if (a.shape() != b.shape() || a.rank() != 2 || a.cols() != 3) {
    throw DimensionError("offset_loss: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (presampled.tape != refined.tape) throw TapeError("operands live on different tapes");
  const std::size_t m = a.rows();
  if (m == 0) throw ContractError("offset_loss: empty point set");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += std::sqrt(squared_distance(b.ptr() + 3 * i, a.ptr() + 3 * i));
  const std::size_t aid = presampled.id, bid = refined.id;
  return presampled.tape->record(
      OpKind::kOffsetLoss, Tensor::scalar(total / static_cast<double>(m)), {aid, bid},
      [aid, bid, m](Tape& t, std::size_t, std::span<const double> g) {
        const Tensor& a = t.value(aid);
        const Tensor& b = t.value(bid);
        std::vector<double> gb(3 * m);
        for (std::size_t i = 0; i < m; ++i) {
          const double len = std::sqrt(squared_distance(b.ptr() + 3 * i, a.ptr() + 3 * i) + 1e-12);
          for (std::size_t k = 0; k < 3; ++k) {
            gb[3 * i + k] = g[0] * (b[3 * i + k] - a[3 * i + k]) / (len * static_cast<double>(m));
          }
        }
        if (t.requires_grad(bid)) t.accumulate(bid, gb);
        if (t.requires_grad(aid)) {
          auto& ga = t.grad_buffer(aid);
          for (std::size_t i = 0; i < gb.size(); ++i) ga[i] -= gb[i];
        }
      });
}

double compound_loss(double task, double conf, double off, const LossWeights& w) {
  const double v = w.lambda * task + w.alpha * conf + w.beta * off;
  if (!std::isfinite(task) || !std::isfinite(conf) || !std::isfinite(off) || !std::isfinite(v)) {
    throw NumericError("compound loss has a non-finite term");
  }
  return v;
}

Var compound_loss(Var task, Var conf, Var off, const LossWeights& w) {
  return add(add(scale(task, w.lambda), scale(conf, w.alpha)), scale(off, w.beta));
}

double Quaternion::norm() const { return std::sqrt(dot(*this)); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (!(n > 0.0)) throw ContractError("cannot normalize a zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

RotationMatrix::RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {
  if (!m.allFinite()) throw NumericError("rotation matrix has non-finite entries");
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(m.determinant() - 1.0) > 1e-6) {
    throw ContractError("matrix is not a proper rotation");
  }
}

RotationMatrix RotationMatrix::from_quaternion(const Quaternion& q) {
  const Quaternion u = q.normalized();
  const double w = u.w, x = u.x, y = u.y, z = u.z;
  Eigen::Matrix3d m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return RotationMatrix(m);
}

double rotation_loss(const RotationMatrix& pred, const RotationMatrix& gt) {
  // The inverse of a rotation is its transpose.
  const Eigen::Matrix3d diff = pred.matrix().transpose() * gt.matrix() - Eigen::Matrix3d::Identity();
  return diff.squaredNorm();
}

double registration_task_loss(const PointCloud& source, const PointCloud& templ,
                              const RotationMatrix& pred, const RotationMatrix& gt) {
  return chamfer(source, templ) + rotation_loss(pred, gt);
}

double rotation_error(const Quaternion& pred, const Quaternion& gt, bool geodesic) {
  for (const Quaternion* q : {&pred, &gt}) {
    if (std::abs(q->norm() - 1.0) > 1e-9) throw ContractError("rotation_error needs unit quaternions");
  }
  // acos(2d² − 1) equals 2·atan2(|v|, |w|) for the relative rotation
  // conj(pred)·gt = (w, v); the atan2 form is exact at q vs ±q, where acos
  // of a rounded 1 − ε would not be.
  const double w = pred.dot(gt);
  const double vx = pred.w * gt.x - gt.w * pred.x - (pred.y * gt.z - pred.z * gt.y);
  const double vy = pred.w * gt.y - gt.w * pred.y - (pred.z * gt.x - pred.x * gt.z);
  const double vz = pred.w * gt.z - gt.w * pred.z - (pred.x * gt.y - pred.y * gt.x);
  const double half = std::atan2(std::sqrt(vx * vx + vy * vy + vz * vz), std::abs(w));
  const double angle = 2.0 * half * 180.0 / std::numbers::pi;
  return geodesic ? angle : 2.0 * angle;
}

double mean_rotation_error(std::span<const std::pair<Quaternion, Quaternion>> pairs, bool geodesic) {
  if (pairs.empty()) throw ContractError("mean_rotation_error: no pairs");
  double total = 0.0;
  for (const auto& [pred, gt] : pairs) total += rotation_error(pred, gt, geodesic);
  return total / static_cast<double>(pairs.size());
}

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size()) throw ContractError("accuracy: length mismatch");
  if (labels.empty()) throw ContractError("accuracy: no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace aspd
