#pragma once

// PointNet-vanilla classifier: point-wise layers, global max pool, fully
// connected head.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "aspd/dataset.hpp"
#include "aspd/keyvalues.hpp"
#include "aspd/params.hpp"
#include "aspd/sampler.hpp"

namespace aspd {

struct PointNetConfig {
  std::vector<std::size_t> widths{64, 64, 128, 1024};
  std::vector<std::size_t> head{512, 256};
  std::size_t classes = 40;

  void write(KeyValues& kv) const;
  static PointNetConfig read(const KeyValues& kv);
};

struct TaskModel {
  PointNetConfig config;
  ParamSet params;
};

TaskModel init_pointnet(const PointNetConfig& config, std::uint64_t seed);

// m×3 points -> 1×classes logits.
Var classify_forward(Binder& bind, const PointNetConfig& config, Var points);

std::vector<double> classify(const TaskModel& model, const PointCloud& cloud);
std::size_t predict(const TaskModel& model, const PointCloud& cloud);

// Fraction of clouds whose argmax logit matches the label. With a sampler,
// each cloud is first reduced to m points.
double accuracy_eval(const TaskModel& model, std::span<const LabeledCloud> data,
                     const Sampler* sampler = nullptr, std::optional<std::size_t> m = std::nullopt);

}  // namespace aspd
