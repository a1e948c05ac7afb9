#include "aspd/taskheads.hpp"

#include <algorithm>

#include "aspd/objectives.hpp"

namespace aspd {

void PointNetConfig::write(KeyValues& kv) const {
  kv.set_sizes("task.widths", widths);
  kv.set_sizes("task.head", head);
  kv.set("task.classes", classes);
}

PointNetConfig PointNetConfig::read(const KeyValues& kv) {
  PointNetConfig c;
  c.widths = kv.get_sizes("task.widths");
  c.head = kv.get_sizes("task.head");
  c.classes = kv.get_size("task.classes");
  return c;
}

TaskModel init_pointnet(const PointNetConfig& config, std::uint64_t seed) {
  if (config.widths.empty() || config.classes < 2) throw ConfigError("pointnet: bad configuration");
  TaskModel model{config, {}};
  Rng rng(mix_seed(seed, 11));
  std::size_t in = 3;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    add_dense(model.params, "task.pw" + std::to_string(i), in, config.widths[i], rng);
    in = config.widths[i];
  }
  for (std::size_t i = 0; i < config.head.size(); ++i) {
    add_dense(model.params, "task.fc" + std::to_string(i), in, config.head[i], rng);
    in = config.head[i];
  }
  add_dense(model.params, "task.fc" + std::to_string(config.head.size()), in, config.classes, rng);
  return model;
}

Var classify_forward(Binder& bind, const PointNetConfig& config, Var points) {
  const Tensor& p = points.value();
  if (p.rank() != 2 || p.cols() != 3) throw DimensionError("classify: expected m×3, got " + shape_str(p.shape()));
  if (p.rows() == 0) throw ContractError("classify: empty point set");
  const std::size_t m = p.rows();
  Var x = points;
  for (std::size_t i = 0; i + 1 < config.widths.size(); ++i) {
    x = relu(dense(bind, "task.pw" + std::to_string(i), x));
  }
  // relu is monotone, so max-pooling before the last activation gives the
  // same features while keeping the widest layer's backward pass sparse.
  IndexMatrix all{1, m, std::vector<std::uint32_t>(m)};
  for (std::size_t j = 0; j < m; ++j) all.data[j] = static_cast<std::uint32_t>(j);
  x = relu(group_max(dense(bind, "task.pw" + std::to_string(config.widths.size() - 1), x), all));
  for (std::size_t i = 0; i < config.head.size(); ++i) {
    x = relu(dense(bind, "task.fc" + std::to_string(i), x));
  }
  return dense(bind, "task.fc" + std::to_string(config.head.size()), x);
}

std::vector<double> classify(const TaskModel& model, const PointCloud& cloud) {
  Tape tape;
  Binder bind(tape, model.params, false);
  const Tensor& logits = classify_forward(bind, model.config, tape.constant(cloud.to_tensor())).value();
  return {logits.data().begin(), logits.data().end()};
}

std::size_t predict(const TaskModel& model, const PointCloud& cloud) {
  const std::vector<double> logits = classify(model, cloud);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double accuracy_eval(const TaskModel& model, std::span<const LabeledCloud> data,
                     const Sampler* sampler, std::optional<std::size_t> m) {
  if (data.empty()) throw ContractError("accuracy_eval: empty dataset");
  if (sampler != nullptr && !m) throw ContractError("accuracy_eval: sampler given without m");
  std::vector<std::size_t> predictions, labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PointCloud& cloud = data[i].cloud;
    predictions.push_back(sampler ? predict(model, sampler->sample(cloud, *m, i)) : predict(model, cloud));
    labels.push_back(data[i].label);
  }
  return accuracy(predictions, labels);
}

}  // namespace aspd
