#include "aspd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>

namespace aspd {

double learning_rate(std::size_t epoch, double initial, double decay, std::size_t every, double floor) {
  return std::max(floor, initial * std::pow(decay, static_cast<double>(epoch / every)));
}

PointCloud augment(const PointCloud& cloud, Rng& rng, const AugmentOptions& options) {
  const double angle = options.rotate ? rng.uniform(0.0, 2 * std::numbers::pi) : 0.0;
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<double> xyz(cloud.size() * 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double x = cloud(i, 0), y = cloud(i, 1), z = cloud(i, 2);
    xyz[3 * i] = c * x + s * z;
    xyz[3 * i + 1] = y;
    xyz[3 * i + 2] = -s * x + c * z;
  }
  if (options.sigma > 0.0) {
    for (double& v : xyz) v += std::clamp(options.sigma * rng.normal(), -options.clip, options.clip);
  }
  return PointCloud(std::move(xyz));
}

namespace {

// Sums per-item gradients in a fixed order.
class GradAccumulator {
 public:
  void add(const GradMap& grads) {
    for (const auto& [name, g] : grads) {
      auto [it, fresh] = sums_.try_emplace(name, g.size(), 0.0);
      if (fresh) shapes_[name] = g.shape();
      auto& acc = it->second;
      const double* p = g.ptr();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
    }
  }
  GradMap take() {
    GradMap out;
    for (auto& [name, acc] : sums_) out.emplace(name, Tensor(shapes_[name], std::move(acc)));
    sums_.clear();
    shapes_.clear();
    return out;
  }

 private:
  std::map<std::string, std::vector<double>> sums_;
  std::map<std::string, Shape> shapes_;
};

std::vector<std::size_t> shuffled(std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void check_same_structure(const ParamSet& expected, const ParamSet& got, const std::string& what) {
  if (expected.size() != got.size()) throw FormatError(what + ": unexpected tensor set");
  for (const auto& [name, t] : expected) {
    auto it = got.find(name);
    if (it == got.end()) throw FormatError(what + ": missing tensor " + name);
    if (it->second.shape() != t.shape()) {
      throw FormatError(what + ": tensor " + name + " has shape " + shape_str(it->second.shape()) +
                        ", expected " + shape_str(t.shape()));
    }
  }
}

}  // namespace

TaskTrainResult train_task(const Dataset& data, const TaskTrainConfig& config, const ProgressFn& progress) {
  if (data.train.empty()) throw ContractError("train_task: empty training split");
  if (config.batch == 0) throw ConfigError("batch size must be positive");
  if (config.net.classes != data.num_classes()) throw ConfigError("class count does not match the dataset");
  TaskTrainResult result{init_pointnet(config.net, config.seed), {}};
  TaskModel& model = result.model;
  Rng rng(mix_seed(config.seed, 21));
  AdamState adam;
  GradAccumulator acc;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    adam.lr = learning_rate(epoch);
    const auto order = shuffled(data.train.size(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const LabeledCloud& item = data.train[order[b]];
        const PointCloud cloud = config.augment ? augment(item.cloud, rng) : item.cloud;
        Tape tape;
        Binder bind(tape, model.params, true);
        Var logits = classify_forward(bind, model.config, tape.constant(cloud.to_tensor()));
        Var loss = cross_entropy_logits(logits, item.label);
        loss_sum += loss.value().item();
        const auto lv = logits.value().data();
        correct += static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) - lv.begin()) == item.label;
        acc.add(tape.backward(scale(loss, inv)));
      }
      adam_step(model.params, acc.take(), adam);
    }
    const double n = static_cast<double>(data.train.size());
    result.log.push_back({epoch, adam.lr, loss_sum / n, static_cast<double>(correct) / n});
    if (progress) {
      progress("task epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) + " lr " +
               fmt("%.3g", adam.lr) + " loss " + fmt("%.4f", loss_sum / n) + " acc " +
               fmt("%.4f", static_cast<double>(correct) / n));
    }
  }
  return result;
}

Checkpoint task_checkpoint(const TaskTrainResult& result) {
  Checkpoint ckpt;
  ckpt.config.set("kind", "task");
  result.model.config.write(ckpt.config);
  ckpt.config.set("task.epochs", result.log.size());
  char buf[128];
  for (const auto& e : result.log) {
    char key[32];
    std::snprintf(key, sizeof key, "log.%04zu", e.epoch);
    std::snprintf(buf, sizeof buf, "lr=%.6g loss=%.6f acc=%.6f", e.lr, e.loss, e.train_acc);
    ckpt.config.set(key, std::string(buf));
  }
  ckpt.tensors = quantize(result.model.params);
  return ckpt;
}

TaskModel task_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.config.has("kind") || ckpt.config.get("kind") != "task") {
    throw FormatError("not a task-network checkpoint");
  }
  TaskModel model;
  model.config = PointNetConfig::read(ckpt.config);
  check_same_structure(init_pointnet(model.config, 0).params, ckpt.tensors, "task checkpoint");
  model.params = ckpt.tensors;
  return model;
}

Stage parse_stage(const std::string& text) {
  if (text == "1") return Stage::kOne;
  if (text == "2") return Stage::kTwo;
  if (text == "one") return Stage::kOneStage;
  throw ConfigError("unknown stage '" + text + "' (expected 1, 2 or one)");
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kOne:
      return "1";
    case Stage::kTwo:
      return "2";
    default:
      return "one";
  }
}

namespace {

struct SizePlan {
  bool fixed_m;
  std::size_t m;
};

class SamplerTrainer {
 public:
  SamplerTrainer(const Dataset& data, const TaskModel& task, const SamplerTrainConfig& config)
      : data_(data), task_(task), config_(config), rng_(mix_seed(config.seed, 31)) {
    if (data.train.empty()) throw ContractError("sampler training: empty training split");
    if (config.batch == 0) throw ConfigError("batch size must be positive");
    if (task.config.classes != data.num_classes()) throw ConfigError("task network does not match the dataset");
    config.weights.validate();
    std::size_t smallest_cloud = SIZE_MAX;
    for (const auto& item : data.train) smallest_cloud = std::min(smallest_cloud, item.cloud.size());
    if (config.variable_input) {
      if (config.var_lo < 1 || config.var_lo > config.var_hi) throw ConfigError("bad variable input range");
      min_n_ = config.var_lo;
      max_n_ = config.var_hi;
    } else {
      if (config.input_sizes.empty()) throw ConfigError("no input sizes");
      min_n_ = *std::min_element(config.input_sizes.begin(), config.input_sizes.end());
      max_n_ = *std::max_element(config.input_sizes.begin(), config.input_sizes.end());
    }
    if (max_n_ > smallest_cloud) {
      throw ContractError("input size " + std::to_string(max_n_) + " exceeds the stored cloud size " +
                          std::to_string(smallest_cloud));
    }
    cache_.resize(data.train.size());
  }

  void check_sizes(const std::vector<std::size_t>& ms) const {
    if (ms.empty()) throw ConfigError("no sample sizes");
    for (std::size_t m : ms) {
      if (m == 0 || m >= min_n_) {
        throw ContractError("sample size " + std::to_string(m) + " must lie in [1, " + std::to_string(min_n_) + ")");
      }
    }
  }

  SamplerTrainResult run(SamplerModel model, const std::vector<std::size_t>& ms, const ProgressFn& progress) {
    check_sizes(ms);
    SamplerTrainResult result;
    AdamState adam;
    GradAccumulator acc;
    const std::size_t items = data_.train.size();
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      adam.lr = learning_rate(epoch);
      const auto order = shuffled(items, rng_);
      double sums[4] = {0, 0, 0, 0};
      std::map<std::pair<std::size_t, std::size_t>, std::size_t> histogram;
      std::size_t batch_index = 0;
      for (std::size_t start = 0; start < items; start += config_.batch, ++batch_index) {
        const std::size_t end = std::min(items, start + config_.batch);
        const std::size_t n = draw_n();
        const std::size_t m = ms[rng_.below(ms.size())];
        const std::size_t k = adaptive_k(n, model.config.n0, model.config.k0);
        result.draws.push_back({epoch, batch_index, n, m});
        histogram[{n, m}] += 1;
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t b = start; b < end; ++b) {
          const std::size_t idx = order[b];
          const LabeledCloud& item = data_.train[idx];
          const PointCloud cloud = n == item.cloud.size() ? item.cloud : item.cloud.prefix(n);
          const IndexMatrix& graph = neighbors(idx, cloud, k);
          const std::uint64_t arg =
              model.config.presampler == PresamplerKind::kFps ? rng_.below(n) : rng_.next_u64();
          const IndexSet indices = presample_indices(cloud, m, model.config.presampler, arg);

          Tape tape;
          Binder sampler_bind(tape, model.params, true);
          Binder task_bind(tape, task_.params, false);
          Var points = tape.constant(cloud.to_tensor());
          SamplerPass pass = sampler_forward(sampler_bind, model.config, points, graph, indices);
          Var logits = classify_forward(task_bind, task_.config, pass.refined);
          Var lt = cross_entropy_logits(logits, item.label);
          Var lc = conformity_loss(points, pass.refined);
          Var lo = offset_loss(pass.presampled, pass.refined);
          Var total = compound_loss(lt, lc, lo, config_.weights);
          sums[0] += total.value().item();
          sums[1] += lt.value().item();
          sums[2] += lc.value().item();
          sums[3] += lo.value().item();
          acc.add(tape.backward(scale(total, inv)));
        }
        adam_step(model.params, acc.take(), adam);
      }
      SamplerEpochLog entry{epoch, adam.lr, sums[0] / items, sums[1] / items, sums[2] / items, sums[3] / items, {}};
      for (const auto& [key, count] : histogram) {
        if (!entry.histogram.empty()) entry.histogram += ' ';
        entry.histogram += std::to_string(key.first) + ":" + std::to_string(key.second) + "=" + std::to_string(count);
      }
      if (progress) {
        progress("sampler epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config_.epochs) + " loss " +
                 fmt("%.5f", entry.total) + " task " + fmt("%.5f", entry.task) + " conf " +
                 fmt("%.6f", entry.conf) + " off " + fmt("%.6f", entry.off));
      }
      result.log.push_back(std::move(entry));
    }
    result.model = std::move(model);
    return result;
  }

 private:
  std::size_t draw_n() {
    if (config_.variable_input) return config_.var_lo + rng_.below(config_.var_hi - config_.var_lo + 1);
    return config_.input_sizes[rng_.below(config_.input_sizes.size())];
  }

  // Clouds are fixed during sampler training, so their graphs are reused.
  const IndexMatrix& neighbors(std::size_t idx, const PointCloud& cloud, std::size_t k) {
    auto& slot = cache_[idx];
    if (!slot || slot->first != cloud.size() || slot->second.cols != k) {
      slot.emplace(cloud.size(), knn(cloud, cloud, k));
    }
    return slot->second;
  }

  const Dataset& data_;
  const TaskModel& task_;
  const SamplerTrainConfig& config_;
  Rng rng_;
  std::size_t min_n_ = 0;
  std::size_t max_n_ = 0;
  std::vector<std::optional<std::pair<std::size_t, IndexMatrix>>> cache_;
};

}  // namespace

SamplerTrainResult train_sampler_stage1(const Dataset& data, const TaskModel& task,
                                        const SamplerTrainConfig& config, const ProgressFn& progress) {
  SamplerConfig cfg = config.sampler;
  cfg.density_attention = false;
  SamplerTrainer trainer(data, task, config);
  return trainer.run(init_sampler(cfg, config.seed), {config.stage1_m}, progress);
}

SamplerTrainResult train_sampler_stage2(const Dataset& data, const TaskModel& task, const SamplerModel* stage1,
                                        const SamplerTrainConfig& config, const ProgressFn& progress) {
  if (stage1 == nullptr && config.stage != Stage::kOneStage) {
    throw ContractError("stage 2 needs a stage-1 checkpoint");
  }
  SamplerTrainer trainer(data, task, config);
  SamplerModel model = init_sampler(config.sampler, mix_seed(config.seed, 41));
  if (stage1 != nullptr) {
    ParamSet warm;
    for (const char* prefix : {"embed.", "refine.trunk", "refine.proj"}) copy_prefixed(stage1->params, prefix, warm);
    for (const auto& [name, t] : warm) {
      auto it = model.params.find(name);
      if (it == model.params.end() || it->second.shape() != t.shape()) {
        throw FormatError("stage-1 checkpoint is incompatible with the sampler configuration (" + name + ")");
      }
      it->second = t;
    }
    for (const auto& [name, t] : model.params) {
      const bool fresh = name.rfind(kDensityPrefix, 0) == 0 || name.rfind(kAttentionPrefix, 0) == 0;
      if (!fresh && warm.count(name) == 0) throw FormatError("stage-1 checkpoint lacks " + name);
    }
  }
  return trainer.run(std::move(model), config.sizes, progress);
}

Checkpoint sampler_checkpoint(const SamplerModel& model, Stage stage) {
  Checkpoint ckpt;
  ckpt.config.set("kind", "sampler");
  ckpt.config.set("stage", to_string(stage));
  model.config.write(ckpt.config);
  ckpt.tensors = quantize(model.params);
  return ckpt;
}

SamplerModel sampler_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.config.has("kind") || ckpt.config.get("kind") != "sampler") {
    throw FormatError("not a sampler checkpoint");
  }
  SamplerModel model;
  model.config = SamplerConfig::read(ckpt.config);
  check_same_structure(init_sampler(model.config, 0).params, ckpt.tensors, "sampler checkpoint");
  model.params = ckpt.tensors;
  return model;
}

std::string sampler_log_csv(const std::vector<SamplerEpochLog>& log) {
  std::string text = "epoch,lr,loss_total,loss_task,loss_conf,loss_off,sizes\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6f,%.6f,%.6f,%.6f,", e.epoch, e.lr, e.total, e.task, e.conf, e.off);
    text += buf + e.histogram + "\n";
  }
  return text;
}

std::vector<MetricsRow> evaluate_grid(std::span<const std::shared_ptr<const Sampler>> samplers,
                                      std::span<const NamedTask> tasks, std::span<const LabeledCloud> test,
                                      const std::vector<std::size_t>& sizes,
                                      const std::vector<std::size_t>& input_sizes) {
  if (samplers.empty() || tasks.empty()) throw ContractError("evaluate_grid: need a sampler and a task model");
  if (test.empty()) throw ContractError("evaluate_grid: empty test split");
  std::vector<MetricsRow> rows;
  for (const auto& sampler : samplers) {
    // Sampled sets are independent of the task model, so compute them once.
    struct Cell {
      std::size_t n, m;
      double hd;
      std::vector<PointCloud> samples;
    };
    std::vector<Cell> cells;
    for (std::size_t n : input_sizes) {
      for (std::size_t m : sizes) {
        if (m >= n) continue;
        Cell cell{n, m, 0.0, {}};
        for (std::size_t i = 0; i < test.size(); ++i) {
          const PointCloud& full = test[i].cloud;
          if (n > full.size()) throw ContractError("input size exceeds the stored cloud size");
          const PointCloud input = n == full.size() ? full : full.prefix(n);
          cell.samples.push_back(sampler->sample(input, m, i));
          cell.hd += hausdorff(input, cell.samples.back());
        }
        cell.hd /= static_cast<double>(test.size());
        cells.push_back(std::move(cell));
      }
    }
    for (const auto& task : tasks) {
      for (const auto& cell : cells) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test.size(); ++i) correct += predict(task.model, cell.samples[i]) == test[i].label;
        rows.push_back({sampler->name(), task.name, cell.n, cell.m,
                        static_cast<double>(correct) / static_cast<double>(test.size()), cell.hd});
      }
    }
  }
  return rows;
}

}  // namespace aspd
