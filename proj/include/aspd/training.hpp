#pragma once

// Task-network training, two-stage sampler training, augmentation and the
// evaluation grid.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aspd/checkpoint.hpp"
#include "aspd/dataset.hpp"
#include "aspd/objectives.hpp"
#include "aspd/sampler.hpp"
#include "aspd/taskheads.hpp"

namespace aspd {

// max(1e-5, 1e-3 · 0.7^⌊epoch/20⌋) with the defaults.
double learning_rate(std::size_t epoch, double initial = 1e-3, double decay = 0.7,
                     std::size_t every = 20, double floor = 1e-5);

struct AugmentOptions {
  double sigma = 0.01;
  double clip = 0.05;
  bool rotate = true;
};

// Random turn about the y axis plus clipped Gaussian jitter.
PointCloud augment(const PointCloud& cloud, Rng& rng, const AugmentOptions& options = {});

// Called after every epoch with a one-line summary; may be empty.
using ProgressFn = std::function<void(const std::string&)>;

struct TaskTrainConfig {
  PointNetConfig net;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
  bool augment = true;
};

struct TaskEpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct TaskTrainResult {
  TaskModel model;
  std::vector<TaskEpochLog> log;
};

TaskTrainResult train_task(const Dataset& data, const TaskTrainConfig& config,
                           const ProgressFn& progress = {});

// Stored at 32-bit precision; the epoch log rides in the config block.
Checkpoint task_checkpoint(const TaskTrainResult& result);
TaskModel task_from_checkpoint(const Checkpoint& ckpt);

enum class Stage { kOne, kTwo, kOneStage };

Stage parse_stage(const std::string& text);  // "1" | "2" | "one"
std::string to_string(Stage stage);

struct SamplerTrainConfig {
  Stage stage = Stage::kOne;
  SamplerConfig sampler;  // density_attention is forced off in stage 1
  std::size_t stage1_m = 32;
  std::vector<std::size_t> sizes{16, 32, 64, 128, 256, 512};
  std::vector<std::size_t> input_sizes{1024};
  // Variable-input mode draws n uniformly from [var_lo, var_hi] instead.
  bool variable_input = false;
  std::size_t var_lo = 800;
  std::size_t var_hi = 2000;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  LossWeights weights = LossWeights::classification();
  std::uint64_t seed = 1;
};

struct BatchDraw {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t n = 0;
  std::size_t m = 0;
};

struct SamplerEpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double task = 0.0;
  double conf = 0.0;
  double off = 0.0;
  std::string histogram;  // "n:m=count" pairs separated by spaces
};

struct SamplerTrainResult {
  SamplerModel model;
  std::vector<SamplerEpochLog> log;
  std::vector<BatchDraw> draws;
};

// Stage 1: attention bypassed, fixed m.
SamplerTrainResult train_sampler_stage1(const Dataset& data, const TaskModel& task,
                                        const SamplerTrainConfig& config,
                                        const ProgressFn& progress = {});
// Stage 2: warm start from `stage1` (embedding, trunk, projection), fresh
// density/attention, per-batch sizes. Pass nullptr together with
// Stage::kOneStage to train from scratch.
SamplerTrainResult train_sampler_stage2(const Dataset& data, const TaskModel& task,
                                        const SamplerModel* stage1, const SamplerTrainConfig& config,
                                        const ProgressFn& progress = {});

Checkpoint sampler_checkpoint(const SamplerModel& model, Stage stage);
SamplerModel sampler_from_checkpoint(const Checkpoint& ckpt);

// epoch,lr,loss_total,loss_task,loss_conf,loss_off,sizes
std::string sampler_log_csv(const std::vector<SamplerEpochLog>& log);

struct NamedTask {
  std::string name;
  TaskModel model;
};

// One row per (sampler, task, n, m) in that nesting order; pairs with m ≥ n
// are skipped. Inputs of size n are the first n points of each test cloud.
std::vector<MetricsRow> evaluate_grid(std::span<const std::shared_ptr<const Sampler>> samplers,
                                      std::span<const NamedTask> tasks,
                                      std::span<const LabeledCloud> test,
                                      const std::vector<std::size_t>& sizes,
                                      const std::vector<std::size_t>& input_sizes);

}  // namespace aspd
