// Command-line front end: dataset generation, training, sampling,
// evaluation and micro-benchmarks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aspd/checkpoint.hpp"
#include "aspd/dataset.hpp"
#include "aspd/geometry.hpp"
#include "aspd/training.hpp"

namespace fs = std::filesystem;
using namespace aspd;

namespace {

void say(const std::string& line) { std::cerr << line << std::endl; }

std::shared_ptr<const Sampler> make_sampler(const std::string& spec, std::size_t start, std::uint64_t seed) {
  if (spec == "fps") return std::make_shared<FpsSampler>(start);
  if (spec == "rs") return std::make_shared<RandomSampler>(seed);
  auto model = std::make_shared<SamplerModel>(sampler_from_checkpoint(load_checkpoint(spec)));
  return std::make_shared<AspdSampler>(model, fs::path(spec).stem().string());
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto end = comma == std::string::npos ? text.size() : comma;
    if (end == pos) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(text.substr(pos, end - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <class Clock = std::chrono::steady_clock>
double seconds_since(typename Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Arbitrary-size task-aware point cloud downsampling"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic shape dataset");
  std::string gen_out;
  std::size_t gen_classes = 6, gen_per_class = 250, gen_points = 1024;
  std::uint64_t gen_seed = 7;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--classes", gen_classes, "Number of shape classes (2-8)");
  gen->add_option("--per-class", gen_per_class, "Clouds per class");
  gen->add_option("--points", gen_points, "Points per cloud");
  gen->add_option("--seed", gen_seed, "Random seed");

  // train-task
  auto* tt = app.add_subcommand("train-task", "Train the classification network");
  std::string tt_data, tt_out, tt_widths = "64,64,128,1024", tt_log;
  TaskTrainConfig tt_cfg;
  tt->add_option("--data", tt_data, "Dataset directory")->required();
  tt->add_option("--out", tt_out, "Output checkpoint")->required();
  tt->add_option("--epochs", tt_cfg.epochs, "Training epochs");
  tt->add_option("--batch", tt_cfg.batch, "Batch size");
  tt->add_option("--widths", tt_widths, "Point-wise layer widths");
  tt->add_option("--seed", tt_cfg.seed, "Random seed");
  tt->add_flag("!--no-augment", tt_cfg.augment, "Disable rotation and jitter");

  // train-sampler
  auto* ts = app.add_subcommand("train-sampler", "Train the downsampler against a frozen task network");
  std::string ts_data, ts_task, ts_out, ts_stage = "1", ts_from, ts_sizes = "16,32,64,128,256,512";
  std::string ts_presampler = "fps", ts_var, ts_inputs = "1024", ts_log;
  bool ts_no_attention = false;
  SamplerTrainConfig ts_cfg;
  ts->add_option("--data", ts_data, "Dataset directory")->required();
  ts->add_option("--task", ts_task, "Frozen task checkpoint")->required();
  ts->add_option("--out", ts_out, "Output checkpoint")->required();
  ts->add_option("--stage", ts_stage, "1, 2 or one");
  ts->add_option("--from", ts_from, "Stage-1 checkpoint (stage 2)");
  ts->add_option("--sizes", ts_sizes, "Sample-size candidates (stage 2)");
  ts->add_option("--m", ts_cfg.stage1_m, "Sample size for stage 1");
  ts->add_option("--input-sizes", ts_inputs, "Input-size candidates");
  ts->add_option("--presampler", ts_presampler, "fps or rs");
  ts->add_flag("--no-density-attention", ts_no_attention, "Train without density attention");
  ts->add_option("--var-input", ts_var, "Variable input size range LO:HI");
  ts->add_option("--epochs", ts_cfg.epochs, "Training epochs");
  ts->add_option("--batch", ts_cfg.batch, "Batch size");
  ts->add_option("--lambda", ts_cfg.weights.lambda, "Task loss weight");
  ts->add_option("--alpha", ts_cfg.weights.alpha, "Conformity loss weight");
  ts->add_option("--beta", ts_cfg.weights.beta, "Offset loss weight");
  ts->add_option("--seed", ts_cfg.seed, "Random seed");
  ts->add_option("--log", ts_log, "Per-epoch CSV log");

  // sample
  auto* sm = app.add_subcommand("sample", "Downsample one XYZ file");
  std::string sm_input, sm_sampler, sm_out;
  std::size_t sm_m = 0, sm_start = 0;
  sm->add_option("--input", sm_input, "Input XYZ file")->required();
  sm->add_option("--sampler", sm_sampler, "Checkpoint, fps or rs")->required();
  sm->add_option("--m", sm_m, "Sample size")->required();
  sm->add_option("--start", sm_start, "FPS start index or RS seed");
  sm->add_option("--out", sm_out, "Output XYZ file")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy and Hausdorff grid over the test split");
  std::string ev_data, ev_samplers, ev_tasks, ev_sizes, ev_inputs, ev_csv;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--samplers", ev_samplers, "Comma-separated checkpoints, fps, rs")->required();
  ev->add_option("--tasks", ev_tasks, "Comma-separated task checkpoints")->required();
  ev->add_option("--sizes", ev_sizes, "Sample sizes")->required();
  ev->add_option("--input-sizes", ev_inputs, "Input sizes (default: stored size)");
  ev->add_option("--csv", ev_csv, "Output CSV")->required();

  // bench
  auto* bn = app.add_subcommand("bench", "Time a geometry kernel");
  std::string bn_op;
  std::size_t bn_n = 1024, bn_m = 256, bn_k = 40, bn_repeat = 10;
  bn->add_option("--op", bn_op, "fps, knn or chamfer")->required()->check(CLI::IsMember({"fps", "knn", "chamfer"}));
  bn->add_option("--n", bn_n, "Input size")->required();
  bn->add_option("--m", bn_m, "Sample size / second set size");
  bn->add_option("--k", bn_k, "Neighbors");
  bn->add_option("--repeat", bn_repeat, "Repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const auto m = gen_synthetic(gen_out, gen_classes, gen_per_class, gen_points, gen_seed);
      say("wrote " + std::to_string(m.train.size()) + " train / " + std::to_string(m.test.size()) +
          " test clouds to " + gen_out);
    } else if (*tt) {
      const Dataset data = load_dataset(tt_data);
      tt_cfg.net.widths = parse_size_list(tt_widths);
      tt_cfg.net.classes = data.num_classes();
      const auto result = train_task(data, tt_cfg, say);
      save_checkpoint(tt_out, task_checkpoint(result));
      const TaskModel saved = task_from_checkpoint(load_checkpoint(tt_out));
      std::printf("test accuracy %.4f\n", accuracy_eval(saved, data.test));
    } else if (*ts) {
      const Dataset data = load_dataset(ts_data);
      const TaskModel task = task_from_checkpoint(load_checkpoint(ts_task));
      ts_cfg.stage = parse_stage(ts_stage);
      ts_cfg.sizes = parse_size_list(ts_sizes);
      ts_cfg.input_sizes = parse_size_list(ts_inputs);
      ts_cfg.sampler.presampler = parse_presampler(ts_presampler);
      ts_cfg.sampler.density_attention = !ts_no_attention;
      if (!ts_var.empty()) {
        const auto colon = ts_var.find(':');
        if (colon == std::string::npos) throw ConfigError("--var-input expects LO:HI");
        const auto lo = parse_size_list(ts_var.substr(0, colon));
        const auto hi = parse_size_list(ts_var.substr(colon + 1));
        if (lo.size() != 1 || hi.size() != 1) throw ConfigError("--var-input expects LO:HI");
        ts_cfg.variable_input = true;
        ts_cfg.var_lo = lo[0];
        ts_cfg.var_hi = hi[0];
      }
      SamplerTrainResult result;
      if (ts_cfg.stage == Stage::kOne) {
        if (!ts_from.empty()) throw ConfigError("--from only applies to stage 2");
        result = train_sampler_stage1(data, task, ts_cfg, say);
      } else if (ts_cfg.stage == Stage::kTwo) {
        if (ts_from.empty()) throw ConfigError("stage 2 needs --from");
        const Checkpoint from = load_checkpoint(ts_from);
        if (!from.config.has("stage") || from.config.get("stage") != "1") {
          throw FormatError(ts_from + " is not a stage-1 sampler checkpoint");
        }
        const SamplerModel stage1 = sampler_from_checkpoint(from);
        ts_cfg.sampler.presampler = stage1.config.presampler;
        result = train_sampler_stage2(data, task, &stage1, ts_cfg, say);
      } else {
        if (!ts_from.empty()) throw ConfigError("--from does not apply to --stage one");
        result = train_sampler_stage2(data, task, nullptr, ts_cfg, say);
      }
      save_checkpoint(ts_out, sampler_checkpoint(result.model, ts_cfg.stage));
      if (!ts_log.empty()) write_text_file(ts_log, sampler_log_csv(result.log));
    } else if (*sm) {
      const PointCloud cloud = load_xyz(sm_input);
      const auto sampler = make_sampler(sm_sampler, sm_start, sm_start);
      if (sm_m == 0 || sm_m >= cloud.size()) throw ContractError("--m must lie in [1, n)");
      save_xyz(sampler->sample(cloud, sm_m, 0), sm_out);
    } else if (*ev) {
      const Dataset data = load_dataset(ev_data);
      std::vector<std::shared_ptr<const Sampler>> samplers;
      for (const auto& s : split(ev_samplers)) samplers.push_back(make_sampler(s, 0, 0));
      std::vector<NamedTask> tasks;
      for (const auto& t : split(ev_tasks)) {
        tasks.push_back({fs::path(t).stem().string(), task_from_checkpoint(load_checkpoint(t))});
        if (tasks.back().model.config.classes != data.num_classes()) {
          throw ConfigError(t + " does not match the dataset's class count");
        }
      }
      const auto inputs = ev_inputs.empty() ? std::vector<std::size_t>{data.points} : parse_size_list(ev_inputs);
      write_metrics_csv(evaluate_grid(samplers, tasks, data.test, parse_size_list(ev_sizes), inputs), ev_csv);
    } else if (*bn) {
      Rng rng(1);
      auto random_cloud = [&](std::size_t count) {
        std::vector<double> xyz(count * 3);
        for (double& v : xyz) v = rng.uniform(-1.0, 1.0);
        return PointCloud(std::move(xyz));
      };
      const PointCloud a = random_cloud(bn_n), b = random_cloud(bn_m);
      double checksum = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < bn_repeat; ++r) {
        if (bn_op == "fps") {
          checksum += static_cast<double>(fps(a, bn_m, 0).indices.back());
        } else if (bn_op == "knn") {
          checksum += knn(a, a, bn_k)(bn_n - 1, bn_k - 1);
        } else {
          checksum += chamfer(a, b);
        }
      }
      const double total = seconds_since(t0);
      std::printf("%s n=%zu m=%zu k=%zu repeat=%zu: %.3f ms/op (checksum %g)\n", bn_op.c_str(), bn_n, bn_m, bn_k,
                  bn_repeat, 1e3 * total / static_cast<double>(std::max<std::size_t>(bn_repeat, 1)), checksum);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e.kind());
  }
  return 0;
}
