// Acceptance run: one PASS/FAIL line per criterion.
//
//   aspd_acceptance            all criteria
//   aspd_acceptance 2 3 11     a subset
//
// The end-to-end criteria drive the `aspd` executable in a scratch directory
// (kept when ASPD_KEEP_SCRATCH is set).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "aspd/checkpoint.hpp"
#include "aspd/objectives.hpp"
#include "aspd/presampling.hpp"
#include "aspd/refinement.hpp"
#include "aspd/sampler.hpp"
#include "aspd/taskheads.hpp"
#include "aspd/training.hpp"
#include "support.hpp"

using namespace aspd;
using namespace aspd::testing;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSec = 60.0;
constexpr double kOracleBudgetSec = 10.0;
constexpr double kMetricTol = 1e-9;
constexpr double kExactTol = 1e-12;
constexpr double kTaskAccMin = 0.95;
constexpr double kAccMarginMin = 0.05;
constexpr double kEndToEndBudgetSec = 30.0 * 60.0;
constexpr double kHdRatioMax = 1.5;
constexpr double kPermTol = 1e-12;
constexpr double kPooledTol = 1e-9;

// Desk-scale end-to-end configuration.
constexpr std::size_t kDeskClasses = 6;
constexpr std::size_t kDeskPerClass = 250;  // 200 train + 50 test
constexpr std::size_t kDeskPoints = 1024;
constexpr std::size_t kDeskTaskEpochs = 3;
constexpr std::size_t kDeskSamplerEpochs = 30;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with output captured in `log`; throws with the log tail on a
// nonzero exit.
void cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("'") + ASPD_CLI_PATH + "' " + args + " >>'" + log.string() + "' 2>&1";
  {
    std::ofstream(log, std::ios::app) << "$ aspd " << args << "\n";
  }
  if (std::system(cmd.c_str()) != 0) {
    std::string text = slurp(log);
    if (text.size() > 2000) text = text.substr(text.size() - 2000);
    throw std::runtime_error("command failed: aspd " + args + "\n" + text);
  }
}

struct Scratch {
  fs::path root;
  Scratch() {
    root = fs::temp_directory_path() / ("aspd_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() {
    if (std::getenv("ASPD_KEEP_SCRATCH") == nullptr) fs::remove_all(root);
  }
};

// ---------------------------------------------------------------------------
// 1. Gradient suite

double check_ops(Rng& rng) {
  double worst = 0.0;
  auto note = [&](double e) { worst = std::max(worst, e); };
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor mix = random_tensor({5, 3}, rng);
  // Weighted sum keeps every output coordinate in the loss.
  auto wsum = [](Tape& t, Var v, const Tensor& weights) {
    return sum(hadamard(v, t.constant(weights)));
  };
  note(grad_check([&](Tape& t, Var v) { return wsum(t, linear(v, t.constant(w), t.constant(b)), mix); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, linear(t.constant(x), v, t.constant(b)), mix); }, w));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, linear(t.constant(x), t.constant(w), v), mix); }, b));
  for (Activation a : {Activation::kRelu, Activation::kSigmoid, Activation::kTanh}) {
    note(grad_check([&](Tape& t, Var v) { return wsum(t, activation(v, a), x); }, x));
  }
  const IndexMatrix idx{5, 3, {0, 1, 2, 1, 2, 3, 2, 3, 4, 3, 4, 0, 4, 0, 0}};
  const Tensor g_w = random_tensor({5, 3, 4}, rng);
  note(grad_check([&](Tape& t, Var v) { return wsum(t, gather_group(v, idx), g_w); }, x));
  const std::vector<std::size_t> rows{4, 1, 1, 0};
  // Output weights are drawn once; the loss must not change between probes.
  const Tensor w44 = random_tensor({4, 4}, rng), w45 = random_tensor({4, 5}, rng);
  const Tensor w24 = random_tensor({2, 4}, rng), w14 = random_tensor({1, 4}, rng);
  const Tensor w34 = random_tensor({3, 4}, rng), row = random_tensor({1, 4}, rng);
  const Tensor w53 = random_tensor({5, 3}, rng);
  note(grad_check([&](Tape& t, Var v) { return wsum(t, gather_rows(v, rows), w44); }, x));
  const Tensor grp = random_tensor({5, 3, 4}, rng);
  for (Reduce r : {Reduce::kMax, Reduce::kMean}) {
    note(grad_check([&](Tape& t, Var v) { return wsum(t, reduce_group(v, r), x); }, grp));
  }
  note(grad_check([&](Tape& t, Var v) { return wsum(t, group_max(v, idx), x); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, group_sub_rows(v, t.constant(x)), g_w); }, grp));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, group_sub_rows(t.constant(grp), v), g_w); }, x));
  const Tensor wide = random_tensor({5, 7}, rng);
  note(grad_check([&](Tape& t, Var v) { return wsum(t, concat_cols(v, t.constant(mix)), wide); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, hadamard(v, t.constant(mix)), w53); }, mix));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, add(v, t.constant(mix)), w53); }, mix));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, sub(t.constant(mix), v), w53); }, mix));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, scale(v, -2.5), x); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, reshape(v, {4, 5}), w45); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, slice_rows(v, 1, 3), w24); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, mean_rows(v), w14); }, x));
  note(grad_check([&](Tape& t, Var v) { return wsum(t, broadcast_rows(v, 3), w34); }, row));
  note(grad_check([&](Tape&, Var v) { return sum(v); }, x));
  note(grad_check([&](Tape&, Var v) { return cross_entropy_logits(v, 2); }, random_tensor({1, 5}, rng)));

  const PointCloud p = random_cloud(12, rng);
  const PointCloud s = random_cloud(6, rng);
  note(grad_check([&](Tape& t, Var v) { return conformity_loss(t.constant(p.to_tensor()), v); }, s.to_tensor()));
  note(grad_check([&](Tape& t, Var v) { return conformity_loss(v, t.constant(s.to_tensor())); }, p.to_tensor()));
  note(grad_check([&](Tape& t, Var v) { return offset_loss(t.constant(s.to_tensor()), v); },
                  random_cloud(6, rng).to_tensor()));
  note(grad_check([&](Tape& t, Var v) { return offset_loss(v, t.constant(s.to_tensor())); },
                  random_cloud(6, rng).to_tensor()));
  note(grad_check(
      [&](Tape& t, Var v) {
        Var lt = cross_entropy_logits(slice_rows(v, 0, 1), 0);
        return compound_loss(lt, sum(v), sum(hadamard(v, v)), LossWeights{0.5, 10, 1});
      },
      random_tensor({2, 3}, rng)));

  const IndexMatrix knn_g = knn(p, p, 4);
  const Tensor f = random_tensor({12, 3}, rng);
  const Tensor ew = random_tensor({6, 5}, rng), eb = random_tensor({5}, rng);
  const Tensor ow = random_tensor({12, 5}, rng);
  note(grad_check(
      [&](Tape& t, Var v) { return wsum(t, edgeconv_layer(v, knn_g, t.constant(ew), t.constant(eb)), ow); }, f));
  note(grad_check(
      [&](Tape& t, Var v) { return wsum(t, edgeconv_layer(t.constant(f), knn_g, v, t.constant(eb)), ow); }, ew));
  note(grad_check(
      [&](Tape& t, Var v) { return wsum(t, edgeconv_layer(t.constant(f), knn_g, t.constant(ew), v), ow); }, eb));
  return worst;
}

SamplerConfig shrunk_sampler() {
  SamplerConfig c;
  c.embed = EmbedderConfig{4, {5, 4, 6}, 7};
  c.refine.in = 10;
  c.refine.trunk = {6, 5};
  c.refine.density = {4, 3};
  c.refine.attention_hidden = 4;
  c.refine.projection_hidden = 4;
  c.refine.kd = 3;
  c.k0 = 4;
  c.n0 = 12;
  return c;
}

ParamSet randomized(const ParamSet& params, Rng& rng) {
  ParamSet out;
  for (const auto& [name, t] : params) out.emplace(name, random_tensor(t.shape(), rng, -0.8, 0.8));
  return out;
}

// Compound loss through sampler and frozen classifier, differentiated with
// respect to every sampler tensor, every classifier tensor and the input.
double check_composed(Rng& rng) {
  const SamplerConfig cfg = shrunk_sampler();
  const ParamSet sp = randomized(init_sampler(cfg, 3).params, rng);
  const PointNetConfig net{{5, 6}, {4}, 3};
  const ParamSet tp = randomized(init_pointnet(net, 4).params, rng);
  const PointCloud p = random_cloud(14, rng);
  const IndexMatrix g = knn(p, p, cfg.embed.k);
  const IndexSet idx = fps(p, 5, 0);
  const LossWeights weights = LossWeights::classification();

  auto loss = [&](Tape& t, const std::string& sampler_name, const std::string& task_name, Var theta,
                  bool theta_is_points) {
    Binder sb(t, sp, false), tb(t, tp, false);
    if (!sampler_name.empty()) sb.bind(sampler_name, theta);
    if (!task_name.empty()) tb.bind(task_name, theta);
    Var pts = theta_is_points ? theta : t.constant(p.to_tensor());
    SamplerPass pass = sampler_forward(sb, cfg, pts, g, idx);
    Var ce = cross_entropy_logits(classify_forward(tb, net, pass.refined), 1);
    return compound_loss(ce, conformity_loss(pts, pass.refined), offset_loss(pass.presampled, pass.refined),
                         weights);
  };
  double worst = 0.0;
  for (const auto& [name, t] : sp) {
    worst = std::max(worst, grad_check([&, n = name](Tape& tp_, Var v) { return loss(tp_, n, "", v, false); }, t));
  }
  for (const auto& [name, t] : tp) {
    worst = std::max(worst, grad_check([&, n = name](Tape& tp_, Var v) { return loss(tp_, "", n, v, false); }, t));
  }
  worst = std::max(worst, grad_check([&](Tape& tp_, Var v) { return loss(tp_, "", "", v, true); }, p.to_tensor()));
  return worst;
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const double ops = check_ops(rng);
  const double composed = check_composed(rng);
  const double secs = seconds_since(t0);
  const double worst = std::max(ops, composed);
  return {worst < kGradTol && secs < kGradBudgetSec,
          "max rel err ops " + fmt("%.2e", ops) + ", composed " + fmt("%.2e", composed) + ", " +
              fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 2-3. Oracles

PointCloud grid_cloud(std::size_t n, Rng& rng) {
  std::vector<double> xyz(3 * n);
  for (double& v : xyz) v = static_cast<double>(rng.below(3));
  return PointCloud(std::move(xyz));
}

Outcome criterion_fps_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  std::size_t runs = 0, mismatches = 0;
  for (std::size_t c = 0; c < 200; ++c) {
    const std::size_t n = 1 + rng.below(64);
    // Every fourth cloud sits on a small integer grid to exercise ties.
    const PointCloud p = c % 4 == 3 ? grid_cloud(n, rng) : random_cloud(n, rng);
    std::set<std::size_t> starts{0, n / 2, n - 1, static_cast<std::size_t>(rng.below(n))};
    for (std::size_t start : starts) {
      // The oracle is greedy, so its m-prefix is the oracle answer for m.
      const auto full = fps_oracle(p, n, start);
      for (std::size_t m = 1; m <= n; ++m) {
        ++runs;
        const IndexSet got = fps(p, m, start);
        if (got.indices != std::vector<std::size_t>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(m))) {
          ++mismatches;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kOracleBudgetSec,
          std::to_string(runs) + " runs, " + std::to_string(mismatches) + " mismatches, " + fmt("%.1f s", secs)};
}

Outcome criterion_metric_oracle() {
  const auto t0 = Clock::now();
  Rng rng(303);
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const PointCloud p = random_cloud(1 + rng.below(128), rng);
    const PointCloud s = random_cloud(1 + rng.below(128), rng);
    worst = std::max(worst, std::abs(chamfer(p, s) - chamfer_oracle(p, s)));
    worst = std::max(worst, std::abs(hausdorff(p, s) - hausdorff_oracle(p, s)));
  }
  const double secs = seconds_since(t0);
  return {worst <= kMetricTol && secs < kOracleBudgetSec,
          "max abs diff " + fmt("%.2e", worst) + ", " + fmt("%.2f s", secs)};
}

// ---------------------------------------------------------------------------
// 4. Closed forms

Outcome criterion_closed_forms() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  Tape tape;
  Var p0 = tape.constant(Tensor::matrix({{0, 0, 0}}));
  expect(conformity_loss(p0, tape.constant(Tensor::matrix({{1, 0, 0}}))).value().item() == 2.0, "conformity");
  expect(offset_loss(p0, tape.constant(Tensor::matrix({{3, 4, 0}}))).value().item() == 5.0, "offset");

  Rng rng(404);
  for (int i = 0; i < 20; ++i) {
    Quaternion q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    q = q.normalized();
    const Quaternion neg{-q.w, -q.x, -q.y, -q.z};
    expect(rotation_error(q, q) == 0.0 && rotation_error(q, neg) == 0.0, "rotation error of ±q");
  }
  Eigen::Matrix3d half_turn = Eigen::Matrix3d::Identity();
  half_turn(0, 0) = -1;
  half_turn(1, 1) = -1;
  expect(rotation_loss(RotationMatrix(half_turn), RotationMatrix()) == 8.0, "rotation loss");
  expect(adaptive_k(1024) == 40 && adaptive_k(2048) == 80, "adaptive k");

  const LossWeights w = LossWeights::classification();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t1 = rng.uniform(0, 3), c1 = rng.uniform(0, 3), o1 = rng.uniform(0, 3);
    const double t2 = rng.uniform(0, 3), c2 = rng.uniform(0, 3), o2 = rng.uniform(0, 3);
    const double k = rng.uniform(-2, 2);
    worst = std::max(worst, std::abs(compound_loss(t1 + k * t2, c1 + k * c2, o1 + k * o2, w) -
                                     (compound_loss(t1, c1, o1, w) + k * compound_loss(t2, c2, o2, w))));
    worst = std::max(worst, std::abs(compound_loss(t1, c1, o1, w) - (w.lambda * t1 + w.alpha * c1 + w.beta * o1)));
  }
  expect(worst <= kExactTol, "compound linearity");
  std::string detail = failed.empty() ? "all examples exact" : "failed:";
  for (const auto& f : failed) detail += " " + f;
  detail += ", linearity err " + fmt("%.1e", worst);
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. Zero-init identity

Outcome criterion_zero_init() {
  const auto t0 = Clock::now();
  // Through the checkpoint format, as a user would load it.
  const SamplerModel model =
      sampler_from_checkpoint(decode_checkpoint(encode_checkpoint(sampler_checkpoint(init_sampler({}, 5), Stage::kTwo))));
  const PointCloud cloud = synthetic_shape(0, 1024, 55);
  std::size_t bad = 0;
  for (std::size_t m = 8; m <= 512; ++m) {
    const SampleResult r = run_sampler(model, cloud, m);
    if (!(r.refined == cloud.subset(fps(cloud, m, 0).indices)) || !(r.refined == r.presampled)) ++bad;
  }
  return {bad == 0, "m = 8..512, " + std::to_string(bad) + " differ from FPS, " + fmt("%.1f s", seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// 6. Arbitrary sizes from one trained checkpoint

Outcome criterion_arbitrary_size(const fs::path& ckpt) {
  const SamplerModel model = sampler_from_checkpoint(load_checkpoint(ckpt));
  std::size_t pairs = 0, bad = 0;
  for (std::size_t n : {512, 777, 1024, 2048}) {
    const PointCloud cloud = synthetic_shape(n % 6, n, 600 + n);
    for (std::size_t m : {8, 16, 33, 100, 256}) {
      if (m >= n) continue;
      ++pairs;
      const PointCloud s = run_sampler(model, cloud, m).refined;
      bool ok = s.size() == m;
      for (double v : s.xyz()) ok = ok && std::isfinite(v);
      if (!ok) ++bad;
    }
  }
  return {bad == 0, std::to_string(pairs) + " (n, m) pairs from " + ckpt.filename().string() + ", " +
                        std::to_string(bad) + " bad"};
}

// ---------------------------------------------------------------------------
// 7-8. Desk-scale end to end

struct Grid {
  // (sampler, m) -> value at the stored input size
  std::map<std::pair<std::string, std::size_t>, double> acc, hd;
  std::set<std::tuple<std::string, std::size_t, std::size_t>> keys;  // (task, n, m)
  std::map<std::string, std::set<std::tuple<std::string, std::size_t, std::size_t>>> per_sampler;
};

Grid read_grid(const fs::path& csv) {
  Grid g;
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "sampler,task_model,n,m,metric,value") throw std::runtime_error("unexpected CSV header: " + line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string sampler, task, n, m, metric, value;
    std::getline(ss, sampler, ',');
    std::getline(ss, task, ',');
    std::getline(ss, n, ',');
    std::getline(ss, m, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, value, ',');
    const std::size_t mi = std::stoul(m);
    (metric == "acc" ? g.acc : g.hd)[{sampler, mi}] = std::stod(value);
    g.per_sampler[sampler].insert({task, std::stoul(n), mi});
  }
  return g;
}

struct EndToEnd {
  bool ran = false;
  std::string error;
  double seconds = 0.0;
  double task_acc = 0.0;
  Grid grid;
  fs::path s2;
};

EndToEnd run_desk_pipeline(const fs::path& dir) {
  EndToEnd e;
  const auto t0 = Clock::now();
  const fs::path log = dir / "log.txt";
  const std::string d = "'" + (dir / "data").string() + "'";
  const std::string task = "'" + (dir / "task.ckpt").string() + "'";
  const std::string s1 = "'" + (dir / "stage1.ckpt").string() + "'";
  e.s2 = dir / "aspd.ckpt";
  const std::string s2 = "'" + e.s2.string() + "'";
  try {
    cli("gen-data --out " + d + " --classes " + std::to_string(kDeskClasses) + " --per-class " +
            std::to_string(kDeskPerClass) + " --points " + std::to_string(kDeskPoints) + " --seed 7",
        log);
    cli("train-task --data " + d + " --out " + task + " --epochs " + std::to_string(kDeskTaskEpochs) + " --seed 1",
        log);
    const std::string epochs = " --epochs " + std::to_string(kDeskSamplerEpochs);
    cli("train-sampler --data " + d + " --task " + task + " --out " + s1 + " --stage 1 --m 32" + epochs +
            " --seed 1 --log '" + (dir / "stage1.csv").string() + "'",
        log);
    cli("train-sampler --data " + d + " --task " + task + " --out " + s2 + " --stage 2 --from " + s1 + epochs +
            " --seed 1 --log '" + (dir / "stage2.csv").string() + "'",
        log);
    cli("eval --data " + d + " --samplers fps,rs," + s2 + " --tasks " + task + " --sizes 16,32 --csv '" +
            (dir / "eval.csv").string() + "'",
        log);
    e.seconds = seconds_since(t0);
    const Dataset data = load_dataset(dir / "data");
    e.task_acc = accuracy_eval(task_from_checkpoint(load_checkpoint(dir / "task.ckpt")), data.test);
    e.grid = read_grid(dir / "eval.csv");
    e.ran = true;
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

Outcome criterion_end_to_end(const EndToEnd& e) {
  if (!e.ran) return {false, e.error};
  const double fps = e.grid.acc.at({"fps", 16});
  const double ours = e.grid.acc.at({"aspd", 16});
  const bool ok = e.task_acc >= kTaskAccMin && ours >= fps + kAccMarginMin && e.seconds < kEndToEndBudgetSec;
  return {ok, "task acc " + fmt("%.4f", e.task_acc) + "; m=16 acc AS-PD " + fmt("%.4f", ours) + " vs FPS " +
                  fmt("%.4f", fps) + " (RS " + fmt("%.4f", e.grid.acc.at({"rs", 16})) + "); " +
                  fmt("%.0f s", e.seconds)};
}

Outcome criterion_conformity(const EndToEnd& e) {
  if (!e.ran) return {false, "end-to-end run failed"};
  bool ok = true;
  std::string detail;
  for (std::size_t m : {16, 32}) {
    const double ours = e.grid.hd.at({"aspd", m}), fps = e.grid.hd.at({"fps", m}), rs = e.grid.hd.at({"rs", m});
    ok = ok && ours <= kHdRatioMax * fps && ours <= rs;
    if (!detail.empty()) detail += "; ";
    detail += "m=" + std::to_string(m) + " HD AS-PD " + fmt("%.4f", ours) + " FPS " + fmt("%.4f", fps) + " RS " +
              fmt("%.4f", rs);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 9-10. Small CLI pipelines

// Small dataset, task net and the main two-stage sampler; returns the files
// whose bytes define the run.
std::vector<fs::path> run_small_pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  auto q = [&](const char* name) { return "'" + (dir / name).string() + "'"; };
  const std::string common = " --data " + q("data") + " --task " + q("task.ckpt") +
                             " --input-sizes 256 --sizes 16,32,64 --epochs 2 --batch 8 --seed 3";
  cli("gen-data --out " + q("data") + " --classes 3 --per-class 10 --points 256 --seed 11", log);
  cli("train-task --data " + q("data") + " --out " + q("task.ckpt") + " --epochs 2 --batch 8 --widths 32,64 --seed 3",
      log);
  cli("train-sampler" + common + " --out " + q("s1.ckpt") + " --stage 1 --m 32 --log " + q("s1.csv"), log);
  cli("train-sampler" + common + " --out " + q("s2.ckpt") + " --stage 2 --from " + q("s1.ckpt") + " --log " +
          q("s2.csv"),
      log);
  cli("eval --data " + q("data") + " --samplers fps,rs," + q("s2.ckpt") + " --tasks " + q("task.ckpt") +
          " --sizes 16,32,64 --input-sizes 128,256 --csv " + q("eval.csv"),
      log);
  return {dir / "task.ckpt", dir / "s1.ckpt", dir / "s1.csv", dir / "s2.ckpt", dir / "s2.csv", dir / "eval.csv"};
}

Outcome criterion_ablations(const fs::path& dir) {
  try {
    run_small_pipeline(dir);
    const fs::path log = dir / "log.txt";
    auto q = [&](const std::string& name) { return "'" + (dir / name).string() + "'"; };
    const std::string common = " --data " + q("data") + " --task " + q("task.ckpt") +
                               " --input-sizes 256 --sizes 16,32,64 --epochs 2 --batch 8 --seed 3";
    cli("train-sampler" + common + " --out " + q("no_att.ckpt") + " --stage 2 --from " + q("s1.ckpt") +
            " --no-density-attention",
        log);
    cli("train-sampler" + common + " --out " + q("rs1.ckpt") + " --stage 1 --m 32 --presampler rs", log);
    cli("train-sampler" + common + " --out " + q("rs.ckpt") + " --stage 2 --from " + q("rs1.ckpt") +
            " --presampler rs",
        log);
    cli("train-sampler" + common + " --out " + q("one.ckpt") + " --stage one", log);
    cli("eval --data " + q("data") + " --samplers " + q("s2.ckpt") + "," + q("no_att.ckpt") + "," + q("rs.ckpt") +
            "," + q("one.ckpt") + " --tasks " + q("task.ckpt") + " --sizes 16,32,64 --csv " + q("ablation.csv"),
        log);

    const Grid g = read_grid(dir / "ablation.csv");
    bool comparable = g.per_sampler.size() == 4;
    for (const auto& [name, keys] : g.per_sampler) comparable = comparable && keys == g.per_sampler.at("s2");
    std::size_t stage1_density = 0;
    for (const char* s1 : {"s1.ckpt", "rs1.ckpt"}) {
      for (const auto& [name, t] : load_checkpoint(dir / s1).tensors) {
        if (name.rfind(kDensityPrefix, 0) == 0 || name.rfind(kAttentionPrefix, 0) == 0) ++stage1_density;
      }
    }
    bool no_att_clean = true;
    for (const auto& [name, t] : load_checkpoint(dir / "no_att.ckpt").tensors) {
      no_att_clean = no_att_clean && name.rfind(kAttentionPrefix, 0) != 0;
    }
    return {comparable && stage1_density == 0 && no_att_clean,
            std::to_string(g.per_sampler.size()) + " variants in one grid" + (comparable ? "" : " (mismatched)") +
                ", density tensors in stage-1 checkpoints: " + std::to_string(stage1_density)};
  } catch (const std::exception& ex) {
    return {false, ex.what()};
  }
}

Outcome criterion_determinism(const fs::path& dir) {
  try {
    const auto a = run_small_pipeline(dir / "a");
    const auto b = run_small_pipeline(dir / "b");
    std::size_t differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string x = slurp(a[i]), y = slurp(b[i]);
      if (x.empty() || x != y) ++differing;
    }
    return {differing == 0,
            std::to_string(a.size()) + " artifacts compared, " + std::to_string(differing) + " differ"};
  } catch (const std::exception& ex) {
    return {false, ex.what()};
  }
}

// ---------------------------------------------------------------------------
// 11. Invariances

Outcome criterion_invariance() {
  Rng rng(1111);
  PointNetConfig net;
  net.classes = 6;
  const TaskModel model = init_pointnet(net, 9);
  double perm_err = 0.0, dup_err = 0.0, pooled_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const PointCloud p = random_cloud(200, rng);
    std::vector<std::size_t> perm(p.size()), dup;
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    dup = perm;
    for (std::size_t i = 0; i < 50; ++i) dup.push_back(rng.below(p.size()));
    const auto base = classify(model, p);
    const auto moved = classify(model, p.subset(perm));
    const auto doubled = classify(model, p.subset(dup));
    for (std::size_t c = 0; c < base.size(); ++c) {
      perm_err = std::max(perm_err, std::abs(moved[c] - base[c]));
      dup_err = std::max(dup_err, std::abs(doubled[c] - base[c]));
    }
  }
  const SamplerModel sampler = init_sampler({}, 12);
  for (int trial = 0; trial < 3; ++trial) {
    const PointCloud p = random_cloud(256, rng);
    std::vector<std::size_t> perm(p.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const Tensor a = embed(p, 10, sampler.params, sampler.config.embed);
    const Tensor b = embed(p.subset(perm), 10, sampler.params, sampler.config.embed);
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double ma = -1e300, mb = -1e300;
      for (std::size_t i = 0; i < a.rows(); ++i) {
        ma = std::max(ma, a.at(i, c));
        mb = std::max(mb, b.at(i, c));
      }
      pooled_err = std::max(pooled_err, std::abs(ma - mb));
    }
  }
  return {perm_err <= kPermTol && dup_err <= kPermTol && pooled_err <= kPooledTol,
          "logits perm " + fmt("%.1e", perm_err) + ", dup " + fmt("%.1e", dup_err) + "; pooled embedding " +
              fmt("%.1e", pooled_err)};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  const char* names[] = {"",
                         "gradient suite",
                         "FPS oracle",
                         "Chamfer/Hausdorff oracle",
                         "closed-form values",
                         "zero-init identity",
                         "arbitrary-size contract",
                         "desk-scale end to end",
                         "conformity ordering",
                         "ablation switches",
                         "determinism",
                         "permutation/duplication invariance"};
  std::map<int, Outcome> results;
  auto report = [&](int id, Outcome o) {
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", names[id], o.detail.c_str());
    std::fflush(stdout);
    results[id] = std::move(o);
  };

  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& ex) {
      return Outcome{false, std::string("exception: ") + ex.what()};
    }
  };

  Scratch scratch;
  if (want(1)) report(1, guarded(criterion_gradients));
  if (want(2)) report(2, guarded(criterion_fps_oracle));
  if (want(3)) report(3, guarded(criterion_metric_oracle));
  if (want(4)) report(4, guarded(criterion_closed_forms));
  if (want(5)) report(5, guarded(criterion_zero_init));
  if (want(11)) report(11, guarded(criterion_invariance));
  if (want(9)) report(9, guarded([&] { return criterion_ablations(scratch.root / "ablation"); }));
  if (want(10)) report(10, guarded([&] { return criterion_determinism(scratch.root / "determinism"); }));
  if (want(6) || want(7) || want(8)) {
    const fs::path dir = scratch.root / "desk";
    fs::create_directories(dir);
    const EndToEnd e = run_desk_pipeline(dir);
    if (want(7)) report(7, criterion_end_to_end(e));
    if (want(8)) report(8, guarded([&] { return criterion_conformity(e); }));
    if (want(6)) {
      report(6, e.ran ? guarded([&] { return criterion_arbitrary_size(e.s2); })
                      : Outcome{false, "no trained checkpoint: " + e.error});
    }
  }

  std::size_t failed = 0;
  std::printf("\nsummary\n");
  for (const auto& [id, o] : results) {
    std::printf("  criterion %2d %s\n", id, o.pass ? "PASS" : "FAIL");
    failed += o.pass ? 0 : 1;
  }
  std::printf("%zu of %zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
