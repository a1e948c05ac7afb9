#pragma once

// The full downsampler (embedding + pre-sampling + refinement) and a common
// interface over it and the heuristic baselines.

#include <cstdint>
#include <memory>
#include <string>

#include "aspd/geometry.hpp"
#include "aspd/keyvalues.hpp"
#include "aspd/params.hpp"
#include "aspd/presampling.hpp"
#include "aspd/refinement.hpp"

namespace aspd {

struct SamplerConfig {
  EmbedderConfig embed;
  RefinerConfig refine;
  bool density_attention = true;
  PresamplerKind presampler = PresamplerKind::kFps;
  std::size_t n0 = 1024;
  std::size_t k0 = 40;

  void write(KeyValues& kv) const;
  static SamplerConfig read(const KeyValues& kv);
};

struct SamplerModel {
  SamplerConfig config;
  ParamSet params;
};

// Fresh parameters; density/attention tensors only when enabled.
SamplerModel init_sampler(const SamplerConfig& config, std::uint64_t seed);

struct SamplerPass {
  Var presampled;  // S'
  Var features;    // F'
  Var refined;     // S
  Var offsets;     // ΔS
};

// Forward on a tape for a cloud whose k-NN graph and pre-sampled indices are
// already known.
SamplerPass sampler_forward(Binder& bind, const SamplerConfig& config, Var points,
                            const IndexMatrix& graph, const IndexSet& indices);

struct SampleResult {
  IndexSet indices;
  PointCloud presampled;
  PointCloud refined;
};

// Inference on a normalized cloud; k follows adaptive_k(n, n0, k0).
SampleResult run_sampler(const SamplerModel& model, const PointCloud& cloud, std::size_t m,
                         std::uint64_t start_or_seed = 0);

class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::string name() const = 0;
  // `item` distinguishes clouds for samplers with per-cloud randomness.
  virtual PointCloud sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const = 0;
};

class FpsSampler final : public Sampler {
 public:
  explicit FpsSampler(std::size_t start = 0) : start_(start) {}
  std::string name() const override { return "fps"; }
  PointCloud sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const override;

 private:
  std::size_t start_;
};

class RandomSampler final : public Sampler {
 public:
  explicit RandomSampler(std::uint64_t seed = 0) : seed_(seed) {}
  std::string name() const override { return "rs"; }
  PointCloud sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const override;

 private:
  std::uint64_t seed_;
};

class AspdSampler final : public Sampler {
 public:
  AspdSampler(std::shared_ptr<const SamplerModel> model, std::string name)
      : model_(std::move(model)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  PointCloud sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const override;
  const SamplerModel& model() const { return *model_; }

 private:
  std::shared_ptr<const SamplerModel> model_;
  std::string name_;
};

}  // namespace aspd
