#include "aspd/sampler.hpp"

#include "aspd/rng.hpp"

namespace aspd {

void SamplerConfig::write(KeyValues& kv) const {
  kv.set("sampler.embed_k", embed.k);
  kv.set_sizes("sampler.embed_widths", embed.widths);
  kv.set("sampler.embed_out", embed.out);
  kv.set_sizes("sampler.trunk", refine.trunk);
  kv.set_sizes("sampler.density", refine.density);
  kv.set("sampler.attention_hidden", refine.attention_hidden);
  kv.set("sampler.projection_hidden", refine.projection_hidden);
  kv.set("sampler.kd", refine.kd);
  kv.set("sampler.density_attention", density_attention);
  kv.set("sampler.presampler", to_string(presampler));
  kv.set("sampler.n0", n0);
  kv.set("sampler.k0", k0);
}

SamplerConfig SamplerConfig::read(const KeyValues& kv) {
  SamplerConfig c;
  c.embed.k = kv.get_size("sampler.embed_k");
  c.embed.widths = kv.get_sizes("sampler.embed_widths");
  c.embed.out = kv.get_size("sampler.embed_out");
  c.refine.in = c.embed.out + 3;
  c.refine.trunk = kv.get_sizes("sampler.trunk");
  c.refine.density = kv.get_sizes("sampler.density");
  c.refine.attention_hidden = kv.get_size("sampler.attention_hidden");
  c.refine.projection_hidden = kv.get_size("sampler.projection_hidden");
  c.refine.kd = kv.get_size("sampler.kd");
  c.density_attention = kv.get_bool("sampler.density_attention");
  try {
    c.presampler = parse_presampler(kv.get("sampler.presampler"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  c.n0 = kv.get_size("sampler.n0");
  c.k0 = kv.get_size("sampler.k0");
  return c;
}

SamplerModel init_sampler(const SamplerConfig& config, std::uint64_t seed) {
  if (config.refine.in != config.embed.out + 3) {
    throw ConfigError("refiner input width must be embedding width + 3");
  }
  SamplerModel model{config, {}};
  Rng embed_rng(mix_seed(seed, 1));
  Rng refine_rng(mix_seed(seed, 2));
  Rng attention_rng(mix_seed(seed, 3));
  init_embedder(model.params, config.embed, embed_rng);
  init_refiner_core(model.params, config.refine, refine_rng);
  if (config.density_attention) init_density_attention(model.params, config.refine, attention_rng);
  return model;
}

SamplerPass sampler_forward(Binder& bind, const SamplerConfig& config, Var points,
                            const IndexMatrix& graph, const IndexSet& indices) {
  SamplerPass pass;
  pass.features = embed_rows(bind, config.embed, points, graph, indices.indices);
  // S' rows are copies of P rows; gradients reach P only when P is watched.
  pass.presampled = gather_rows(points, indices.indices);
  Var sf = concat_cols(pass.presampled, pass.features);
  RefineOutput r = refine_forward(bind, config.refine, sf, pass.presampled, config.density_attention);
  pass.refined = r.refined;
  pass.offsets = r.offsets;
  return pass;
}

SampleResult run_sampler(const SamplerModel& model, const PointCloud& cloud, std::size_t m,
                         std::uint64_t start_or_seed) {
  SampleResult out;
  out.indices = presample_indices(cloud, m, model.config.presampler, start_or_seed);
  const std::size_t k = adaptive_k(cloud.size(), model.config.n0, model.config.k0);
  const IndexMatrix graph = knn(cloud, cloud, k);
  Tape tape;
  Binder bind(tape, model.params, false);
  SamplerPass pass = sampler_forward(bind, model.config, tape.constant(cloud.to_tensor()), graph, out.indices);
  out.presampled = PointCloud::from_tensor(pass.presampled.value());
  out.refined = PointCloud::from_tensor(pass.refined.value());
  return out;
}

PointCloud FpsSampler::sample(const PointCloud& cloud, std::size_t m, std::uint64_t) const {
  return cloud.subset(fps(cloud, m, start_).indices);
}

PointCloud RandomSampler::sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const {
  return cloud.subset(random_sample(cloud, m, mix_seed(seed_, item)).indices);
}

PointCloud AspdSampler::sample(const PointCloud& cloud, std::size_t m, std::uint64_t item) const {
  const std::uint64_t arg = model_->config.presampler == PresamplerKind::kFps ? 0 : item;
  return run_sampler(*model_, cloud, m, arg).refined;
}

}  // namespace aspd
