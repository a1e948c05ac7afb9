#include "aspd/presampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aspd {

void init_embedder(ParamSet& params, const EmbedderConfig& config, Rng& rng) {
  if (config.k < 1) throw ConfigError("embedder: k must be at least 1");
  std::size_t in = 3;
  std::size_t concat = 0;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    add_dense(params, "embed.ec" + std::to_string(i), 2 * in, config.widths[i], rng);
    in = config.widths[i];
    concat += in;
  }
  add_dense(params, "embed.fuse", concat, config.out, rng);
}

std::size_t adaptive_k(std::size_t n, std::size_t n0, std::size_t k0) {
  if (n < 1 || n0 < 1 || k0 < 1) throw ContractError("adaptive_k: arguments must be positive");
  const double raw = std::round(static_cast<double>(k0) * static_cast<double>(n) / static_cast<double>(n0));
  const double lo = std::min<double>(4.0, static_cast<double>(n));
  return static_cast<std::size_t>(std::clamp(raw, lo, static_cast<double>(n)));
}

namespace {

struct SplitWeight {
  Var center;    // W_a − W_b
  Var neighbor;  // W_b
};

SplitWeight split_edge_weight(Var weight, std::size_t c_in) {
  const Tensor& w = weight.value();
  if (w.rank() != 2 || w.rows() != 2 * c_in) {
    throw DimensionError("edgeconv: weight " + shape_str(w.shape()) + " for input width " +
                         std::to_string(c_in));
  }
  Var wa = slice_rows(weight, 0, c_in);
  Var wb = slice_rows(weight, c_in, 2 * c_in);
  return {sub(wa, wb), wb};
}

void check_graph(const IndexMatrix& neighbors, std::size_t n) {
  if (neighbors.rows != n) {
    throw DimensionError("edgeconv: graph has " + std::to_string(neighbors.rows) + " rows for " +
                         std::to_string(n) + " points");
  }
}

}  // namespace

Var edgeconv_layer(Var features, const IndexMatrix& neighbors, Var weight, Var bias) {
  check_graph(neighbors, features.value().rows());
  SplitWeight w = split_edge_weight(weight, features.value().cols());
  Var center = linear(features, w.center, bias);
  Var pooled = group_max(linear(features, w.neighbor), neighbors);
  return relu(add(center, pooled));
}

Var edgeconv_rows(Var features, const IndexMatrix& neighbors, std::span<const std::size_t> rows,
                  Var weight, Var bias) {
  check_graph(neighbors, features.value().rows());
  SplitWeight w = split_edge_weight(weight, features.value().cols());
  Var center = linear(gather_rows(features, rows), w.center, bias);
  Var pooled = group_max(linear(features, w.neighbor), neighbors.select_rows(rows));
  return relu(add(center, pooled));
}

namespace {

std::vector<Var> early_layers(Binder& bind, const EmbedderConfig& config, Var points,
                              const IndexMatrix& graph) {
  if (config.widths.empty()) throw ConfigError("embedder needs at least one edge convolution");
  std::vector<Var> outs;
  Var x = points;
  for (std::size_t i = 0; i + 1 < config.widths.size(); ++i) {
    const std::string p = "embed.ec" + std::to_string(i);
    x = edgeconv_layer(x, graph, bind(p + ".weight"), bind(p + ".bias"));
    outs.push_back(x);
  }
  return outs;
}

}  // namespace

Var embed(Binder& bind, const EmbedderConfig& config, Var points, const IndexMatrix& graph) {
  std::vector<Var> outs = early_layers(bind, config, points, graph);
  const std::string last = "embed.ec" + std::to_string(config.widths.size() - 1);
  Var prev = outs.empty() ? points : outs.back();
  outs.push_back(edgeconv_layer(prev, graph, bind(last + ".weight"), bind(last + ".bias")));
  Var cat = outs[0];
  for (std::size_t i = 1; i < outs.size(); ++i) cat = concat_cols(cat, outs[i]);
  return relu(dense(bind, "embed.fuse", cat));
}

Var embed_rows(Binder& bind, const EmbedderConfig& config, Var points, const IndexMatrix& graph,
               std::span<const std::size_t> rows) {
  std::vector<Var> outs = early_layers(bind, config, points, graph);
  const std::string last = "embed.ec" + std::to_string(config.widths.size() - 1);
  Var prev = outs.empty() ? points : outs.back();
  Var tail = edgeconv_rows(prev, graph, rows, bind(last + ".weight"), bind(last + ".bias"));
  Var cat = outs.empty() ? tail : gather_rows(outs[0], rows);
  for (std::size_t i = 1; i < outs.size(); ++i) cat = concat_cols(cat, gather_rows(outs[i], rows));
  if (!outs.empty()) cat = concat_cols(cat, tail);
  return relu(dense(bind, "embed.fuse", cat));
}

Tensor embed(const PointCloud& cloud, std::size_t k, const ParamSet& params,
             const EmbedderConfig& config) {
  if (k > cloud.size()) {
    throw ContractError("embed: k=" + std::to_string(k) + " exceeds " + std::to_string(cloud.size()) +
                        " points");
  }
  Tape tape;
  Binder bind(tape, params, false);
  const IndexMatrix graph = knn(cloud, cloud, k);
  return embed(bind, config, tape.constant(cloud.to_tensor()), graph).value();
}

PresamplerKind parse_presampler(const std::string& name) {
  if (name == "fps") return PresamplerKind::kFps;
  if (name == "rs") return PresamplerKind::kRs;
  throw ConfigError("unknown pre-sampler '" + name + "' (expected fps or rs)");
}

std::string to_string(PresamplerKind kind) { return kind == PresamplerKind::kFps ? "fps" : "rs"; }

IndexSet presample_indices(const PointCloud& cloud, std::size_t m, PresamplerKind kind,
                           std::uint64_t start_or_seed) {
  if (m < 1 || m >= cloud.size()) {
    throw ContractError("presample: need 1 <= m < n, got m=" + std::to_string(m) + ", n=" +
                        std::to_string(cloud.size()));
  }
  if (kind == PresamplerKind::kFps) return fps(cloud, m, static_cast<std::size_t>(start_or_seed));
  return random_sample(cloud, m, start_or_seed);
}

PreSampleOutput presample(const PointCloud& cloud, const Tensor& features, std::size_t m,
                          PresamplerKind kind, std::uint64_t start_or_seed) {
  if (features.rank() != 2 || features.rows() != cloud.size()) {
    throw DimensionError("presample: features " + shape_str(features.shape()) + " for " +
                         std::to_string(cloud.size()) + " points");
  }
  PreSampleOutput out;
  out.indices = presample_indices(cloud, m, kind, start_or_seed);
  Tape tape;
  Var s = gather_rows(tape.constant(cloud.to_tensor()), out.indices.indices);
  Var f = gather_rows(tape.constant(features), out.indices.indices);
  out.s_prime = s.value();
  out.f_prime = f.value();
  out.sf_prime = concat_cols(s, f).value();
  return out;
}

}  // namespace aspd
