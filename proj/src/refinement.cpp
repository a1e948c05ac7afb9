#include "aspd/refinement.hpp"

#include <algorithm>
#include <string>

#include "aspd/geometry.hpp"

namespace aspd {

void init_refiner_core(ParamSet& params, const RefinerConfig& config, Rng& rng) {
  std::size_t in = config.in;
  for (std::size_t i = 0; i < config.trunk.size(); ++i) {
    add_dense(params, "refine.trunk" + std::to_string(i), in, config.trunk[i], rng);
    in = config.trunk[i];
  }
  add_dense(params, "refine.proj0", config.c1(), config.projection_hidden, rng);
  add_dense(params, "refine.proj1", config.projection_hidden, 3, rng, /*zero_init=*/true);
}

void init_density_attention(ParamSet& params, const RefinerConfig& config, Rng& rng) {
  std::size_t in = 3 + config.in;
  for (std::size_t i = 0; i < config.density.size(); ++i) {
    add_dense(params, std::string(kDensityPrefix) + std::to_string(i), in, config.density[i], rng);
    in = config.density[i];
  }
  add_dense(params, std::string(kAttentionPrefix) + "0", config.c1() + config.c2(),
            config.attention_hidden, rng);
  add_dense(params, std::string(kAttentionPrefix) + "1", config.attention_hidden, config.c1(), rng);
}

Var trunk(Binder& bind, const RefinerConfig& config, Var sf) {
  if (sf.value().rank() != 2 || sf.value().cols() != config.in) {
    throw DimensionError("trunk: expected width " + std::to_string(config.in) + ", got " +
                         shape_str(sf.value().shape()));
  }
  Var x = sf;
  for (std::size_t i = 0; i < config.trunk.size(); ++i) {
    x = relu(dense(bind, "refine.trunk" + std::to_string(i), x));
  }
  return x;
}

Var density_embedding(Binder& bind, const RefinerConfig& config, Var s_prime, Var sf,
                      std::size_t kd) {
  const std::size_t m = s_prime.value().rows();
  if (kd < 1 || kd > m) {
    throw ContractError("density_embedding: kd=" + std::to_string(kd) + " needs 1 <= kd <= m=" +
                        std::to_string(m));
  }
  if (sf.value().rows() != m) throw DimensionError("density_embedding: row mismatch");
  const IndexMatrix groups = knn(PointCloud::from_tensor(s_prime.value()),
                                 PointCloud::from_tensor(s_prime.value()), kd);

  // First layer on concat(s_j − s_i, SF'_j) splits as
  // (s_j·W_r + SF'_j·W_f + b) − s_i·W_r, so it is evaluated per point.
  const std::string first = std::string(kDensityPrefix) + "0";
  Var w = bind(first + ".weight");
  Var per_point = linear(concat_cols(s_prime, sf), w, bind(first + ".bias"));
  Var center = linear(s_prime, slice_rows(w, 0, 3));
  // h holds pre-activations; the last relu is applied after the max pool,
  // which is equivalent because relu is monotone.
  Var h = group_sub_rows(gather_group(per_point, groups), center);
  std::size_t width = config.density.front();
  for (std::size_t i = 1; i < config.density.size(); ++i) {
    Var flat = reshape(relu(h), {m * kd, width});
    flat = dense(bind, std::string(kDensityPrefix) + std::to_string(i), flat);
    width = config.density[i];
    h = reshape(flat, {m, kd, width});
  }
  return relu(reduce_group(h, Reduce::kMax));
}

AttentionOutput channel_attention(Binder& bind, const RefinerConfig& config, Var e, Var e_bar) {
  const std::size_t m = e.value().rows();
  if (e_bar.value().rows() != m) {
    throw DimensionError("channel_attention: " + shape_str(e.value().shape()) + " vs " +
                         shape_str(e_bar.value().shape()));
  }
  (void)config;
  Var pooled = mean_rows(concat_cols(e, e_bar));
  Var hidden = relu(dense(bind, std::string(kAttentionPrefix) + "0", pooled));
  Var vec = sigmoid(dense(bind, std::string(kAttentionPrefix) + "1", hidden));
  Var weights = broadcast_rows(vec, m);
  return {weights, hadamard(e, weights)};
}

Var predict_offsets(Binder& bind, const RefinerConfig& config, Var e_prime) {
  if (e_prime.value().cols() != config.c1()) {
    throw DimensionError("predict_offsets: expected width " + std::to_string(config.c1()));
  }
  Var h = relu(dense(bind, "refine.proj0", e_prime));
  return dense(bind, "refine.proj1", h);
}

RefineOutput refine_forward(Binder& bind, const RefinerConfig& config, Var sf, Var s_prime,
                            bool density_attention) {
  const Tensor& sp = s_prime.value();
  if (sp.rank() != 2 || sp.cols() != 3 || sf.value().rows() != sp.rows()) {
    throw DimensionError("refine_forward: S' " + shape_str(sp.shape()) + " with SF' " +
                         shape_str(sf.value().shape()));
  }
  Var e = trunk(bind, config, sf);
  Var e_prime = e;
  if (density_attention) {
    const std::size_t kd = std::min(config.kd, sp.rows());
    Var e_bar = density_embedding(bind, config, s_prime, sf, kd);
    e_prime = channel_attention(bind, config, e, e_bar).adjusted;
  }
  Var offsets = predict_offsets(bind, config, e_prime);
  return {apply_offsets(s_prime, offsets), offsets};
}

}  // namespace aspd
