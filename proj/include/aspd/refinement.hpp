#pragma once

// Offset refining block: point-wise trunk, density attention (density
// embedding + channel attention), offset projection, S = S' + ΔS.

#include <cstddef>
#include <vector>

#include "aspd/params.hpp"
#include "aspd/tensor.hpp"

namespace aspd {

struct RefinerConfig {
  std::size_t in = 131;                          // c + 3
  std::vector<std::size_t> trunk{128, 128};      // last entry is c1
  std::vector<std::size_t> density{64, 64};      // last entry is c2
  std::size_t attention_hidden = 128;
  std::size_t projection_hidden = 64;
  std::size_t kd = 16;

  std::size_t c1() const { return trunk.back(); }
  std::size_t c2() const { return density.back(); }
};

inline constexpr const char* kDensityPrefix = "refine.density";
inline constexpr const char* kAttentionPrefix = "refine.attn";

// Trunk and projection; the final projection layer starts at zero.
void init_refiner_core(ParamSet& params, const RefinerConfig& config, Rng& rng);
// Density embedding and channel attention parameters.
void init_density_attention(ParamSet& params, const RefinerConfig& config, Rng& rng);

// Two point-wise linear+relu layers: SF' (m×(c+3)) -> E (m×c1).
Var trunk(Binder& bind, const RefinerConfig& config, Var sf);

// k-NN of S' within itself (self included), per-neighbor input
// concat(s_j − s_i, SF'_j), point-wise layers, max over the group.
// Throws ContractError when kd exceeds m.
Var density_embedding(Binder& bind, const RefinerConfig& config, Var s_prime, Var sf,
                      std::size_t kd);

struct AttentionOutput {
  Var weights;   // W, m×c1, every row identical
  Var adjusted;  // E' = E ⊙ W
};

AttentionOutput channel_attention(Binder& bind, const RefinerConfig& config, Var e, Var e_bar);

// E' -> ΔS (m×3): linear+relu, then linear.
Var predict_offsets(Binder& bind, const RefinerConfig& config, Var e_prime);

struct RefineOutput {
  Var refined;  // S
  Var offsets;  // ΔS
};

// With density attention disabled E' = E and the density/attention
// parameters are never read. The density neighborhood is min(kd, m).
RefineOutput refine_forward(Binder& bind, const RefinerConfig& config, Var sf, Var s_prime,
                            bool density_attention);

}  // namespace aspd
