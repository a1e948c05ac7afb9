#pragma once

// Feature embedding (static-graph edge convolutions) and heuristic
// pre-sampling to an arbitrary size.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aspd/geometry.hpp"
#include "aspd/params.hpp"
#include "aspd/tensor.hpp"

namespace aspd {

struct EmbedderConfig {
  std::size_t k = 40;
  std::vector<std::size_t> widths{64, 64, 128};
  std::size_t out = 128;  // c, the feature width
};

// Creates embed.ec<i>.{weight,bias} (2·c_in × width) and embed.fuse.*.
void init_embedder(ParamSet& params, const EmbedderConfig& config, Rng& rng);

// Neighborhood size scaled with the input size: round(k0·n/n0) clamped to
// [4, n].
std::size_t adaptive_k(std::size_t n, std::size_t n0 = 1024, std::size_t k0 = 40);

// One edge convolution: for point i and neighbor j the edge feature
// concat(f_i, f_j − f_i) goes through a linear layer and relu, then a max
// over the neighbors. `weight` is 2·c_in × c_out; its first c_in rows act on
// f_i and the rest on f_j − f_i. Because f_i is constant across the group
// and relu is monotone, this is evaluated as
// relu(f_i·(W_a − W_b) + b + max_j f_j·W_b).
Var edgeconv_layer(Var features, const IndexMatrix& neighbors, Var weight, Var bias);
// Same layer evaluated only at `rows` (neighbors still index all points).
Var edgeconv_rows(Var features, const IndexMatrix& neighbors, std::span<const std::size_t> rows,
                  Var weight, Var bias);

// F (n×c) for all points, given the coordinate k-NN graph.
Var embed(Binder& bind, const EmbedderConfig& config, Var points, const IndexMatrix& graph);
// Rows of F at `rows` only; equal to gather_rows(embed(...), rows) but the
// last edge convolution and the fusion layer run only where needed.
Var embed_rows(Binder& bind, const EmbedderConfig& config, Var points, const IndexMatrix& graph,
               std::span<const std::size_t> rows);
// Convenience: builds the k-NN graph and returns F.
Tensor embed(const PointCloud& cloud, std::size_t k, const ParamSet& params,
             const EmbedderConfig& config);

enum class PresamplerKind { kFps, kRs };

PresamplerKind parse_presampler(const std::string& name);
std::string to_string(PresamplerKind kind);

// Pre-sampled indices, 1 ≤ m < n. `start_or_seed` is the FPS start index or
// the RS seed.
IndexSet presample_indices(const PointCloud& cloud, std::size_t m, PresamplerKind kind,
                           std::uint64_t start_or_seed);

struct PreSampleOutput {
  Tensor s_prime;   // m×3, exact rows of P
  Tensor f_prime;   // m×c
  Tensor sf_prime;  // m×(c+3) = [S' | F']
  IndexSet indices;
};

PreSampleOutput presample(const PointCloud& cloud, const Tensor& features, std::size_t m,
                          PresamplerKind kind, std::uint64_t start_or_seed);

}  // namespace aspd
