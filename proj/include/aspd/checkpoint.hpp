#pragma once

// Binary checkpoint files and CSV emitters.
//
// Checkpoint layout (little-endian):
//   "ASPD" | u32 version | u32 n, n bytes of "key=value\n" lines |
//   u32 tensor count | per tensor: u32 name length, name, u8 rank,
//   rank × u64 dims, f32 data (row-major).
// Values are stored at 32-bit precision and widened on load.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aspd/keyvalues.hpp"
#include "aspd/optim.hpp"

namespace aspd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  KeyValues config;
  ParamSet tensors;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
// FormatError on bad magic, unknown version, truncation or trailing bytes.
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rounds every value to float, as a save/load round trip would.
ParamSet quantize(const ParamSet& params);

struct MetricsRow {
  std::string sampler;
  std::string task_model;
  std::size_t n = 0;
  std::size_t m = 0;
  double acc = 0.0;  // fraction in [0, 1]
  double hd = 0.0;   // mean Hausdorff distance to the input
};

// Header `sampler,task_model,n,m,metric,value`; each row yields an `acc` line
// and an `hd` line with "%.6f" values.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace aspd
