#include "aspd/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aspd/error.hpp"

namespace aspd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}
  const unsigned char* take(std::size_t n) {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    const unsigned char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <class T>
  T read() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

std::string config_text(const KeyValues& kv) {
  std::string text;
  for (const auto& [key, value] : kv.entries()) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ContractError("checkpoint config entry not representable: " + key);
    }
    text += key + "=" + value + "\n";
  }
  return text;
}

KeyValues parse_config(std::string_view text) {
  KeyValues kv;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw FormatError("checkpoint config: unterminated line");
    const std::string_view line = text.substr(0, nl);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw FormatError("checkpoint config: malformed line");
    const std::string key(line.substr(0, eq));
    if (kv.has(key)) throw FormatError("checkpoint config: duplicate key " + key);
    kv.set(key, std::string(line.substr(eq + 1)));
    text.remove_prefix(nl + 1);
  }
  return kv;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("ASPD", 4);
  w.u32(kCheckpointVersion);
  const std::string cfg = config_text(ckpt.config);
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (t.rank() > 255) throw ContractError("tensor rank too large: " + name);
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4), "ASPD", 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const auto version = r.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto cfg_len = r.read<std::uint32_t>();
  const auto* cfg = reinterpret_cast<const char*>(r.take(cfg_len));
  ckpt.config = parse_config(std::string_view(cfg, cfg_len));
  const auto count = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.read<std::uint32_t>();
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    const auto rank = r.read<std::uint8_t>();
    Shape shape(rank);
    std::size_t elems = 1;
    for (auto& d : shape) {
      d = r.read<std::uint64_t>();
      if (d != 0 && elems > r.remaining() / d) throw FormatError("checkpoint truncated in " + name);
      elems *= d;
    }
    if (elems * 4 > r.remaining()) throw FormatError("checkpoint truncated in " + name);
    std::vector<double> data(elems);
    for (auto& v : data) v = r.read<float>();
    if (!ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw FormatError("duplicate tensor " + name);
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  write_text_file(path, std::string(bytes.begin(), bytes.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

ParamSet quantize(const ParamSet& params) {
  ParamSet out;
  for (const auto& [name, t] : params) {
    std::vector<double> data(t.data().begin(), t.data().end());
    for (auto& v : data) v = static_cast<float>(v);
    out.emplace(name, Tensor(t.shape(), std::move(data)));
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string text = "sampler,task_model,n,m,metric,value\n";
  char buf[64];
  for (const auto& row : rows) {
    for (const auto& [metric, value] : {std::pair{"acc", row.acc}, std::pair{"hd", row.hd}}) {
      std::snprintf(buf, sizeof buf, "%.6f", value);
      text += row.sampler + "," + row.task_model + "," + std::to_string(row.n) + "," + std::to_string(row.m) +
              "," + metric + "," + buf + "\n";
    }
  }
  return text;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, metrics_csv(rows));
}

}  // namespace aspd
