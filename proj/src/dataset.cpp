#include "aspd/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aspd/error.hpp"
#include "aspd/rng.hpp"

namespace aspd {

namespace fs = std::filesystem;

PointCloud load_xyz(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> xyz;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    double v[3];
    std::string extra;
    if (!(fields >> v[0] >> v[1] >> v[2]) || (fields >> extra)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected three reals");
    }
    for (double c : v) {
      if (!std::isfinite(c)) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-finite coordinate");
      }
      xyz.push_back(c);
    }
  }
  if (xyz.empty()) throw ContractError(path.string() + ": no points");
  return PointCloud(std::move(xyz));
}

void save_xyz(const PointCloud& cloud, const fs::path& path) {
  if (cloud.size() == 0) throw ContractError("save_xyz: empty cloud");
  std::string text;
  char buf[96];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10f %.10f %.10f\n", cloud(i, 0), cloud(i, 1), cloud(i, 2));
    text += buf;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

using nlohmann::json;

json entries_to_json(const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back({{"file", e.file}, {"label", e.label}});
  return arr;
}

std::vector<ManifestEntry> entries_from_json(const json& arr, std::size_t classes) {
  std::vector<ManifestEntry> out;
  for (const auto& e : arr) {
    ManifestEntry entry{e.at("file").get<std::string>(), e.at("label").get<std::size_t>()};
    if (entry.label >= classes) throw FormatError("manifest: label out of range for " + entry.file);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace

DatasetManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  DatasetManifest m;
  m.root = root;
  try {
    const json j = json::parse(in);
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    m.points = j.at("points").get<std::size_t>();
    m.train = entries_from_json(j.at("train"), m.class_names.size());
    m.test = entries_from_json(j.at("test"), m.class_names.size());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest) {
  json j;
  j["classes"] = manifest.class_names;
  j["points"] = manifest.points;
  j["train"] = entries_to_json(manifest.train);
  j["test"] = entries_to_json(manifest.test);
  const fs::path path = manifest.root / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Dataset load_dataset(const fs::path& root) {
  const DatasetManifest m = read_manifest(root);
  Dataset d;
  d.class_names = m.class_names;
  d.points = m.points;
  auto load_split = [&](const std::vector<ManifestEntry>& entries, std::vector<LabeledCloud>& out) {
    for (const auto& e : entries) {
      PointCloud cloud = load_xyz(root / e.file);
      if (m.points != 0 && cloud.size() != m.points) {
        throw FormatError(e.file + ": expected " + std::to_string(m.points) + " points");
      }
      out.push_back({std::move(cloud), e.label, e.file});
    }
  };
  load_split(m.train, d.train);
  load_split(m.test, d.test);
  return d;
}

const std::vector<std::string>& synthetic_shape_names() {
  static const std::vector<std::string> names{"sphere", "cube",  "cylinder",     "cone",
                                              "torus",  "plane", "two_spheres",  "capped_cylinder"};
  return names;
}

namespace {

constexpr double kPi = std::numbers::pi;

struct P3 {
  double x, y, z;
};

P3 on_sphere(Rng& rng, double r) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2 * kPi);
  const double s = std::sqrt(1.0 - z * z);
  return {r * s * std::cos(phi), r * z, r * s * std::sin(phi)};
}

// Point on a disk of radius r in the xz-plane at height y.
P3 on_disk(Rng& rng, double r, double y) {
  const double rho = r * std::sqrt(rng.uniform());
  const double phi = rng.uniform(0.0, 2 * kPi);
  return {rho * std::cos(phi), y, rho * std::sin(phi)};
}

P3 on_tube(Rng& rng, double r, double h) {
  const double phi = rng.uniform(0.0, 2 * kPi);
  return {r * std::cos(phi), rng.uniform(-h / 2, h / 2), r * std::sin(phi)};
}

// Shapes are sampled with the vertical axis along y.
P3 shape_point(std::size_t shape, const double* q, Rng& rng) {
  switch (shape) {
    case 0: {  // ellipsoid-ish sphere
      P3 p = on_sphere(rng, 1.0);
      return {p.x * q[0], p.y * q[1], p.z * q[2]};
    }
    case 1: {  // box surface
      const double a = q[0], b = q[1], c = q[2];
      const double areas[3] = {b * c, a * c, a * b};
      const double pick = rng.uniform() * (areas[0] + areas[1] + areas[2]);
      const double sign = rng.uniform() < 0.5 ? -0.5 : 0.5;
      const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
      if (pick < areas[0]) return {sign * a, u * b, v * c};
      if (pick < areas[0] + areas[1]) return {u * a, sign * b, v * c};
      return {u * a, v * b, sign * c};
    }
    case 2:  // open cylinder
      return on_tube(rng, 0.3 + 0.2 * q[0], 1.6 + 0.6 * q[1]);
    case 3: {  // cone, apex up
      const double r = 0.6 + 0.3 * q[0], h = 1.0 + 0.5 * q[1];
      const double t = std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2 * kPi);
      return {t * r * std::cos(phi), h / 2 - t * h, t * r * std::sin(phi)};
    }
    case 4: {  // torus around y, rejection for uniform area
      const double R = 0.8 + 0.2 * q[0], r = 0.22 + 0.12 * q[1];
      for (;;) {
        const double u = rng.uniform(0.0, 2 * kPi), v = rng.uniform(0.0, 2 * kPi);
        if (rng.uniform() * (R + r) > R + r * std::cos(v)) continue;
        const double w = R + r * std::cos(v);
        return {w * std::cos(u), r * std::sin(v), w * std::sin(u)};
      }
    }
    case 5:  // flat rectangle
      return {rng.uniform(-0.5, 0.5) * (1.4 + 0.6 * q[0]), 0.0, rng.uniform(-0.5, 0.5) * (1.0 + 0.6 * q[1])};
    case 6: {  // two spheres side by side
      const double r1 = 0.4 + 0.2 * q[0], r2 = 0.4 + 0.2 * q[1];
      const double gap = 1.1 + 0.4 * q[2];
      const bool first = rng.uniform() * (r1 * r1 + r2 * r2) < r1 * r1;
      P3 p = on_sphere(rng, first ? r1 : r2);
      p.x += first ? -gap / 2 : gap / 2;
      return p;
    }
    default: {  // cylinder with end caps
      const double r = 0.35 + 0.2 * q[0], h = 1.0 + 0.5 * q[1];
      const double side = 2 * kPi * r * h, cap = kPi * r * r;
      const double pick = rng.uniform() * (side + 2 * cap);
      if (pick < side) return on_tube(rng, r, h);
      return on_disk(rng, r, pick < side + cap ? h / 2 : -h / 2);
    }
  }
}

}  // namespace

PointCloud synthetic_shape(std::size_t shape_index, std::size_t points, std::uint64_t seed) {
  if (shape_index >= synthetic_shape_names().size()) throw ConfigError("unknown synthetic shape");
  if (points == 0) throw ConfigError("synthetic shape needs at least one point");
  Rng rng(seed);
  double q[3];
  if (shape_index == 0 || shape_index == 1) {
    for (double& v : q) v = rng.uniform(0.8, 1.2);
  } else {
    for (double& v : q) v = rng.uniform();
  }
  const double angle = rng.uniform(0.0, 2 * kPi);
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<double> xyz;
  xyz.reserve(points * 3);
  for (std::size_t i = 0; i < points; ++i) {
    const P3 p = shape_point(shape_index, q, rng);
    xyz.push_back(c * p.x + s * p.z);
    xyz.push_back(p.y);
    xyz.push_back(-s * p.x + c * p.z);
  }
  return normalize_unit_sphere(PointCloud(std::move(xyz)));
}

DatasetManifest gen_synthetic(const fs::path& root, std::size_t classes, std::size_t per_class,
                              std::size_t points, std::uint64_t seed) {
  const auto& names = synthetic_shape_names();
  if (classes < 2 || classes > names.size()) throw ConfigError("classes must lie in [2, 8]");
  if (per_class == 0 || points == 0) throw ConfigError("per-class count and points must be positive");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  DatasetManifest m;
  m.root = root;
  m.points = points;
  m.class_names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(classes));
  const std::size_t train_count = per_class * 4 / 5;
  for (std::size_t c = 0; c < classes; ++c) {
    fs::create_directories(root / names[c], ec);
    if (ec) throw IoError("cannot create " + (root / names[c]).string());
    for (std::size_t i = 0; i < per_class; ++i) {
      char file[128];
      std::snprintf(file, sizeof file, "%s/%s_%04zu.xyz", names[c].c_str(), names[c].c_str(), i);
      save_xyz(synthetic_shape(c, points, mix_seed(seed, c * per_class + i)), root / file);
      (i < train_count ? m.train : m.test).push_back({file, c});
    }
  }
  write_manifest(m);
  return m;
}

}  // namespace aspd
