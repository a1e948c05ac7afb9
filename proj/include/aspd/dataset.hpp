#pragma once

// Labeled point-cloud datasets: XYZ files listed by a JSON manifest, plus a
// synthetic generator of parametric shapes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aspd/geometry.hpp"

namespace aspd {

struct LabeledCloud {
  PointCloud cloud;
  std::size_t label = 0;
  std::string file;  // relative to the dataset root
};

struct ManifestEntry {
  std::string file;
  std::size_t label = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  std::size_t points = 0;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<LabeledCloud> train;
  std::vector<LabeledCloud> test;
  std::size_t points = 0;

  std::size_t num_classes() const { return class_names.size(); }
};

// One point per line, three whitespace-separated reals; '#' lines skipped.
PointCloud load_xyz(const std::filesystem::path& path);
// Fixed "%.10f" formatting, LF line endings.
void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);

DatasetManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const DatasetManifest& manifest);
// Reads the manifest and every listed cloud; checks labels and sizes.
Dataset load_dataset(const std::filesystem::path& root);

// Shape menu, in class order.
const std::vector<std::string>& synthetic_shape_names();

// `points` samples drawn uniformly over the surface of shape `shape_index`
// with per-instance proportions and a random turn about the vertical axis,
// normalized to the unit sphere.
PointCloud synthetic_shape(std::size_t shape_index, std::size_t points, std::uint64_t seed);

// Writes classes × per_class clouds (first 80% of each class train, the rest
// test) and the manifest under `root`. classes must lie in [2, 8].
DatasetManifest gen_synthetic(const std::filesystem::path& root, std::size_t classes,
                              std::size_t per_class, std::size_t points, std::uint64_t seed);

}  // namespace aspd
