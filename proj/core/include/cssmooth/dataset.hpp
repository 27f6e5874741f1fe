#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cssmooth/types.hpp"

namespace cssmooth {

/// n examples of dimension d, features stored row-major.
struct Dataset {
  std::vector<double> features;
  std::vector<Label> labels;
  std::size_t m = 0;
  std::size_t d = 0;
  std::string name;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(features).subspan(i * d, d); }

  /// Throws std::invalid_argument when an invariant fails (labels < m, finite features, n >= 1).
  void validate() const;
  Dataset subset(std::span<const std::size_t> ids) const;
};

/// CSV with header "label,f0,...,f{d-1}"; labels are 0-based class indices.
/// When `m` is given labels must be below it, otherwise m = max label + 1.
/// Errors name the offending 1-based line.
Dataset load_dataset(const std::filesystem::path& path, std::optional<std::size_t> m = std::nullopt);
Dataset parse_dataset(std::istream& in, std::string name, std::optional<std::size_t> m = std::nullopt);
void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/// Gaussian-blob fixture: `classes` isotropic clusters in 2-D with centres on
/// a circle. "blobs-5" is 5 classes, 100 train and 100 test points each.
struct BlobsSpec {
  std::size_t classes = 5;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double center_radius = 2.0;
  double spread = 0.6;
};

struct SyntheticSplit {
  Dataset train;
  Dataset test;
};

/// Accepts "blobs-K" (K >= 2 classes) with the default geometry.
SyntheticSplit gen_synthetic(std::string_view name, std::uint64_t seed);
SyntheticSplit gen_blobs(const BlobsSpec& spec, std::uint64_t seed, std::string name = "blobs");

}  // namespace cssmooth
