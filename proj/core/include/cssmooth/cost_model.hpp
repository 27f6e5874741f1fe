#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cssmooth/types.hpp"

namespace cssmooth {

struct Dataset;

/// Binary m x m cost matrix. entries(j, k) == 1 means that the smoothed
/// classifier predicting k on an example of class j incurs a cost.
/// Labels are 0-based. The diagonal must be zero.
class CostMatrix {
 public:
  /// Throws std::invalid_argument on non-binary entries, a nonzero diagonal,
  /// or a non-square layout.
  CostMatrix(std::size_t m, std::vector<std::uint8_t> row_major);

  static CostMatrix zeros(std::size_t m);
  /// All ones off the diagonal (overall robustness).
  static CostMatrix overall(std::size_t m);
  /// Row `seed` all ones off the diagonal, every other row zero.
  static CostMatrix seedwise(std::size_t m, Label seed);
  /// Row `seed` has ones exactly at `targets`.
  static CostMatrix pairwise(std::size_t m, Label seed, std::span<const Label> targets);

  /// Accepts "seedwise:3" and "pairwise:3->2,4,5".
  static CostMatrix parse_shorthand(std::string_view text, std::size_t m);

  std::size_t m() const noexcept { return m_; }
  std::uint8_t operator()(std::size_t seed, std::size_t target) const { return entries_[seed * m_ + target]; }
  const std::vector<std::uint8_t>& entries() const noexcept { return entries_; }

  bool operator==(const CostMatrix&) const = default;

 private:
  std::size_t m_;
  std::vector<std::uint8_t> entries_;
};

/// Omega_j: the cost-sensitive target classes of seed class j, sorted ascending.
struct SensitiveTargets {
  Label seed = 0;
  std::vector<Label> targets;

  bool empty() const noexcept { return targets.empty(); }
  std::size_t size() const noexcept { return targets.size(); }
  bool contains(Label k) const;
};

enum class RowKind { NonSensitive, Seedwise, Pairwise };

std::string_view to_string(RowKind kind);

/// Throws std::out_of_range for seed >= m.
SensitiveTargets omega(const CostMatrix& matrix, Label seed);
RowKind classify_row(const CostMatrix& matrix, Label seed);

/// Indices of examples whose label has a nonempty Omega, and the rest.
struct SensitivePartition {
  std::vector<std::size_t> sensitive;
  std::vector<std::size_t> normal;
};

/// Throws std::out_of_range when a label is >= m.
SensitivePartition sensitive_subset(const CostMatrix& matrix, std::span<const Label> labels);
SensitivePartition sensitive_subset(const CostMatrix& matrix, const Dataset& dataset);

/// JSON: {"m": int, "entries": [[0|1, ...], ...]}
CostMatrix cost_matrix_from_json(std::string_view json_text);
std::string cost_matrix_to_json(const CostMatrix& matrix);

/// Loads a JSON file, or parses a shorthand when `spec` is not a path to an
/// existing file. Shorthands need the class count.
CostMatrix load_cost_matrix(const std::string& spec, std::size_t m);

}  // namespace cssmooth
