#include "cssmooth/cost_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cssmooth/dataset.hpp"

namespace cssmooth {

namespace {

Label parse_label(std::string_view s, std::string_view context) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  Label value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("bad class index '" + std::string(s) + "' in " + std::string(context));
  }
  return value;
}

void check_seed(const CostMatrix& matrix, Label seed) {
  if (seed >= matrix.m()) {
    throw std::out_of_range("seed class " + std::to_string(seed) + " out of range for m=" +
                            std::to_string(matrix.m()));
  }
}

}  // namespace

CostMatrix::CostMatrix(std::size_t m, std::vector<std::uint8_t> row_major) : m_(m), entries_(std::move(row_major)) {
  if (m == 0) throw std::invalid_argument("cost matrix needs m >= 1");
  if (entries_.size() != m * m) {
    throw std::invalid_argument("cost matrix expects " + std::to_string(m * m) + " entries, got " +
                                std::to_string(entries_.size()));
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto v = entries_[j * m + k];
      if (v > 1) {
        throw std::invalid_argument("cost matrix entry (" + std::to_string(j) + "," + std::to_string(k) +
                                    ") is not 0 or 1");
      }
      if (j == k && v != 0) {
        throw std::invalid_argument("cost matrix diagonal entry (" + std::to_string(j) + "," +
                                    std::to_string(j) + ") must be 0");
      }
    }
  }
}

CostMatrix CostMatrix::zeros(std::size_t m) { return CostMatrix(m, std::vector<std::uint8_t>(m * m, 0)); }

CostMatrix CostMatrix::overall(std::size_t m) {
  std::vector<std::uint8_t> e(m * m, 1);
  for (std::size_t j = 0; j < m; ++j) e[j * m + j] = 0;
  return CostMatrix(m, std::move(e));
}

CostMatrix CostMatrix::seedwise(std::size_t m, Label seed) {
  if (seed >= m) throw std::out_of_range("seedwise seed out of range");
  std::vector<std::uint8_t> e(m * m, 0);
  for (std::size_t k = 0; k < m; ++k) e[seed * m + k] = k == seed ? 0 : 1;
  return CostMatrix(m, std::move(e));
}

CostMatrix CostMatrix::pairwise(std::size_t m, Label seed, std::span<const Label> targets) {
  if (seed >= m) throw std::out_of_range("pairwise seed out of range");
  std::vector<std::uint8_t> e(m * m, 0);
  for (Label k : targets) {
    if (k >= m) throw std::out_of_range("pairwise target out of range");
    if (k == seed) throw std::invalid_argument("pairwise target equals its seed class");
    e[seed * m + k] = 1;
  }
  return CostMatrix(m, std::move(e));
}

CostMatrix CostMatrix::parse_shorthand(std::string_view text, std::size_t m) {
  constexpr std::string_view kSeedwise = "seedwise:";
  constexpr std::string_view kPairwise = "pairwise:";
  if (text.starts_with(kSeedwise)) {
    return seedwise(m, parse_label(text.substr(kSeedwise.size()), text));
  }
  if (text.starts_with(kPairwise)) {
    auto body = text.substr(kPairwise.size());
    auto arrow = body.find("->");
    if (arrow == std::string_view::npos) {
      throw std::invalid_argument("pairwise shorthand needs 'seed->t1,t2,...': " + std::string(text));
    }
    const Label seed = parse_label(body.substr(0, arrow), text);
    std::vector<Label> targets;
    auto rest = body.substr(arrow + 2);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      targets.push_back(parse_label(rest.substr(0, comma), text));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (targets.empty()) throw std::invalid_argument("pairwise shorthand without targets");
    return pairwise(m, seed, targets);
  }
  throw std::invalid_argument("unknown cost matrix shorthand: " + std::string(text));
}

bool SensitiveTargets::contains(Label k) const { return std::binary_search(targets.begin(), targets.end(), k); }

std::string_view to_string(RowKind kind) {
  switch (kind) {
    case RowKind::NonSensitive: return "non-sensitive";
    case RowKind::Seedwise: return "seedwise";
    case RowKind::Pairwise: return "pairwise";
  }
  return "?";
}

SensitiveTargets omega(const CostMatrix& matrix, Label seed) {
  check_seed(matrix, seed);
  SensitiveTargets out{seed, {}};
  for (Label k = 0; k < matrix.m(); ++k) {
    if (matrix(seed, k) == 1) out.targets.push_back(k);
  }
  return out;
}

RowKind classify_row(const CostMatrix& matrix, Label seed) {
  const auto n = omega(matrix, seed).size();
  if (n == 0) return RowKind::NonSensitive;
  if (n == matrix.m() - 1) return RowKind::Seedwise;
  return RowKind::Pairwise;
}

SensitivePartition sensitive_subset(const CostMatrix& matrix, std::span<const Label> labels) {
  std::vector<bool> row_sensitive(matrix.m());
  for (Label j = 0; j < matrix.m(); ++j) row_sensitive[j] = !omega(matrix, j).empty();
  SensitivePartition out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= matrix.m()) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " of example " + std::to_string(i) +
                              " out of range for m=" + std::to_string(matrix.m()));
    }
    (row_sensitive[labels[i]] ? out.sensitive : out.normal).push_back(i);
  }
  return out;
}

SensitivePartition sensitive_subset(const CostMatrix& matrix, const Dataset& dataset) {
  return sensitive_subset(matrix, std::span<const Label>(dataset.labels));
}

CostMatrix cost_matrix_from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("cost matrix JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("m") || !j.contains("entries")) {
    throw FormatError("cost matrix JSON needs fields \"m\" and \"entries\"");
  }
  const auto m = j.at("m").get<std::size_t>();
  const auto& rows = j.at("entries");
  if (!rows.is_array() || rows.size() != m) throw FormatError("cost matrix \"entries\" must have m rows");
  std::vector<std::uint8_t> e;
  e.reserve(m * m);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != m) throw FormatError("cost matrix row must have m entries");
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw FormatError("cost matrix entries must be integers 0 or 1");
      const auto iv = v.get<long long>();
      if (iv != 0 && iv != 1) throw std::invalid_argument("cost matrix entries must be 0 or 1");
      e.push_back(static_cast<std::uint8_t>(iv));
    }
  }
  return CostMatrix(m, std::move(e));
}

std::string cost_matrix_to_json(const CostMatrix& matrix) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t j = 0; j < matrix.m(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < matrix.m(); ++k) row.push_back(int(matrix(j, k)));
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"m", matrix.m()}, {"entries", rows}}.dump();
}

CostMatrix load_cost_matrix(const std::string& spec, std::size_t m) {
  if (spec.starts_with("seedwise:") || spec.starts_with("pairwise:")) return CostMatrix::parse_shorthand(spec, m);
  std::ifstream in(spec);
  if (!in) throw std::invalid_argument("cannot open cost matrix file: " + spec);
  std::stringstream ss;
  ss << in.rdbuf();
  auto matrix = cost_matrix_from_json(ss.str());
  if (m != 0 && matrix.m() != m) {
    throw std::invalid_argument("cost matrix has m=" + std::to_string(matrix.m()) + " but the data has " +
                                std::to_string(m) + " classes");
  }
  return matrix;
}

}  // namespace cssmooth
