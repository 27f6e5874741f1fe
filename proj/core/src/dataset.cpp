#include "cssmooth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "cssmooth/certifier.hpp"
#include "cssmooth/rng.hpp"

namespace cssmooth {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset '" + name + "' is empty");
  if (d == 0) throw std::invalid_argument("dataset '" + name + "' has dimension 0");
  if (features.size() != labels.size() * d) throw std::invalid_argument("dataset '" + name + "' shape mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= m) {
      throw std::invalid_argument("dataset '" + name + "' example " + std::to_string(i) + " has label " +
                                  std::to_string(labels[i]) + " >= m=" + std::to_string(m));
    }
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw std::invalid_argument("dataset '" + name + "' has a non-finite feature");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> ids) const {
  Dataset out{{}, {}, m, d, name, seed};
  out.features.reserve(ids.size() * d);
  for (auto i : ids) {
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset parse_dataset(std::istream& in, std::string name, std::optional<std::size_t> m) {
  Dataset data;
  data.name = std::move(name);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError(data.name + " line " + std::to_string(line_no) + ": " + why);
  };
  auto cells_of = [](std::string_view text) {
    std::vector<std::string_view> cells;
    while (true) {
      auto comma = text.find(',');
      auto cell = text.substr(0, comma);
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      cells.push_back(cell);
      if (comma == std::string_view::npos) break;
      text.remove_prefix(comma + 1);
    }
    return cells;
  };

  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    const auto cells = cells_of(line);
    if (!header_seen) {
      if (cells.size() < 2 || cells[0] != "label") throw fail("header must be label,f0,f1,...");
      for (std::size_t j = 1; j < cells.size(); ++j) {
        if (cells[j] != "f" + std::to_string(j - 1)) throw fail("header column " + std::to_string(j) + " must be f" +
                                                                std::to_string(j - 1));
      }
      data.d = cells.size() - 1;
      header_seen = true;
      continue;
    }
    if (cells.size() != data.d + 1) {
      throw fail("expected " + std::to_string(data.d + 1) + " columns, found " + std::to_string(cells.size()));
    }
    Label label = 0;
    auto [lp, lec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
    if (lec != std::errc() || lp != cells[0].data() + cells[0].size() || cells[0].empty()) {
      throw fail("bad label '" + std::string(cells[0]) + "'");
    }
    if (m && label >= *m) throw fail("label " + std::to_string(label) + " >= m=" + std::to_string(*m));
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
      if (ec != std::errc() || p != cells[j].data() + cells[j].size() || cells[j].empty()) {
        throw fail("bad feature '" + std::string(cells[j]) + "' in column " + std::to_string(j));
      }
      if (!std::isfinite(v)) throw fail("non-finite feature in column " + std::to_string(j));
      data.features.push_back(v);
    }
    data.labels.push_back(label);
  }
  if (!header_seen) throw FormatError(data.name + ": missing header");
  if (data.labels.empty()) throw FormatError(data.name + ": no examples");
  data.m = m ? *m : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  data.validate();
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<std::size_t> m) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset " + path.string());
  return parse_dataset(in, path.filename().string(), m);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "label";
  for (std::size_t j = 0; j < data.d; ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.row(i)) out << ',' << format_real(v);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  write_dataset(out, data);
}

SyntheticSplit gen_blobs(const BlobsSpec& spec, std::uint64_t seed, std::string name) {
  if (spec.classes < 2) throw std::invalid_argument("blobs need at least 2 classes");
  const RngKey root = RngKey(seed).child("blobs");
  auto make = [&](std::string_view split, std::size_t per_class) {
    Dataset data{{}, {}, spec.classes, 2, name + "-" + std::string(split), seed};
    const RngKey split_key = root.child(split);
    const std::size_t n = per_class * spec.classes;
    for (std::size_t i = 0; i < n; ++i) {
      const Label y = i % spec.classes;
      const double angle = 2.0 * std::numbers::pi * double(y) / double(spec.classes);
      CounterRng rng(split_key.child(i));
      std::normal_distribution<double> normal(0.0, spec.spread);
      data.features.push_back(spec.center_radius * std::cos(angle) + normal(rng));
      data.features.push_back(spec.center_radius * std::sin(angle) + normal(rng));
      data.labels.push_back(y);
    }
    return data;
  };
  return {make("train", spec.train_per_class), make("test", spec.test_per_class)};
}

SyntheticSplit gen_synthetic(std::string_view name, std::uint64_t seed) {
  constexpr std::string_view kBlobs = "blobs-";
  if (name.starts_with(kBlobs)) {
    std::size_t k = 0;
    auto digits = name.substr(kBlobs.size());
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && p == digits.data() + digits.size() && k >= 2) {
      BlobsSpec spec;
      spec.classes = k;
      return gen_blobs(spec, seed, std::string(name));
    }
  }
  throw std::invalid_argument("unknown synthetic dataset '" + std::string(name) + "' (expected blobs-K)");
}

}  // namespace cssmooth
