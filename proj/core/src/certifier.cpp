#include "cssmooth/certifier.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cssmooth/dataset.hpp"
#include "cssmooth/gauss.hpp"
#include "cssmooth/radius.hpp"

namespace cssmooth {

void SmoothingConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  if (n0 == 0) throw std::invalid_argument("n0 must be at least 1");
  if (n == 0) throw std::invalid_argument("n must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

Label SampleCounts::top() const {
  return static_cast<Label>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::string_view to_string(CertStatus status) {
  switch (status) {
    case CertStatus::Certified: return "certified";
    case CertStatus::Abstain: return "abstain";
    case CertStatus::CostViolation: return "cost_violation";
    case CertStatus::Misclassified: return "misclassified";
  }
  return "?";
}

CertStatus cert_status_from_string(std::string_view text) {
  for (auto s : {CertStatus::Certified, CertStatus::Abstain, CertStatus::CostViolation, CertStatus::Misclassified}) {
    if (to_string(s) == text) return s;
  }
  throw FormatError("unknown certification status '" + std::string(text) + "'");
}

bool CertificationOutcome::operator==(const CertificationOutcome& o) const {
  return prediction == o.prediction && r1 == o.r1 && r2 == o.r2 && radius == o.radius && status == o.status &&
         counts0.counts == o.counts0.counts && counts.counts == o.counts.counts && counts0.n == o.counts0.n &&
         counts.n == o.counts.n;
}

SampleCounts sample_under_noise(const BaseClassifier& f, std::span<const double> x, std::uint64_t n, double sigma,
                                RngKey key) {
  if (n == 0) throw std::invalid_argument("sample_under_noise needs n >= 1");
  if (x.size() != f.input_dim()) throw std::invalid_argument("input dimension mismatch");
  SampleCounts out{std::vector<std::uint64_t>(f.num_classes(), 0), n};
  std::vector<double> noisy(x.size());
  for (std::uint64_t chunk = 0; chunk * kSampleChunk < n; ++chunk) {
    CounterRng rng(key.child(chunk));
    std::normal_distribution<double> normal(0.0, sigma);
    const std::uint64_t end = std::min(n, (chunk + 1) * kSampleChunk);
    for (std::uint64_t i = chunk * kSampleChunk; i < end; ++i) {
      for (std::size_t j = 0; j < x.size(); ++j) noisy[j] = x[j] + normal(rng);
      ++out.counts[f.predict(noisy)];
    }
  }
  return out;
}

namespace {

double clamped_quantile(double p) { return phi_inv(std::clamp(p, kExactClampEps, 1.0 - kExactClampEps)); }

void check_counts(const SampleCounts& c0, const SampleCounts& c) {
  if (c0.counts.size() != c.counts.size() || c.counts.empty()) {
    throw std::invalid_argument("selection and estimation counts disagree on the class count");
  }
  if (c.n == 0 || c0.n == 0) throw std::invalid_argument("empty sample counts");
}

}  // namespace

CertificationOutcome certify_cost_sensitive_from_counts(SampleCounts counts0, SampleCounts counts,
                                                        const SensitiveTargets& omega, const SmoothingConfig& cfg) {
  cfg.validate();
  check_counts(counts0, counts);
  if (omega.empty()) throw std::domain_error("cost-sensitive certification needs a nonempty target set");
  CertificationOutcome out;
  out.prediction = counts0.top();
  const auto k_top = counts.counts.at(out.prediction);

  const double pa_low = binom_lower(k_top, counts.n, 1.0 - cfg.alpha).value;
  out.r1 = cfg.sigma * clamped_quantile(pa_low);

  const double pa_low_half = binom_lower(k_top, counts.n, 1.0 - cfg.alpha / 2.0).value;
  const double per_target = 1.0 - cfg.alpha / (2.0 * double(omega.size()));
  double pb_up = 0.0;
  for (Label k : omega.targets) pb_up = std::max(pb_up, binom_upper(counts.counts.at(k), counts.n, per_target).value);
  out.r2 = 0.5 * cfg.sigma * (clamped_quantile(pa_low_half) - clamped_quantile(pb_up));

  out.radius = std::max(out.r1, out.r2);
  if (omega.contains(out.prediction)) {
    out.status = CertStatus::CostViolation;
  } else if (out.radius > 0.0) {
    out.status = CertStatus::Certified;
  } else {
    out.status = CertStatus::Abstain;
  }
  out.counts0 = std::move(counts0);
  out.counts = std::move(counts);
  return out;
}

CertificationOutcome certify_standard_from_counts(SampleCounts counts0, SampleCounts counts, Label y,
                                                  const SmoothingConfig& cfg) {
  cfg.validate();
  check_counts(counts0, counts);
  if (y >= counts.counts.size()) throw std::out_of_range("label out of range");
  CertificationOutcome out;
  out.prediction = counts0.top();
  const double pa_low = binom_lower(counts.counts[out.prediction], counts.n, 1.0 - cfg.alpha).value;
  out.r1 = cfg.sigma * clamped_quantile(pa_low);
  // Single bound in standard mode.
  out.r2 = out.r1;
  out.radius = out.r1;
  if (out.r1 <= 0.0) {
    out.status = CertStatus::Abstain;
  } else {
    out.status = out.prediction == y ? CertStatus::Certified : CertStatus::Misclassified;
  }
  out.counts0 = std::move(counts0);
  out.counts = std::move(counts);
  return out;
}

CertificationOutcome certify_cost_sensitive(const BaseClassifier& f, std::span<const double> x,
                                            const SensitiveTargets& omega, const SmoothingConfig& cfg, RngKey key) {
  cfg.validate();
  if (omega.empty()) throw std::domain_error("cost-sensitive certification needs a nonempty target set");
  auto c0 = sample_under_noise(f, x, cfg.n0, cfg.sigma, key.child("select"));
  auto c = sample_under_noise(f, x, cfg.n, cfg.sigma, key.child("estimate"));
  return certify_cost_sensitive_from_counts(std::move(c0), std::move(c), omega, cfg);
}

CertificationOutcome certify_standard(const BaseClassifier& f, std::span<const double> x, Label y,
                                      const SmoothingConfig& cfg, RngKey key) {
  cfg.validate();
  auto c0 = sample_under_noise(f, x, cfg.n0, cfg.sigma, key.child("select"));
  auto c = sample_under_noise(f, x, cfg.n, cfg.sigma, key.child("estimate"));
  return certify_standard_from_counts(std::move(c0), std::move(c), y, cfg);
}

std::vector<CertRecord> certify_batch(const BaseClassifier& f, const Dataset& data, std::span<const std::size_t> ids,
                                      CertMode mode, const CostMatrix* cost, const SmoothingConfig& cfg, RngKey key,
                                      std::size_t threads) {
  cfg.validate();
  if (data.d != f.input_dim()) throw std::invalid_argument("dataset dimension does not match the classifier");
  if (mode == CertMode::CostSensitive && cost == nullptr) {
    throw std::invalid_argument("cost-sensitive certification needs a cost matrix");
  }
  std::vector<CertRecord> out(ids.size());
  std::vector<SensitiveTargets> omegas;
  if (mode == CertMode::CostSensitive) {
    for (Label j = 0; j < cost->m(); ++j) omegas.push_back(omega(*cost, j));
  }
  auto work = [&](std::size_t slot) {
    const std::size_t id = ids[slot];
    const Label y = data.labels.at(id);
    const RngKey example_key = key.child(id);
    CertRecord rec{id, y, {}};
    if (mode == CertMode::CostSensitive) {
      rec.outcome = certify_cost_sensitive(f, data.row(id), omegas.at(y), cfg, example_key);
    } else {
      rec.outcome = certify_standard(f, data.row(id), y, cfg, example_key);
    }
    out[slot] = std::move(rec);
  };

  threads = std::max<std::size_t>(1, std::min(threads, ids.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < ids.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < ids.size() && !failed; i = next++) {
          try {
            work(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_cert_csv(std::ostream& out, std::span<const CertRecord> records, const SmoothingConfig& cfg) {
  out << "example_id,label,prediction,status,r1,r2,radius,n,alpha,sigma\n";
  for (const auto& r : records) {
    out << r.example_id << ',' << r.label << ',' << r.outcome.prediction << ',' << to_string(r.outcome.status) << ','
        << format_real(r.outcome.r1) << ',' << format_real(r.outcome.r2) << ',' << format_real(r.outcome.radius)
        << ',' << cfg.n << ',' << format_real(cfg.alpha) << ',' << format_real(cfg.sigma) << '\n';
  }
}

void write_cert_jsonl(std::ostream& out, std::span<const CertRecord> records, const SmoothingConfig& cfg) {
  for (const auto& r : records) {
    nlohmann::ordered_json j{{"example_id", r.example_id},
                             {"label", r.label},
                             {"prediction", r.outcome.prediction},
                             {"status", to_string(r.outcome.status)},
                             {"r1", r.outcome.r1},
                             {"r2", r.outcome.r2},
                             {"radius", r.outcome.radius},
                             {"n", cfg.n},
                             {"alpha", cfg.alpha},
                             {"sigma", cfg.sigma}};
    out << j.dump() << '\n';
  }
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  while (true) {
    auto comma = line.find(',');
    cells.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return cells;
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw FormatError("certification CSV line " + std::to_string(line_no) + ": bad number '" + std::string(cell) +
                      "'");
  }
  return value;
}

}  // namespace

std::vector<CertRecord> read_cert_csv(std::istream& in) {
  std::vector<CertRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "example_id,label,prediction,status,r1,r2,radius,n,alpha,sigma") {
        throw FormatError("certification CSV has an unexpected header");
      }
      header_seen = true;
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != 10) throw FormatError("certification CSV line " + std::to_string(line_no) + ": need 10 columns");
    CertRecord r;
    r.example_id = parse_number<std::size_t>(cells[0], line_no);
    r.label = parse_number<Label>(cells[1], line_no);
    r.outcome.prediction = parse_number<Label>(cells[2], line_no);
    r.outcome.status = cert_status_from_string(cells[3]);
    r.outcome.r1 = parse_number<double>(cells[4], line_no);
    r.outcome.r2 = parse_number<double>(cells[5], line_no);
    r.outcome.radius = parse_number<double>(cells[6], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cssmooth
