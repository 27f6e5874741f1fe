#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cssmooth/classifiers.hpp"
#include "cssmooth/cost_model.hpp"
#include "cssmooth/rng.hpp"

namespace cssmooth {

struct Dataset;

struct SmoothingConfig {
  double sigma = 0.5;
  std::uint64_t n0 = 100;
  std::uint64_t n = 100000;
  double alpha = 0.001;

  /// Throws std::invalid_argument on sigma <= 0, n0 == 0, n == 0 or alpha outside (0, 1).
  void validate() const;
};

struct SampleCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t n = 0;

  /// Top class, lowest index on ties.
  Label top() const;
};

enum class CertStatus { Certified, Abstain, CostViolation, Misclassified };

std::string_view to_string(CertStatus status);
CertStatus cert_status_from_string(std::string_view text);

struct CertificationOutcome {
  Label prediction = 0;
  double r1 = 0.0;
  double r2 = 0.0;
  double radius = 0.0;  // max(r1, r2)
  CertStatus status = CertStatus::Abstain;
  SampleCounts counts0;
  SampleCounts counts;

  bool operator==(const CertificationOutcome& o) const;
};

/// Noise draws are grouped into fixed-size chunks; chunk c uses the stream
/// key.child(c). Counts therefore do not depend on how chunks are scheduled.
inline constexpr std::uint64_t kSampleChunk = 4096;

SampleCounts sample_under_noise(const BaseClassifier& f, std::span<const double> x, std::uint64_t n, double sigma,
                                RngKey key);

/// Cost-sensitive certification with the R1 / R2 bounds. The selection and
/// estimation phases draw from key.child("select") and key.child("estimate").
CertificationOutcome certify_cost_sensitive(const BaseClassifier& f, std::span<const double> x,
                                            const SensitiveTargets& omega, const SmoothingConfig& cfg, RngKey key);

/// Cost-sensitive decision from already collected counts.
CertificationOutcome certify_cost_sensitive_from_counts(SampleCounts counts0, SampleCounts counts,
                                                        const SensitiveTargets& omega, const SmoothingConfig& cfg);

/// Standard certification: Certified iff the prediction equals y and R1 > 0.
CertificationOutcome certify_standard(const BaseClassifier& f, std::span<const double> x, Label y,
                                      const SmoothingConfig& cfg, RngKey key);

CertificationOutcome certify_standard_from_counts(SampleCounts counts0, SampleCounts counts, Label y,
                                                  const SmoothingConfig& cfg);

enum class CertMode { Standard, CostSensitive };

struct CertRecord {
  std::size_t example_id = 0;
  Label label = 0;
  CertificationOutcome outcome;
};

/// Certifies the listed examples in parallel. Example i draws from
/// key.child(example_id); results equal sequential execution for any thread count.
/// For CostSensitive mode every listed example must have a nonempty Omega.
std::vector<CertRecord> certify_batch(const BaseClassifier& f, const Dataset& data, std::span<const std::size_t> ids,
                                      CertMode mode, const CostMatrix* cost, const SmoothingConfig& cfg, RngKey key,
                                      std::size_t threads);

/// CSV columns: example_id,label,prediction,status,r1,r2,radius,n,alpha,sigma
void write_cert_csv(std::ostream& out, std::span<const CertRecord> records, const SmoothingConfig& cfg);
void write_cert_jsonl(std::ostream& out, std::span<const CertRecord> records, const SmoothingConfig& cfg);

/// Parses the CSV body written by write_cert_csv, skipping '#' comment lines.
/// Counts are not stored in the CSV and come back empty.
std::vector<CertRecord> read_cert_csv(std::istream& in);

/// Fixed-precision decimal used in every report so reruns are byte-identical.
std::string format_real(double v);

}  // namespace cssmooth
