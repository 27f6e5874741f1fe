#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cssmooth/certifier.hpp"
#include "cssmooth/classifiers.hpp"
#include "cssmooth/cost_model.hpp"
#include "cssmooth/dataset.hpp"

namespace cssmooth {

struct CurvePoint {
  double epsilon = 0.0;
  double certified_accuracy = 0.0;
};

struct StatusCounts {
  std::size_t certified = 0;
  std::size_t abstain = 0;
  std::size_t cost_violation = 0;
  std::size_t misclassified = 0;
};

StatusCounts count_statuses(std::span<const CertRecord> records);

struct EvalReport {
  double epsilon = 0.5;
  std::size_t examples = 0;
  std::size_t sensitive_examples = 0;
  double acc = 0.0;
  /// Empty when there are no cost-sensitive examples.
  std::optional<double> rob_cs;
  std::optional<double> rob_cs_std;
  /// Empty when every example is cost-sensitive.
  std::optional<double> rob_non_std;
  /// Cost-sensitive curve over the sensitive subset, or the standard
  /// certified-accuracy curve when the subset is empty.
  std::vector<CurvePoint> curve;
  StatusCounts standard_counts;
  StatusCounts cost_sensitive_counts;
};

/// Fraction of sensitive-example outcomes that are Certified with radius > epsilon.
/// Throws UndefinedMetric when `sensitive` is empty.
double rob_cost_sensitive(std::span<const CertRecord> sensitive, double epsilon);

/// Same as rob_cost_sensitive but using R1 alone (Certified, prediction
/// outside Omega, and r1 > epsilon).
double rob_cost_sensitive_r1(std::span<const CertRecord> sensitive, double epsilon);

/// Fraction of standard outcomes that are Certified (correct with R1 > 0).
/// Throws UndefinedMetric on empty input.
double overall_acc(std::span<const CertRecord> standard);

/// Fraction of standard outcomes that are Certified with r1 > epsilon.
double robust_accuracy_r1(std::span<const CertRecord> standard, double epsilon);

/// For each epsilon, the fraction of outcomes Certified with radius > epsilon.
/// `epsilons` must be ascending; throws std::invalid_argument otherwise and
/// UndefinedMetric when `records` is empty.
std::vector<CurvePoint> certified_accuracy_curve(std::span<const CertRecord> records, std::span<const double> epsilons);

struct ExperimentConfig {
  SmoothingConfig smoothing;
  double epsilon = 0.5;
  std::vector<double> curve_grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Skip the standard pass (Acc and rob_non_std are then left at zero/empty).
  bool cost_sensitive_only = false;
};

struct ExperimentResult {
  EvalReport report;
  std::vector<CertRecord> standard;        // every example
  std::vector<CertRecord> cost_sensitive;  // sensitive examples only
};

/// Certifies the whole dataset in standard mode and the sensitive subset in
/// cost-sensitive mode. Keys: RngKey(seed).child("certify").child("standard" | "cost-sensitive").
ExperimentResult run_experiment(const BaseClassifier& model, const Dataset& data, const CostMatrix& cost,
                                const ExperimentConfig& cfg);

/// Recomputes the report from per-example records.
EvalReport assemble_report(std::span<const CertRecord> standard, std::span<const CertRecord> cost_sensitive,
                           double epsilon, std::span<const double> curve_grid);

/// Files written next to each other by write_experiment.
struct ExperimentFiles {
  std::filesystem::path standard_csv, standard_jsonl, cost_sensitive_csv, cost_sensitive_jsonl, report_json, curve_csv;
};

/// `timestamp` goes alone on line 1 of every CSV; `config_json` (the fully
/// resolved configuration including the master seed) on line 2. JSON-lines
/// streams open with a {"config": ...} record before the per-example records.
ExperimentFiles write_experiment(const std::filesystem::path& dir, const ExperimentResult& result,
                                 const SmoothingConfig& smoothing, const std::string& config_json,
                                 const std::string& timestamp);

void write_csv_preamble(std::ostream& out, const std::string& timestamp, const std::string& config_json);
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);
std::string report_to_json(const EvalReport& report, const std::string& config_json);
std::string format_report_table(const EvalReport& report);

}  // namespace cssmooth
