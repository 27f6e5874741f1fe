#include "cssmooth/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cssmooth {

StatusCounts count_statuses(std::span<const CertRecord> records) {
  StatusCounts c;
  for (const auto& r : records) {
    switch (r.outcome.status) {
      case CertStatus::Certified: ++c.certified; break;
      case CertStatus::Abstain: ++c.abstain; break;
      case CertStatus::CostViolation: ++c.cost_violation; break;
      case CertStatus::Misclassified: ++c.misclassified; break;
    }
  }
  return c;
}

namespace {

template <typename Pred>
double fraction(std::span<const CertRecord> records, Pred pred, const char* metric) {
  if (records.empty()) throw UndefinedMetric(std::string(metric) + " is undefined on an empty example set");
  const auto hits = std::count_if(records.begin(), records.end(), pred);
  return double(hits) / double(records.size());
}

bool certified(const CertRecord& r) { return r.outcome.status == CertStatus::Certified; }

}  // namespace

double rob_cost_sensitive(std::span<const CertRecord> sensitive, double epsilon) {
  return fraction(
      sensitive, [epsilon](const CertRecord& r) { return certified(r) && r.outcome.radius > epsilon; }, "Rob_cs");
}

double rob_cost_sensitive_r1(std::span<const CertRecord> sensitive, double epsilon) {
  return fraction(
      sensitive, [epsilon](const CertRecord& r) { return certified(r) && r.outcome.r1 > epsilon; }, "Rob_cs(std)");
}

double overall_acc(std::span<const CertRecord> standard) { return fraction(standard, certified, "Acc"); }

double robust_accuracy_r1(std::span<const CertRecord> standard, double epsilon) {
  return fraction(
      standard, [epsilon](const CertRecord& r) { return certified(r) && r.outcome.r1 > epsilon; }, "Rob(std)");
}

std::vector<CurvePoint> certified_accuracy_curve(std::span<const CertRecord> records, std::span<const double> epsilons) {
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) {
    throw std::invalid_argument("epsilon grid must be sorted ascending");
  }
  if (records.empty()) throw UndefinedMetric("certified accuracy curve of an empty example set");
  std::vector<double> radii;
  for (const auto& r : records) {
    if (certified(r)) radii.push_back(r.outcome.radius);
  }
  std::sort(radii.begin(), radii.end());
  std::vector<CurvePoint> curve;
  curve.reserve(epsilons.size());
  for (double eps : epsilons) {
    const auto above = radii.end() - std::upper_bound(radii.begin(), radii.end(), eps);
    curve.push_back({eps, double(above) / double(records.size())});
  }
  return curve;
}

EvalReport assemble_report(std::span<const CertRecord> standard, std::span<const CertRecord> cost_sensitive,
                           double epsilon, std::span<const double> curve_grid) {
  EvalReport rep;
  rep.epsilon = epsilon;
  rep.examples = standard.size();
  rep.sensitive_examples = cost_sensitive.size();
  rep.standard_counts = count_statuses(standard);
  rep.cost_sensitive_counts = count_statuses(cost_sensitive);
  if (!standard.empty()) rep.acc = overall_acc(standard);
  if (!cost_sensitive.empty()) {
    rep.rob_cs = rob_cost_sensitive(cost_sensitive, epsilon);
    rep.rob_cs_std = rob_cost_sensitive_r1(cost_sensitive, epsilon);
    rep.curve = certified_accuracy_curve(cost_sensitive, curve_grid);
  } else if (!standard.empty()) {
    rep.curve = certified_accuracy_curve(standard, curve_grid);
  }
  std::vector<std::size_t> sensitive_ids;
  for (const auto& r : cost_sensitive) sensitive_ids.push_back(r.example_id);
  std::sort(sensitive_ids.begin(), sensitive_ids.end());
  std::vector<CertRecord> normal;
  for (const auto& r : standard) {
    if (!std::binary_search(sensitive_ids.begin(), sensitive_ids.end(), r.example_id)) normal.push_back(r);
  }
  if (!normal.empty()) rep.rob_non_std = robust_accuracy_r1(normal, epsilon);
  return rep;
}

ExperimentResult run_experiment(const BaseClassifier& model, const Dataset& data, const CostMatrix& cost,
                                const ExperimentConfig& cfg) {
  cfg.smoothing.validate();
  data.validate();
  if (cost.m() != model.num_classes() || data.m > model.num_classes()) {
    throw std::invalid_argument("cost matrix, dataset and model disagree on the class count");
  }
  const RngKey root = RngKey(cfg.seed).child("certify");
  const auto partition = sensitive_subset(cost, data);
  ExperimentResult out;
  if (!cfg.cost_sensitive_only) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    out.standard = certify_batch(model, data, all, CertMode::Standard, nullptr, cfg.smoothing,
                                 root.child("standard"), cfg.threads);
  }
  out.cost_sensitive = certify_batch(model, data, partition.sensitive, CertMode::CostSensitive, &cost, cfg.smoothing,
                                     root.child("cost-sensitive"), cfg.threads);
  out.report = assemble_report(out.standard, out.cost_sensitive, cfg.epsilon, cfg.curve_grid);
  return out;
}

void write_csv_preamble(std::ostream& out, const std::string& timestamp, const std::string& config_json) {
  out << "# generated_at " << timestamp << '\n' << "# config " << config_json << '\n';
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "epsilon,certified_accuracy\n";
  for (const auto& p : curve) out << format_real(p.epsilon) << ',' << format_real(p.certified_accuracy) << '\n';
}

namespace {

nlohmann::ordered_json counts_json(const StatusCounts& c) {
  return {{"certified", c.certified},
          {"abstain", c.abstain},
          {"cost_violation", c.cost_violation},
          {"misclassified", c.misclassified}};
}

nlohmann::ordered_json metric_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("UndefinedMetric");
}

}  // namespace

std::string report_to_json(const EvalReport& report, const std::string& config_json) {
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& p : report.curve) curve.push_back({{"epsilon", p.epsilon}, {"certified_accuracy", p.certified_accuracy}});
  nlohmann::ordered_json j{{"config", nlohmann::ordered_json::parse(config_json)},
                           {"epsilon", report.epsilon},
                           {"examples", report.examples},
                           {"sensitive_examples", report.sensitive_examples},
                           {"acc", report.acc},
                           {"rob_cs", metric_json(report.rob_cs)},
                           {"rob_cs_std", metric_json(report.rob_cs_std)},
                           {"rob_non_std", metric_json(report.rob_non_std)},
                           {"standard_counts", counts_json(report.standard_counts)},
                           {"cost_sensitive_counts", counts_json(report.cost_sensitive_counts)},
                           {"curve", curve}};
  return j.dump(2) + "\n";
}

std::string format_report_table(const EvalReport& r) {
  auto metric = [](const std::optional<double>& v) {
    if (!v) return std::string("UndefinedMetric");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  std::ostringstream out;
  char line[128];
  out << "examples " << r.examples << " (cost-sensitive " << r.sensitive_examples << "), epsilon "
      << format_real(r.epsilon) << '\n';
  std::snprintf(line, sizeof line, "  %-14s %s\n", "Acc", metric(r.acc).c_str());
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %s\n", "Rob_c-s", metric(r.rob_cs).c_str());
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %s\n", "Rob_c-s(std)", metric(r.rob_cs_std).c_str());
  out << line;
  std::snprintf(line, sizeof line, "  %-14s %s\n", "Rob_non(std)", metric(r.rob_non_std).c_str());
  out << line;
  const auto& s = r.standard_counts;
  const auto& c = r.cost_sensitive_counts;
  out << "  standard:       certified " << s.certified << ", abstain " << s.abstain << ", misclassified "
      << s.misclassified << '\n';
  out << "  cost-sensitive: certified " << c.certified << ", abstain " << c.abstain << ", cost_violation "
      << c.cost_violation << '\n';
  return out.str();
}

ExperimentFiles write_experiment(const std::filesystem::path& dir, const ExperimentResult& result,
                                 const SmoothingConfig& smoothing, const std::string& config_json,
                                 const std::string& timestamp) {
  std::filesystem::create_directories(dir);
  ExperimentFiles files{dir / "standard.csv",   dir / "standard.jsonl", dir / "cost_sensitive.csv",
                        dir / "cost_sensitive.jsonl", dir / "report.json", dir / "curve.csv"};
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };
  const std::string config_record =
      nlohmann::ordered_json{{"config", nlohmann::ordered_json::parse(config_json)}}.dump() + "\n";
  {
    auto out = open(files.standard_csv);
    write_csv_preamble(out, timestamp, config_json);
    write_cert_csv(out, result.standard, smoothing);
  }
  {
    auto out = open(files.standard_jsonl);
    out << config_record;
    write_cert_jsonl(out, result.standard, smoothing);
  }
  {
    auto out = open(files.cost_sensitive_csv);
    write_csv_preamble(out, timestamp, config_json);
    write_cert_csv(out, result.cost_sensitive, smoothing);
  }
  {
    auto out = open(files.cost_sensitive_jsonl);
    out << config_record;
    write_cert_jsonl(out, result.cost_sensitive, smoothing);
  }
  {
    auto out = open(files.report_json);
    out << report_to_json(result.report, config_json);
  }
  {
    auto out = open(files.curve_csv);
    write_csv_preamble(out, timestamp, config_json);
    write_curve_csv(out, result.report.curve);
  }
  return files;
}

}  // namespace cssmooth
