#include "cssmooth_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cssmooth/certifier.hpp"
#include "cssmooth/classifiers.hpp"
#include "cssmooth/cost_model.hpp"
#include "cssmooth/dataset.hpp"
#include "cssmooth/eval.hpp"
#include "cssmooth/trainer.hpp"

namespace cssmooth::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

/// Bad or inconsistent arguments detected by the CLI itself.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::size_t resolve_threads(const std::optional<std::size_t>& flag) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be at least 1");
    return *flag;
  }
  if (const char* env = std::getenv("CS_SMOOTH_THREADS"); env && *env) {
    std::size_t v = 0;
    const std::string_view text(env);
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || v == 0) {
      throw ConfigError("CS_SMOOTH_THREADS must be a positive integer, got '" + std::string(text) + "'");
    }
    return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ojson smoothing_json(const SmoothingConfig& s) {
  return {{"sigma", s.sigma}, {"n0", s.n0}, {"n", s.n}, {"alpha", s.alpha}};
}

/// Comma-separated reals; an empty list or empty entry is a config error.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string_view rest(text);
  while (!rest.empty() || grid.empty()) {
    const auto comma = rest.find(',');
    const auto token = rest.substr(0, comma);
    double v = 0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || p != token.data() + token.size() || !std::isfinite(v)) {
      throw ConfigError("--epsilons must be a comma-separated list of numbers, got '" + text + "'");
    }
    grid.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
    if (rest.empty()) throw ConfigError("--epsilons has a trailing comma: '" + text + "'");
  }
  return grid;
}

void add_grid_option(CLI::App& cmd, std::vector<double>& grid) {
  cmd.add_option_function<std::string>(
      "--epsilons", [&grid](const std::string& text) { grid = parse_grid(text); }, "Curve grid, comma separated");
}

void add_smoothing_options(CLI::App& cmd, SmoothingConfig& s) {
  cmd.add_option("--sigma", s.sigma, "Noise level")->capture_default_str();
  cmd.add_option("--n0", s.n0, "Selection-phase samples")->capture_default_str();
  cmd.add_option("--n", s.n, "Estimation-phase samples")->capture_default_str();
  cmd.add_option("--alpha", s.alpha, "Failure probability")->capture_default_str();
}

// certify --------------------------------------------------------------------

struct CertifyArgs {
  std::string model, dataset, cost, out;
  std::string mode = "both";
  SmoothingConfig smoothing;
  double epsilon = 0.5;
  std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::uint64_t seed = 0;
  std::optional<std::size_t> threads;
};

int cmd_certify(const CertifyArgs& a, std::ostream& out) {
  a.smoothing.validate();
  if (a.mode != "both" && a.mode != "standard" && a.mode != "cost-sensitive") {
    throw ConfigError("--mode must be both, standard or cost-sensitive");
  }
  if (a.mode != "standard" && a.cost.empty()) throw ConfigError("--cost is required unless --mode standard");
  if (a.grid.empty()) throw ConfigError("--epsilons needs at least one value");
  const auto model = load_model(a.model);
  const auto data = load_dataset(a.dataset, model->num_classes());
  const auto cost = a.cost.empty() ? CostMatrix::zeros(model->num_classes())
                                   : load_cost_matrix(a.cost, model->num_classes());

  ExperimentConfig cfg;
  cfg.smoothing = a.smoothing;
  cfg.epsilon = a.epsilon;
  cfg.curve_grid = a.grid;
  cfg.seed = a.seed;
  cfg.threads = resolve_threads(a.threads);
  cfg.cost_sensitive_only = a.mode == "cost-sensitive";

  const ojson config{{"command", "certify"},   {"model", a.model},        {"dataset", a.dataset},
                     {"cost", a.cost},         {"mode", a.mode},          {"smoothing", smoothing_json(a.smoothing)},
                     {"epsilon", a.epsilon},   {"epsilons", a.grid},      {"seed", a.seed}};
  const auto result = run_experiment(*model, data, cost, cfg);
  const auto files = write_experiment(a.out, result, a.smoothing, config.dump(), utc_timestamp());
  out << format_report_table(result.report) << "wrote " << files.report_json.string() << '\n';
  return kExitOk;
}

// curve / compare ------------------------------------------------------------

struct CurveArgs {
  std::vector<std::string> models;
  std::string dataset, cost, out;
  SmoothingConfig smoothing;
  std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::uint64_t seed = 0;
  std::optional<std::size_t> threads;
};

int cmd_curve(const CurveArgs& a, std::ostream& out) {
  a.smoothing.validate();
  if (a.grid.empty()) throw ConfigError("--epsilons needs at least one value");
  if (!std::is_sorted(a.grid.begin(), a.grid.end())) throw ConfigError("--epsilons must be ascending");
  const std::string timestamp = utc_timestamp();
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    const auto model = load_model(a.models[i]);
    const auto data = load_dataset(a.dataset, model->num_classes());
    const auto cost = load_cost_matrix(a.cost, model->num_classes());
    ExperimentConfig cfg;
    cfg.smoothing = a.smoothing;
    cfg.curve_grid = a.grid;
    cfg.seed = a.seed;
    cfg.threads = resolve_threads(a.threads);
    cfg.cost_sensitive_only = !sensitive_subset(cost, data).sensitive.empty();
    const auto result = run_experiment(*model, data, cost, cfg);

    const ojson config{{"command", "curve"}, {"model", a.models[i]},    {"dataset", a.dataset},
                       {"cost", a.cost},     {"smoothing", smoothing_json(a.smoothing)},
                       {"epsilons", a.grid}, {"seed", a.seed}};
    const fs::path path = fs::path(a.out) / ("curve_" + std::to_string(i) + "_" + fs::path(a.models[i]).stem().string() +
                                             ".csv");
    auto file = open_output(path);
    write_csv_preamble(file, timestamp, config.dump());
    write_curve_csv(file, result.report.curve);
    out << a.models[i] << " -> " << path.string() << '\n';
  }
  return kExitOk;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string dataset, cost, out, metrics, config, init, objective;
  TrainConfig flags;
  std::string max_mode;
  /// Options that override the config file when given, paired with how to apply them.
  std::vector<std::pair<CLI::Option*, std::function<void(TrainConfig&)>>> overrides;
};

template <typename T>
void bind(CLI::App& cmd, TrainArgs& a, const std::string& name, T TrainConfig::*field, const std::string& help) {
  auto* opt = cmd.add_option(name, a.flags.*field, help);
  a.overrides.emplace_back(opt, [&a, field](TrainConfig& c) { c.*field = a.flags.*field; });
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : train_config_from_json(read_text(a.config));
  for (const auto& [opt, apply] : a.overrides) {
    if (opt->count() > 0) apply(cfg);
  }
  if (!a.objective.empty()) cfg.objective = objective_from_string(a.objective);
  if (!a.max_mode.empty()) {
    if (a.max_mode != "smooth" && a.max_mode != "hard") throw ConfigError("--max-mode must be smooth or hard");
    cfg.max_mode = a.max_mode == "smooth" ? MaxMode::Smooth : MaxMode::Hard;
  }
  cfg.validate();
  if (cfg.objective != Objective::Cohen && a.cost.empty()) {
    throw ConfigError("--cost is required for objective " + std::string(to_string(cfg.objective)));
  }

  const auto data = load_dataset(a.dataset);
  std::optional<MlpModel> init;
  if (!a.init.empty()) {
    init = load_mlp(a.init);
    if (init->input_dim() != data.d) throw ConfigError("--init model input dimension does not match the dataset");
  } else {
    init = MlpModel::random(data.d, cfg.hidden, data.m, RngKey(cfg.seed).child("init"), cfg.beta);
  }
  const std::size_t m = init->num_classes();
  if (data.m > m) throw ConfigError("dataset has more classes than the model");
  Dataset train_data = data;
  train_data.m = m;
  const auto cost = a.cost.empty() ? CostMatrix::zeros(m) : load_cost_matrix(a.cost, m);

  const ojson config{{"command", "train"}, {"dataset", a.dataset}, {"cost", a.cost}, {"init", a.init},
                     {"train", ojson::parse(train_config_to_json(cfg))}};
  const auto result = train(std::move(*init), train_data, cost, cfg);

  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_model(result.model, a.out, config.dump());
  const fs::path metrics = a.metrics.empty() ? fs::path(a.out + ".metrics.csv") : fs::path(a.metrics);
  auto file = open_output(metrics);
  write_csv_preamble(file, utc_timestamp(), config.dump());
  write_metrics_csv(file, result.log);
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    out << "epoch " << last.epoch << ": loss " << format_real(last.loss.total) << ", train_acc "
        << format_real(last.train_acc) << '\n';
  }
  out << "wrote " << a.out << " and " << metrics.string() << '\n';
  return kExitOk;
}

// gen-data / make-interval ---------------------------------------------------

struct GenDataArgs {
  std::string name = "blobs-5";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const auto split = gen_synthetic(a.name, a.seed);
  const ojson config{{"command", "gen-data"}, {"name", a.name}, {"seed", a.seed}};
  const std::string timestamp = utc_timestamp();
  for (const auto& [file_name, data] : {std::pair{"train.csv", &split.train}, std::pair{"test.csv", &split.test}}) {
    const fs::path path = fs::path(a.out) / file_name;
    auto file = open_output(path);
    write_csv_preamble(file, timestamp, config.dump());
    write_dataset(file, *data);
    out << "wrote " << path.string() << " (" << data->size() << " examples)\n";
  }
  return kExitOk;
}

struct IntervalArgs {
  std::vector<double> thresholds;
  std::size_t input_dim = 1;
  std::string out;
};

int cmd_make_interval(const IntervalArgs& a, std::ostream& out) {
  const IntervalClassifier model(a.thresholds, a.input_dim);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_model(model, a.out, ojson{{"command", "make-interval"}}.dump());
  out << "wrote " << a.out << " (" << model.num_classes() << " classes)\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cost-sensitive randomized smoothing: certify, train and evaluate", "cssmooth"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cssmooth 0.1.0");

  CertifyArgs certify;
  auto* c = app.add_subcommand("certify", "Certify a dataset in standard and cost-sensitive mode");
  c->add_option("--model", certify.model, "Model file")->required();
  c->add_option("--dataset", certify.dataset, "Dataset CSV")->required();
  c->add_option("--cost", certify.cost, "Cost matrix: JSON file or shorthand such as seedwise:3 or pairwise:3->2,5");
  add_smoothing_options(*c, certify.smoothing);
  c->add_option("--epsilon", certify.epsilon, "Radius threshold for robustness metrics")->capture_default_str();
  add_grid_option(*c, certify.grid);
  c->add_option("--seed", certify.seed, "Master seed")->capture_default_str();
  c->add_option("--out", certify.out, "Output directory")->required();
  c->add_option("--threads", certify.threads, "Worker threads (default: CS_SMOOTH_THREADS or all cores)");
  c->add_option("--mode", certify.mode, "both, standard or cost-sensitive")->capture_default_str();

  CurveArgs curve;
  auto* cv = app.add_subcommand("curve", "Certified accuracy curves for several models on one cost matrix");
  cv->alias("compare");
  cv->add_option("--model", curve.models, "Model file (repeatable)")->required();
  cv->add_option("--dataset", curve.dataset, "Dataset CSV")->required();
  cv->add_option("--cost", curve.cost, "Cost matrix file or shorthand")->required();
  add_smoothing_options(*cv, curve.smoothing);
  add_grid_option(*cv, curve.grid);
  cv->add_option("--seed", curve.seed, "Master seed")->capture_default_str();
  cv->add_option("--out", curve.out, "Output directory")->required();
  cv->add_option("--threads", curve.threads, "Worker threads");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a smoothed MLP with cohen, cohen-r or cs-macer");
  t->add_option("--dataset", tr.dataset, "Training CSV")->required();
  t->add_option("--cost", tr.cost, "Cost matrix file or shorthand");
  t->add_option("--objective", tr.objective, "cohen, cohen-r or cs-macer");
  t->add_option("--config", tr.config, "JSON training config; flags override it");
  t->add_option("--init", tr.init, "Resume from a saved MLP");
  t->add_option("--out", tr.out, "Model output path")->required();
  t->add_option("--metrics", tr.metrics, "Metrics CSV (default: <out>.metrics.csv)");
  t->add_option("--max-mode", tr.max_mode, "smooth or hard maxima in the soft radius");
  bind(*t, tr, "--sigma", &TrainConfig::sigma, "Noise level");
  bind(*t, tr, "--lambda", &TrainConfig::lambda, "Weight of the radius terms");
  bind(*t, tr, "--gamma1", &TrainConfig::gamma1, "Margin for normal examples");
  bind(*t, tr, "--gamma2", &TrainConfig::gamma2, "Margin for cost-sensitive examples");
  bind(*t, tr, "--alpha-w", &TrainConfig::alpha_w, "Cohen-R weight of sensitive examples");
  bind(*t, tr, "--k-samples", &TrainConfig::k_samples, "Noise draws per example");
  bind(*t, tr, "--beta", &TrainConfig::beta, "Softmax inverse temperature");
  bind(*t, tr, "--lr", &TrainConfig::lr, "Learning rate");
  bind(*t, tr, "--epochs", &TrainConfig::epochs, "Epochs to run");
  bind(*t, tr, "--start-epoch", &TrainConfig::start_epoch, "First epoch index (for resuming)");
  bind(*t, tr, "--batch-size", &TrainConfig::batch_size, "Minibatch size");
  bind(*t, tr, "--hidden", &TrainConfig::hidden, "Hidden width");
  bind(*t, tr, "--seed", &TrainConfig::seed, "Master seed");
  bind(*t, tr, "--soft-clamp", &TrainConfig::soft_clamp, "Probability clamp inside soft radii");

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a seeded synthetic dataset (train.csv, test.csv)");
  g->add_option("--name", gen.name, "blobs-K")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  IntervalArgs iv;
  auto* mi = app.add_subcommand("make-interval", "Write an interval classifier with known smoothed probabilities");
  mi->add_option("--thresholds", iv.thresholds, "Increasing thresholds, comma separated")->required()->delimiter(',');
  mi->add_option("--input-dim", iv.input_dim, "Input dimension")->capture_default_str();
  mi->add_option("--out", iv.out, "Model output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (c->parsed()) return cmd_certify(certify, out);
    if (cv->parsed()) return cmd_curve(curve, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (g->parsed()) return cmd_gen_data(gen, out);
    if (mi->parsed()) return cmd_make_interval(iv, out);
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

int run(int argc, char** argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace cssmooth::cli
