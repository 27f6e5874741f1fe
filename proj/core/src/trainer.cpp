#include "cssmooth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "cssmooth/certifier.hpp"
#include "cssmooth/gauss.hpp"

namespace cssmooth {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::Cohen: return "cohen";
    case Objective::CohenR: return "cohen-r";
    case Objective::CostSensitiveMacer: return "cs-macer";
  }
  return "?";
}

Objective objective_from_string(std::string_view text) {
  for (auto o : {Objective::Cohen, Objective::CohenR, Objective::CostSensitiveMacer}) {
    if (to_string(o) == text) return o;
  }
  throw std::invalid_argument("unknown objective '" + std::string(text) + "' (expected cohen, cohen-r, cs-macer)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(alpha_w >= 1.0 && std::isfinite(alpha_w), "alpha_w must be >= 1");
  require(k_samples >= 1, "k_samples must be >= 1");
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(lr >= 0.0 && std::isfinite(lr), "lr must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(soft_clamp > 0.0 && soft_clamp < 0.5, "soft_clamp must lie in (0, 0.5)");
  if (objective == Objective::CostSensitiveMacer) {
    require(gamma1 > 0.0, "gamma1 must be positive");
    require(gamma2 > gamma1, "gamma2 must exceed gamma1");
  }
}

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j{{"objective", to_string(cfg.objective)},
                           {"sigma", cfg.sigma},
                           {"lambda", cfg.lambda},
                           {"gamma1", cfg.gamma1},
                           {"gamma2", cfg.gamma2},
                           {"alpha_w", cfg.alpha_w},
                           {"k_samples", cfg.k_samples},
                           {"beta", cfg.beta},
                           {"lr", cfg.lr},
                           {"epochs", cfg.epochs},
                           {"start_epoch", cfg.start_epoch},
                           {"batch_size", cfg.batch_size},
                           {"seed", cfg.seed},
                           {"hidden", cfg.hidden},
                           {"soft_clamp", cfg.soft_clamp},
                           {"max_mode", cfg.max_mode == MaxMode::Smooth ? "smooth" : "hard"}};
  return j.dump();
}

TrainConfig train_config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("training config must be a JSON object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "objective") cfg.objective = objective_from_string(value.get<std::string>());
      else if (key == "sigma") cfg.sigma = value.get<double>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "gamma1") cfg.gamma1 = value.get<double>();
      else if (key == "gamma2") cfg.gamma2 = value.get<double>();
      else if (key == "alpha_w") cfg.alpha_w = value.get<double>();
      else if (key == "k_samples") cfg.k_samples = value.get<std::size_t>();
      else if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "lr") cfg.lr = value.get<double>();
      else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
      else if (key == "start_epoch") cfg.start_epoch = value.get<std::size_t>();
      else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "hidden") cfg.hidden = value.get<std::size_t>();
      else if (key == "soft_clamp") cfg.soft_clamp = value.get<double>();
      else if (key == "max_mode") {
        const auto mode = value.get<std::string>();
        if (mode != "smooth" && mode != "hard") throw std::invalid_argument("max_mode must be smooth or hard");
        cfg.max_mode = mode == "smooth" ? MaxMode::Smooth : MaxMode::Hard;
      } else {
        throw std::invalid_argument("unknown training config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("training config: ") + e.what());
  }
  return cfg;
}

double margin_loss(double r, double l, double u) {
  if (l > u) throw std::domain_error("margin loss needs l <= u");
  return (l <= r && r <= u) ? std::max(u - r, 0.0) : 0.0;
}

double margin_loss_slope(double r, double l, double u) {
  if (l > u) throw std::domain_error("margin loss needs l <= u");
  return (l <= r && r < u) ? -1.0 : 0.0;
}

namespace {

/// phi_inv(clip(p)) and its derivative in p (zero where the clip is active).
struct ClippedQuantile {
  double value;
  double slope;
};

ClippedQuantile clipped_quantile(double p, double clamp) {
  // NaN from overflowed logits flows into the loss, where training reports divergence.
  if (std::isnan(p)) return {p, p};
  if (p <= clamp) return {phi_inv(clamp), 0.0};
  if (p >= 1.0 - clamp) return {phi_inv(1.0 - clamp), 0.0};
  const double z = phi_inv(p);
  return {z, 1.0 / phi_density(z)};
}

/// Max over `classes` (all classes when empty) with d(max)/d(h) in `weights`.
double relaxed_max(std::span<const double> h, std::span<const Label> classes, MaxMode mode, double beta,
                   std::vector<double>& weights) {
  weights.assign(h.size(), 0.0);
  std::vector<Label> all;
  if (classes.empty()) {
    all.resize(h.size());
    std::iota(all.begin(), all.end(), Label{0});
    classes = all;
  }
  Label best = classes.front();
  for (Label k : classes) {
    if (h[k] > h[best]) best = k;
  }
  if (mode == MaxMode::Hard) {
    weights[best] = 1.0;
    return h[best];
  }
  double total = 0.0;
  for (Label k : classes) {
    weights[k] = std::exp(beta * (h[k] - h[best]));
    total += weights[k];
  }
  for (Label k : classes) weights[k] /= total;
  return h[best] + std::log(total) / beta;
}

void check_probs(std::span<const double> h) {
  if (h.size() < 2) throw std::invalid_argument("soft radius needs at least two classes");
}

}  // namespace

ValueAndGrad soft_radius_standard_from_probs(std::span<const double> h, Label y, double sigma, double clamp) {
  check_probs(h);
  if (y >= h.size()) throw std::out_of_range("label out of range");
  Label runner = y == 0 ? 1 : 0;
  for (Label k = 0; k < h.size(); ++k) {
    if (k != y && h[k] > h[runner]) runner = k;
  }
  const auto a = clipped_quantile(h[y], clamp);
  const auto b = clipped_quantile(h[runner], clamp);
  ValueAndGrad out{0.5 * sigma * (a.value - b.value), std::vector<double>(h.size(), 0.0)};
  out.grad[y] += 0.5 * sigma * a.slope;
  out.grad[runner] -= 0.5 * sigma * b.slope;
  return out;
}

ValueAndGrad soft_radius_cost_sensitive_from_probs(std::span<const double> h, const SensitiveTargets& omega,
                                                   double sigma, double clamp, MaxMode mode, double beta) {
  check_probs(h);
  if (omega.empty()) throw std::domain_error("soft cost-sensitive radius needs a nonempty target set");
  std::vector<double> wa, wb;
  const double top = relaxed_max(h, {}, mode, beta, wa);
  const double target = relaxed_max(h, omega.targets, mode, beta, wb);
  const auto a = clipped_quantile(top, clamp);
  const auto b = clipped_quantile(target, clamp);
  ValueAndGrad out{0.5 * sigma * (a.value - b.value), std::vector<double>(h.size(), 0.0)};
  for (std::size_t k = 0; k < h.size(); ++k) out.grad[k] = 0.5 * sigma * (a.slope * wa[k] - b.slope * wb[k]);
  return out;
}

namespace {

ValueAndGrad chain_to_params(const MlpModel& model, const SoftSmoothed& fwd, const ValueAndGrad& on_probs) {
  ValueAndGrad out{on_probs.value, std::vector<double>(model.num_params(), 0.0)};
  soft_smoothed_backward(model, fwd, on_probs.grad, out.grad);
  return out;
}

}  // namespace

ValueAndGrad soft_radius_standard(const MlpModel& model, std::span<const double> x, Label y, double sigma,
                                  std::size_t k_samples, RngKey key, double clamp) {
  const auto fwd = soft_smoothed_forward(model, x, sigma, k_samples, key);
  return chain_to_params(model, fwd, soft_radius_standard_from_probs(fwd.probs, y, sigma, clamp));
}

ValueAndGrad soft_radius_cost_sensitive(const MlpModel& model, std::span<const double> x,
                                        const SensitiveTargets& omega, double sigma, std::size_t k_samples, RngKey key,
                                        double clamp, MaxMode mode) {
  const auto fwd = soft_smoothed_forward(model, x, sigma, k_samples, key);
  return chain_to_params(
      model, fwd, soft_radius_cost_sensitive_from_probs(fwd.probs, omega, sigma, clamp, mode, model.beta()));
}

namespace {

constexpr double kProbFloor = 1e-12;

}  // namespace

LossBreakdown macer_objective_from_probs(std::span<const ExampleProbs> batch, const TrainConfig& cfg,
                                         std::vector<std::vector<double>>* dprobs) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double n = double(batch.size());
  const auto n_sensitive = double(std::count_if(batch.begin(), batch.end(), [](const auto& e) { return !e.omega.empty(); }));
  if (dprobs) dprobs->assign(batch.size(), {});

  LossBreakdown out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const auto& h = ex.probs;
    std::vector<double> g(h.size(), 0.0);

    const double hy = std::max(h.at(ex.label), kProbFloor);
    out.i1 += -std::log(hy) / n;
    if (h[ex.label] > kProbFloor) g[ex.label] -= 1.0 / (h[ex.label] * n);

    const auto r_std = soft_radius_standard_from_probs(h, ex.label, cfg.sigma, cfg.soft_clamp);
    out.i2 += margin_loss(r_std.value, 0.0, cfg.gamma1) / n;
    const double s_std = cfg.lambda * margin_loss_slope(r_std.value, 0.0, cfg.gamma1) / n;
    for (std::size_t k = 0; k < h.size(); ++k) g[k] += s_std * r_std.grad[k];

    if (!ex.omega.empty()) {
      const auto r_cs =
          soft_radius_cost_sensitive_from_probs(h, ex.omega, cfg.sigma, cfg.soft_clamp, cfg.max_mode, cfg.beta);
      out.i3 += margin_loss(r_cs.value, -cfg.gamma2, cfg.gamma2) / n_sensitive;
      const double s_cs = cfg.lambda * margin_loss_slope(r_cs.value, -cfg.gamma2, cfg.gamma2) / n_sensitive;
      for (std::size_t k = 0; k < h.size(); ++k) g[k] += s_cs * r_cs.grad[k];
    }
    if (dprobs) (*dprobs)[i] = std::move(g);
  }
  out.total = out.i1 + cfg.lambda * out.i2 + cfg.lambda * out.i3;
  return out;
}

namespace {

void check_batch(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                 const CostMatrix& cost) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (data.d != model.input_dim()) throw std::invalid_argument("dataset dimension does not match the model");
  if (cost.m() != model.num_classes()) throw std::invalid_argument("cost matrix size does not match the model");
}

}  // namespace

LossEval loss_cost_sensitive_macer(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                                   const CostMatrix& cost, const TrainConfig& cfg, RngKey key) {
  check_batch(model, data, batch, cost);
  std::vector<SoftSmoothed> forwards;
  std::vector<ExampleProbs> probs;
  forwards.reserve(batch.size());
  probs.reserve(batch.size());
  for (auto i : batch) {
    forwards.push_back(soft_smoothed_forward(model, data.row(i), cfg.sigma, cfg.k_samples, key.child(i)));
    probs.push_back({forwards.back().probs, data.labels[i], omega(cost, data.labels[i])});
  }
  std::vector<std::vector<double>> dprobs;
  LossEval out{macer_objective_from_probs(probs, cfg, &dprobs), std::vector<double>(model.num_params(), 0.0)};
  for (std::size_t b = 0; b < batch.size(); ++b) soft_smoothed_backward(model, forwards[b], dprobs[b], out.grad);
  return out;
}

LossEval loss_cohen_r(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                      const CostMatrix& cost, const TrainConfig& cfg, RngKey key) {
  check_batch(model, data, batch, cost);
  std::vector<bool> sensitive_class(cost.m());
  for (Label j = 0; j < cost.m(); ++j) sensitive_class[j] = !omega(cost, j).empty();

  const double n = double(batch.size());
  const std::size_t m = model.num_classes();
  LossEval out{{}, std::vector<double>(model.num_params(), 0.0)};
  std::vector<double> noisy(data.d), dz(m);
  for (auto i : batch) {
    const auto x = data.row(i);
    const Label y = data.labels[i];
    gaussian_noise(key.child(i).child(std::uint64_t{0}), cfg.sigma, noisy);
    for (std::size_t j = 0; j < data.d; ++j) noisy[j] += x[j];
    const auto cache = model.forward(noisy);
    const double zmax = *std::max_element(cache.logits.begin(), cache.logits.end());
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      dz[k] = std::exp(cache.logits[k] - zmax);
      total += dz[k];
    }
    const double ce = std::log(total) + zmax - cache.logits[y];
    const double w = (sensitive_class.at(y) ? cfg.alpha_w : 1.0) / n;
    out.loss.i1 += w * ce;
    for (std::size_t k = 0; k < m; ++k) dz[k] = w * (dz[k] / total - (k == y ? 1.0 : 0.0));
    model.backward(cache, dz, out.grad);
  }
  out.loss.total = out.loss.i1;
  return out;
}

LossEval loss_cohen(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                    const CostMatrix& cost, const TrainConfig& cfg, RngKey key) {
  TrainConfig plain = cfg;
  plain.alpha_w = 1.0;
  return loss_cohen_r(model, data, batch, cost, plain, key);
}

LossEval evaluate_objective(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                            const CostMatrix& cost, const TrainConfig& cfg, RngKey key) {
  switch (cfg.objective) {
    case Objective::Cohen: return loss_cohen(model, data, batch, cost, cfg, key);
    case Objective::CohenR: return loss_cohen_r(model, data, batch, cost, cfg, key);
    case Objective::CostSensitiveMacer: return loss_cost_sensitive_macer(model, data, batch, cost, cfg, key);
  }
  throw std::logic_error("unhandled objective");
}

double clean_accuracy(const BaseClassifier& model, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += model.predict(data.row(i)) == data.labels[i];
  return double(correct) / double(data.size());
}

TrainResult train(MlpModel model, const Dataset& data, const CostMatrix& cost, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.m != model.num_classes()) throw std::invalid_argument("dataset class count does not match the model");
  model.set_beta(cfg.beta);
  const RngKey root = RngKey(cfg.seed).child("train");

  TrainResult result{std::move(model), {}};
  auto& net = result.model;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = cfg.start_epoch; epoch < cfg.start_epoch + cfg.epochs; ++epoch) {
    const RngKey epoch_key = root.child(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle_rng(epoch_key.child("shuffle"));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochMetrics metrics{epoch, {}, 0.0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      // Non-finite weights would otherwise surface as domain errors inside phi_inv.
      const auto w = net.params();
      if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); })) {
        throw TrainingDiverged("non-finite parameters at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches));
      }
      auto eval = evaluate_objective(net, data, batch, cost, cfg, epoch_key.child("noise"));
      if (!std::isfinite(eval.loss.total)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches) + " (i1=" + format_real(eval.loss.i1) +
                               ", i2=" + format_real(eval.loss.i2) + ", i3=" + format_real(eval.loss.i3) + ")");
      }
      auto params = net.params();
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= cfg.lr * eval.grad[p];
      metrics.loss.i1 += eval.loss.i1;
      metrics.loss.i2 += eval.loss.i2;
      metrics.loss.i3 += eval.loss.i3;
      metrics.loss.total += eval.loss.total;
      ++batches;
    }
    for (double* v : {&metrics.loss.i1, &metrics.loss.i2, &metrics.loss.i3, &metrics.loss.total}) *v /= double(batches);
    metrics.train_acc = clean_accuracy(net, data);
    result.log.push_back(metrics);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> log) {
  out << "epoch,i1,i2,i3,total,train_acc\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_real(e.loss.i1) << ',' << format_real(e.loss.i2) << ',' << format_real(e.loss.i3)
        << ',' << format_real(e.loss.total) << ',' << format_real(e.train_acc) << '\n';
  }
}

}  // namespace cssmooth
