#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cssmooth/classifiers.hpp"
#include "cssmooth/cost_model.hpp"
#include "cssmooth/dataset.hpp"
#include "cssmooth/rng.hpp"

namespace cssmooth {

enum class Objective { Cohen, CohenR, CostSensitiveMacer };

std::string_view to_string(Objective objective);
/// Accepts "cohen", "cohen-r", "cs-macer". Throws std::invalid_argument otherwise.
Objective objective_from_string(std::string_view text);

/// How the maxima inside the soft cost-sensitive radius are taken.
/// Smooth uses log-sum-exp at temperature 1 / beta.
enum class MaxMode { Hard, Smooth };

struct TrainConfig {
  Objective objective = Objective::CostSensitiveMacer;
  double sigma = 0.5;
  double lambda = 0.5;  // tuned on blobs-5; 2 and above cost > 5 points of accuracy
  double gamma1 = 4.0;
  double gamma2 = 16.0;
  double alpha_w = 1.2;
  std::size_t k_samples = 16;
  double beta = 16.0;
  double lr = 0.01;
  std::size_t epochs = 50;
  /// First epoch index; resuming at epoch k with a saved model reproduces an
  /// uninterrupted run because noise and shuffling are keyed by epoch.
  std::size_t start_epoch = 0;
  std::size_t batch_size = 50;
  std::uint64_t seed = 0;
  std::size_t hidden = MlpModel::kDefaultHidden;
  /// Quantile clamp for soft probabilities.
  double soft_clamp = 1e-4;
  MaxMode max_mode = MaxMode::Smooth;

  /// Throws std::invalid_argument on any violated constraint, including
  /// gamma2 > gamma1 > 0 for the cost-sensitive objective and alpha_w >= 1.
  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(std::string_view text);

struct LossBreakdown {
  double i1 = 0.0;
  double i2 = 0.0;
  double i3 = 0.0;
  double total = 0.0;
};

/// max(u - r, 0) if l <= r <= u, else 0. Throws std::domain_error when l > u.
double margin_loss(double r, double l, double u);
/// d margin_loss / d r with the indicator treated as a constant gate.
double margin_loss_slope(double r, double l, double u);

/// A scalar together with its gradient with respect to some vector.
struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Signed soft standard radius on given probabilities:
/// (sigma / 2) * (phi_inv(clip(h_y)) - phi_inv(clip(max_{k != y} h_k))).
/// The runner-up is the hard maximum; the gradient is with respect to h.
ValueAndGrad soft_radius_standard_from_probs(std::span<const double> h, Label y, double sigma, double clamp);

/// Signed soft cost-sensitive radius on given probabilities. With
/// MaxMode::Smooth both maxima are log-sum-exp at temperature 1 / beta.
ValueAndGrad soft_radius_cost_sensitive_from_probs(std::span<const double> h, const SensitiveTargets& omega,
                                                   double sigma, double clamp, MaxMode mode, double beta);

/// Model-level soft radii; gradients are with respect to model parameters.
ValueAndGrad soft_radius_standard(const MlpModel& model, std::span<const double> x, Label y, double sigma,
                                  std::size_t k_samples, RngKey key, double clamp = 1e-4);
ValueAndGrad soft_radius_cost_sensitive(const MlpModel& model, std::span<const double> x,
                                        const SensitiveTargets& omega, double sigma, std::size_t k_samples, RngKey key,
                                        double clamp = 1e-4, MaxMode mode = MaxMode::Smooth);

/// One example's soft probabilities plus what the objective needs to know.
struct ExampleProbs {
  std::vector<double> probs;
  Label label = 0;
  /// Empty for non-sensitive examples.
  SensitiveTargets omega;
};

/// I1 + lambda * I2 + lambda * I3 evaluated on fixed soft probabilities.
/// `dprobs` receives d(total)/d(probs) per example.
LossBreakdown macer_objective_from_probs(std::span<const ExampleProbs> batch, const TrainConfig& cfg,
                                         std::vector<std::vector<double>>* dprobs = nullptr);

struct LossEval {
  LossBreakdown loss;
  std::vector<double> grad;  // with respect to model parameters
};

/// Example i draws its noise from key.child(i) (sample s from key.child(i).child(s)).
LossEval loss_cost_sensitive_macer(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                                   const CostMatrix& cost, const TrainConfig& cfg, RngKey key);

/// Gaussian-augmented cross entropy with sensitive examples weighted by
/// cfg.alpha_w: (sum_normal CE + alpha_w * sum_sensitive CE) / |batch|.
/// Reported entirely in `i1`.
LossEval loss_cohen_r(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                      const CostMatrix& cost, const TrainConfig& cfg, RngKey key);

/// loss_cohen_r with alpha_w = 1.
LossEval loss_cohen(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                    const CostMatrix& cost, const TrainConfig& cfg, RngKey key);

/// Dispatches on cfg.objective.
LossEval evaluate_objective(const MlpModel& model, const Dataset& data, std::span<const std::size_t> batch,
                            const CostMatrix& cost, const TrainConfig& cfg, RngKey key);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown loss;  // mean over minibatches
  double train_acc = 0.0;  // clean-input accuracy of the base classifier
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochMetrics> log;
};

/// Minibatch SGD with constant learning rate over epochs
/// [start_epoch, start_epoch + epochs). Noise for epoch e comes from
/// RngKey(cfg.seed).child("train").child(e); shuffling is keyed the same way.
/// Throws TrainingDiverged on a non-finite loss.
TrainResult train(MlpModel model, const Dataset& data, const CostMatrix& cost, const TrainConfig& cfg);

/// Header "epoch,i1,i2,i3,total,train_acc".
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> log);

/// Fraction of examples whose clean-input prediction equals the label.
double clean_accuracy(const BaseClassifier& model, const Dataset& data);

}  // namespace cssmooth
