#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "cssmooth/cost_model.hpp"
#include "cssmooth/radius.hpp"
#include "cssmooth/rng.hpp"
#include "cssmooth/types.hpp"

namespace cssmooth {

enum class ClassifierKind { Interval, Linear, Mlp, Table };

std::string_view to_string(ClassifierKind kind);

/// Hard base classifier f: R^d -> [m]. Implementations are immutable after
/// construction and safe to share across threads.
class BaseClassifier {
 public:
  virtual ~BaseClassifier() = default;

  virtual ClassifierKind kind() const noexcept = 0;
  virtual std::size_t num_classes() const noexcept = 0;
  virtual std::size_t input_dim() const noexcept = 0;

  /// Throws std::invalid_argument when x.size() != input_dim().
  Label predict(std::span<const double> x) const;

 protected:
  virtual Label predict_unchecked(std::span<const double> x) const = 0;
};

/// Partitions the first coordinate: class j on [t_j, t_{j+1}) with
/// t_0 = -inf and t_m = +inf. Smoothed probabilities have a closed form.
class IntervalClassifier final : public BaseClassifier {
 public:
  /// Thresholds must be finite and strictly increasing.
  explicit IntervalClassifier(std::vector<double> thresholds, std::size_t input_dim = 1);

  ClassifierKind kind() const noexcept override { return ClassifierKind::Interval; }
  std::size_t num_classes() const noexcept override { return thresholds_.size() + 1; }
  std::size_t input_dim() const noexcept override { return dim_; }
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }

 protected:
  Label predict_unchecked(std::span<const double> x) const override;

 private:
  std::vector<double> thresholds_;
  std::size_t dim_;
};

/// Exact h(x) of an interval classifier under N(0, sigma^2 I) noise.
ProbVector exact_smoothed_probs(const IntervalClassifier& c, std::span<const double> x, double sigma);

/// Ground-truth cost-sensitive radius of an interval classifier.
RadiusResult exact_certified_radius_interval(const IntervalClassifier& c, std::span<const double> x,
                                             double sigma, const SensitiveTargets& omega);

/// argmax_k (w_k . x + b_k), ties to the lowest index.
class LinearClassifier final : public BaseClassifier {
 public:
  /// weights is m x d row-major.
  LinearClassifier(std::size_t num_classes, std::size_t input_dim, std::vector<double> weights,
                   std::vector<double> bias);

  ClassifierKind kind() const noexcept override { return ClassifierKind::Linear; }
  std::size_t num_classes() const noexcept override { return m_; }
  std::size_t input_dim() const noexcept override { return d_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }

 protected:
  Label predict_unchecked(std::span<const double> x) const override;

 private:
  std::size_t m_;
  std::size_t d_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Looks inputs up by exact value; anything not stored maps to `fallback`.
class TableClassifier final : public BaseClassifier {
 public:
  TableClassifier(std::size_t num_classes, std::size_t input_dim, Label fallback = 0);

  void insert(std::span<const double> x, Label label);

  ClassifierKind kind() const noexcept override { return ClassifierKind::Table; }
  std::size_t num_classes() const noexcept override { return m_; }
  std::size_t input_dim() const noexcept override { return d_; }
  Label fallback() const noexcept { return fallback_; }
  const std::map<std::vector<double>, Label>& entries() const noexcept { return table_; }

 protected:
  Label predict_unchecked(std::span<const double> x) const override;

 private:
  std::size_t m_;
  std::size_t d_;
  Label fallback_;
  std::map<std::vector<double>, Label> table_;
};

/// One-hidden-layer tanh perceptron producing m logits. Parameters live in a
/// single flat buffer laid out as [W1 (H x d), b1 (H), W2 (m x H), b2 (m)],
/// all row-major, so gradients share the same layout.
class MlpModel final : public BaseClassifier {
 public:
  static constexpr std::size_t kDefaultHidden = 32;
  static constexpr double kDefaultBeta = 16.0;

  MlpModel(std::size_t input_dim, std::size_t hidden, std::size_t num_classes, double beta = kDefaultBeta);

  /// Gaussian init with variance 1 / fan_in for weights, zero biases.
  static MlpModel random(std::size_t input_dim, std::size_t hidden, std::size_t num_classes, RngKey key,
                         double beta = kDefaultBeta);

  ClassifierKind kind() const noexcept override { return ClassifierKind::Mlp; }
  std::size_t num_classes() const noexcept override { return m_; }
  std::size_t input_dim() const noexcept override { return d_; }
  std::size_t hidden() const noexcept { return h_; }
  double beta() const noexcept { return beta_; }
  void set_beta(double beta);

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t num_params() const noexcept { return params_.size(); }

  /// Block shapes in buffer order: {H, d}, {H}, {m, H}, {m}.
  std::vector<std::vector<std::size_t>> block_shapes() const;

  /// Clean logits.
  std::vector<double> logits(std::span<const double> x) const;

  /// Forward pass retaining what backward needs.
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden;  // tanh activations
    std::vector<double> logits;
  };
  Cache forward(std::span<const double> x) const;
  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(logits).
  void backward(const Cache& cache, std::span<const double> dlogits, std::span<double> grad) const;

 protected:
  Label predict_unchecked(std::span<const double> x) const override;

 private:
  std::size_t w1_offset() const noexcept { return 0; }
  std::size_t b1_offset() const noexcept { return h_ * d_; }
  std::size_t w2_offset() const noexcept { return h_ * d_ + h_; }
  std::size_t b2_offset() const noexcept { return h_ * d_ + h_ + m_ * h_; }
  void forward_into(std::span<const double> x, std::span<double> hidden, std::span<double> logits) const;

  std::size_t d_;
  std::size_t h_;
  std::size_t m_;
  double beta_;
  std::vector<double> params_;
};

/// Soft smoothed probabilities: the average over k noise draws of
/// softmax(beta * logits(x + delta)). Draw s uses the stream key.child(s).
struct SoftSmoothed {
  std::vector<double> probs;
  std::vector<MlpModel::Cache> draws;
  std::vector<std::vector<double>> softmax;  // per-draw softmax(beta * logits)
};

SoftSmoothed soft_smoothed_forward(const MlpModel& model, std::span<const double> x, double sigma,
                                   std::size_t k_samples, RngKey key);

/// Adds d(loss)/d(params) to `grad` given d(loss)/d(probs).
void soft_smoothed_backward(const MlpModel& model, const SoftSmoothed& fwd, std::span<const double> dprobs,
                            std::span<double> grad);

ProbVector soft_smoothed_probs(const MlpModel& model, std::span<const double> x, double sigma,
                               std::size_t k_samples, RngKey key);

/// Fills `out` with d independent N(0, sigma^2) draws from the stream `key`.
void gaussian_noise(RngKey key, double sigma, std::span<double> out);

/// Model file: a JSON header line {"kind", "version", "shapes", "beta", ...}
/// followed by one base64 line per parameter block (row-major, little-endian
/// float64). Interval classifiers keep their thresholds in the header.
/// A non-empty `provenance` (a JSON object) is stored under "provenance" and
/// ignored on load.
inline constexpr int kModelFormatVersion = 1;

void save_model(const BaseClassifier& model, const std::filesystem::path& path, std::string_view provenance = {});
std::unique_ptr<BaseClassifier> load_model(const std::filesystem::path& path);
/// Throws FormatError unless the file holds an MLP.
MlpModel load_mlp(const std::filesystem::path& path);

std::string model_to_string(const BaseClassifier& model, std::string_view provenance = {});
std::unique_ptr<BaseClassifier> model_from_string(std::string_view text);

}  // namespace cssmooth
