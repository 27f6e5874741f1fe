#include "cssmooth/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "base64.hpp"
#include "cssmooth/gauss.hpp"

namespace cssmooth {

using nlohmann::json;

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Interval: return "interval";
    case ClassifierKind::Linear: return "linear";
    case ClassifierKind::Mlp: return "mlp";
    case ClassifierKind::Table: return "table";
  }
  return "?";
}

Label BaseClassifier::predict(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", classifier expects " +
                                std::to_string(input_dim()));
  }
  return predict_unchecked(x);
}

// ---------------------------------------------------------------- interval

IntervalClassifier::IntervalClassifier(std::vector<double> thresholds, std::size_t input_dim)
    : thresholds_(std::move(thresholds)), dim_(input_dim) {
  if (dim_ == 0) throw std::invalid_argument("interval classifier needs input dimension >= 1");
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!std::isfinite(thresholds_[i])) throw std::invalid_argument("interval thresholds must be finite");
    if (i > 0 && !(thresholds_[i] > thresholds_[i - 1])) {
      throw std::invalid_argument("interval thresholds must be strictly increasing");
    }
  }
}

Label IntervalClassifier::predict_unchecked(std::span<const double> x) const {
  return static_cast<Label>(std::upper_bound(thresholds_.begin(), thresholds_.end(), x[0]) - thresholds_.begin());
}

ProbVector exact_smoothed_probs(const IntervalClassifier& c, std::span<const double> x, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("noise level sigma must be positive");
  if (x.size() != c.input_dim()) throw std::invalid_argument("input dimension mismatch");
  const auto& t = c.thresholds();
  const std::size_t m = c.num_classes();
  std::vector<double> p(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double lo = j == 0 ? -INFINITY : (t[j - 1] - x[0]) / sigma;
    const double hi = j + 1 == m ? INFINITY : (t[j] - x[0]) / sigma;
    // Right of the mean, use upper tails so small cells keep their precision.
    p[j] = lo >= 0.0 ? phi(-lo) - phi(-hi) : phi(hi) - phi(lo);
    p[j] = std::clamp(p[j], 0.0, 1.0);
  }
  return ProbVector(std::move(p));
}

RadiusResult exact_certified_radius_interval(const IntervalClassifier& c, std::span<const double> x, double sigma,
                                             const SensitiveTargets& omega) {
  return cost_sensitive_radius(exact_smoothed_probs(c, x, sigma), omega, sigma);
}

// ------------------------------------------------------------------ linear

LinearClassifier::LinearClassifier(std::size_t num_classes, std::size_t input_dim, std::vector<double> weights,
                                   std::vector<double> bias)
    : m_(num_classes), d_(input_dim), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (m_ == 0 || d_ == 0) throw std::invalid_argument("linear classifier needs m, d >= 1");
  if (weights_.size() != m_ * d_ || bias_.size() != m_) throw std::invalid_argument("linear classifier shape mismatch");
}

Label LinearClassifier::predict_unchecked(std::span<const double> x) const {
  Label best = 0;
  double best_score = -INFINITY;
  for (std::size_t k = 0; k < m_; ++k) {
    double s = bias_[k];
    for (std::size_t i = 0; i < d_; ++i) s += weights_[k * d_ + i] * x[i];
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

// ------------------------------------------------------------------- table

TableClassifier::TableClassifier(std::size_t num_classes, std::size_t input_dim, Label fallback)
    : m_(num_classes), d_(input_dim), fallback_(fallback) {
  if (m_ == 0 || d_ == 0) throw std::invalid_argument("table classifier needs m, d >= 1");
  if (fallback_ >= m_) throw std::out_of_range("table fallback label out of range");
}

void TableClassifier::insert(std::span<const double> x, Label label) {
  if (x.size() != d_) throw std::invalid_argument("table entry dimension mismatch");
  if (label >= m_) throw std::out_of_range("table label out of range");
  table_[std::vector<double>(x.begin(), x.end())] = label;
}

Label TableClassifier::predict_unchecked(std::span<const double> x) const {
  auto it = table_.find(std::vector<double>(x.begin(), x.end()));
  return it == table_.end() ? fallback_ : it->second;
}

// --------------------------------------------------------------------- mlp

MlpModel::MlpModel(std::size_t input_dim, std::size_t hidden, std::size_t num_classes, double beta)
    : d_(input_dim), h_(hidden), m_(num_classes), beta_(beta) {
  if (d_ == 0 || h_ == 0 || m_ < 2) throw std::invalid_argument("mlp needs d >= 1, hidden >= 1, m >= 2");
  set_beta(beta);
  params_.assign(h_ * d_ + h_ + m_ * h_ + m_, 0.0);
}

MlpModel MlpModel::random(std::size_t input_dim, std::size_t hidden, std::size_t num_classes, RngKey key,
                          double beta) {
  MlpModel model(input_dim, hidden, num_classes, beta);
  CounterRng rng(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto p = model.params();
  const double s1 = 1.0 / std::sqrt(double(input_dim));
  const double s2 = 1.0 / std::sqrt(double(hidden));
  for (std::size_t i = 0; i < model.b1_offset(); ++i) p[i] = s1 * normal(rng);
  for (std::size_t i = model.w2_offset(); i < model.b2_offset(); ++i) p[i] = s2 * normal(rng);
  return model;
}

void MlpModel::set_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("softmax temperature beta must be positive");
  beta_ = beta;
}

std::vector<std::vector<std::size_t>> MlpModel::block_shapes() const { return {{h_, d_}, {h_}, {m_, h_}, {m_}}; }

void MlpModel::forward_into(std::span<const double> x, std::span<double> hidden, std::span<double> logits) const {
  const double* w1 = params_.data() + w1_offset();
  const double* b1 = params_.data() + b1_offset();
  const double* w2 = params_.data() + w2_offset();
  const double* b2 = params_.data() + b2_offset();
  for (std::size_t j = 0; j < h_; ++j) {
    double a = b1[j];
    for (std::size_t i = 0; i < d_; ++i) a += w1[j * d_ + i] * x[i];
    hidden[j] = std::tanh(a);
  }
  for (std::size_t k = 0; k < m_; ++k) {
    double z = b2[k];
    for (std::size_t j = 0; j < h_; ++j) z += w2[k * h_ + j] * hidden[j];
    logits[k] = z;
  }
}

std::vector<double> MlpModel::logits(std::span<const double> x) const {
  if (x.size() != d_) throw std::invalid_argument("input dimension mismatch");
  std::vector<double> hidden(h_), z(m_);
  forward_into(x, hidden, z);
  return z;
}

MlpModel::Cache MlpModel::forward(std::span<const double> x) const {
  if (x.size() != d_) throw std::invalid_argument("input dimension mismatch");
  Cache c{std::vector<double>(x.begin(), x.end()), std::vector<double>(h_), std::vector<double>(m_)};
  forward_into(x, c.hidden, c.logits);
  return c;
}

void MlpModel::backward(const Cache& cache, std::span<const double> dlogits, std::span<double> grad) const {
  const double* w2 = params_.data() + w2_offset();
  double* g_w1 = grad.data() + w1_offset();
  double* g_b1 = grad.data() + b1_offset();
  double* g_w2 = grad.data() + w2_offset();
  double* g_b2 = grad.data() + b2_offset();
  std::vector<double> dhidden(h_, 0.0);
  for (std::size_t k = 0; k < m_; ++k) {
    const double dz = dlogits[k];
    if (dz == 0.0) continue;
    g_b2[k] += dz;
    for (std::size_t j = 0; j < h_; ++j) {
      g_w2[k * h_ + j] += dz * cache.hidden[j];
      dhidden[j] += dz * w2[k * h_ + j];
    }
  }
  for (std::size_t j = 0; j < h_; ++j) {
    const double da = dhidden[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
    g_b1[j] += da;
    for (std::size_t i = 0; i < d_; ++i) g_w1[j * d_ + i] += da * cache.input[i];
  }
}

Label MlpModel::predict_unchecked(std::span<const double> x) const {
  thread_local std::vector<double> hidden, z;
  hidden.resize(h_);
  z.resize(m_);
  forward_into(x, hidden, z);
  return static_cast<Label>(std::max_element(z.begin(), z.end()) - z.begin());
}

// ----------------------------------------------------------- soft smoothing

void gaussian_noise(RngKey key, double sigma, std::span<double> out) {
  CounterRng rng(key);
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : out) v = normal(rng);
}

SoftSmoothed soft_smoothed_forward(const MlpModel& model, std::span<const double> x, double sigma,
                                   std::size_t k_samples, RngKey key) {
  if (k_samples == 0) throw std::invalid_argument("soft smoothing needs k_samples >= 1");
  if (!(sigma > 0.0)) throw std::domain_error("noise level sigma must be positive");
  const std::size_t m = model.num_classes();
  SoftSmoothed out;
  out.probs.assign(m, 0.0);
  out.draws.reserve(k_samples);
  out.softmax.reserve(k_samples);
  std::vector<double> noisy(x.size());
  for (std::size_t s = 0; s < k_samples; ++s) {
    gaussian_noise(key.child(s), sigma, noisy);
    for (std::size_t i = 0; i < x.size(); ++i) noisy[i] += x[i];
    auto cache = model.forward(noisy);
    std::vector<double> q(m);
    const double zmax = *std::max_element(cache.logits.begin(), cache.logits.end());
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      q[k] = std::exp(model.beta() * (cache.logits[k] - zmax));
      total += q[k];
    }
    for (std::size_t k = 0; k < m; ++k) {
      q[k] /= total;
      out.probs[k] += q[k] / double(k_samples);
    }
    out.draws.push_back(std::move(cache));
    out.softmax.push_back(std::move(q));
  }
  return out;
}

void soft_smoothed_backward(const MlpModel& model, const SoftSmoothed& fwd, std::span<const double> dprobs,
                            std::span<double> grad) {
  const std::size_t m = model.num_classes();
  const double scale = model.beta() / double(fwd.draws.size());
  std::vector<double> dz(m);
  for (std::size_t s = 0; s < fwd.draws.size(); ++s) {
    const auto& q = fwd.softmax[s];
    double inner = 0.0;
    for (std::size_t k = 0; k < m; ++k) inner += dprobs[k] * q[k];
    for (std::size_t k = 0; k < m; ++k) dz[k] = scale * q[k] * (dprobs[k] - inner);
    model.backward(fwd.draws[s], dz, grad);
  }
}

ProbVector soft_smoothed_probs(const MlpModel& model, std::span<const double> x, double sigma, std::size_t k_samples,
                               RngKey key) {
  auto fwd = soft_smoothed_forward(model, x, sigma, k_samples, key);
  for (double& p : fwd.probs) p = std::clamp(p, 0.0, 1.0);
  return ProbVector(std::move(fwd.probs));
}

// ---------------------------------------------------------------- model io

namespace {

std::vector<double> read_block(std::istream& in, std::size_t expected, std::size_t index) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("model file truncated: missing parameter block " + std::to_string(index));
  }
  auto values = detail::decode_f64_le(line);
  if (values.size() != expected) {
    throw FormatError("parameter block " + std::to_string(index) + " holds " + std::to_string(values.size()) +
                      " values, header shape needs " + std::to_string(expected));
  }
  return values;
}

std::size_t shape_size(const json& shape) {
  std::size_t n = 1;
  for (const auto& dim : shape) n *= dim.get<std::size_t>();
  return n;
}

}  // namespace

std::string model_to_string(const BaseClassifier& model, std::string_view provenance) {
  json header{{"kind", to_string(model.kind())}, {"version", kModelFormatVersion}};
  std::vector<std::string> blocks;
  switch (model.kind()) {
    case ClassifierKind::Interval: {
      const auto& c = static_cast<const IntervalClassifier&>(model);
      header["thresholds"] = c.thresholds();
      header["input_dim"] = c.input_dim();
      header["shapes"] = json::array();
      break;
    }
    case ClassifierKind::Linear: {
      const auto& c = static_cast<const LinearClassifier&>(model);
      header["shapes"] = {{c.num_classes(), c.input_dim()}, {c.num_classes()}};
      blocks.push_back(detail::encode_f64_le(c.weights()));
      blocks.push_back(detail::encode_f64_le(c.bias()));
      break;
    }
    case ClassifierKind::Mlp: {
      const auto& c = static_cast<const MlpModel&>(model);
      header["shapes"] = c.block_shapes();
      header["beta"] = c.beta();
      auto p = c.params();
      std::size_t offset = 0;
      for (const auto& shape : c.block_shapes()) {
        std::size_t n = 1;
        for (auto dim : shape) n *= dim;
        blocks.push_back(detail::encode_f64_le(p.subspan(offset, n)));
        offset += n;
      }
      break;
    }
    case ClassifierKind::Table: {
      const auto& c = static_cast<const TableClassifier&>(model);
      std::vector<double> inputs;
      std::vector<Label> labels;
      for (const auto& [x, label] : c.entries()) {
        inputs.insert(inputs.end(), x.begin(), x.end());
        labels.push_back(label);
      }
      header["shapes"] = {{c.entries().size(), c.input_dim()}};
      header["labels"] = labels;
      header["fallback"] = c.fallback();
      header["num_classes"] = c.num_classes();
      blocks.push_back(detail::encode_f64_le(inputs));
      break;
    }
  }
  if (!provenance.empty()) header["provenance"] = json::parse(provenance);
  std::string out = header.dump() + "\n";
  for (const auto& b : blocks) out += b + "\n";
  return out;
}

std::unique_ptr<BaseClassifier> model_from_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("model file is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model header is not valid JSON: ") + e.what());
  }
  try {
    if (!header.contains("version") || !header.contains("kind")) {
      throw FormatError("model header needs \"kind\" and \"version\"");
    }
    const int version = header.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    const auto kind = header.at("kind").get<std::string>();
    if (kind == "interval") {
      return std::make_unique<IntervalClassifier>(header.at("thresholds").get<std::vector<double>>(),
                                                  header.value("input_dim", std::size_t{1}));
    }
    const auto& shapes = header.at("shapes");
    if (kind == "linear") {
      if (shapes.size() != 2) throw FormatError("linear model needs 2 parameter blocks");
      const auto m = shapes[0][0].get<std::size_t>();
      const auto d = shapes[0][1].get<std::size_t>();
      auto w = read_block(in, m * d, 0);
      auto b = read_block(in, m, 1);
      return std::make_unique<LinearClassifier>(m, d, std::move(w), std::move(b));
    }
    if (kind == "mlp") {
      if (shapes.size() != 4) throw FormatError("mlp model needs 4 parameter blocks");
      const auto h = shapes[0][0].get<std::size_t>();
      const auto d = shapes[0][1].get<std::size_t>();
      const auto m = shapes[2][0].get<std::size_t>();
      auto model = std::make_unique<MlpModel>(d, h, m, header.value("beta", MlpModel::kDefaultBeta));
      const auto expected = model->block_shapes();
      std::size_t offset = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        if (shapes[b].get<std::vector<std::size_t>>() != expected[b]) {
          throw FormatError("mlp block " + std::to_string(b) + " has an inconsistent shape");
        }
        const auto values = read_block(in, shape_size(shapes[b]), b);
        std::copy(values.begin(), values.end(), model->params().begin() + std::ptrdiff_t(offset));
        offset += values.size();
      }
      return model;
    }
    if (kind == "table") {
      if (shapes.size() != 1) throw FormatError("table model needs 1 parameter block");
      const auto n = shapes[0][0].get<std::size_t>();
      const auto d = shapes[0][1].get<std::size_t>();
      const auto labels = header.at("labels").get<std::vector<Label>>();
      if (labels.size() != n) throw FormatError("table labels do not match the input block");
      auto model = std::make_unique<TableClassifier>(header.at("num_classes").get<std::size_t>(), d,
                                                     header.value("fallback", Label{0}));
      const auto inputs = read_block(in, n * d, 0);
      for (std::size_t i = 0; i < n; ++i) {
        model->insert(std::span<const double>(inputs).subspan(i * d, d), labels[i]);
      }
      return model;
    }
    throw FormatError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("model header: ") + e.what());
  }
}

void save_model(const BaseClassifier& model, const std::filesystem::path& path, std::string_view provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_string(model, provenance);
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

std::unique_ptr<BaseClassifier> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

MlpModel load_mlp(const std::filesystem::path& path) {
  auto model = load_model(path);
  if (model->kind() != ClassifierKind::Mlp) {
    throw FormatError("model file " + path.string() + " holds a " + std::string(to_string(model->kind())) +
                      " classifier, expected mlp");
  }
  return static_cast<MlpModel&>(*model);
}

}  // namespace cssmooth
