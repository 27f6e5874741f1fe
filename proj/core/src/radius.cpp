#include "cssmooth/radius.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cssmooth/gauss.hpp"

namespace cssmooth {

namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::domain_error("noise level sigma must be positive");
}

}  // namespace

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::domain_error("probability vector is empty");
  for (double v : probs_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("probability entry outside [0, 1]");
  }
}

Label ProbVector::argmax() const {
  return static_cast<Label>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double ProbVector::max_over(std::span<const Label> classes) const {
  if (classes.empty()) throw std::domain_error("max over an empty class set");
  double best = probs_.at(classes.front());
  for (Label k : classes) best = std::max(best, probs_.at(k));
  return best;
}

double clamped_phi_inv_gap(double pa, double pb, double sigma, double clamp_eps) {
  const auto clip = [clamp_eps](double v) { return std::clamp(v, clamp_eps, 1.0 - clamp_eps); };
  return 0.5 * sigma * (phi_inv(clip(pa)) - phi_inv(clip(pb)));
}

RadiusResult standard_radius(const ProbVector& p, Label y, double sigma) {
  check_sigma(sigma);
  if (y >= p.m()) throw std::out_of_range("label out of range");
  if (p.m() < 2) throw std::domain_error("standard radius needs at least two classes");
  double runner_up = -1.0;
  for (Label k = 0; k < p.m(); ++k) {
    if (k != y) runner_up = std::max(runner_up, p[k]);
  }
  const Label top = p.argmax();
  return {clamped_phi_inv_gap(p[y], runner_up, sigma), top, top == y};
}

RadiusResult cost_sensitive_radius(const ProbVector& p, const SensitiveTargets& omega, double sigma) {
  check_sigma(sigma);
  if (omega.empty()) throw std::domain_error("cost-sensitive radius is undefined for an empty target set");
  const Label top = p.argmax();
  const double radius = clamped_phi_inv_gap(p[top], p.max_over(omega.targets), sigma);
  return {radius, top, !omega.contains(top)};
}

}  // namespace cssmooth
