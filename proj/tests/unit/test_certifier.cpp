#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cssmooth/certifier.hpp"
#include "cssmooth/dataset.hpp"
#include "cssmooth/gauss.hpp"

namespace cssmooth {
namespace {

SampleCounts counts(std::vector<std::uint64_t> c) {
  std::uint64_t n = 0;
  for (auto v : c) n += v;
  return {std::move(c), n};
}

SmoothingConfig config(double sigma, std::uint64_t n, double alpha) {
  SmoothingConfig cfg;
  cfg.sigma = sigma;
  cfg.n0 = 100;
  cfg.n = n;
  cfg.alpha = alpha;
  return cfg;
}

TEST(SmoothingConfig, Validation) {
  EXPECT_NO_THROW(SmoothingConfig{}.validate());
  EXPECT_THROW(config(0.0, 10, 0.1).validate(), std::invalid_argument);
  EXPECT_THROW(config(0.5, 0, 0.1).validate(), std::invalid_argument);
  EXPECT_THROW(config(0.5, 10, 1.0).validate(), std::invalid_argument);
  SmoothingConfig bad;
  bad.n0 = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(CertifyFromCounts, FrozenRegressionVector) {
  // R1 = sigma * phi_inv(LB(900, 1000, 0.999)),
  // R2 = sigma / 2 * (phi_inv(LB(900, 1000, 0.9995)) - phi_inv(UB(20, 1000, 0.9995))).
  const auto out = certify_cost_sensitive_from_counts(counts({90, 8, 2}), counts({900, 80, 20}), {0, {2}},
                                                      config(0.5, 1000, 0.001));
  EXPECT_EQ(out.status, CertStatus::Certified);
  EXPECT_EQ(out.prediction, 0u);
  EXPECT_NEAR(out.r1, 0.55724158113989965, 1e-9);
  EXPECT_NEAR(out.r2, 0.71654459723451392, 1e-9);
  EXPECT_EQ(out.radius, std::max(out.r1, out.r2));
}

TEST(CertifyFromCounts, PerfectCountsUseClosedFormLowerBound) {
  const auto out =
      certify_cost_sensitive_from_counts(counts({100, 0}), counts({1000, 0}), {0, {1}}, config(0.5, 1000, 0.001));
  EXPECT_EQ(out.status, CertStatus::Certified);
  EXPECT_NEAR(out.r1, 1.2316313073904044, 1e-9);
  EXPECT_TRUE(std::isfinite(out.r2));
}

TEST(CertifyFromCounts, CostViolationWhenTopIsCostly) {
  const auto out = certify_cost_sensitive_from_counts(counts({10, 5, 85}), counts({100, 50, 850}), {0, {2}},
                                                      config(0.5, 1000, 0.001));
  EXPECT_EQ(out.status, CertStatus::CostViolation);
  EXPECT_EQ(out.prediction, 2u);
}

TEST(CertifyFromCounts, AbstainOnSplitVote) {
  const auto out = certify_cost_sensitive_from_counts(counts({50, 50}), counts({500, 500}), {0, {1}},
                                                      config(0.5, 1000, 0.001));
  EXPECT_EQ(out.status, CertStatus::Abstain);
  EXPECT_LE(out.radius, 0.0);
}

TEST(CertifyFromCounts, StandardModeStatuses) {
  const auto cfg = config(0.5, 1000, 0.001);
  const auto ok = certify_standard_from_counts(counts({90, 10}), counts({900, 100}), 0, cfg);
  EXPECT_EQ(ok.status, CertStatus::Certified);
  EXPECT_EQ(ok.radius, ok.r1);
  EXPECT_EQ(certify_standard_from_counts(counts({90, 10}), counts({900, 100}), 1, cfg).status,
            CertStatus::Misclassified);
  EXPECT_EQ(certify_standard_from_counts(counts({50, 50}), counts({520, 480}), 0, cfg).status, CertStatus::Abstain);
}

TEST(CertifyFromCounts, RadiusDominatesR1Property) {
  CounterRng rng(RngKey(44));
  const auto cfg = config(0.5, 500, 0.01);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 2 + rng() % 5;
    std::vector<double> w(m);
    for (auto& v : w) v = std::exponential_distribution<double>(1.0)(rng);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::vector<std::uint64_t> c(m, 0), c0(m, 0);
    for (int i = 0; i < 500; ++i) ++c[pick(rng)];
    for (int i = 0; i < 100; ++i) ++c0[pick(rng)];
    const Label seed = rng() % m;
    std::vector<Label> omega;
    for (Label k = 0; k < m; ++k)
      if (k != seed && (rng() & 1)) omega.push_back(k);
    if (omega.empty()) omega.push_back((seed + 1) % m);
    const auto out = certify_cost_sensitive_from_counts(counts(c0), counts(c), {seed, omega}, cfg);
    EXPECT_GE(out.radius, out.r1);
    if (out.status == CertStatus::Certified) EXPECT_GT(out.radius, 0.0);
  }
}

TEST(Certify, SameKeySameOutcome) {
  IntervalClassifier f({-0.2, 0.5});
  const std::vector<double> x{0.1};
  const auto cfg = config(0.5, 5000, 0.01);
  const auto a = certify_cost_sensitive(f, x, {1, {2}}, cfg, RngKey(5));
  const auto b = certify_cost_sensitive(f, x, {1, {2}}, cfg, RngKey(5));
  EXPECT_EQ(a, b);
  const auto c = certify_cost_sensitive(f, x, {1, {2}}, cfg, RngKey(6));
  EXPECT_NE(a.counts.counts, c.counts.counts);
}

TEST(Certify, EmptyOmegaRejected) {
  IntervalClassifier f({0.0});
  EXPECT_THROW(certify_cost_sensitive(f, std::vector<double>{0.0}, {0, {}}, SmoothingConfig{}, RngKey(0)),
               std::domain_error);
}

Dataset line_data() {
  Dataset d;
  d.m = 3;
  d.d = 1;
  d.features = {-1.0, -0.1, 0.2, 0.4, 1.2, 2.0};
  d.labels = {0, 0, 1, 1, 2, 2};
  return d;
}

TEST(CertifyBatch, ThreadCountDoesNotChangeResults) {
  IntervalClassifier f({0.0, 1.0});
  const auto data = line_data();
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5};
  const auto cfg = config(0.5, 3000, 0.01);
  const auto cost = CostMatrix::parse_shorthand("seedwise:1", 3);
  const auto one = certify_batch(f, data, ids, CertMode::Standard, nullptr, cfg, RngKey(1), 1);
  const auto four = certify_batch(f, data, ids, CertMode::Standard, nullptr, cfg, RngKey(1), 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].example_id, four[i].example_id);
    EXPECT_EQ(one[i].outcome, four[i].outcome);
  }
  // Keys depend on the example id only, so a subset reproduces its rows.
  const std::vector<std::size_t> sub{3};
  EXPECT_EQ(certify_batch(f, data, sub, CertMode::Standard, nullptr, cfg, RngKey(1), 1)[0].outcome, one[3].outcome);
  const std::vector<std::size_t> sens{2, 3};
  EXPECT_NO_THROW(certify_batch(f, data, sens, CertMode::CostSensitive, &cost, cfg, RngKey(1), 2));
  EXPECT_THROW(certify_batch(f, data, ids, CertMode::CostSensitive, &cost, cfg, RngKey(1), 2), std::domain_error);
}

TEST(CertCsv, RoundTripsThroughReader) {
  IntervalClassifier f({0.0, 1.0});
  const auto data = line_data();
  const std::vector<std::size_t> ids{0, 2, 5};
  const auto cfg = config(0.5, 2000, 0.01);
  const auto recs = certify_batch(f, data, ids, CertMode::Standard, nullptr, cfg, RngKey(2), 1);
  std::stringstream ss;
  ss << "# a comment\n";
  write_cert_csv(ss, recs, cfg);
  const auto back = read_cert_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].example_id, recs[i].example_id);
    EXPECT_EQ(back[i].outcome.status, recs[i].outcome.status);
    EXPECT_EQ(back[i].outcome.r1, recs[i].outcome.r1);
    EXPECT_EQ(back[i].outcome.radius, recs[i].outcome.radius);
  }
}

TEST(CertStatus, StringRoundTrip) {
  for (auto s : {CertStatus::Certified, CertStatus::Abstain, CertStatus::CostViolation, CertStatus::Misclassified})
    EXPECT_EQ(cert_status_from_string(to_string(s)), s);
  EXPECT_THROW(cert_status_from_string("maybe"), FormatError);
}

}  // namespace
}  // namespace cssmooth
