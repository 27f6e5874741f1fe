#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "cssmooth/gauss.hpp"
#include "cssmooth/trainer.hpp"
#include "gradcheck.hpp"

namespace cssmooth {
namespace {

TEST(MarginLoss, Examples) {
  EXPECT_EQ(margin_loss(1.0, 0.0, 4.0), 3.0);
  EXPECT_EQ(margin_loss(5.0, 0.0, 4.0), 0.0);
  EXPECT_EQ(margin_loss(-0.1, 0.0, 4.0), 0.0);
  EXPECT_EQ(margin_loss(-16.0, -16.0, 16.0), 32.0);
  EXPECT_EQ(margin_loss(4.0, 0.0, 4.0), 0.0);
  EXPECT_THROW(margin_loss(0.0, 1.0, 0.0), std::domain_error);
  EXPECT_EQ(margin_loss_slope(1.0, 0.0, 4.0), -1.0);
  EXPECT_EQ(margin_loss_slope(5.0, 0.0, 4.0), 0.0);
}

TEST(Objective, NamesRoundTrip) {
  for (auto o : {Objective::Cohen, Objective::CohenR, Objective::CostSensitiveMacer})
    EXPECT_EQ(objective_from_string(to_string(o)), o);
  EXPECT_THROW(objective_from_string("macer"), std::invalid_argument);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma1 = 16;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.alpha_w = 0.9;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.sigma = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrainConfig, JsonRoundTripAndUnknownField) {
  TrainConfig cfg;
  cfg.objective = Objective::CohenR;
  cfg.alpha_w = 2.5;
  cfg.seed = 123;
  cfg.max_mode = MaxMode::Hard;
  const auto back = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(back.objective, cfg.objective);
  EXPECT_EQ(back.alpha_w, 2.5);
  EXPECT_EQ(back.seed, 123u);
  EXPECT_EQ(back.max_mode, MaxMode::Hard);
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(cfg));
  EXPECT_THROW(train_config_from_json(R"({"learning_rate": 0.1})"), std::invalid_argument);
  EXPECT_THROW(train_config_from_json("[1,2]"), FormatError);
}

TEST(SoftRadius, MatchesClosedFormOnProbabilities) {
  const std::vector<double> h{0.7, 0.2, 0.1};
  const auto r = soft_radius_standard_from_probs(h, 0, 0.5, 1e-4);
  EXPECT_NEAR(r.value, 0.25 * (phi_inv(0.7) - phi_inv(0.2)), 1e-14);
  const auto cs = soft_radius_cost_sensitive_from_probs(h, {0, {2}}, 0.5, 1e-4, MaxMode::Hard, 16);
  EXPECT_NEAR(cs.value, 0.25 * (phi_inv(0.7) - phi_inv(0.1)), 1e-14);
  // The smooth max sits above the hard one by at most log(m) / beta.
  const auto smooth = soft_radius_cost_sensitive_from_probs(h, {0, {1, 2}}, 0.5, 1e-4, MaxMode::Smooth, 16);
  EXPECT_TRUE(std::isfinite(smooth.value));
}

TEST(SoftRadius, ProbabilityGradientsMatchFiniteDifferences) {
  std::vector<double> h{0.55, 0.3, 0.15};
  for (auto mode : {MaxMode::Hard, MaxMode::Smooth}) {
    const auto an = soft_radius_cost_sensitive_from_probs(h, {0, {1, 2}}, 0.5, 1e-4, mode, 8).grad;
    const auto fd = testing::central_differences(
        h, [&] { return soft_radius_cost_sensitive_from_probs(h, {0, {1, 2}}, 0.5, 1e-4, mode, 8).value; });
    EXPECT_LE(testing::relative_error(an, fd), 1e-6);
  }
  const auto an = soft_radius_standard_from_probs(h, 1, 0.5, 1e-4).grad;
  const auto fd = testing::central_differences(h, [&] { return soft_radius_standard_from_probs(h, 1, 0.5, 1e-4).value; });
  EXPECT_LE(testing::relative_error(an, fd), 1e-6);
}

TEST(SoftRadius, ModelGradientMatchesFiniteDifferences) {
  auto model = MlpModel::random(2, 6, 3, RngKey(3), 4.0);
  const std::vector<double> x{0.4, -0.2};
  const RngKey key(17);
  const auto an = soft_radius_cost_sensitive(model, x, {0, {2}}, 0.5, 8, key).grad;
  const auto fd = testing::central_differences(
      model.params(), [&] { return soft_radius_cost_sensitive(model, x, {0, {2}}, 0.5, 8, key).value; });
  EXPECT_LE(testing::relative_error(an, fd), 1e-5);
}

TEST(LossGradients, MatchFiniteDifferencesOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto e = testing::gradient_check(seed);
    EXPECT_LE(e.i1, 1e-4) << "seed " << seed;
    EXPECT_LE(e.i2, 1e-4) << "seed " << seed;
    EXPECT_LE(e.i3, 1e-4) << "seed " << seed;
    EXPECT_LE(e.cohen_r, 1e-4) << "seed " << seed;
  }
}

TEST(MacerObjective, ComponentsAreNonNegativeAndAddUp) {
  TrainConfig cfg;
  std::vector<ExampleProbs> batch{{{0.6, 0.3, 0.1}, 0, {0, {2}}}, {{0.2, 0.5, 0.3}, 1, {}}, {{0.1, 0.1, 0.8}, 0, {0, {2}}}};
  const auto l = macer_objective_from_probs(batch, cfg);
  EXPECT_GE(l.i1, 0.0);
  EXPECT_GE(l.i2, 0.0);
  EXPECT_GE(l.i3, 0.0);
  EXPECT_NEAR(l.total, l.i1 + cfg.lambda * (l.i2 + l.i3), 1e-12);
}

TEST(MacerObjective, I3GateIsExact) {
  // The second example sits far outside [-gamma2, gamma2] once the gate is narrow.
  TrainConfig cfg;
  cfg.gamma1 = 0.1;
  cfg.gamma2 = 0.2;
  cfg.sigma = 0.5;
  std::vector<ExampleProbs> batch{{{0.5, 0.3, 0.2}, 0, {0, {2}}}, {{0.98, 0.015, 0.005}, 0, {0, {2}}}};
  const auto r_out = soft_radius_cost_sensitive_from_probs(batch[1].probs, batch[1].omega, cfg.sigma, cfg.soft_clamp,
                                                           cfg.max_mode, cfg.beta);
  ASSERT_GT(r_out.value, cfg.gamma2);
  const double before = macer_objective_from_probs(batch, cfg).i3;
  batch[1].probs = {0.97, 0.02, 0.01};
  EXPECT_EQ(macer_objective_from_probs(batch, cfg).i3, before);
  std::vector<std::vector<double>> dprobs;
  cfg.lambda = 1.0;
  macer_objective_from_probs(batch, cfg, &dprobs);
  const double i1_slope = -1.0 / (batch[1].probs[0] * 2.0);
  EXPECT_NEAR(dprobs[1][0], i1_slope, 1e-12);
  EXPECT_EQ(dprobs[1][2], 0.0);
}

Dataset tiny_dataset() {
  return gen_blobs({3, 10, 1, 2.0, 0.5}, 4, "tiny").train;
}

TEST(CohenR, AlphaOneEqualsCohenBitForBit) {
  const auto data = tiny_dataset();
  const auto model = MlpModel::random(2, 8, 3, RngKey(1));
  const auto cost = CostMatrix::parse_shorthand("seedwise:1", 3);
  std::vector<std::size_t> batch(data.size());
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  TrainConfig cfg;
  cfg.alpha_w = 1.0;
  const auto a = loss_cohen_r(model, data, batch, cost, cfg, RngKey(9));
  const auto b = loss_cohen(model, data, batch, cost, cfg, RngKey(9));
  EXPECT_EQ(std::memcmp(&a.loss.total, &b.loss.total, sizeof(double)), 0);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto data = tiny_dataset();
  const auto model = MlpModel::random(2, 8, 3, RngKey(1), 16.0);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 2;
  cfg.batch_size = 7;
  cfg.k_samples = 2;
  const auto out = train(model, data, CostMatrix::parse_shorthand("seedwise:1", 3), cfg);
  EXPECT_TRUE(std::equal(out.model.params().begin(), out.model.params().end(), model.params().begin()));
  EXPECT_EQ(out.log.size(), 2u);
}

TEST(Train, DeterministicForSeed) {
  const auto data = tiny_dataset();
  const auto cost = CostMatrix::parse_shorthand("seedwise:1", 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 10;
  cfg.k_samples = 4;
  cfg.lr = 0.05;
  const auto model = MlpModel::random(2, 8, 3, RngKey(cfg.seed));
  const auto a = train(model, data, cost, cfg);
  const auto b = train(model, data, cost, cfg);
  EXPECT_EQ(model_to_string(a.model), model_to_string(b.model));
  std::ostringstream sa, sb;
  write_metrics_csv(sa, a.log);
  write_metrics_csv(sb, b.log);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, 30), "epoch,i1,i2,i3,total,train_acc");
  EXPECT_NE(model_to_string(a.model), model_to_string(model));
}

TEST(Train, ResumeReproducesUninterruptedRun) {
  const auto data = tiny_dataset();
  const auto cost = CostMatrix::parse_shorthand("seedwise:1", 3);
  const auto init = MlpModel::random(2, 8, 3, RngKey(2), 16.0);
  TrainConfig cfg;
  cfg.batch_size = 7;
  cfg.k_samples = 2;
  cfg.epochs = 4;
  const auto full = train(init, data, cost, cfg);
  cfg.epochs = 2;
  const auto first = train(init, data, cost, cfg);
  cfg.start_epoch = 2;
  // Round-trip through the model file format, as a real resume would.
  const auto reloaded = model_from_string(model_to_string(first.model));
  const auto second = train(dynamic_cast<const MlpModel&>(*reloaded), data, cost, cfg);
  const auto a = second.model.params(), b = full.model.params();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST(Train, DivergenceIsReported) {
  const auto data = tiny_dataset();
  auto model = MlpModel::random(2, 8, 3, RngKey(0));
  model.params()[0] = std::nan("");
  TrainConfig cfg;
  cfg.objective = Objective::Cohen;
  cfg.epochs = 1;
  EXPECT_THROW(train(model, data, CostMatrix::zeros(3), cfg), TrainingDiverged);
  cfg.objective = Objective::CostSensitiveMacer;
  EXPECT_THROW(train(model, data, CostMatrix::parse_shorthand("seedwise:1", 3), cfg), TrainingDiverged);
}

}  // namespace
}  // namespace cssmooth
