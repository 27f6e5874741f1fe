#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "cssmooth/certifier.hpp"
#include "cssmooth/classifiers.hpp"
#include "cssmooth/gauss.hpp"

namespace cssmooth {
namespace {

TEST(IntervalClassifier, PredictsByThreshold) {
  IntervalClassifier f({0.0, 1.0});
  EXPECT_EQ(f.num_classes(), 3u);
  EXPECT_EQ(f.predict(std::vector<double>{-0.5}), 0u);
  EXPECT_EQ(f.predict(std::vector<double>{0.0}), 1u);
  EXPECT_EQ(f.predict(std::vector<double>{0.99}), 1u);
  EXPECT_EQ(f.predict(std::vector<double>{1.0}), 2u);
  EXPECT_THROW(f.predict(std::vector<double>{0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(IntervalClassifier({1.0, 0.0}), std::invalid_argument);
}

TEST(ExactSmoothedProbs, ThreeClassExample) {
  IntervalClassifier f({-1.0, 1.0});
  const auto p = exact_smoothed_probs(f, std::vector<double>{0.0}, 1.0);
  EXPECT_NEAR(p[0], 0.15865525393145705, 1e-15);
  EXPECT_NEAR(p[1], 0.68268949213708590, 1e-15);
  EXPECT_NEAR(p[2], 0.15865525393145705, 1e-15);
  const SensitiveTargets omega{1, {2}};
  // Class 1 wins and only class 2 is costly.
  EXPECT_NEAR(exact_certified_radius_interval(f, std::vector<double>{0.0}, 1.0, omega).radius, 0.73761642462354179,
              1e-12);
}

TEST(ExactSmoothedProbs, BinaryRadiusMatchesDistanceToBoundary) {
  IntervalClassifier f({0.0});
  const auto r = exact_certified_radius_interval(f, std::vector<double>{0.5}, 0.5, {1, {0}});
  EXPECT_NEAR(r.radius, 0.5, 1e-12);
}

TEST(ExactSmoothedProbs, SumsToOneProperty) {
  CounterRng rng(RngKey(8));
  std::normal_distribution<double> z(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> t(1 + rng() % 6);
    for (auto& v : t) v = z(rng);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    IntervalClassifier f(t);
    const double sigma = 0.05 + double(rng() % 1000) / 250.0;
    const auto p = exact_smoothed_probs(f, std::vector<double>{z(rng)}, sigma);
    const auto v = p.values();
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(ExactSmoothedProbs, MonteCarloConsistency) {
  IntervalClassifier f({-0.3, 0.4});
  const std::vector<double> x{0.1};
  const double sigma = 0.5;
  const std::uint64_t n = 100000;
  const auto p = exact_smoothed_probs(f, x, sigma);
  int within = 0;
  const int trials = 30;
  for (int s = 0; s < trials; ++s) {
    const auto counts = sample_under_noise(f, x, n, sigma, RngKey(77).child(std::uint64_t(s)));
    ASSERT_EQ(std::accumulate(counts.counts.begin(), counts.counts.end(), std::uint64_t{0}), n);
    bool ok = true;
    for (std::size_t k = 0; k < 3; ++k) {
      const double freq = double(counts.counts[k]) / double(n);
      ok &= std::abs(freq - p[k]) <= 4.0 * std::sqrt(p[k] * (1 - p[k]) / double(n));
    }
    within += ok;
  }
  EXPECT_GE(within, trials - 1);
}

TEST(LinearClassifier, ArgmaxWithLowestIndexTies) {
  LinearClassifier f(3, 2, {1, 0, 0, 1, 1, 0}, {0, 0, 0});
  EXPECT_EQ(f.predict(std::vector<double>{2.0, 1.0}), 0u);
  EXPECT_EQ(f.predict(std::vector<double>{0.0, 1.0}), 1u);
  EXPECT_EQ(f.predict(std::vector<double>{0.0, 0.0}), 0u);
}

TEST(TableClassifier, LooksUpAndFallsBack) {
  TableClassifier f(4, 2, 3);
  f.insert(std::vector<double>{1.0, 2.0}, 1);
  EXPECT_EQ(f.predict(std::vector<double>{1.0, 2.0}), 1u);
  EXPECT_EQ(f.predict(std::vector<double>{1.0, 2.5}), 3u);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  auto model = MlpModel::random(3, 5, 4, RngKey(4));
  const std::vector<double> x{0.3, -1.1, 0.7};
  const std::vector<double> w{0.5, -1.0, 2.0, 0.25};
  auto value = [&] {
    const auto z = model.logits(x);
    return std::inner_product(z.begin(), z.end(), w.begin(), 0.0);
  };
  std::vector<double> grad(model.num_params(), 0.0);
  model.backward(model.forward(x), w, grad);
  std::vector<double> fd(model.num_params());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double saved = model.params()[i];
    model.params()[i] = saved + 1e-5;
    const double up = value();
    model.params()[i] = saved - 1e-5;
    const double down = value();
    model.params()[i] = saved;
    fd[i] = (up - down) / 2e-5;
  }
  for (std::size_t i = 0; i < fd.size(); ++i) EXPECT_NEAR(grad[i], fd[i], 1e-7 * std::max(1.0, std::abs(fd[i])));
}

TEST(SoftSmoothed, ProbabilitiesAreInteriorAndNormalised) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto model = MlpModel::random(2, 8, 5, RngKey(s));
    const auto p = soft_smoothed_probs(model, std::vector<double>{0.2 * double(s), -0.4}, 0.5, 16, RngKey(s).child(1));
    const auto v = p.values();
    for (double q : v) {
      EXPECT_GT(q, 0.0);
      EXPECT_LT(q, 1.0);
    }
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(SoftSmoothed, SameKeySameProbs) {
  auto model = MlpModel::random(2, 8, 3, RngKey(1));
  const std::vector<double> x{0.1, 0.2};
  const auto a = soft_smoothed_probs(model, x, 0.5, 16, RngKey(9));
  const auto b = soft_smoothed_probs(model, x, 0.5, 16, RngKey(9));
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

class ModelIo : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "cssmooth_model_io";
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(ModelIo, MlpRoundTripIsBitwise) {
  auto model = MlpModel::random(3, 7, 4, RngKey(12), 9.5);
  const auto path = dir_ / "mlp.model";
  save_model(model, path);
  const auto back = load_mlp(path);
  EXPECT_EQ(back.beta(), 9.5);
  EXPECT_EQ(back.block_shapes(), model.block_shapes());
  ASSERT_EQ(back.num_params(), model.num_params());
  EXPECT_EQ(std::memcmp(back.params().data(), model.params().data(), model.num_params() * sizeof(double)), 0);
}

TEST_F(ModelIo, IntervalAndTableRoundTrip) {
  IntervalClassifier iv({-0.1, 0.3, 2.0}, 2);
  const auto back = model_from_string(model_to_string(iv));
  ASSERT_EQ(back->kind(), ClassifierKind::Interval);
  EXPECT_EQ(dynamic_cast<const IntervalClassifier&>(*back).thresholds(), iv.thresholds());
  EXPECT_EQ(back->input_dim(), 2u);

  TableClassifier tb(3, 1, 2);
  tb.insert(std::vector<double>{0.5}, 1);
  const auto tb2 = model_from_string(model_to_string(tb));
  EXPECT_EQ(tb2->predict(std::vector<double>{0.5}), 1u);
  EXPECT_EQ(tb2->predict(std::vector<double>{0.6}), 2u);

  LinearClassifier lin(2, 2, {1, 2, 3, 4}, {0.5, -0.5});
  const auto lin2 = model_from_string(model_to_string(lin));
  EXPECT_EQ(dynamic_cast<const LinearClassifier&>(*lin2).weights(), lin.weights());
}

TEST_F(ModelIo, TruncatedFileIsFormatError) {
  auto model = MlpModel::random(2, 4, 3, RngKey(0));
  auto text = model_to_string(model);
  text.resize(text.size() - text.size() / 3);
  EXPECT_THROW(model_from_string(text), FormatError);
}

TEST_F(ModelIo, VersionMismatchIsFormatError) {
  auto text = model_to_string(MlpModel::random(2, 4, 3, RngKey(0)));
  const auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "\"version\":2");
  EXPECT_THROW(model_from_string(text), FormatError);
}

TEST_F(ModelIo, LoadMlpRejectsOtherKinds) {
  const auto path = dir_ / "iv.model";
  save_model(IntervalClassifier({0.0}), path);
  EXPECT_THROW(load_mlp(path), FormatError);
  EXPECT_THROW(load_model(dir_ / "missing.model"), std::invalid_argument);
}

}  // namespace
}  // namespace cssmooth
