#include <benchmark/benchmark.h>

#include "cssmooth/certifier.hpp"
#include "cssmooth/classifiers.hpp"
#include "cssmooth/gauss.hpp"
#include "cssmooth/trainer.hpp"

namespace cssmooth {
namespace {

void BM_PhiInv(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    i = (i + 7919) % 99999;
    benchmark::DoNotOptimize(phi_inv(double(i + 1) / 100001.0));
  }
}
BENCHMARK(BM_PhiInv);

void BM_BinomLower(benchmark::State& state) {
  const auto n = std::uint64_t(state.range(0));
  std::uint64_t k = 0;
  for (auto _ : state) {
    k = (k + 7919) % (n + 1);
    benchmark::DoNotOptimize(binom_lower(k, n, 0.999).value);
  }
}
BENCHMARK(BM_BinomLower)->Arg(100)->Arg(10000)->Arg(100000);

void BM_CertifyInterval(benchmark::State& state) {
  const IntervalClassifier f({-1.0, 0.0, 1.0});
  const std::vector<double> x{0.2};
  SmoothingConfig cfg;
  cfg.n = std::uint64_t(state.range(0));
  std::uint64_t run = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_cost_sensitive(f, x, {2, {0, 3}}, cfg, RngKey(++run)).radius);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(cfg.n + cfg.n0));
}
BENCHMARK(BM_CertifyInterval)->Arg(10000)->Arg(100000);

void BM_CertifyMlp(benchmark::State& state) {
  const auto model = MlpModel::random(2, MlpModel::kDefaultHidden, 5, RngKey(1));
  const std::vector<double> x{0.3, -0.4};
  SmoothingConfig cfg;
  cfg.n = 10000;
  std::uint64_t run = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_cost_sensitive(model, x, {3, {0, 1, 2, 4}}, cfg, RngKey(++run)).radius);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(cfg.n + cfg.n0));
}
BENCHMARK(BM_CertifyMlp);

void BM_SoftRadiusGradient(benchmark::State& state) {
  const auto model = MlpModel::random(2, MlpModel::kDefaultHidden, 5, RngKey(2));
  const std::vector<double> x{0.3, -0.4};
  const auto k = std::size_t(state.range(0));
  std::uint64_t run = 0;
  for (auto _ : state) {
    const auto g = soft_radius_cost_sensitive(model, x, {3, {0, 1, 2, 4}}, 0.5, k, RngKey(++run), 1e-4,
                                              MaxMode::Smooth);
    benchmark::DoNotOptimize(g.value);
  }
}
BENCHMARK(BM_SoftRadiusGradient)->Arg(16)->Arg(64);

}  // namespace
}  // namespace cssmooth

BENCHMARK_MAIN();
