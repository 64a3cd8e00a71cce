#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tcu/errors.hpp"
#include "tcu/signals.hpp"

using namespace tcu;

namespace {

std::vector<int> run_modulator(double u, int steps) {
  DeltaModulator mod;
  std::vector<int> bits;
  for (int k = 0; k < steps; ++k) bits.push_back(mod.step(u));
  return bits;
}

}  // namespace

TEST_CASE("delta modulation of constant commands") {
  CHECK(run_modulator(0.0, 6) == std::vector<int>{0, 0, 0, 0, 0, 0});
  CHECK(run_modulator(1.0, 6) == std::vector<int>{1, 1, 1, 1, 1, 1});
  // hand-evaluated recurrences
  CHECK(run_modulator(0.5, 4) == std::vector<int>{1, 0, 1, 0});
  CHECK(run_modulator(0.3, 7) == std::vector<int>{1, 0, 0, 1, 0, 0, 1});
}

TEST_CASE("delta modulation rejects out-of-range commands") {
  DeltaModulator mod;
  CHECK_THROWS_AS(mod.step(-0.1), InputDomainError);
  CHECK_THROWS_AS(mod.step(1.5), InputDomainError);
}

TEST_CASE("modulation discrepancy stays within one sample") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DeltaModulator mod;
    double analog_sum = 0.0, digital_sum = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const double u = dist(rng);
      analog_sum += u;
      digital_sum += mod.step(u);
      CHECK(std::fabs(analog_sum - digital_sum) <= 1.0);
    }
  }
}

TEST_CASE("modulated mean approaches the analog command") {
  for (double u : {0.1, 0.37, 0.62, 0.95}) {
    const int k = 5000;
    const auto bits = run_modulator(u, k);
    double mean = 0.0;
    for (int b : bits) mean += b;
    mean /= k;
    CHECK(std::fabs(mean - u) <= 1.0 / k);
  }
}

TEST_CASE("decimation keeps every factor-th instantaneous sample") {
  const std::vector<double> identity{1, 2, 3, 4, 5, 6, 7};
  CHECK(decimate(identity, 1) == identity);
  CHECK(decimate({10, 10, 10, 20, 20, 20}, 3) == std::vector<double>{10, 20});
  CHECK_THROWS_AS(decimate({}, 2), InputDomainError);
}

TEST_CASE("input resampling averages whole windows") {
  CHECK(window_mean({1, 0, 0, 1, 1, 0}, 3) == std::vector<double>{1.0 / 3, 2.0 / 3});
  CHECK(window_mean({1, 2, 3, 4}, 1) == std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(window_mean({}, 3), InputDomainError);
}

TEST_CASE("window mean preserves window input energy under hold") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> series(60);
  for (auto& v : series) v = dist(rng);
  const int factor = 6;
  const auto means = window_mean(series, factor);
  for (std::size_t w = 0; w < means.size(); ++w) {
    double window_sum = 0.0;
    for (int j = 0; j < factor; ++j) window_sum += series[w * factor + j];
    // holding the mean for `factor` steps delivers the same total input
    CHECK(means[w] * factor == doctest::Approx(window_sum).epsilon(1e-12));
  }
}

TEST_CASE("piecewise-constant reference expansion") {
  CHECK(make_reference({{{12.0, 40.0}}}, 6.0) == std::vector<double>{40, 40});
  CHECK(make_reference({{{6.0, 40.0}, {12.0, 60.0}}}, 6.0) ==
        std::vector<double>{40, 60, 60});
  // durations floor to whole samples rather than erroring
  CHECK(make_reference({{{7.0, 50.0}}}, 6.0) == std::vector<double>{50});
  CHECK_THROWS_AS(make_reference(ReferenceProfile{}, 6.0), InputDomainError);
}

TEST_CASE("profile validation enforces the safe band") {
  ReferenceProfile profile{{{60.0, 40.0}, {60.0, 95.0}}};
  CHECK_THROWS_AS(validate_profile(profile, 30.0, 80.0), InputDomainError);
  ReferenceProfile zero_duration{{{0.0, 40.0}}};
  CHECK_THROWS_AS(validate_profile(zero_duration, 30.0, 80.0), InputDomainError);
}
