#include <doctest.h>

#include <cmath>
#include <random>

#include "tcu/pi_control.hpp"

using namespace tcu;

TEST_CASE("pi output at zero error is zero") {
  PiController pi(0.8, 0.01);
  const AnalogPair u = pi.step(50.0, 50.0);
  CHECK(u.heat == 0.0);
  CHECK(u.cool == 0.0);
  CHECK_FALSE(pi.saturated());
}

TEST_CASE("proportional-only command splits to the heat channel") {
  PiController pi(1.0, 0.0);
  const AnalogPair u = pi.step(50.5, 50.0);
  CHECK(u.heat == doctest::Approx(0.5));
  CHECK(u.cool == 0.0);
}

TEST_CASE("saturating error cools fully and freezes the integral") {
  PiController pi(1.0, 0.0);
  const AnalogPair u = pi.step(47.0, 50.0);  // e = -3
  CHECK(u.heat == 0.0);
  CHECK(u.cool == 1.0);
  CHECK(pi.saturated());
  CHECK(pi.integral() == 0.0);  // the -3 was not accumulated
  // next call with zero error: frozen integral contributes nothing
  const AnalogPair u2 = pi.step(50.0, 50.0);
  CHECK(u2.heat == 0.0);
  CHECK(u2.cool == 0.0);
}

TEST_CASE("split is exclusive and bounded for any raw command") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const AnalogPair u = split_command(dist(rng));
    CHECK(u.heat >= 0.0);
    CHECK(u.heat <= 1.0);
    CHECK(u.cool >= 0.0);
    CHECK(u.cool <= 1.0);
    CHECK((u.heat == 0.0 || u.cool == 0.0));
  }
}

TEST_CASE("anti-windup bounds the integral under persistent saturation") {
  PiController with_aw(0.5, 0.05, true);
  PiController without_aw(0.5, 0.05, false);
  for (int k = 0; k < 1000; ++k) {
    with_aw.step(60.0, 50.0);  // persistent e = 10, always saturating
    without_aw.step(60.0, 50.0);
  }
  CHECK(std::fabs(with_aw.integral()) < 20.0);
  CHECK(std::fabs(without_aw.integral()) > 1000.0);
}
