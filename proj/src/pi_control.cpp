#include "tcu/pi_control.hpp"

#include <algorithm>
#include <cmath>

#include "tcu/errors.hpp"

namespace tcu {

AnalogPair split_command(double u_raw) {
  AnalogPair u;
  u.heat = std::clamp(u_raw, 0.0, 1.0);
  u.cool = std::clamp(-u_raw, 0.0, 1.0);
  return u;
}

AnalogPair PiController::step(double reference_c, double measured_c) {
  if (!std::isfinite(reference_c) || !std::isfinite(measured_c))
    throw InputDomainError("pi_step: non-finite reference or measurement");

  const double e = reference_c - measured_c;
  const double candidate_sum = integral_ + e;
  const double u_raw = kp_ * e + ki_ * candidate_sum;

  saturated_ = std::fabs(u_raw) >= 1.0;
  if (!saturated_ || !anti_windup_) integral_ = candidate_sum;

  return split_command(u_raw);
}

}  // namespace tcu
