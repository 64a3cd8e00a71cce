#pragma once

namespace tcu {

/// Analog actuator command pair, each channel in [0,1].
struct AnalogPair {
  double heat = 0.0;
  double cool = 0.0;
};

/// Discrete proportional-integral controller with the heat/cool saturation
/// split and anti-windup (the error sum is frozen while the raw command is
/// saturated). Runs at the actuator clock.
class PiController {
 public:
  PiController(double kp, double ki, bool anti_windup = true)
      : kp_(kp), ki_(ki), anti_windup_(anti_windup) {}

  /// One controller step: e = r - y, raw command kp*e + ki*sum(e), then the
  /// split into (heat, cool). Positive raw commands heat, negative cool.
  AnalogPair step(double reference_c, double measured_c);

  double integral() const { return integral_; }
  /// True when the last step left the raw command saturated (|u| >= 1).
  bool saturated() const { return saturated_; }

  void reset() {
    integral_ = 0.0;
    saturated_ = false;
  }

 private:
  double kp_;
  double ki_;
  bool anti_windup_;
  double integral_ = 0.0;  // accumulated error, degC * steps
  bool saturated_ = false;
};

/// Splits a raw command in (-inf, inf) into the saturated (heat, cool) pair:
/// heat = clamp(u, 0, 1), cool = clamp(-u, 0, 1). At most one is nonzero.
AnalogPair split_command(double u_raw);

}  // namespace tcu
