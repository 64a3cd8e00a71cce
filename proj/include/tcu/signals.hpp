#pragma once

#include <vector>

namespace tcu {

/// Converts an analog duty command in [0,1] to a binary on/off stream whose
/// running sum tracks the analog running sum. One modulator per actuator
/// channel. The discrepancy between the two running sums stays in (-1, 1].
class DeltaModulator {
 public:
  /// Emits the next bit for analog command `u` in [0,1].
  /// The bit is 1 iff the digital running sum (before this step) is strictly
  /// below the analog running sum including `u`; ties emit 0.
  int step(double u);

  double accum_analog() const { return accum_analog_; }
  double accum_digital() const { return accum_digital_; }

  void reset() { accum_analog_ = accum_digital_ = 0.0; }

 private:
  double accum_analog_ = 0.0;
  double accum_digital_ = 0.0;  // integer-valued count of emitted 1s
};

/// Piecewise-constant reference, a list of (duration_s, level_c) segments.
struct ReferenceProfile {
  std::vector<std::pair<double, double>> segments;

  double total_duration() const;
  /// Level at time t (seconds from profile start); last level past the end.
  double level_at(double t) const;
};

/// Validates durations > 0 and levels within [level_min, level_max].
void validate_profile(const ReferenceProfile& profile, double level_min, double level_max);

/// Expands a profile into a series sampled every `dt` seconds. Segment
/// durations that are not multiples of dt are floored to whole samples.
std::vector<double> make_reference(const ReferenceProfile& profile, double dt);

/// Keeps every `factor`-th sample starting at index 0 (instantaneous readings).
std::vector<double> decimate(const std::vector<double>& series, int factor);

/// Mean over consecutive non-overlapping windows of `factor` samples
/// (duty ratios; the window mean preserves delivered input energy).
std::vector<double> window_mean(const std::vector<double>& series, int factor);

}  // namespace tcu
