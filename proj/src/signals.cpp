#include "tcu/signals.hpp"

#include <cmath>
#include <string>

#include "tcu/errors.hpp"

namespace tcu {

int DeltaModulator::step(double u) {
  if (!(u >= 0.0 && u <= 1.0))
    throw InputDomainError("modulate_step: analog command " + std::to_string(u) +
                           " outside [0,1]");
  if (!std::isfinite(accum_analog_) || !std::isfinite(accum_digital_))
    throw ContractViolation("modulate_step: accumulators not finite");
  accum_analog_ += u;
  const int bit = accum_digital_ < accum_analog_ ? 1 : 0;
  accum_digital_ += bit;
  return bit;
}

double ReferenceProfile::total_duration() const {
  double total = 0.0;
  for (const auto& [dur, level] : segments) total += dur;
  return total;
}

double ReferenceProfile::level_at(double t) const {
  double acc = 0.0;
  for (const auto& [dur, level] : segments) {
    acc += dur;
    if (t < acc) return level;
  }
  return segments.empty() ? 0.0 : segments.back().second;
}

void validate_profile(const ReferenceProfile& profile, double level_min, double level_max) {
  if (profile.segments.empty()) throw InputDomainError("reference profile is empty");
  for (const auto& [dur, level] : profile.segments) {
    if (!(dur > 0.0)) throw InputDomainError("reference profile: non-positive segment duration");
    if (level < level_min || level > level_max)
      throw InputDomainError("reference profile: level " + std::to_string(level) +
                             " outside safe band [" + std::to_string(level_min) + ", " +
                             std::to_string(level_max) + "]");
  }
}

std::vector<double> make_reference(const ReferenceProfile& profile, double dt) {
  if (profile.segments.empty()) throw InputDomainError("make_reference: empty profile");
  if (!(dt > 0.0)) throw InputDomainError("make_reference: dt must be positive");
  std::vector<double> out;
  for (const auto& [dur, level] : profile.segments) {
    const auto n = static_cast<std::size_t>(std::floor(dur / dt));
    out.insert(out.end(), n, level);
  }
  return out;
}

std::vector<double> decimate(const std::vector<double>& series, int factor) {
  if (series.empty()) throw InputDomainError("decimate: empty series");
  if (factor < 1) throw InputDomainError("decimate: factor must be >= 1");
  if (series.size() < static_cast<std::size_t>(factor))
    throw InputDomainError("decimate: series shorter than factor");
  const std::size_t n = series.size() / factor;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = series[k * factor];
  return out;
}

std::vector<double> window_mean(const std::vector<double>& series, int factor) {
  if (series.empty()) throw InputDomainError("window_mean: empty series");
  if (factor < 1) throw InputDomainError("window_mean: factor must be >= 1");
  if (series.size() < static_cast<std::size_t>(factor))
    throw InputDomainError("window_mean: series shorter than factor");
  const std::size_t n = series.size() / factor;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    for (int j = 0; j < factor; ++j) sum += series[k * factor + j];
    out[k] = sum / factor;
  }
  return out;
}

}  // namespace tcu
