#include "tcu/plant.hpp"

#include <algorithm>
#include <cmath>

#include "tcu/errors.hpp"

namespace tcu {

int PlantParams::delay_steps() const {
  return std::max(1, static_cast<int>(std::lround(delay_seconds / dt_s)));
}

double PlantParams::heater_efficiency(double t_tank_c) const {
  return std::clamp(1.0 - heat_droop_per_c * (t_tank_c - ambient_c), 0.05, 1.0);
}

PlantState::PlantState(const PlantParams& params, double initial_temp_c, std::uint64_t seed)
    : params_(params),
      tank_temp_c_(initial_temp_c),
      delay_line_(static_cast<std::size_t>(params.delay_steps()), initial_temp_c),
      rng_(seed) {}

void PlantState::step(int u_heat_bit, int u_cool_bit) {
  if ((u_heat_bit != 0 && u_heat_bit != 1) || (u_cool_bit != 0 && u_cool_bit != 1))
    throw InputDomainError("plant_step: actuator bits must be 0 or 1");

  const double t_return = delay_line_[oldest_];
  const double dt = params_.dt_s;

  double rate = 0.0;
  rate += params_.heat_gain_c_per_s * params_.heater_efficiency(tank_temp_c_) * u_heat_bit;
  if (u_cool_bit) {
    const double drive = std::max(0.0, tank_temp_c_ - params_.cooling_water_c);
    rate -= params_.cool_gain_c_per_s * drive /
            (params_.cool_ref_c - params_.cooling_water_c);
  }
  rate -= params_.loss_coeff_per_s * (tank_temp_c_ - params_.ambient_c);
  rate += params_.mix_coeff_per_s * (t_return - tank_temp_c_);

  const double noise = gauss_(rng_) * params_.process_noise_std_c;
  tank_temp_c_ = std::clamp(tank_temp_c_ + dt * rate + noise,
                            params_.temp_min_c, params_.temp_max_c);

  // the updated tank temperature is what feeds the external circuit
  delay_line_[oldest_] = tank_temp_c_;
  oldest_ = (oldest_ + 1) % delay_line_.size();
}

double PlantState::measure() {
  const std::size_t newest = (oldest_ + delay_line_.size() - 1) % delay_line_.size();
  return delay_line_[newest] + gauss_(rng_) * params_.measurement_noise_std_c;
}

}  // namespace tcu
