#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tcu {

/// Parameters of the software surrogate standing in for the real unit:
/// a stirred tank with an electric heater, a cooling coil fed by cooling
/// water, ambient losses, and an external circuit that returns the feed
/// fluid after a pure transport delay.
///
/// Two mild nonlinearities keep the surrogate outside the two-state linear
/// model class: heater efficiency droops as the tank heats up, and the
/// cooling rate scales with the tank/cooling-water temperature difference.
struct PlantParams {
  double dt_s = 1.0;             // actuator clock
  double ambient_c = 20.0;
  double cooling_water_c = 15.0;
  double heat_gain_c_per_s = 0.12;      // full-duty heating rate at ambient efficiency
  double heat_droop_per_c = 0.006;      // efficiency loss per degC above ambient
  double cool_gain_c_per_s = 0.10;      // full-duty cooling rate at cool_ref_c
  double cool_ref_c = 60.0;             // temperature where cool_gain is calibrated
  double loss_coeff_per_s = 2.0e-4;     // ambient loss rate
  double mix_coeff_per_s = 0.01;        // return-line mixing rate
  double delay_seconds = 30.0;          // external circuit transport delay
  double process_noise_std_c = 0.01;    // per 1 s step, on the tank temperature
  double measurement_noise_std_c = 0.03;
  double temp_min_c = 0.0;              // physical saturation band
  double temp_max_c = 200.0;

  int delay_steps() const;
  /// Heater efficiency at tank temperature T (clamped to [0.05, 1]).
  double heater_efficiency(double t_tank_c) const;
};

/// Ground-truth simulator state. One owner per simulation; `step` advances
/// exactly one actuator clock tick.
class PlantState {
 public:
  PlantState(const PlantParams& params, double initial_temp_c, std::uint64_t seed);

  /// Advances one dt with the binary actuator pair (heat, cool).
  void step(int u_heat_bit, int u_cool_bit);

  /// Feed-side temperature (newest value entering the external circuit)
  /// plus measurement noise. Draws from the state's RNG.
  double measure();

  double tank_temp_c() const { return tank_temp_c_; }
  /// Oldest in-transit value: the temperature about to return to the tank.
  double return_temp_c() const { return delay_line_[oldest_]; }

 private:
  const PlantParams params_;
  double tank_temp_c_;
  std::vector<double> delay_line_;  // ring buffer, fixed length delay_steps()
  std::size_t oldest_ = 0;          // index of the value that pops next
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace tcu
