#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gridwire/presets.hpp"

namespace gridwire::presets {

double islanded_mg3_frequency(const grid::GridState& base, double gain, double horizon_s, double dt_s) {
  grid::GridState s = base;
  s.params.droop_gain = gain;
  for (const char* sw : {"sw60to160", "sw54to94", "sw97to197"}) {
    grid::apply_setpoint(s, PointKey{sw, "state"}, 0.0);
  }
  auto steps = static_cast<long>(std::llround(horizon_s / dt_s));
  for (long k = 0; k < steps; ++k) {
    grid::step_in_place(s, dt_s);
  }
  return s.island_of("mg3").freq_hz;
}

CalibrationResult calibrate_droop_gain(const grid::GridState& base, double target_hz, double lo, double hi,
                                       double tol) {
  double f_lo = islanded_mg3_frequency(base, lo) - target_hz;
  double f_hi = islanded_mg3_frequency(base, hi) - target_hz;
  if (f_lo * f_hi > 0.0) {
    throw std::runtime_error(fmt::format("calibration bracket [{}, {}] does not straddle {} Hz", lo, hi, target_hz));
  }
  CalibrationResult result;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    double f_mid = islanded_mg3_frequency(base, mid) - target_hz;
    ++result.iterations;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  result.gain = 0.5 * (lo + hi);
  result.settled_hz = islanded_mg3_frequency(base, result.gain);
  spdlog::debug("droop gain {:.6f} settles MG3 at {:.4f} Hz after {} bisections", result.gain, result.settled_hz,
                result.iterations);
  return result;
}

}  // namespace gridwire::presets
