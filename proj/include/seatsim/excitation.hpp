// Band-limited random seat excitation.
//
// Each axis is a periodic sum of cosines on the harmonics of the excited
// window that fall inside [f_lo, f_hi], with Gaussian coefficients drawn
// deterministically from the seed. Velocity and displacement are the exact
// analytic integrals of that sum, so the three series are mutually
// consistent to machine precision and the displacement is bounded. A short
// smooth ramp at the start of the excited window makes displacement,
// velocity, and acceleration all start from exactly zero, avoiding a
// position jump when the shaker switches on. The whole signal is scaled so
// the sampled acceleration RMS over the excited window hits the target
// exactly.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seatsim/spatial.hpp"

namespace seatsim {

struct ExcitationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExcitationSpec {
  std::uint64_t seed = 1;
  double sample_rate = 1000.0;  // Hz
  double duration = 35.0;       // s, total including the quiet settling window
  double settle_time = 5.0;     // s, exactly zero output before this
  double f_lo = 0.3;            // Hz
  double f_hi = 12.0;           // Hz
  double target_rms = 0.1941;   // m/s², per axis over the excited window
  double ramp_time = 1.0;       // s, smooth switch-on inside the excited window
};

class ExcitationSignal {
 public:
  struct Sample {
    double disp = 0.0;  // m
    double vel = 0.0;   // m/s
    double acc = 0.0;   // m/s²
  };

  static ExcitationSignal generate(const ExcitationSpec& spec);

  const ExcitationSpec& spec() const { return spec_; }

  /// Continuous-time evaluation; exact zeros for t <= settle_time.
  /// Axis 0/1/2 = world x/y/z.
  Sample eval(int axis, double t) const;

  /// Uniform-grid views at the spec sample rate, t_k = k / sample_rate.
  int sample_count() const { return static_cast<int>(acc_[0].size()); }
  const std::vector<double>& acc_series(int axis) const { return acc_[axis]; }
  const std::vector<double>& vel_series(int axis) const { return vel_[axis]; }
  const std::vector<double>& disp_series(int axis) const { return disp_[axis]; }

 private:
  // Consecutive harmonics of the excited window; eval() walks them with a
  // trig recurrence anchored at the first one.
  struct Wave {
    double omega = 0.0;      // rad/s
    double inv_omega = 0.0;  // 1/omega
    double c = 0.0;          // cosine coefficient of the acceleration
    double s = 0.0;          // sine coefficient
  };

  ExcitationSpec spec_;
  double omega_step_ = 0.0;  // harmonic spacing, rad/s
  std::array<std::vector<Wave>, 3> waves_;
  std::array<double, 3> scale_ = {1.0, 1.0, 1.0};
  std::array<std::vector<double>, 3> acc_, vel_, disp_;
};

}  // namespace seatsim
