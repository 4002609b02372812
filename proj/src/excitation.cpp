#include "seatsim/excitation.hpp"

#include <cmath>
#include <random>

namespace seatsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Box-Muller on explicit uniforms; std::normal_distribution is
// implementation-defined, which would break cross-platform determinism.
class GaussianDraw {
 public:
  explicit GaussianDraw(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform_open();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  // Uniform on (0, 1]; log() stays finite.
  double uniform_open() {
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Quintic smoothstep and its first two derivatives; C² at both ends.
struct Ramp {
  double w = 1.0, dw = 0.0, ddw = 0.0;
};

Ramp ramp_at(double t_excited, double ramp_time) {
  if (ramp_time <= 0.0 || t_excited >= ramp_time) return {};
  double s = t_excited / ramp_time;
  Ramp r;
  r.w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  r.dw = 30.0 * s * s * (1.0 - s) * (1.0 - s) / ramp_time;
  r.ddw = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (ramp_time * ramp_time);
  return r;
}

}  // namespace

ExcitationSignal ExcitationSignal::generate(const ExcitationSpec& spec) {
  if (spec.sample_rate <= 0.0) throw ExcitationError("sample rate must be positive");
  if (spec.duration <= spec.settle_time)
    throw ExcitationError("duration must exceed the settling time");
  if (spec.settle_time < 0.0) throw ExcitationError("settling time must be nonnegative");
  if (spec.target_rms <= 0.0) throw ExcitationError("target RMS must be positive");
  if (spec.ramp_time < 0.0 || spec.ramp_time > spec.duration - spec.settle_time)
    throw ExcitationError("ramp time must fit inside the excited window");

  double window = spec.duration - spec.settle_time;
  double df = 1.0 / window;
  if (!(spec.f_lo > 0.0) || !(spec.f_hi > spec.f_lo) || spec.f_hi > 0.5 * spec.sample_rate)
    throw ExcitationError("excitation band is infeasible for this sample rate");
  int j_lo = static_cast<int>(std::ceil(spec.f_lo / df - 1e-9));
  int j_hi = static_cast<int>(std::floor(spec.f_hi / df + 1e-9));
  if (j_lo < 1) j_lo = 1;
  if (j_hi < j_lo)
    throw ExcitationError("excitation band contains no harmonics of the excited window");

  ExcitationSignal sig;
  sig.spec_ = spec;
  sig.omega_step_ = kTwoPi * df;

  GaussianDraw gauss(spec.seed);
  for (int axis = 0; axis < 3; ++axis) {
    auto& waves = sig.waves_[axis];
    waves.reserve(static_cast<std::size_t>(j_hi - j_lo + 1));
    for (int j = j_lo; j <= j_hi; ++j) {
      Wave w;
      w.omega = kTwoPi * df * j;
      w.inv_omega = 1.0 / w.omega;
      w.c = gauss.next();
      w.s = gauss.next();
      waves.push_back(w);
    }
  }

  int n = static_cast<int>(std::llround(spec.duration * spec.sample_rate));
  int k0 = static_cast<int>(std::llround(spec.settle_time * spec.sample_rate));

  // Sample times are reconstructed as k * h exactly like the simulation
  // stepper does, so a run at h = 1/sample_rate lands on these bits.
  double hs = 1.0 / spec.sample_rate;

  // Scale each axis so the sampled acceleration RMS over the excited window
  // equals the target exactly.
  for (int axis = 0; axis < 3; ++axis) {
    double sum_sq = 0.0;
    for (int k = k0; k < n; ++k) {
      double a = sig.eval(axis, static_cast<double>(k) * hs).acc;
      sum_sq += a * a;
    }
    double raw = std::sqrt(sum_sq / static_cast<double>(n - k0));
    if (!(raw > 0.0)) throw ExcitationError("degenerate excitation realization");
    sig.scale_[axis] = spec.target_rms / raw;
  }

  for (int axis = 0; axis < 3; ++axis) {
    sig.acc_[axis].resize(n);
    sig.vel_[axis].resize(n);
    sig.disp_[axis].resize(n);
    for (int k = 0; k < n; ++k) {
      Sample s = sig.eval(axis, static_cast<double>(k) * hs);
      sig.acc_[axis][k] = s.acc;
      sig.vel_[axis][k] = s.vel;
      sig.disp_[axis][k] = s.disp;
    }
  }
  return sig;
}

ExcitationSignal::Sample ExcitationSignal::eval(int axis, double t) const {
  if (axis < 0 || axis > 2) throw ExcitationError("excitation axis out of range");
  double tp = t - spec_.settle_time;
  if (tp < 0.0) return {};

  double ap = 0.0, vp = 0.0, xp = 0.0;
  const auto& waves = waves_[axis];
  if (!waves.empty()) {
    double step_c = std::cos(omega_step_ * tp);
    double step_s = std::sin(omega_step_ * tp);
    double cw = std::cos(waves.front().omega * tp);
    double sw = std::sin(waves.front().omega * tp);
    for (const Wave& w : waves) {
      double basis = w.c * cw + w.s * sw;
      ap += basis;
      vp += (w.c * sw - w.s * cw) * w.inv_omega;
      xp -= basis * (w.inv_omega * w.inv_omega);
      double next_c = cw * step_c - sw * step_s;
      sw = sw * step_c + cw * step_s;
      cw = next_c;
    }
  }

  Ramp r = ramp_at(tp, spec_.ramp_time);
  Sample out;
  out.disp = r.w * xp;
  out.vel = r.dw * xp + r.w * vp;
  out.acc = r.ddw * xp + 2.0 * r.dw * vp + r.w * ap;
  out.disp *= scale_[axis];
  out.vel *= scale_[axis];
  out.acc *= scale_[axis];
  return out;
}

}  // namespace seatsim
