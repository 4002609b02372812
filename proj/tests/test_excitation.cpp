#include <doctest.h>

#include <cmath>
#include <complex>

#include "seatsim/excitation.hpp"

using namespace seatsim;

namespace {

ExcitationSpec small_spec() {
  ExcitationSpec s;
  s.seed = 7;
  s.sample_rate = 500.0;
  s.duration = 12.0;
  s.settle_time = 2.0;
  s.f_lo = 0.3;
  s.f_hi = 12.0;
  s.target_rms = 0.1941;
  s.ramp_time = 1.0;
  return s;
}

double window_rms(const ExcitationSignal& sig, int axis) {
  const auto& a = sig.acc_series(axis);
  int k0 = static_cast<int>(std::llround(sig.spec().settle_time * sig.spec().sample_rate));
  double s = 0.0;
  for (int k = k0; k < static_cast<int>(a.size()); ++k) s += a[k] * a[k];
  return std::sqrt(s / static_cast<double>(a.size() - k0));
}

// DFT magnitude of the excited window at harmonic j of that window.
double window_dft_mag(const ExcitationSignal& sig, int axis, int j) {
  const auto& a = sig.acc_series(axis);
  int k0 = static_cast<int>(std::llround(sig.spec().settle_time * sig.spec().sample_rate));
  int n = static_cast<int>(a.size()) - k0;
  std::complex<double> acc = 0.0;
  for (int k = 0; k < n; ++k) {
    double ang = -2.0 * M_PI * static_cast<double>(j) * static_cast<double>(k) / n;
    acc += a[k0 + k] * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return std::abs(acc) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("acceleration RMS over the excited window hits the target exactly") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  for (int axis = 0; axis < 3; ++axis) {
    double r = window_rms(sig, axis);
    CHECK(std::abs(r - 0.1941) < 1e-9 * 0.1941);
  }
}

TEST_CASE("every sample before the settling time is exactly zero") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  int k0 = static_cast<int>(std::llround(2.0 * 500.0));
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < k0; ++k) {
      CHECK(sig.acc_series(axis)[k] == 0.0);
      CHECK(sig.vel_series(axis)[k] == 0.0);
      CHECK(sig.disp_series(axis)[k] == 0.0);
    }
    auto s = sig.eval(axis, 1.999999);
    CHECK(s.acc == 0.0);
    CHECK(s.vel == 0.0);
    CHECK(s.disp == 0.0);
  }
}

TEST_CASE("the switch-on is continuous in displacement, velocity and acceleration") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  for (int axis = 0; axis < 3; ++axis) {
    auto s = sig.eval(axis, 2.0 + 1e-6);
    CHECK(std::abs(s.disp) < 1e-12);
    CHECK(std::abs(s.vel) < 1e-9);
    CHECK(std::abs(s.acc) < 1e-3);
  }
}

TEST_CASE("velocity and displacement are exact antiderivatives of the acceleration") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  const double h = 1e-4;
  // Points both inside and after the ramp; the envelope is differentiated
  // analytically, so consistency must hold throughout.
  for (double t : {2.31, 2.72, 3.5, 5.113, 9.87}) {
    for (int axis = 0; axis < 3; ++axis) {
      auto lo = sig.eval(axis, t - h);
      auto hi = sig.eval(axis, t + h);
      auto mid = sig.eval(axis, t);
      CHECK(std::abs((hi.disp - lo.disp) / (2 * h) - mid.vel) < 1e-5);
      CHECK(std::abs((hi.vel - lo.vel) / (2 * h) - mid.acc) < 1e-4);
    }
  }
}

TEST_CASE("spectral content stays inside the requested band") {
  // Without the ramp the excited window is exactly one period of the
  // synthesis, so discrete orthogonality pins out-of-band bins at zero.
  ExcitationSpec spec = small_spec();
  spec.ramp_time = 0.0;
  ExcitationSignal sig = ExcitationSignal::generate(spec);
  // Window 10 s: harmonic j is at j * 0.1 Hz, band [0.3, 12] is j in [3, 120].
  double in_band = window_dft_mag(sig, 0, 50);
  CHECK(in_band > 1e-4);
  for (int j : {0, 1, 2, 121, 150, 300, 1000}) {
    CHECK(window_dft_mag(sig, 0, j) < 1e-12);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  ExcitationSignal a = ExcitationSignal::generate(small_spec());
  ExcitationSignal b = ExcitationSignal::generate(small_spec());
  ExcitationSpec other = small_spec();
  other.seed = 8;
  ExcitationSignal c = ExcitationSignal::generate(other);
  bool all_equal = true;
  bool any_diff = false;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < a.sample_count(); ++k) {
      all_equal = all_equal && a.acc_series(axis)[k] == b.acc_series(axis)[k] &&
                  a.vel_series(axis)[k] == b.vel_series(axis)[k] &&
                  a.disp_series(axis)[k] == b.disp_series(axis)[k];
      any_diff = any_diff || a.acc_series(axis)[k] != c.acc_series(axis)[k];
    }
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("the three axes carry independent realizations") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  int k = 3000;
  CHECK(sig.acc_series(0)[k] != sig.acc_series(1)[k]);
  CHECK(sig.acc_series(1)[k] != sig.acc_series(2)[k]);
}

TEST_CASE("displacement stays bounded") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  for (int axis = 0; axis < 3; ++axis) {
    double worst = 0.0;
    for (double d : sig.disp_series(axis)) worst = std::max(worst, std::abs(d));
    CHECK(worst < 1.0);
    CHECK(worst > 0.0);
  }
}

TEST_CASE("sampling covers the full duration at the requested rate") {
  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  CHECK(sig.sample_count() == 6000);
}

TEST_CASE("infeasible requests are rejected") {
  auto expect_throw = [](auto mutate) {
    ExcitationSpec s = small_spec();
    mutate(s);
    CHECK_THROWS_AS(ExcitationSignal::generate(s), ExcitationError);
  };
  expect_throw([](ExcitationSpec& s) { s.f_hi = 400.0; });          // above Nyquist
  expect_throw([](ExcitationSpec& s) { s.f_lo = 12.0; });           // empty band
  expect_throw([](ExcitationSpec& s) { s.f_lo = 0.0; });            // DC is not bandpass
  expect_throw([](ExcitationSpec& s) {                              // no harmonic in band
    s.f_lo = 0.001;
    s.f_hi = 0.02;
  });
  expect_throw([](ExcitationSpec& s) { s.duration = 2.0; });        // no excited window
  expect_throw([](ExcitationSpec& s) { s.ramp_time = -1.0; });
  expect_throw([](ExcitationSpec& s) { s.ramp_time = 11.0; });      // wider than window
  expect_throw([](ExcitationSpec& s) { s.target_rms = 0.0; });
  expect_throw([](ExcitationSpec& s) { s.sample_rate = -5.0; });

  ExcitationSignal sig = ExcitationSignal::generate(small_spec());
  CHECK_THROWS_AS(sig.eval(3, 1.0), ExcitationError);
}
