#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "abwv/errors.hpp"
#include "abwv/model.hpp"

namespace abwv {

/// Parameters of the rotating-half-wave-plate experiment.
///   phi         offset angle, radians; the tunable phase is eps = 4 phi
///   omega0      angular velocity of the plate, rad/s; the coupling is g = 2 omega0
///   tau         Gaussian pulse width, seconds (plays the role of sigma)
///   i0          peak intensity, arbitrary units
///   wavelength  meters
///   peak_power  watts (0 = unspecified)
///   a           pulses averaged per estimate
///   dt          waveform sample step, seconds (0 = default tau/100)
struct OpticsScenario {
  double phi = 0.0;
  double omega0 = 0.0;
  double tau = 0.1;
  double i0 = 1.0;
  double wavelength = 795e-9;
  double peak_power = 0.0;
  int a = 1;
  double dt = 0.0;

  double step() const { return dt > 0.0 ? dt : tau / 100.0; }

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("optics: tau must be > 0");
    if (!(std::abs(4.0 * phi) < std::numbers::pi / 2))
      throw ConfigError("optics: |4 phi| must be < pi/2");
    if (!std::isfinite(omega0)) throw ConfigError("optics: omega0 must be finite");
    if (!(i0 > 0.0)) throw ConfigError("optics: i0 must be > 0");
    if (dt < 0.0) throw ConfigError("optics: dt must be >= 0");
    if (a < 1) throw ConfigError("optics: averaged pulse count must be >= 1");
  }
};

/// Piezo drive settings for the rotation ramp.
struct DriveSpec {
  double alpha = 0.0;  ///< piezo response, radians per volt
  double v_pp = 0.0;   ///< peak-to-peak voltage, volts
  double f_r = 0.0;    ///< ramp frequency, Hz

  void validate() const {
    if (alpha < 0.0 || v_pp < 0.0 || f_r < 0.0) throw ConfigError("drive: values must be >= 0");
  }
};

/// Normalized polarization amplitudes at time t, in the H/V and circular bases.
struct JonesSample {
  std::complex<double> c_h;
  std::complex<double> c_v;
  std::complex<double> c_r;
  std::complex<double> c_l;
  double t = 0.0;
};

enum class Port { I1, I2, Sum, Diff };

/// eps = 4 phi, g = 2 omega0, sigma = tau, N = photon count.
inline ModelParams map_to_model(const OpticsScenario& o, double n_photons) {
  o.validate();
  if (!(n_photons >= 1.0)) throw ConfigError("map_to_model: photon count must be >= 1");
  ModelParams p;
  p.epsilon = 4.0 * o.phi;
  p.g = 2.0 * o.omega0;
  p.sigma = o.tau;
  p.n_events = n_photons;
  p.validate();
  return p;
}

/// Inverse of map_to_model on the shared fields; exact round trip.
inline OpticsScenario map_from_model(const ModelParams& p, const OpticsScenario& defaults = {}) {
  p.validate();
  OpticsScenario o = defaults;
  o.phi = p.epsilon / 4.0;
  o.omega0 = p.g / 2.0;
  o.tau = p.sigma;
  return o;
}

/// Predicted time shift of the difference pulse, omega0 tau^2 / phi.
inline double predicted_time_shift(const OpticsScenario& o) {
  o.validate();
  if (o.phi == 0.0) throw SingularConfigError("predicted_time_shift: phi = 0 is singular");
  return o.omega0 * o.tau * o.tau / o.phi;
}

/// Cramer-Rao bound on omega0: 1/(4 sqrt(a N) tau).
inline double crb_omega(const OpticsScenario& o, double n_photons) {
  o.validate();
  if (!(n_photons >= 1.0)) throw ConfigError("crb_omega: photon count must be >= 1");
  return 1.0 / (4.0 * std::sqrt(static_cast<double>(o.a) * n_photons) * o.tau);
}

/// Closed-form pulse intensities:
///   I1,2 = (I0/2) [1 -+ sin(4 phi + 4 omega0 t)] e^{-t^2/2 tau^2}
///   Sum  = I0 e^{-t^2/2 tau^2}         (phi- and omega0-independent)
///   Diff = I0 sin(4 phi + 4 omega0 t) e^{-t^2/2 tau^2}
inline double intensity_at(const OpticsScenario& o, double t, Port port) {
  o.validate();
  const double env = std::exp(-t * t / (2.0 * o.tau * o.tau));
  switch (port) {
    case Port::Sum:
      return o.i0 * env;
    case Port::Diff:
      return o.i0 * std::sin(4.0 * o.phi + 4.0 * o.omega0 * t) * env;
    case Port::I1:
      return 0.5 * o.i0 * (1.0 - std::sin(4.0 * o.phi + 4.0 * o.omega0 * t)) * env;
    case Port::I2:
      return 0.5 * o.i0 * (1.0 + std::sin(4.0 * o.phi + 4.0 * o.omega0 * t)) * env;
  }
  throw ConfigError("intensity_at: unknown port");
}

/// Polarization after the rotating HWP. A diagonal input rotated by
/// theta = 2(phi + omega0 t) gives
///   c_h = (cos th - sin th)/sqrt(2),  c_v = (cos th + sin th)/sqrt(2),
/// and in the circular basis c_r = (c_h + i c_v)/sqrt(2),
/// c_l = (c_h - i c_v)/sqrt(2), so arg(c_r/c_l) = 4(phi + omega0 t) + pi/2.
inline JonesSample jones_after_hwp(const OpticsScenario& o, double t) {
  o.validate();
  const double th = 2.0 * (o.phi + o.omega0 * t);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  JonesSample j;
  j.t = t;
  j.c_h = (std::cos(th) - std::sin(th)) * inv_sqrt2;
  j.c_v = (std::cos(th) + std::sin(th)) * inv_sqrt2;
  j.c_r = (j.c_h + std::complex<double>(0.0, 1.0) * j.c_v) * inv_sqrt2;
  j.c_l = (j.c_h - std::complex<double>(0.0, 1.0) * j.c_v) * inv_sqrt2;
  return j;
}

/// Rotation rate of the 60%-duty triangle drive ramp: (10/6) alpha Vpp f_r.
inline double drive_to_omega(const DriveSpec& d) {
  d.validate();
  return (10.0 / 6.0) * d.alpha * d.v_pp * d.f_r;
}

/// Photon budget of a Gaussian pulse: energy P0 sqrt(2 pi) tau divided by
/// the photon energy h c / lambda.
inline double photons_from_power(double peak_power, double tau, double wavelength) {
  if (!(peak_power > 0.0) || !(tau > 0.0) || !(wavelength > 0.0))
    throw ConfigError("photons_from_power: all inputs must be > 0");
  constexpr double kPlanck = 6.62607015e-34;      // J s
  constexpr double kLightSpeed = 299792458.0;     // m/s
  const double pulse_energy = peak_power * std::sqrt(2.0 * std::numbers::pi) * tau;
  return pulse_energy * wavelength / (kPlanck * kLightSpeed);
}

}  // namespace abwv
