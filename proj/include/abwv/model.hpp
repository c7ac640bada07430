#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "abwv/errors.hpp"

namespace abwv {

/// Measurement scheme being modelled or simulated.
enum class Technique { ABWV, WVA, Standard, CWBalanced };

/// Output port of the almost-balanced measurement. Det1 carries the
/// 1 - sin(eps + 2gq) branch, Det2 the 1 + sin(eps + 2gq) branch.
enum class DetectorId { Det1, Det2 };

inline const char* to_string(Technique t) {
  switch (t) {
    case Technique::ABWV: return "abwv";
    case Technique::WVA: return "wva";
    case Technique::Standard: return "standard";
    case Technique::CWBalanced: return "cw";
  }
  return "?";
}

inline Technique technique_from_string(const std::string& s) {
  if (s == "abwv") return Technique::ABWV;
  if (s == "wva") return Technique::WVA;
  if (s == "standard") return Technique::Standard;
  if (s == "cw") return Technique::CWBalanced;
  throw ConfigError("unknown technique '" + s + "' (expected abwv|wva|standard|cw)");
}

/// Abstract protocol parameters.
///   g        coupling strength (inverse meter-units)
///   epsilon  unbalancing phase, radians, in (-pi/2, pi/2)
///   sigma    meter standard deviation (meter-units), > 0
///   n_events expected total event count, >= 1
struct ModelParams {
  double g = 0.0;
  double epsilon = 0.0;
  double sigma = 1.0;
  double n_events = 1.0;

  void validate() const {
    if (!std::isfinite(g)) throw ConfigError("params: g must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("params: sigma must be > 0");
    if (!(n_events >= 1.0) || !std::isfinite(n_events)) throw ConfigError("params: n_events must be >= 1");
    if (!(epsilon > -std::numbers::pi / 2 && epsilon < std::numbers::pi / 2))
      throw ConfigError("params: epsilon must lie in (-pi/2, pi/2)");
  }
};

/// The two weak values of the measurement, -i cos(eps)/(1 -+ sin(eps)).
/// Both are purely imaginary and their magnitudes multiply to 1.
struct WeakValuePair {
  std::complex<double> aw1;
  std::complex<double> aw2;
};

struct FisherReport {
  double f1 = 0.0;       ///< Fisher information seen by detector 1 (meter-units^2)
  double f2 = 0.0;       ///< same for detector 2
  double f_total = 0.0;  ///< f1 + f2
  double crb = 0.0;      ///< f_total^(-1/2), inverse meter-units
  Technique technique = Technique::ABWV;
};

enum class Regime { Weak, Marginal, Strong };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Weak: return "weak";
    case Regime::Marginal: return "marginal";
    case Regime::Strong: return "strong";
  }
  return "?";
}

/// Validity diagnostics of the weak-interaction condition 2g*sigma << min{1, tan eps}.
struct RegimeDiagnostics {
  double validity_ratio = 0.0;  ///< 2|g|sigma / min{1, |tan eps|}
  Regime regime = Regime::Weak;
};

inline constexpr double kWeakThreshold = 0.1;
inline constexpr double kStrongThreshold = 0.5;

/// Numerical quadrature/differentiation controls for fisher_numeric.
///   half_width_sigmas  grid extent in units of sigma (>= 8)
///   nodes              trapezoid node count
///   fd_step            central-difference step for d/dg, scaled by max(1, |g|)
///   tolerance          max allowed estimated relative error
struct QuadratureSpec {
  double half_width_sigmas = 8.0;
  int nodes = 4001;
  double fd_step = 1e-6;
  double tolerance = 1e-7;

  void validate() const {
    if (!(half_width_sigmas >= 8.0)) throw ConfigError("quadrature: extent must be >= 8 sigma");
    if (nodes < 9) throw ConfigError("quadrature: too few nodes");
    if (!(fd_step > 0.0)) throw ConfigError("quadrature: fd_step must be > 0");
    if (!(tolerance > 0.0)) throw ConfigError("quadrature: tolerance must be > 0");
  }
};

/// Uniform evaluation grid for approximation_error.
struct GridSpec {
  double half_width_sigmas = 8.0;
  int nodes = 2001;
};

/// Normalized Gaussian pdf with mean 0 and standard deviation sigma.
inline double gaussian_pdf(double x, double sigma) {
  const double u = x / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

namespace detail {

// 0.5*(1 - sin th) and 0.5*(1 + sin th) written as squared half-angle
// factors. Algebraically identical, but these keep full relative precision
// near the zeros of the detection probability, which the Fisher quadrature
// integrand divides by.
inline double half_one_minus_sin(double th) {
  const double s = std::sin(std::numbers::pi / 4 - 0.5 * th);
  return s * s;
}
inline double half_one_plus_sin(double th) {
  const double c = std::cos(std::numbers::pi / 4 - 0.5 * th);
  return c * c;
}

}  // namespace detail

/// Sub-normalized detection density at meter reading x.
///
/// ABWV:     P_i(q) = 1/2 [1 -+ sin(eps + 2gq)] P(q), i = Det1/Det2
/// WVA:      P(q)   = sin^2(eps/2 + gq) P(q), dark port (Det2) only
/// Standard: normalized Gaussian in the conjugate momentum, mean g,
///           standard deviation 1/(2 sigma); detector ignored
inline double density(Technique technique, const ModelParams& p, DetectorId detector, double x) {
  p.validate();
  if (!std::isfinite(x)) throw ConfigError("density: non-finite evaluation point");
  switch (technique) {
    case Technique::ABWV: {
      const double th = p.epsilon + 2.0 * p.g * x;
      const double w = (detector == DetectorId::Det1) ? detail::half_one_minus_sin(th)
                                                      : detail::half_one_plus_sin(th);
      return w * gaussian_pdf(x, p.sigma);
    }
    case Technique::WVA: {
      if (detector == DetectorId::Det1)
        throw ConfigError("density: WVA models only the dark port (Det2)");
      const double s = std::sin(0.5 * p.epsilon + p.g * x);
      return s * s * gaussian_pdf(x, p.sigma);
    }
    case Technique::Standard:
      return gaussian_pdf(x - p.g, 0.5 / p.sigma);
    case Technique::CWBalanced:
      throw ConfigError("density: CWBalanced is a waveform scenario, not an event-level density");
  }
  throw ConfigError("density: unknown technique");
}

/// Expected fraction of prepared events landing on the given detector.
/// ABWV: N_i/N = 1/2 (1 -+ e^{-2 g^2 sigma^2} sin eps); the two fractions
/// sum to 1 exactly. WVA dark port: 1/2 (1 - e^{-2 g^2 sigma^2} cos eps).
/// Standard: 1 (single detector, nothing discarded).
inline double detector_fraction(Technique technique, const ModelParams& p, DetectorId detector) {
  p.validate();
  const double damp = std::exp(-2.0 * p.g * p.g * p.sigma * p.sigma);
  switch (technique) {
    case Technique::ABWV: {
      const double d2 = 0.5 * (1.0 + damp * std::sin(p.epsilon));
      return (detector == DetectorId::Det2) ? d2 : 1.0 - d2;
    }
    case Technique::WVA:
      if (detector == DetectorId::Det1)
        throw ConfigError("detector_fraction: WVA models only the dark port (Det2)");
      return 0.5 * (1.0 - damp * std::cos(p.epsilon));
    case Technique::Standard:
      return 1.0;
    case Technique::CWBalanced:
      throw ConfigError("detector_fraction: CWBalanced has no event-level detectors");
  }
  throw ConfigError("detector_fraction: unknown technique");
}

/// Closed-form Fisher information about g.
///
/// ABWV per detector: F_i = 2 N sigma^2 [1 +- (1 - 4g^2 sigma^2) e^{-2 g^2 sigma^2} sin eps],
/// with the + branch on Det1 so that F_1(g=0) = 2 N sigma^2 (1 + sin eps);
/// the total is 4 N sigma^2 for every g and eps.
/// WVA dark port: F = 2 N sigma^2 [1 + (1 - 4g^2 sigma^2) e^{-2 g^2 sigma^2} cos eps].
/// Standard: F = 4 N sigma^2.
inline FisherReport fisher_exact(Technique technique, const ModelParams& p) {
  p.validate();
  const double ns2 = p.n_events * p.sigma * p.sigma;
  const double gs2 = p.g * p.g * p.sigma * p.sigma;
  const double mod = (1.0 - 4.0 * gs2) * std::exp(-2.0 * gs2);
  FisherReport r;
  r.technique = technique;
  switch (technique) {
    case Technique::ABWV:
      r.f1 = 2.0 * ns2 * (1.0 + mod * std::sin(p.epsilon));
      r.f2 = 2.0 * ns2 * (1.0 - mod * std::sin(p.epsilon));
      r.f_total = 4.0 * ns2;
      break;
    case Technique::WVA:
      r.f1 = 0.0;
      r.f2 = 2.0 * ns2 * (1.0 + mod * std::cos(p.epsilon));
      r.f_total = r.f2;
      break;
    case Technique::Standard:
      r.f1 = 4.0 * ns2;
      r.f2 = 0.0;
      r.f_total = r.f1;
      break;
    case Technique::CWBalanced:
      throw ConfigError("fisher_exact: CWBalanced has no event-level Fisher information");
  }
  r.crb = 1.0 / std::sqrt(r.f_total);
  return r;
}

namespace detail {

// Trapezoid sum of the score-squared integrand, built from density() alone.
// stride > 1 evaluates a coarser subgrid for the convergence estimate.
template <typename DensityFn>
double fisher_quad_sum(DensityFn&& dens, double lo, double hi, int nodes, int stride, double dg) {
  const double h = (hi - lo) / (nodes - 1);
  double sum = 0.0;
  int used = 0;
  double last_w = 0.0;
  for (int i = 0; i < nodes; i += stride) {
    double q = lo + h * i;
    double p = dens(q, 0.0);
    if (p == 0.0) {
      // Node fell exactly on a zero of the detection probability. The
      // integrand has a finite limit there; evaluate a hair to the side.
      q += h * 1e-3;
      p = dens(q, 0.0);
      if (p == 0.0) continue;
    }
    const double deriv = (dens(q, dg) - dens(q, -dg)) / (2.0 * dg);
    double w = deriv * deriv / p;
    if (!std::isfinite(w)) throw NumericFailureError("fisher_numeric: non-finite integrand");
    const bool edge = (i == 0 || i + stride >= nodes);
    sum += edge ? 0.5 * w : w;
    last_w = w;
    ++used;
    (void)last_w;
  }
  if (used < 3) throw NumericFailureError("fisher_numeric: degenerate grid");
  return sum * h * stride;
}

}  // namespace detail

/// Fisher information computed numerically: N * integral of
/// sum_i (d_g P_i)^2 / P_i over the meter variable, using only density()
/// evaluations and a central finite difference in g. Serves as the
/// independent oracle for fisher_exact. Throws NumericFailureError when the
/// coarse/fine quadrature disagreement exceeds the requested tolerance.
inline double fisher_numeric(Technique technique, const ModelParams& p,
                             const QuadratureSpec& quad = {}) {
  p.validate();
  quad.validate();
  const double dg = quad.fd_step * std::max(1.0, std::abs(p.g));

  double lo, hi;
  std::vector<DetectorId> dets;
  if (technique == Technique::ABWV) {
    lo = -quad.half_width_sigmas * p.sigma;
    hi = quad.half_width_sigmas * p.sigma;
    dets = {DetectorId::Det1, DetectorId::Det2};
  } else if (technique == Technique::WVA) {
    lo = -quad.half_width_sigmas * p.sigma;
    hi = quad.half_width_sigmas * p.sigma;
    dets = {DetectorId::Det2};
  } else if (technique == Technique::Standard) {
    const double sp = 0.5 / p.sigma;
    lo = p.g - quad.half_width_sigmas * sp;
    hi = p.g + quad.half_width_sigmas * sp;
    dets = {DetectorId::Det1};
  } else {
    throw ConfigError("fisher_numeric: unsupported technique");
  }

  double fine = 0.0, coarse = 0.0;
  for (DetectorId det : dets) {
    auto dens = [&](double q, double gshift) {
      ModelParams shifted = p;
      shifted.g += gshift;
      return density(technique, shifted, det, q);
    };
    fine += detail::fisher_quad_sum(dens, lo, hi, quad.nodes, 1, dg);
    coarse += detail::fisher_quad_sum(dens, lo, hi, quad.nodes, 2, dg);
  }
  const double est_rel_err = std::abs(fine - coarse) / std::max(std::abs(fine), 1e-300);
  if (est_rel_err > quad.tolerance)
    throw NumericFailureError("fisher_numeric: quadrature did not converge (estimated error " +
                              std::to_string(est_rel_err) + ")");
  return p.n_events * fine;
}

/// Cramer-Rao bound on the standard deviation of g: 1/(2 sqrt(N) sigma).
inline double crb(const ModelParams& p) {
  p.validate();
  return 1.0 / (2.0 * std::sqrt(p.n_events) * p.sigma);
}

/// Weak values A_w^{1,2} = -+ i cos(eps)/(1 -+ sin(eps)).
inline WeakValuePair weak_values(double epsilon) {
  if (!(epsilon > -std::numbers::pi / 2 && epsilon < std::numbers::pi / 2))
    throw ConfigError("weak_values: epsilon must lie in (-pi/2, pi/2)");
  const double c = std::cos(epsilon);
  const double s = std::sin(epsilon);
  return WeakValuePair{std::complex<double>(0.0, -c / (1.0 - s)),
                       std::complex<double>(0.0, +c / (1.0 + s))};
}

/// Peak shift predicted by the weak-interaction approximation.
/// ABWV: 2 g sigma^2 cot(eps); WVA: 2 g sigma^2 cot(eps/2); Standard: g.
inline double predicted_shift(Technique technique, const ModelParams& p) {
  p.validate();
  switch (technique) {
    case Technique::ABWV:
      if (p.epsilon == 0.0)
        throw SingularConfigError("predicted_shift: epsilon = 0 is singular for ABWV");
      return 2.0 * p.g * p.sigma * p.sigma / std::tan(p.epsilon);
    case Technique::WVA:
      if (p.epsilon == 0.0)
        throw SingularConfigError("predicted_shift: epsilon = 0 is singular for WVA");
      return 2.0 * p.g * p.sigma * p.sigma / std::tan(0.5 * p.epsilon);
    case Technique::Standard:
      return p.g;
    case Technique::CWBalanced:
      throw ConfigError("predicted_shift: CWBalanced has no meter-shift model");
  }
  throw ConfigError("predicted_shift: unknown technique");
}

/// Classify the weak-interaction validity ratio 2|g|sigma / min{1, |tan eps|}.
inline RegimeDiagnostics regime_check(const ModelParams& p) {
  p.validate();
  const double num = 2.0 * std::abs(p.g) * p.sigma;
  const double den = std::min(1.0, std::abs(std::tan(p.epsilon)));
  RegimeDiagnostics d;
  d.validity_ratio = (num == 0.0) ? 0.0 : num / den;  // den = 0 with g != 0 -> inf
  d.regime = (d.validity_ratio <= kWeakThreshold)  ? Regime::Weak
             : (d.validity_ratio > kStrongThreshold) ? Regime::Strong
                                                     : Regime::Marginal;
  return d;
}

/// Sup-norm error of the Eq.-style approximation
///   sin(eps + 2gq) P(q) ~ sin(eps) P(q - 2 g sigma^2 cot eps)
/// over a uniform grid, relative to the approximate peak sin(eps) P(0).
inline double approximation_error(const ModelParams& p, const GridSpec& grid = {}) {
  p.validate();
  if (p.epsilon == 0.0)
    throw SingularConfigError("approximation_error: epsilon = 0 is singular");
  if (!(grid.half_width_sigmas >= 5.0))
    throw ConfigError("approximation_error: grid must span at least +-5 sigma");
  if (grid.nodes < 3) throw ConfigError("approximation_error: too few grid nodes");

  const double shift = 2.0 * p.g * p.sigma * p.sigma / std::tan(p.epsilon);
  const double peak = std::abs(std::sin(p.epsilon)) * gaussian_pdf(0.0, p.sigma);
  const double half = grid.half_width_sigmas * p.sigma;
  double worst = 0.0;
  for (int i = 0; i < grid.nodes; ++i) {
    const double q = -half + 2.0 * half * i / (grid.nodes - 1);
    const double exact = std::sin(p.epsilon + 2.0 * p.g * q) * gaussian_pdf(q, p.sigma);
    const double approx = std::sin(p.epsilon) * gaussian_pdf(q - shift, p.sigma);
    worst = std::max(worst, std::abs(exact - approx));
  }
  return worst / peak;
}

}  // namespace abwv
