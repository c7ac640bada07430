#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "abwv/errors.hpp"
#include "abwv/model.hpp"
#include "abwv/sampler.hpp"

namespace abwv {

enum class EstimateMethod { Moments, HistFit };

inline const char* to_string(EstimateMethod m) {
  return m == EstimateMethod::Moments ? "moments" : "histfit";
}

/// Estimates extracted from one batch (or one averaged waveform).
struct EstimateReport {
  double epsilon_hat = 0.0;  ///< radians
  double g_hat = 0.0;        ///< inverse meter-units
  double sigma_hat = 0.0;    ///< meter-units
  double mean_q_plus = 0.0;  ///< <q>_+ , meter-units
  double mean_q_minus = 0.0; ///< <q>_- , meter-units
  double shift_hat = 0.0;    ///< measured peak shift, meter-units
  EstimateMethod method = EstimateMethod::Moments;
  Technique technique = Technique::ABWV;
  std::optional<double> stderr_g;
};

/// Binning for the sum/difference histograms.
struct HistogramSpec {
  double bin_width = 0.0;
  double half_range = 0.0;

  /// Default binning: width sigma_hat/20, range +-5 sigma_hat, widened to
  /// whole bins so it always spans the pooled readings.
  static HistogramSpec defaults_for(double sigma_hat, double max_abs_reading) {
    HistogramSpec s;
    s.bin_width = sigma_hat / 20.0;
    const double need = std::max(5.0 * sigma_hat, max_abs_reading + s.bin_width);
    s.half_range = s.bin_width * std::ceil(need / s.bin_width);
    return s;
  }
};

/// Per-bin sum and difference counts of the two detector histograms.
struct HistogramPair {
  std::vector<double> edges;       ///< strictly increasing bin boundaries
  std::vector<double> counts_sum;  ///< per-bin n1 + n2
  std::vector<double> counts_diff; ///< per-bin n2 - n1
  double bin_width = 0.0;

  std::size_t bins() const { return counts_sum.size(); }
  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

struct FitResult {
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct GaussianGuess {
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;
};

/// Estimates from a pulsed-waveform pair of fits.
struct WaveformEstimate {
  double phi_hat = 0.0;      ///< radians
  double delta_t_hat = 0.0;  ///< seconds
  double omega0_hat = 0.0;   ///< rad/s
  double tau_hat = 0.0;      ///< seconds
  double i0_hat = 0.0;       ///< intensity units
  FitResult sum_fit;
  FitResult diff_fit;

  EstimateReport as_report() const {
    EstimateReport r;
    r.epsilon_hat = 4.0 * phi_hat;
    r.g_hat = 2.0 * omega0_hat;
    r.sigma_hat = tau_hat;
    r.shift_hat = delta_t_hat;
    r.method = EstimateMethod::HistFit;
    r.technique = Technique::ABWV;
    return r;
  }
};

// ---------------------------------------------------------------------------
// Moment estimators (Eqs. of the almost-balanced protocol)
// ---------------------------------------------------------------------------

/// epsilon = asin((n2 - n1)/(n1 + n2)). The argument is in [-1, 1] by
/// construction, so this never raises a domain error on nonempty input.
inline double estimate_epsilon(std::int64_t n1, std::int64_t n2) {
  if (n1 < 0 || n2 < 0 || n1 + n2 < 1)
    throw InsufficientDataError("estimate_epsilon: need at least one event");
  return std::asin(static_cast<double>(n2 - n1) / static_cast<double>(n1 + n2));
}

inline double estimate_epsilon(const EventBatch& batch) {
  return estimate_epsilon(static_cast<std::int64_t>(batch.n1()),
                          static_cast<std::int64_t>(batch.n2()));
}

/// Pooled sample standard deviation (divisor n-1) of both detectors' readings.
inline double estimate_sigma(const MomentAccumulator& acc) {
  const std::int64_t n = acc.n1 + acc.n2;
  if (n < 2) throw InsufficientDataError("estimate_sigma: need at least two events");
  const double mean = (acc.sum1 + acc.sum2) / static_cast<double>(n);
  const double ss = acc.sum_sq - static_cast<double>(n) * mean * mean;
  return std::sqrt(std::max(ss, 0.0) / static_cast<double>(n - 1));
}

inline MomentAccumulator batch_moments(const EventBatch& batch) {
  MomentAccumulator acc;
  acc.n1 = static_cast<std::int64_t>(batch.n1());
  acc.n2 = static_cast<std::int64_t>(batch.n2());
  acc.n_prepared = acc.n1 + acc.n2;
  for (double q : batch.q_det1) {
    acc.sum1 += q;
    acc.sum_sq += q * q;
  }
  for (double q : batch.q_det2) {
    acc.sum2 += q;
    acc.sum_sq += q * q;
  }
  return acc;
}

inline double estimate_sigma(const EventBatch& batch) { return estimate_sigma(batch_moments(batch)); }

/// Moment estimator of g:
///   <q>+ = (S2 + S1)/(n2 + n1),  <q>- = (S2 - S1)/(n2 - n1),
///   g = [<q>- - <q>+] tan(eps_hat) / (2 sigma_hat^2).
/// n2 == n1 is a genuine singularity of the formula and raises
/// SingularEstimatorError; callers may retry with more data.
inline EstimateReport estimate_g_moments(const MomentAccumulator& acc, double epsilon_hat,
                                         double sigma_hat, Technique technique = Technique::ABWV) {
  if (!(sigma_hat > 0.0)) throw ConfigError("estimate_g_moments: sigma_hat must be > 0");
  const std::int64_t n = acc.n1 + acc.n2;
  if (n < 1) throw InsufficientDataError("estimate_g_moments: empty batch");
  if (acc.n2 == acc.n1)
    throw SingularEstimatorError("estimate_g_moments: n2 == n1 makes <q>_- singular");
  EstimateReport r;
  r.technique = technique;
  r.method = EstimateMethod::Moments;
  r.epsilon_hat = epsilon_hat;
  r.sigma_hat = sigma_hat;
  r.mean_q_plus = (acc.sum2 + acc.sum1) / static_cast<double>(n);
  r.mean_q_minus = (acc.sum2 - acc.sum1) / static_cast<double>(acc.n2 - acc.n1);
  r.shift_hat = r.mean_q_minus - r.mean_q_plus;
  r.g_hat = r.shift_hat * std::tan(epsilon_hat) / (2.0 * sigma_hat * sigma_hat);
  return r;
}

inline EstimateReport estimate_g_moments(const EventBatch& batch, double epsilon_hat,
                                         double sigma_hat) {
  return estimate_g_moments(batch_moments(batch), epsilon_hat, sigma_hat, batch.technique);
}

/// WVA estimator: g = mean(q_dark) tan(eps/2) / (2 sigma_hat^2).
inline double estimate_g_wva(const EventBatch& batch, double epsilon, double sigma_hat) {
  if (batch.technique != Technique::WVA)
    throw ConfigError("estimate_g_wva: batch is not a WVA acquisition");
  if (!(sigma_hat > 0.0)) throw ConfigError("estimate_g_wva: sigma_hat must be > 0");
  if (batch.n2() < 2)
    throw InsufficientDataError("estimate_g_wva: postselected set too small");
  double sum = 0.0;
  for (double q : batch.q_det2) sum += q;
  const double mean = sum / static_cast<double>(batch.n2());
  return mean * std::tan(0.5 * epsilon) / (2.0 * sigma_hat * sigma_hat);
}

inline double estimate_g_wva(const MomentAccumulator& acc, double epsilon, double sigma_hat) {
  if (!(sigma_hat > 0.0)) throw ConfigError("estimate_g_wva: sigma_hat must be > 0");
  if (acc.n2 < 2) throw InsufficientDataError("estimate_g_wva: postselected set too small");
  const double mean = acc.sum2 / static_cast<double>(acc.n2);
  return mean * std::tan(0.5 * epsilon) / (2.0 * sigma_hat * sigma_hat);
}

/// Standard-technique estimator: sample mean of the momentum readings.
inline double estimate_g_standard(const EventBatch& batch) {
  if (batch.technique != Technique::Standard)
    throw ConfigError("estimate_g_standard: batch is not a standard-technique acquisition");
  if (batch.n1() < 1) throw InsufficientDataError("estimate_g_standard: empty batch");
  double sum = 0.0;
  for (double v : batch.q_det1) sum += v;
  return sum / static_cast<double>(batch.n1());
}

inline double estimate_g_standard(const MomentAccumulator& acc) {
  if (acc.n1 < 1) throw InsufficientDataError("estimate_g_standard: empty batch");
  return acc.sum1 / static_cast<double>(acc.n1);
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

/// Histogram the batch into per-bin sum and difference counts. Count
/// conservation is exact: the columns total n1 + n2 and n2 - n1.
inline HistogramPair build_histograms(const EventBatch& batch, const HistogramSpec& spec) {
  if (!(spec.bin_width > 0.0) || !(spec.half_range > 0.0))
    throw ConfigError("build_histograms: binning must have positive width and range");
  const auto nbins = static_cast<std::size_t>(std::llround(2.0 * spec.half_range / spec.bin_width));
  if (nbins == 0) throw ConfigError("build_histograms: zero bins");

  HistogramPair h;
  h.bin_width = spec.bin_width;
  h.edges.resize(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i)
    h.edges[i] = -spec.half_range + static_cast<double>(i) * spec.bin_width;
  h.counts_sum.assign(nbins, 0.0);
  h.counts_diff.assign(nbins, 0.0);

  auto bin_of = [&](double q) -> std::size_t {
    if (q < h.edges.front() || q > h.edges.back())
      throw ConfigError("build_histograms: binning does not span the pooled data");
    auto idx = static_cast<std::ptrdiff_t>((q - h.edges.front()) / spec.bin_width);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(nbins) - 1));
  };
  for (double q : batch.q_det1) {
    const std::size_t b = bin_of(q);
    h.counts_sum[b] += 1.0;
    h.counts_diff[b] -= 1.0;
  }
  for (double q : batch.q_det2) {
    const std::size_t b = bin_of(q);
    h.counts_sum[b] += 1.0;
    h.counts_diff[b] += 1.0;
  }
  return h;
}

inline HistogramPair build_histograms(const EventBatch& batch) {
  double max_abs = 0.0;
  for (double q : batch.q_det1) max_abs = std::max(max_abs, std::abs(q));
  for (double q : batch.q_det2) max_abs = std::max(max_abs, std::abs(q));
  return build_histograms(batch, HistogramSpec::defaults_for(estimate_sigma(batch), max_abs));
}

/// Expectation-level histogram: per-bin integrals of the exact sum and
/// difference densities scaled by N. Deterministic; used for shift-law
/// studies free of sampling noise.
inline HistogramPair expected_histogram(const ModelParams& p, const HistogramSpec& spec) {
  p.validate();
  if (!(spec.bin_width > 0.0) || !(spec.half_range > 0.0))
    throw ConfigError("expected_histogram: binning must have positive width and range");
  const auto nbins = static_cast<std::size_t>(std::llround(2.0 * spec.half_range / spec.bin_width));
  if (nbins == 0) throw ConfigError("expected_histogram: zero bins");

  // 8-point Gauss-Legendre on [-1, 1].
  static constexpr std::array<double, 8> kx = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
      0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> kw = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
      0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

  HistogramPair h;
  h.bin_width = spec.bin_width;
  h.edges.resize(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i)
    h.edges[i] = -spec.half_range + static_cast<double>(i) * spec.bin_width;
  h.counts_sum.assign(nbins, 0.0);
  h.counts_diff.assign(nbins, 0.0);
  for (std::size_t b = 0; b < nbins; ++b) {
    const double mid = h.center(b), halfw = 0.5 * spec.bin_width;
    double s = 0.0, d = 0.0;
    for (std::size_t k = 0; k < kx.size(); ++k) {
      const double q = mid + halfw * kx[k];
      const double pq = gaussian_pdf(q, p.sigma);
      s += kw[k] * pq;
      d += kw[k] * std::sin(p.epsilon + 2.0 * p.g * q) * pq;
    }
    h.counts_sum[b] = p.n_events * halfw * s;
    h.counts_diff[b] = p.n_events * halfw * d;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Gaussian peak fitting (damped least squares with analytic gradients)
// ---------------------------------------------------------------------------

namespace detail {

inline double fit_cost(std::span<const double> x, std::span<const double> y, double a, double c,
                       double w) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double u = (x[k] - c) / w;
    const double r = a * std::exp(-0.5 * u * u) - y[k];
    s += r * r;
  }
  return s;
}

}  // namespace detail

/// Least-squares fit of A exp(-(x - c)^2 / 2 w^2) using Levenberg damping
/// and analytic residual gradients. Converged means the largest relative
/// parameter change fell below 1e-10 within the iteration cap.
inline FitResult fit_gaussian(std::span<const double> x, std::span<const double> y,
                              const GaussianGuess& init, double noise_floor = 0.0) {
  if (x.size() != y.size()) throw ConfigError("fit_gaussian: size mismatch");
  if (x.size() < 5) throw ConfigError("fit_gaussian: need at least 5 points");

  double max_abs = 0.0;
  for (double v : y) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs <= noise_floor)
    throw FitFailureError("fit_gaussian: no peak above the noise floor");

  double a = init.amplitude, c = init.center, w = std::abs(init.width);
  if (w <= 0.0) throw ConfigError("fit_gaussian: initial width must be > 0");

  double lambda = 1e-3;
  double cost = detail::fit_cost(x, y, a, c, w);
  FitResult res;
  const int max_iter = 200;
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    // Normal equations of the 3-parameter model.
    double jtj[3][3] = {{0}}, jtr[3] = {0};
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double u = (x[k] - c) / w;
      const double e = std::exp(-0.5 * u * u);
      const double m = a * e;
      const double r = m - y[k];
      const double j0 = e;                // d/dA
      const double j1 = m * u / w;        // d/dc
      const double j2 = m * u * u / w;    // d/dw
      const double j[3] = {j0, j1, j2};
      for (int i = 0; i < 3; ++i) {
        jtr[i] += j[i] * r;
        for (int l = i; l < 3; ++l) jtj[i][l] += j[i] * j[l];
      }
    }
    for (int i = 0; i < 3; ++i)
      for (int l = 0; l < i; ++l) jtj[i][l] = jtj[l][i];

    bool stepped = false;
    for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
      double m00 = jtj[0][0] * (1.0 + lambda), m11 = jtj[1][1] * (1.0 + lambda),
             m22 = jtj[2][2] * (1.0 + lambda);
      const double m01 = jtj[0][1], m02 = jtj[0][2], m12 = jtj[1][2];
      const double det = m00 * (m11 * m22 - m12 * m12) - m01 * (m01 * m22 - m12 * m02) +
                         m02 * (m01 * m12 - m11 * m02);
      if (det == 0.0 || !std::isfinite(det)) {
        lambda *= 10.0;
        continue;
      }
      const double b0 = -jtr[0], b1 = -jtr[1], b2 = -jtr[2];
      const double da = (b0 * (m11 * m22 - m12 * m12) - m01 * (b1 * m22 - m12 * b2) +
                         m02 * (b1 * m12 - m11 * b2)) / det;
      const double dc = (m00 * (b1 * m22 - m12 * b2) - b0 * (m01 * m22 - m12 * m02) +
                         m02 * (m01 * b2 - b1 * m02)) / det;
      const double dw = (m00 * (m11 * b2 - b1 * m12) - m01 * (m01 * b2 - b1 * m02) +
                         b0 * (m01 * m12 - m11 * m02)) / det;
      double na = a + da, nc = c + dc, nw = w + dw;
      if (nw <= 0.0) nw = 0.5 * w;
      const double ncost = detail::fit_cost(x, y, na, nc, nw);
      if (std::isfinite(ncost) && ncost <= cost) {
        const double rel = std::max({std::abs(da) / std::max(std::abs(a), 1e-300),
                                     std::abs(dc) / std::max(std::abs(c), std::abs(w)),
                                     std::abs(dw) / std::max(std::abs(w), 1e-300)});
        a = na;
        c = nc;
        w = nw;
        cost = ncost;
        lambda = std::max(lambda / 3.0, 1e-14);
        stepped = true;
        if (rel < 1e-10) {
          res.converged = true;
        }
      } else {
        lambda *= 10.0;
      }
    }
    if (res.converged || !stepped) break;
  }

  res.amplitude = a;
  res.center = c;
  res.width = std::abs(w);
  double ynorm = 0.0;
  for (double v : y) ynorm += v * v;
  res.residual_norm = std::sqrt(cost / std::max(ynorm, 1e-300));
  return res;
}

inline FitResult fit_gaussian(std::span<const double> x, std::span<const double> y,
                              double width_guess, double noise_floor = 0.0) {
  std::size_t arg = 0;
  for (std::size_t k = 1; k < y.size(); ++k)
    if (std::abs(y[k]) > std::abs(y[arg])) arg = k;
  GaussianGuess guess{y.empty() ? 0.0 : y[arg], x.empty() ? 0.0 : x[arg], width_guess};
  return fit_gaussian(x, y, guess, noise_floor);
}

/// Fit the difference histogram.
inline FitResult fit_gaussian(const HistogramPair& h, double width_guess) {
  std::vector<double> centers(h.bins());
  for (std::size_t i = 0; i < h.bins(); ++i) centers[i] = h.center(i);
  return fit_gaussian(centers, h.counts_diff, width_guess);
}

/// Convert a fitted difference-peak center into g through the shift law:
/// g = center tan(eps_hat) / (2 sigma_hat^2).
inline double estimate_g_fit(const FitResult& fit, double epsilon_hat, double sigma_hat) {
  if (!fit.converged) throw FitFailureError("estimate_g_fit: fit did not converge");
  if (!(sigma_hat > 0.0)) throw ConfigError("estimate_g_fit: sigma_hat must be > 0");
  if (epsilon_hat == 0.0)
    throw SingularEstimatorError("estimate_g_fit: epsilon_hat = 0 cannot be inverted");
  return fit.center * std::tan(epsilon_hat) / (2.0 * sigma_hat * sigma_hat);
}

// ---------------------------------------------------------------------------
// Waveform analysis
// ---------------------------------------------------------------------------

/// Full pulsed-waveform analysis: fit i1 + i2 for (I0, tau), fit i2 - i1 for
/// (amplitude, center); then phi = asin(A_diff / I0)/4, delta_t is the
/// difference-peak center relative to the sum-peak center (the sum tracks the
/// unshifted envelope, removing common timing offsets), and
/// omega0 = delta_t phi / tau^2.
inline WaveformEstimate analyze_waveform(const WaveformTrace& trace,
                                         std::optional<GaussianGuess> hint = {}) {
  if (trace.technique != Technique::ABWV)
    throw ConfigError("analyze_waveform: needs a pulsed ABWV trace");
  const std::size_t n = trace.t.size();
  std::vector<double> sum(n), diff(n);
  for (std::size_t k = 0; k < n; ++k) {
    sum[k] = trace.i1[k] + trace.i2[k];
    diff[k] = trace.i2[k] - trace.i1[k];
  }
  const double tau_guess = hint ? hint->width : trace.optics.tau;

  WaveformEstimate est;
  est.sum_fit = fit_gaussian(trace.t, sum, tau_guess);
  if (!est.sum_fit.converged) throw FitFailureError("analyze_waveform: sum fit did not converge");
  est.diff_fit = fit_gaussian(trace.t, diff, tau_guess);
  if (!est.diff_fit.converged) throw FitFailureError("analyze_waveform: diff fit did not converge");

  est.i0_hat = est.sum_fit.amplitude;
  est.tau_hat = est.sum_fit.width;
  const double ratio = std::clamp(est.diff_fit.amplitude / est.i0_hat, -1.0, 1.0);
  est.phi_hat = 0.25 * std::asin(ratio);
  est.delta_t_hat = est.diff_fit.center - est.sum_fit.center;
  est.omega0_hat = est.delta_t_hat * est.phi_hat / (est.tau_hat * est.tau_hat);
  return est;
}

/// Difference-only variant: the sum channel is never touched; tau and I0
/// come from the caller. Common-mode backgrounds cancel in i2 - i1 before
/// any fitting, so estimates are immune to them.
inline WaveformEstimate analyze_waveform_diff_only(const WaveformTrace& trace, double tau_ref,
                                                   double i0_ref) {
  if (trace.technique != Technique::ABWV)
    throw ConfigError("analyze_waveform_diff_only: needs a pulsed ABWV trace");
  if (!(tau_ref > 0.0) || !(i0_ref > 0.0))
    throw ConfigError("analyze_waveform_diff_only: tau and I0 references must be > 0");
  const std::size_t n = trace.t.size();
  std::vector<double> diff(n);
  for (std::size_t k = 0; k < n; ++k) diff[k] = trace.i2[k] - trace.i1[k];

  WaveformEstimate est;
  est.diff_fit = fit_gaussian(trace.t, diff, tau_ref);
  if (!est.diff_fit.converged)
    throw FitFailureError("analyze_waveform_diff_only: fit did not converge");
  est.i0_hat = i0_ref;
  est.tau_hat = tau_ref;
  const double ratio = std::clamp(est.diff_fit.amplitude / i0_ref, -1.0, 1.0);
  est.phi_hat = 0.25 * std::asin(ratio);
  est.delta_t_hat = est.diff_fit.center;
  est.omega0_hat = est.delta_t_hat * est.phi_hat / (tau_ref * tau_ref);
  return est;
}

/// Continuous-wave balanced estimate: regress i2 - i1 against t over
/// |t| <= window, then omega0 = slope / (4 I0) with I0 the mean of i1 + i2.
/// The window must satisfy the small-angle bound 4 omega0 window < 0.1 rad.
inline double estimate_omega_cw(const WaveformTrace& trace, double window) {
  if (trace.technique != Technique::CWBalanced)
    throw ConfigError("estimate_omega_cw: needs a CW balanced trace");
  if (!(window > 0.0)) throw ConfigError("estimate_omega_cw: window must be > 0");
  if (!(4.0 * std::abs(trace.optics.omega0) * window < 0.1))
    throw ConfigError("estimate_omega_cw: window exceeds the small-angle regime");

  double st = 0.0, std_ = 0.0, stt = 0.0, ssum = 0.0, sd = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    const double t = trace.t[k];
    if (std::abs(t) > window) continue;
    const double d = trace.i2[k] - trace.i1[k];
    st += t;
    stt += t * t;
    sd += d;
    std_ += t * d;
    ssum += trace.i1[k] + trace.i2[k];
    ++n;
  }
  if (n < 3) throw InsufficientDataError("estimate_omega_cw: too few samples in window");
  const double nn = static_cast<double>(n);
  const double denom = stt - st * st / nn;
  if (denom <= 0.0) throw InsufficientDataError("estimate_omega_cw: degenerate time grid");
  const double slope = (std_ - st * sd / nn) / denom;
  const double i0_hat = ssum / nn;
  if (!(i0_hat > 0.0)) throw EstimationError("estimate_omega_cw: nonpositive mean intensity");
  return slope / (4.0 * i0_hat);
}

}  // namespace abwv
