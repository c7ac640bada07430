#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "abwv/errors.hpp"
#include "abwv/model.hpp"
#include "abwv/optics.hpp"
#include "abwv/rng.hpp"

namespace abwv {

enum class CountMode { FixedN, PoissonN };

/// Sinusoidal background added identically to both detector channels.
struct CommonModeSine {
  double amplitude = 0.0;     ///< intensity units
  double frequency_hz = 0.0;  ///< Hz
};

/// Noise injection controls. All magnitudes are >= 0; zero means off.
///   per_detector_std    additive white Gaussian noise per waveform sample,
///                       drawn independently for each channel
///   common_mode_offset  constant added equally to both channels
///   common_mode_sine    sine added equally to both channels
///   epsilon_drift_rate  linear drift of epsilon across the trial sequence,
///                       radians per trial
///   g_drift_rate        linear drift of the coupling across the acquired
///                       pulse sequence, g-units per pulse; stands in for the
///                       slow time-shift drift seen in long acquisitions
///   count_mode          FixedN or PoissonN event totals
struct NoiseSpec {
  double per_detector_std = 0.0;
  double common_mode_offset = 0.0;
  CommonModeSine common_mode_sine;
  double epsilon_drift_rate = 0.0;
  double g_drift_rate = 0.0;
  CountMode count_mode = CountMode::FixedN;

  void validate() const {
    if (per_detector_std < 0.0 || common_mode_sine.amplitude < 0.0 ||
        common_mode_sine.frequency_hz < 0.0)
      throw ConfigError("noise: magnitudes must be >= 0");
  }

  bool has_waveform_noise() const {
    return per_detector_std > 0.0 || common_mode_offset != 0.0 ||
           common_mode_sine.amplitude > 0.0;
  }
};

/// Per-detector meter readings from one simulated acquisition.
struct EventBatch {
  std::vector<double> q_det1;
  std::vector<double> q_det2;
  Technique technique = Technique::ABWV;
  ModelParams params_used;
  RngSpec rng;

  std::size_t n1() const { return q_det1.size(); }
  std::size_t n2() const { return q_det2.size(); }
  std::size_t total() const { return q_det1.size() + q_det2.size(); }
};

/// Time-gridded detector intensities.
struct WaveformTrace {
  std::vector<double> t;
  std::vector<double> i1;
  std::vector<double> i2;
  double dt = 0.0;
  Technique technique = Technique::ABWV;  ///< ABWV (pulsed) or CWBalanced
  OpticsScenario optics;                  ///< scenario the trace was built from
};

/// Number of events for one acquisition: FixedN rounds the mean, PoissonN
/// draws from a Poisson distribution with that mean.
inline std::int64_t draw_event_count(CountMode mode, double mean_n, StreamRng& rng) {
  if (!(mean_n >= 0.0)) throw ConfigError("draw_event_count: mean must be >= 0");
  if (mode == CountMode::FixedN) return std::llround(mean_n);
  return rng.poisson(mean_n);
}

inline std::int64_t draw_event_count(CountMode mode, double mean_n, RngSpec spec) {
  StreamRng rng(spec);
  return draw_event_count(mode, mean_n, rng);
}

namespace detail {

// Bernoulli probability of landing on Det2 given a meter reading q.
inline double det2_probability(const ModelParams& p, double q) {
  return half_one_plus_sin(p.epsilon + 2.0 * p.g * q);
}

}  // namespace detail

/// Streaming sufficient statistics of an ABWV/WVA/Standard event stream;
/// enough for the moment estimators without materializing readings.
struct MomentAccumulator {
  std::int64_t n1 = 0, n2 = 0;
  std::int64_t n_prepared = 0;
  double sum1 = 0.0, sum2 = 0.0;
  double sum_sq = 0.0;  ///< pooled sum of q^2 over recorded events

  void add(const MomentAccumulator& o) {
    n1 += o.n1;
    n2 += o.n2;
    n_prepared += o.n_prepared;
    sum1 += o.sum1;
    sum2 += o.sum2;
    sum_sq += o.sum_sq;
  }
};

/// Draw one acquisition's events into streaming statistics. Uses the exact
/// densities: q ~ Gaussian(0, sigma^2) then a Bernoulli detector choice for
/// ABWV, thinning with probability sin^2(eps/2 + gq) for WVA, and
/// p ~ Gaussian(g, 1/(2 sigma)) for Standard.
inline void accumulate_events(Technique technique, const ModelParams& p, std::int64_t n,
                              StreamRng& rng, MomentAccumulator& acc) {
  acc.n_prepared += n;
  switch (technique) {
    case Technique::ABWV: {
      const double eps = p.epsilon, g2 = 2.0 * p.g, sig = p.sigma;
      for (std::int64_t i = 0; i < n; ++i) {
        const double q = sig * rng.normal();
        const double c = std::cos(std::numbers::pi / 4 - 0.5 * (eps + g2 * q));
        if (rng.uniform() < c * c) {
          ++acc.n2;
          acc.sum2 += q;
        } else {
          ++acc.n1;
          acc.sum1 += q;
        }
        acc.sum_sq += q * q;
      }
      break;
    }
    case Technique::WVA: {
      for (std::int64_t i = 0; i < n; ++i) {
        const double q = p.sigma * rng.normal();
        const double s = std::sin(0.5 * p.epsilon + p.g * q);
        if (rng.uniform() < s * s) {
          ++acc.n2;
          acc.sum2 += q;
          acc.sum_sq += q * q;
        }
      }
      break;
    }
    case Technique::Standard: {
      const double sp = 0.5 / p.sigma;
      for (std::int64_t i = 0; i < n; ++i) {
        const double v = p.g + sp * rng.normal();
        ++acc.n1;
        acc.sum1 += v;
        acc.sum_sq += v * v;
      }
      break;
    }
    case Technique::CWBalanced:
      throw ConfigError("accumulate_events: CWBalanced is waveform-only");
  }
}

/// Sample one full event batch. Reproducible bit-for-bit for a fixed RngSpec.
inline EventBatch sample_events(Technique technique, const ModelParams& p,
                                const NoiseSpec& noise, RngSpec spec) {
  p.validate();
  noise.validate();
  StreamRng rng(spec);
  const std::int64_t n = draw_event_count(noise.count_mode, p.n_events, rng);

  EventBatch batch;
  batch.technique = technique;
  batch.params_used = p;
  batch.rng = spec;
  switch (technique) {
    case Technique::ABWV: {
      batch.q_det1.reserve(static_cast<std::size_t>(n / 2 + 8));
      batch.q_det2.reserve(static_cast<std::size_t>(n / 2 + 8));
      for (std::int64_t i = 0; i < n; ++i) {
        const double q = p.sigma * rng.normal();
        if (rng.uniform() < detail::det2_probability(p, q))
          batch.q_det2.push_back(q);
        else
          batch.q_det1.push_back(q);
      }
      break;
    }
    case Technique::WVA: {
      for (std::int64_t i = 0; i < n; ++i) {
        const double q = p.sigma * rng.normal();
        const double s = std::sin(0.5 * p.epsilon + p.g * q);
        if (rng.uniform() < s * s) batch.q_det2.push_back(q);
      }
      break;
    }
    case Technique::Standard: {
      batch.q_det1.reserve(static_cast<std::size_t>(n));
      const double sp = 0.5 / p.sigma;
      for (std::int64_t i = 0; i < n; ++i) batch.q_det1.push_back(p.g + sp * rng.normal());
      break;
    }
    case Technique::CWBalanced:
      throw ConfigError("sample_events: CWBalanced is waveform-only");
  }
  return batch;
}

/// Add configured noise to a trace: independent white Gaussian noise per
/// channel, then common-mode offset and sine added identically to both.
/// A zero NoiseSpec returns the input bit-exactly.
inline WaveformTrace apply_noise(const WaveformTrace& trace, const NoiseSpec& noise,
                                 RngSpec spec) {
  noise.validate();
  if (!noise.has_waveform_noise()) return trace;
  WaveformTrace out = trace;
  const std::size_t n = trace.t.size();
  if (noise.per_detector_std > 0.0) {
    StreamRng rng(spec);
    for (std::size_t k = 0; k < n; ++k) out.i1[k] += noise.per_detector_std * rng.normal();
    for (std::size_t k = 0; k < n; ++k) out.i2[k] += noise.per_detector_std * rng.normal();
  }
  if (noise.common_mode_offset != 0.0 || noise.common_mode_sine.amplitude > 0.0) {
    const double amp = noise.common_mode_sine.amplitude;
    const double w = 2.0 * std::numbers::pi * noise.common_mode_sine.frequency_hz;
    for (std::size_t k = 0; k < n; ++k) {
      const double cm = noise.common_mode_offset + (amp > 0.0 ? amp * std::sin(w * trace.t[k]) : 0.0);
      out.i1[k] += cm;
      out.i2[k] += cm;
    }
  }
  return out;
}

/// Synthesize a detector-pair waveform.
///
/// ABWV (pulsed):  I1,2 = (I0/2)[1 -+ sin(4 phi + 4 omega0 t)] e^{-t^2/2 tau^2}
/// CWBalanced:     I1,2 = (I0/2)[1 -+ sin(4 omega0 t)], constant envelope
///                 (the exact phi = 0 limit of the pulsed model)
///
/// The grid spans +-4 tau with step optics.dt (default tau/100). The
/// noiseless output is deterministic and independent of the RngSpec.
inline WaveformTrace synth_waveform(Technique scenario, const OpticsScenario& optics,
                                    const NoiseSpec& noise = {}, RngSpec spec = {}) {
  optics.validate();
  noise.validate();
  if (scenario != Technique::ABWV && scenario != Technique::CWBalanced)
    throw ConfigError("synth_waveform: scenario must be ABWV or CWBalanced");
  const double dt = optics.step();
  if (scenario == Technique::ABWV && dt > optics.tau / 20.0)
    throw ConfigError("synth_waveform: grid too coarse, need dt <= tau/20");

  const auto half = static_cast<std::int64_t>(std::ceil(4.0 * optics.tau / dt));
  WaveformTrace trace;
  trace.dt = dt;
  trace.technique = scenario;
  trace.optics = optics;
  trace.t.reserve(static_cast<std::size_t>(2 * half + 1));
  trace.i1.reserve(trace.t.capacity());
  trace.i2.reserve(trace.t.capacity());
  for (std::int64_t k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k) * dt;
    trace.t.push_back(t);
    if (scenario == Technique::ABWV) {
      trace.i1.push_back(intensity_at(optics, t, Port::I1));
      trace.i2.push_back(intensity_at(optics, t, Port::I2));
    } else {
      const double s = std::sin(4.0 * optics.omega0 * t);
      trace.i1.push_back(0.5 * optics.i0 * (1.0 - s));
      trace.i2.push_back(0.5 * optics.i0 * (1.0 + s));
    }
  }
  return apply_noise(trace, noise, spec);
}

}  // namespace abwv
