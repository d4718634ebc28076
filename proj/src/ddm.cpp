#include "icra/ddm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace icra::synth {

namespace {

constexpr double kA = kBoundary;
constexpr double kPi = std::numbers::pi;

// Crossover between the small-time and large-time image series.
constexpr double kSeriesSwitch = 2.0 * kA * kA / kPi;

// Driftless exit-time density from (-a, a) started at 0.
double driftless_density(double t) {
  if (!(t > 0.0)) return 0.0;
  double sum = 0.0;
  if (t < kSeriesSwitch) {
    for (int k = 0; k < 200; ++k) {
      const double m = 2.0 * k + 1.0;
      const double term = m * std::exp(-m * m * kA * kA / (2.0 * t));
      sum += (k % 2 == 0) ? term : -term;
      if (term < 1e-300 || term < 1e-18 * std::abs(sum)) break;
    }
    return 2.0 * kA / std::sqrt(2.0 * kPi * t * t * t) * sum;
  }
  for (int k = 0; k < 200; ++k) {
    const double m = 2.0 * k + 1.0;
    const double term = m * std::exp(-m * m * kPi * kPi * t / (8.0 * kA * kA));
    sum += (k % 2 == 0) ? term : -term;
    if (term < 1e-300 || term < 1e-18 * std::abs(sum)) break;
  }
  return kPi / (2.0 * kA * kA) * sum;
}

// Ratio of the driftless exit density to twice the one-sided leading image
// term. Lies in [0, 1]; used as the thinning probability.
double thinning_ratio(double t) {
  if (t < kSeriesSwitch) {
    double sum = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double m = 2.0 * k + 1.0;
      const double term = m * std::exp(-2.0 * k * (k + 1.0) * kA * kA / t);
      sum += (k % 2 == 0) ? term : -term;
      if (term < 1e-18) break;
    }
    return sum;
  }
  const double lead = 2.0 * kA / std::sqrt(2.0 * kPi * t * t * t) * std::exp(-kA * kA / (2.0 * t));
  return driftless_density(t) / lead;
}

// log(cosh(x)) without overflow.
double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

}  // namespace

std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::euler:
      return "euler";
    case Sampler::exact:
      return "exact";
    case Sampler::aggregate:
      return "aggregate";
  }
  return "?";
}

Sampler parse_sampler(const std::string& text) {
  if (text == "euler") return Sampler::euler;
  if (text == "exact") return Sampler::exact;
  if (text == "aggregate") return Sampler::aggregate;
  throw ConfigError("unknown ddm sampler '" + text + "' (expected euler|exact|aggregate)");
}

void DdmConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("ddm: dt must be positive");
  if (!(max_time > 0.0)) throw ConfigError("ddm: max_time must be positive");
  if (dt > 1e-3 * max_time) throw ConfigError("ddm: dt must be <= 1e-3 * max_time");
  if (aggregate_min_k < 2) throw ConfigError("ddm: aggregate_min_k must be >= 2");
}

double ddm_choice_prob(double drift) { return logistic(drift); }

double ddm_expected_time(double drift) {
  const double x = kA * drift;
  if (std::abs(drift) < 1e-4) return kA * kA * (1.0 - x * x / 3.0);
  return kA * std::tanh(x) / drift;
}

double ddm_time_variance(double drift) {
  const double x = kA * drift;
  const double a4 = kA * kA * kA * kA;
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return a4 * (2.0 / 3.0 - 8.0 * x2 / 15.0 + 34.0 * x2 * x2 / 105.0);
  }
  const double sech = 1.0 / std::cosh(x);
  return a4 * (std::tanh(x) / (x * x * x) - sech * sech / (x * x));
}

double ddm_exit_time_density(double t, double drift) {
  if (!(t > 0.0)) return 0.0;
  const double f0 = driftless_density(t);
  if (f0 <= 0.0) return 0.0;
  return std::exp(log_cosh(kA * drift) - 0.5 * drift * drift * t + std::log(f0));
}

double ddm_exit_time_survival(double t, double drift) {
  if (!(t > 0.0)) return 1.0;
  const double shift = 0.5 * drift * drift;
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double m = 2.0 * k + 1.0;
    const double lambda = m * m * kPi * kPi / (8.0 * kA * kA);
    const double term = lambda / (lambda + shift) / m * std::exp(-(lambda + shift) * t);
    sum += (k % 2 == 0) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::exp(log_cosh(kA * drift)) * 4.0 / kPi * sum;
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> normal;
  return normal(rng);
}

DdmOutcome simulate_ddm(double drift, const DdmConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal;
  const double dt = cfg.dt;
  const double sqrt_dt = std::sqrt(dt);
  const double step_mean = drift * dt;
  // Beyond this distance the bridge crossing probability is below e^-40.
  const double bridge_band = std::sqrt(20.0 * dt);
  const auto max_steps = static_cast<long long>(std::ceil(cfg.max_time / dt));

  int retries = 0;
  for (;;) {
    double s = 0.0;
    for (long long n = 1; n <= max_steps; ++n) {
      const double next = s + step_mean + sqrt_dt * normal(rng);
      const double t = static_cast<double>(n) * dt;
      if (next >= kA) return {1.0, t, retries};
      if (next <= -kA) return {-1.0, t, retries};
      if (cfg.bridge_correction) {
        if (kA - next < bridge_band) {
          const double p = std::exp(-2.0 * (kA - s) * (kA - next) / dt);
          if (rng.uniform() < p) return {1.0, t, retries};
        } else if (kA + next < bridge_band) {
          const double p = std::exp(-2.0 * (kA + s) * (kA + next) / dt);
          if (rng.uniform() < p) return {-1.0, t, retries};
        }
      }
      s = next;
    }
    if (++retries > 100) {
      throw SimulationError("simulate_ddm: more than 100 consecutive truncated paths (drift " +
                            std::to_string(drift) + ", max_time " + std::to_string(cfg.max_time) + ")");
    }
  }
}

double sample_exit_time(double drift, Rng& rng) {
  const double v = std::abs(drift);
  const double lambda = kA * kA;
  const double mu = v > 0.0 ? kA / v : std::numeric_limits<double>::infinity();
  std::normal_distribution<double> normal;
  for (;;) {
    const double n = normal(rng);
    const double y = n * n;
    if (y == 0.0) continue;
    double t;
    if (!std::isfinite(mu) || mu > 1e12) {
      t = lambda / y;  // Levy limit of the inverse Gaussian
    } else {
      const double w = mu * y / (2.0 * lambda);
      const double x = mu / (1.0 + w + std::sqrt(w * w + 2.0 * w));
      t = (rng.uniform() * (mu + x) <= mu) ? x : mu * mu / x;
    }
    if (rng.uniform() < thinning_ratio(t)) return t;
  }
}

DdmOutcome sample_ddm_exact(double drift, Rng& rng) {
  const double z = rng.uniform() < logistic(drift) ? 1.0 : -1.0;
  return {z, sample_exit_time(drift, rng), 0};
}

AveragedResponse sample_averaged(double drift, int k, const DdmConfig& cfg, Rng& rng) {
  if (k < 1) throw ContractError("sample_averaged: k must be >= 1");
  if (cfg.sampler == Sampler::aggregate && k >= cfg.aggregate_min_k) {
    std::binomial_distribution<int> ups(k, logistic(drift));
    const double z = (2.0 * ups(rng) - k) / k;
    const double mean = ddm_expected_time(drift);
    const double var = ddm_time_variance(drift) / k;
    std::gamma_distribution<double> gamma(mean * mean / var, var / mean);
    double t;
    do {
      t = gamma(rng);
    } while (!(t > 0.0));
    return {z, t};
  }
  double z_sum = 0.0;
  double t_sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const DdmOutcome o =
        cfg.sampler == Sampler::euler ? simulate_ddm(drift, cfg, rng) : sample_ddm_exact(drift, rng);
    z_sum += o.z;
    t_sum += o.t;
  }
  return {z_sum / k, t_sum / k};
}

}  // namespace icra::synth
