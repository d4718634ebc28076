#pragma once

#include <string>

#include "icra/core.hpp"
#include "icra/rng.hpp"

namespace icra::synth {

/// Absorbing boundaries sit at +-kBoundary; diffusion coefficient is 1.
inline constexpr double kBoundary = 0.5;

/// How response times are produced.
///   euler:     Euler-Maruyama walk, one path per annotator (reference path).
///   exact:     exact first-passage draw per annotator (no discretization).
///   aggregate: exact choice counts plus a moment-matched Gamma draw for the
///              K-averaged time; only used when k >= aggregate_min_k.
enum class Sampler { euler, exact, aggregate };

std::string to_string(Sampler s);
Sampler parse_sampler(const std::string& text);

struct DdmConfig {
  double dt = 1e-4;
  double max_time = 50.0;
  Sampler sampler = Sampler::exact;
  // Brownian-bridge exit test between grid points; removes the O(sqrt(dt))
  // boundary-overshoot bias of the plain walk.
  bool bridge_correction = true;
  int aggregate_min_k = 16;

  void validate() const;
};

struct DdmOutcome {
  double z = 0.0;  // +1 upper boundary, -1 lower
  double t = 0.0;  // first-passage time, seconds
  int retries = 0;  // truncated paths discarded before this one
};

/// P(upper boundary) = logistic(drift) for boundaries +-1/2.
double ddm_choice_prob(double drift);

/// E[t | drift] = tanh(drift/2) / (2 drift), 1/4 at drift 0.
double ddm_expected_time(double drift);

/// Var[t | drift] for the symmetric two-boundary exit time.
double ddm_time_variance(double drift);

/// Density of the exit time (either boundary) at time t.
double ddm_exit_time_density(double t, double drift);

/// P(exit time > t).
double ddm_exit_time_survival(double t, double drift);

/// Euler-Maruyama walk S <- S + v dt + sqrt(dt) N(0,1) from S = 0. Paths that
/// reach max_time are discarded and rerun; more than 100 in a row throws
/// SimulationError.
DdmOutcome simulate_ddm(double drift, const DdmConfig& cfg, Rng& rng);

/// Exact exit-time draw. Uses the fact that for symmetric boundaries the exit
/// time is independent of the exit side; proposals come from the one-sided
/// inverse Gaussian hitting time and are thinned by the image series.
double sample_exit_time(double drift, Rng& rng);

/// Exact (z, t) pair.
DdmOutcome sample_ddm_exact(double drift, Rng& rng);

struct AveragedResponse {
  double z = 0.0;
  double t = 0.0;
};

/// Mean choice and mean time over k independent annotators with a shared
/// drift, using the sampler selected in cfg.
AveragedResponse sample_averaged(double drift, int k, const DdmConfig& cfg, Rng& rng);

/// Standard normal draw (Marsaglia polar method via <random>).
double standard_normal(Rng& rng);

}  // namespace icra::synth
