#pragma once

#include <cstdint>
#include <vector>

#include "icra/core.hpp"
#include "icra/population.hpp"

namespace icra::oracles {

/// Monte Carlo (or exact) preference moment mu(theta) = E[tanh(phi^T theta/2) phi].
/// Exact mode exists only for one-dimensional Rademacher features, where
/// mu(theta) = tanh(theta/2).
struct MomentMap {
  FeatureDistribution features;
  int dim = 1;
  std::size_t samples = 100000;
  bool exact = false;
  std::uint64_t seed = 0;
};

struct VecEstimate {
  Vec value;
  Vec standard_error;  // zero in exact mode
};

VecEstimate mu_of_theta(const MomentMap& map, const RewardParam& theta);

/// (1/M) sum label * phi with label z (binary) or z/t (response time).
Vec empirical_moment(const std::vector<Demonstration>& demos, LabelMode mode);

/// Sigma^{-1} for SPD Sigma via Cholesky. Throws ContractError when Sigma is
/// not symmetric positive definite.
Mat population_minimizer_rt(const Mat& sigma);

struct MatEstimate {
  Mat value;
  Mat standard_error;  // zero for closed forms
  bool closed_form = true;
};

/// E[phi phi^T] for the (norm-truncated) feature law of `spec`. Closed forms
/// cover the Gaussian (any bound), the cube inside the bound and Rademacher;
/// everything else falls back to Monte Carlo.
MatEstimate feature_second_moment(const PopulationSpec& spec, std::size_t mc_samples = 100000,
                                  std::uint64_t seed = 0);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// I(u) = 1/2 int_{-1}^{1} m tanh(m u / 4) dm by Gauss-Legendre with q nodes
/// (q >= 64).
double counterexample_I(double u, int q = 128);

/// Bisection result together with its bracket certificate.
struct RootCertificate {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double f_lo = 0.0;  // function value at lo (< 0)
  double f_hi = 0.0;  // function value at hi (> 0)
  int iterations = 0;
};

/// Root of I(u) = 1/3 on (0, 6). Throws InternalError if the bracket fails.
RootCertificate counterexample_ustar(double tol = 1e-10);

/// Law of m = tanh(theta/2) for the one-dimensional Rademacher construction.
struct SignalDistribution {
  enum class Kind { uniform, point_mass } kind = Kind::uniform;
  double m0 = 0.5;  // point-mass location, in (0, 1)
};

/// Minimizer of the infinite-demonstration binary objective in the
/// one-dimensional Rademacher construction, from the stationarity condition
/// E[m (tanh(m u / 2) - m)] = 0. For uniform m this is counterexample_ustar()/2.
RootCertificate binary_population_minimizer_1d(const SignalDistribution& dist = {});

/// Value of that objective at scalar u (uniform m, Gauss-Legendre in m).
double binary_population_loss_1d(double u, int q = 128);

/// Exact minimizer of the N-demonstration binary objective in the same
/// construction (uniform m). The label moment is (2B - N)/N with
/// B ~ Binomial(N, (1+m)/2); integrating m out gives a finite sum.
double binary_finite_n_minimizer_1d(int n_demos, double tol = 1e-14);

struct GapResult {
  double theta_new = 0.0;
  double predicted = 0.5;  // asymptotic P(z_hat = +1 | phi_q = +1)
  double truth = 0.5;      // sigma(theta_new)
  double tv = 0.0;         // |predicted - truth|
};

/// Asymptotic prediction gap of the binary-trained model on an unseen
/// scalar reward parameter at phi_q = +1.
GapResult impossibility_gap(double theta_new);

}  // namespace icra::oracles
