#pragma once

#include <limits>
#include <string>
#include <vector>

#include "icra/core.hpp"

namespace icra {

enum class FeatureKind { isotropic_gaussian, uniform_cube, rademacher };

/// Distribution of difference features. `scale` is sigma for the Gaussian
/// and the half-width a for the cube; Rademacher ignores it. Draws with norm
/// above `bound` are rejected and redrawn.
struct FeatureDistribution {
  FeatureKind kind = FeatureKind::isotropic_gaussian;
  double scale = 1.0;
  double bound = std::numeric_limits<double>::infinity();
};

/// Gaussian mixture with a shared covariance.
struct GaussianMixture {
  std::vector<Vec> means;
  Mat cov;
  std::vector<double> weights;
};

enum class ThetaKind {
  gaussian_mixture,
  // theta = 2 * atanh(m) with m ~ Uniform[-1, 1] in every coordinate; the
  // one-dimensional impossibility construction uses this law.
  tanh_uniform,
};

struct ThetaDistribution {
  ThetaKind kind = ThetaKind::gaussian_mixture;
  GaussianMixture mixture;
};

struct PopulationSpec {
  int dim = 1;
  FeatureDistribution features;
  ThetaDistribution theta;  // H, the training population
  ThetaDistribution ood;    // the disjoint population for unseen humans

  /// Throws ConfigError when an invariant fails (weights, SPD covariance,
  /// dimensions).
  void validate() const;
};

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);

/// Single-component helper.
GaussianMixture single_gaussian(const Vec& mean, const Mat& cov);

/// Smallest distance from the OOD mean to any in-distribution component
/// mean, measured in units of the largest in-distribution standard deviation.
double ood_separation(const PopulationSpec& spec);

}  // namespace icra
