#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "icra/core.hpp"
#include "icra/population.hpp"
#include "icra/rng.hpp"

namespace icra::test {

/// Population with isotropic Gaussian features and a centred Gaussian theta.
inline PopulationSpec gaussian_spec(int d, double theta_scale = 1.0, double feature_scale = 1.0) {
  PopulationSpec spec;
  spec.dim = d;
  spec.features.kind = FeatureKind::isotropic_gaussian;
  spec.features.scale = feature_scale;
  spec.theta.mixture = single_gaussian(Vec::Zero(d), theta_scale * theta_scale * Mat::Identity(d, d));
  Vec ood = Vec::Zero(d);
  ood[0] = 3.0;
  spec.ood.mixture = single_gaussian(ood, theta_scale * theta_scale * Mat::Identity(d, d));
  return spec;
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * (2.0 * rng.uniform() - 1.0);
  }
  return m;
}

inline Vec random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) { return random_matrix(n, 1, rng, scale); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("icra_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace icra::test
