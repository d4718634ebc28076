#include "icra/core.hpp"

#include <cmath>

#include "icra/population.hpp"

namespace icra {

namespace {

void check_dims(const FeatureDiff& phi, const RewardParam& theta) {
  if (phi.dim() != theta.dim()) {
    throw ContractError("dimension mismatch: feature has " + std::to_string(phi.dim()) +
                        " entries, theta has " + std::to_string(theta.dim()));
  }
}

}  // namespace

double logit(const FeatureDiff& phi_diff, const RewardParam& theta) {
  check_dims(phi_diff, theta);
  return phi_diff.values().dot(theta.theta());
}

double bt_prob(const FeatureDiff& phi_diff, const RewardParam& theta) {
  return logistic(logit(phi_diff, theta));
}

double expected_choice(const FeatureDiff& phi_diff, const RewardParam& theta) {
  return tanh_half(logit(phi_diff, theta));
}

std::string to_string(LabelMode mode) {
  return mode == LabelMode::binary ? "binary" : "response_time";
}

LabelMode parse_label_mode(const std::string& text) {
  if (text == "binary") return LabelMode::binary;
  if (text == "response_time" || text == "rt") return LabelMode::response_time;
  throw ConfigError("unknown label mode '" + text + "' (expected binary|response_time)");
}

void validate(const Demonstration& demo, bool require_time) {
  if (demo.k < 1) throw DataError("demonstration: k must be >= 1");
  if (!(std::abs(demo.z) <= 1.0)) throw DataError("demonstration: |z| > 1");
  if (demo.k == 1 && demo.z != 1.0 && demo.z != -1.0) {
    throw DataError("demonstration: k = 1 requires z in {-1, +1}");
  }
  if (require_time && !(demo.t > 0.0 && std::isfinite(demo.t))) {
    throw DataError("demonstration: response time must be positive and finite");
  }
}

void validate(const TaskSample& task) {
  if (task.demos.empty()) throw DataError("task: needs at least one demonstration");
  const auto d = task.query.dim();
  if (task.theta.dim() != 0 && task.theta.dim() != d) throw DataError("task: theta dimension mismatch");
  const bool rt = task.query_truth.t.has_value();
  for (const auto& demo : task.demos) {
    if (demo.phi_diff.dim() != d) throw DataError("task: demonstration dimension mismatch");
    validate(demo, rt);
  }
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::isotropic_gaussian:
      return "gaussian";
    case FeatureKind::uniform_cube:
      return "uniform_cube";
    case FeatureKind::rademacher:
      return "rademacher";
  }
  return "?";
}

FeatureKind parse_feature_kind(const std::string& text) {
  if (text == "gaussian" || text == "isotropic_gaussian") return FeatureKind::isotropic_gaussian;
  if (text == "uniform_cube" || text == "cube") return FeatureKind::uniform_cube;
  if (text == "rademacher") return FeatureKind::rademacher;
  throw ConfigError("unknown feature distribution '" + text + "'");
}

GaussianMixture single_gaussian(const Vec& mean, const Mat& cov) {
  return GaussianMixture{{mean}, cov, {1.0}};
}

namespace {

void validate_theta(const ThetaDistribution& dist, int dim, const std::string& name) {
  if (dist.kind == ThetaKind::tanh_uniform) return;
  const auto& mix = dist.mixture;
  if (mix.means.empty()) throw ConfigError(name + ": mixture has no components");
  if (mix.weights.size() != mix.means.size()) {
    throw ConfigError(name + ": weights and means differ in count");
  }
  double total = 0.0;
  for (double w : mix.weights) {
    if (!(w >= 0.0)) throw ConfigError(name + ": negative mixture weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(name + ": mixture weights must sum to 1");
  for (const auto& m : mix.means) {
    if (m.size() != dim) throw ConfigError(name + ": component mean has wrong dimension");
  }
  if (mix.cov.rows() != dim || mix.cov.cols() != dim) {
    throw ConfigError(name + ": covariance has wrong shape");
  }
  if ((mix.cov - mix.cov.transpose()).norm() > 1e-12 * (1.0 + mix.cov.norm())) {
    throw ConfigError(name + ": covariance is not symmetric");
  }
  Eigen::LLT<Mat> llt(mix.cov);
  if (llt.info() != Eigen::Success) throw ConfigError(name + ": covariance is not positive definite");
}

}  // namespace

void PopulationSpec::validate() const {
  if (dim < 1) throw ConfigError("population: dim must be >= 1");
  if (!(features.bound > 0.0)) throw ConfigError("population: feature bound must be positive");
  if (features.kind != FeatureKind::rademacher && !(features.scale > 0.0)) {
    throw ConfigError("population: feature scale must be positive");
  }
  validate_theta(theta, dim, "theta");
  validate_theta(ood, dim, "ood");
}

double ood_separation(const PopulationSpec& spec) {
  if (spec.theta.kind != ThetaKind::gaussian_mixture || spec.ood.kind != ThetaKind::gaussian_mixture) {
    return 0.0;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(spec.theta.mixture.cov);
  const double sd = std::sqrt(eig.eigenvalues().maxCoeff());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ood_mean : spec.ood.mixture.means) {
    for (const auto& m : spec.theta.mixture.means) best = std::min(best, (ood_mean - m).norm() / sd);
  }
  return best;
}

}  // namespace icra
