#include "icra/synthgen.hpp"

#include <cmath>
#include <random>

namespace icra::synth {

namespace {

Vec sample_gaussian_mixture(const GaussianMixture& mix, Rng& rng) {
  std::size_t component = 0;
  if (mix.means.size() > 1) {
    const double u = rng.uniform();
    double acc = 0.0;
    component = mix.means.size() - 1;
    for (std::size_t c = 0; c < mix.weights.size(); ++c) {
      acc += mix.weights[c];
      if (u < acc) {
        component = c;
        break;
      }
    }
  }
  const auto d = mix.cov.rows();
  Vec z(d);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
  const Mat chol = Eigen::LLT<Mat>(mix.cov).matrixL();
  return mix.means[component] + chol * z;
}

Vec sample_theta_vector(const ThetaDistribution& dist, int dim, Rng& rng) {
  if (dist.kind == ThetaKind::tanh_uniform) {
    Vec theta(dim);
    for (int i = 0; i < dim; ++i) theta[i] = 2.0 * std::atanh(2.0 * rng.uniform_open() - 1.0);
    return theta;
  }
  return sample_gaussian_mixture(dist.mixture, rng);
}

Vec sample_raw_feature(const FeatureDistribution& dist, int dim, Rng& rng) {
  Vec phi(dim);
  switch (dist.kind) {
    case FeatureKind::isotropic_gaussian: {
      std::normal_distribution<double> normal(0.0, dist.scale);
      for (int i = 0; i < dim; ++i) phi[i] = normal(rng);
      break;
    }
    case FeatureKind::uniform_cube:
      for (int i = 0; i < dim; ++i) phi[i] = dist.scale * (2.0 * rng.uniform() - 1.0);
      break;
    case FeatureKind::rademacher:
      for (int i = 0; i < dim; ++i) phi[i] = (rng() >> 63) ? 1.0 : -1.0;
      break;
  }
  return phi;
}

}  // namespace

RewardParam sample_theta(const PopulationSpec& spec, ThetaMode mode, Rng& rng) {
  const ThetaDistribution& dist = mode == ThetaMode::in_dist ? spec.theta : spec.ood;
  return RewardParam(sample_theta_vector(dist, spec.dim, rng));
}

FeatureDiff sample_feature(const PopulationSpec& spec, Rng& rng) {
  constexpr int kMaxAttempts = 1000000;
  const double bound = spec.features.bound;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vec phi = sample_raw_feature(spec.features, spec.dim, rng);
    if (!std::isfinite(bound) || phi.norm() <= bound) return FeatureDiff(std::move(phi));
  }
  throw ConfigError("sample_feature: 10^6 draws exceeded the norm bound; bound too small for the distribution");
}

Demonstration sample_demonstration(const FeatureDiff& phi_diff, const RewardParam& theta, int k,
                                   LabelMode mode, const DdmConfig& cfg, Rng& rng) {
  if (k < 1) throw ContractError("sample_demonstration: k must be >= 1");
  const double drift = logit(phi_diff, theta);
  if (mode == LabelMode::binary) {
    // Only the choice is kept. Drawing it from the Bradley-Terry law is the
    // same distribution as the DDM exit side; the euler sampler still walks.
    const double z = cfg.sampler == Sampler::euler
                         ? simulate_ddm(drift, cfg, rng).z
                         : (rng.uniform() < logistic(drift) ? 1.0 : -1.0);
    return {phi_diff, z, Demonstration::kNoTime, 1};
  }
  const AveragedResponse r = sample_averaged(drift, k, cfg, rng);
  return {phi_diff, r.z, r.t, k};
}

TaskSample generate_task(const PopulationSpec& spec, int n_demos, int k, LabelMode mode,
                         const DdmConfig& cfg, Rng& rng, ThetaMode theta_mode) {
  if (n_demos < 1) throw ContractError("generate_task: n_demos must be >= 1");
  TaskSample task;
  task.theta = sample_theta(spec, theta_mode, rng);
  task.demos.reserve(static_cast<std::size_t>(n_demos));
  for (int l = 0; l < n_demos; ++l) {
    task.demos.push_back(sample_demonstration(sample_feature(spec, rng), task.theta, k, mode, cfg, rng));
  }
  task.query = sample_feature(spec, rng);
  const Demonstration q = sample_demonstration(task.query, task.theta, k, mode, cfg, rng);
  task.query_truth.z = q.z;
  if (mode == LabelMode::response_time) task.query_truth.t = q.t;
  return task;
}

std::vector<TaskSample> generate_tasks(const PopulationSpec& spec, const BatchRequest& request,
                                       const DdmConfig& cfg, Exec exec) {
  std::vector<TaskSample> tasks(request.n_tasks);
  for_each_index(request.n_tasks, exec, [&](std::size_t i) {
    Rng rng = Rng::stream(request.seed, request.stream, request.batch_index, i);
    tasks[i] = generate_task(spec, request.n_demos, request.k, request.mode, cfg, rng, request.theta_mode);
  });
  return tasks;
}

}  // namespace icra::synth
