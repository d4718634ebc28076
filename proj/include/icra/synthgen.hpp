#pragma once

#include <cstdint>
#include <vector>

#include "icra/core.hpp"
#include "icra/ddm.hpp"
#include "icra/parallel.hpp"
#include "icra/population.hpp"
#include "icra/rng.hpp"

namespace icra::synth {

enum class ThetaMode { in_dist, ood };

/// Draws a reward parameter from H (in_dist) or the OOD distribution.
RewardParam sample_theta(const PopulationSpec& spec, ThetaMode mode, Rng& rng);

/// I.i.d. feature draw with norm <= bound, enforced by rejection. Throws
/// ConfigError after 10^6 rejected attempts.
FeatureDiff sample_feature(const PopulationSpec& spec, Rng& rng);

/// One demonstration with k annotators. Binary mode forces k = 1 and leaves
/// the response time unset.
Demonstration sample_demonstration(const FeatureDiff& phi_diff, const RewardParam& theta, int k,
                                   LabelMode mode, const DdmConfig& cfg, Rng& rng);

/// One task: theta, n_demos demonstrations and a labelled query.
TaskSample generate_task(const PopulationSpec& spec, int n_demos, int k, LabelMode mode,
                         const DdmConfig& cfg, Rng& rng, ThetaMode theta_mode = ThetaMode::in_dist);

struct BatchRequest {
  std::size_t n_tasks = 0;
  int n_demos = 1;
  int k = 1;
  LabelMode mode = LabelMode::binary;
  ThetaMode theta_mode = ThetaMode::in_dist;
  std::uint64_t seed = 0;
  std::uint64_t stream = streams::kTasks;
  std::uint64_t batch_index = 0;  // distinguishes successive batches of one stream
};

/// Generates a batch; task i draws from Rng::stream(seed, stream, batch_index,
/// i), so the output does not depend on the execution policy.
std::vector<TaskSample> generate_tasks(const PopulationSpec& spec, const BatchRequest& request,
                                       const DdmConfig& cfg, Exec exec = Exec::parallel);

}  // namespace icra::synth
