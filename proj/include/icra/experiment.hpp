#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icra/config.hpp"
#include "icra/ddm.hpp"
#include "icra/eval.hpp"
#include "icra/ingest.hpp"
#include "icra/population.hpp"
#include "icra/synthgen.hpp"
#include "icra/training.hpp"

namespace icra::cli {

enum class DataSource { synthetic, ingest };

struct IngestConfig {
  std::filesystem::path path;
  ingest::Schema schema;
  ingest::SplitSpec split;
};

/// One convergence-rate check run by `icra rates`.
struct SweepSpec {
  std::string name;  // n, k, m, binary_n_1d, ratio_exponential, ratio_ddm
  bool is_ratio = false;
  eval::RateConfig rate;
  eval::RatioConfig ratio;
  double expected_slope = -1.0;
  double tolerance = 0.2;
};

struct ImpossibilityConfig {
  double min = -10.0;
  double max = 10.0;
  double step = 0.25;
};

/// Everything one experiment needs, read from a KeyValueConfig (keys and
/// defaults are listed in docs/config.md).
struct ExperimentConfig {
  std::uint64_t seed = 0;
  PopulationSpec spec;
  synth::DdmConfig ddm;
  int n_demos = 32;  // N, demonstrations per training prompt
  int m_demos = 32;  // M, demonstrations per evaluation prompt
  int k = 32;        // K, annotators per demonstration (response-time mode)

  std::size_t generate_tasks = 100;
  LabelMode generate_mode = LabelMode::response_time;
  synth::ThetaMode generate_theta = synth::ThetaMode::in_dist;

  std::vector<LabelMode> train_modes{LabelMode::binary, LabelMode::response_time};
  training::TrainConfig train;
  std::optional<double> train_target;  // bound on ||U - Sigma^{-1}||_F (response time)

  eval::EvalConfig eval;
  std::vector<int> eval_m_grid{4, 8, 16};  // ingested data
  double binary_gap_min = 0.05;
  double rt_gap_max = 0.05;

  DataSource source = DataSource::synthetic;
  IngestConfig ingest;

  std::vector<SweepSpec> sweeps;
  ImpossibilityConfig impossibility;

  /// Builds and validates the configuration. The seed comes from
  /// `seed_override` or the `seed` key; missing both is a ConfigError, as
  /// is any key the schema does not know.
  static ExperimentConfig from(const KeyValueConfig& kv, std::optional<std::uint64_t> seed_override,
                               const std::filesystem::path& base_dir = {});
};

/// The desk-scale population: d = 5, two in-distribution components at
/// +-(2, 0, ...) with covariance 0.25 I, OOD mean (0, 4, 0, ...), isotropic
/// Gaussian features with sigma = 1 truncated at norm 4.
PopulationSpec default_population(int dim = 5);

/// Population keys in config syntax (written to metadata sidecars).
std::string describe_population(const PopulationSpec& spec);

}  // namespace icra::cli
