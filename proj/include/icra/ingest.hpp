#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "icra/core.hpp"

namespace icra::ingest {

inline constexpr int kRatingMin = -10;
inline constexpr int kRatingMax = 10;
inline constexpr int kFeatureDim = 5;

/// One binary choice between two arms, each an unordered pair of rated items.
struct TrialRecord {
  std::string participant;
  std::array<int, 2> arm0{};
  std::array<int, 2> arm1{};
  int choice = 0;   // 1 when arm1 was chosen
  double rt = 0.0;  // seconds
  std::size_t line = 0;  // source line (1-based, header is line 1); 0 if synthetic

  /// Equality ignores the source line.
  bool operator==(const TrialRecord& o) const {
    return participant == o.participant && arm0 == o.arm0 && arm1 == o.arm1 && choice == o.choice && rt == o.rt;
  }
};

/// Column names of the trial CSV.
struct Schema {
  std::string participant = "participant";
  std::string r0a = "r0a";
  std::string r0b = "r0b";
  std::string r1a = "r1a";
  std::string r1b = "r1b";
  std::string choice = "choice";
  std::string rt = "rt";
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<TrialRecord> records;
  std::vector<RowError> errors;  // rejected rows (non-strict mode)
};

/// Parses trial CSV text. Missing columns always throw DataError; in strict
/// mode the first bad row throws too, otherwise bad rows are collected.
LoadResult parse_trials(const std::string& text, const Schema& schema = {}, bool strict = false);

/// Reads and parses a trial CSV file. Throws IoError when unreadable.
LoadResult load_trials(const std::filesystem::path& path, const Schema& schema = {}, bool strict = false);

/// CSV text that parse_trials reads back to equal records.
std::string serialize_trials(const std::vector<TrialRecord>& records, const Schema& schema = {});

/// Per-arm map psi(a, b) = (a, b, a^2, b^2, a b) on ratings divided by 10,
/// after sorting the pair in descending order.
Vec arm_features(int rating_a, int rating_b);

struct Featurized {
  FeatureDiff phi_diff;  // psi(arm1) - psi(arm0)
  double z = 0.0;        // +1 when arm1 was chosen, else -1
  double t = 0.0;
};

/// Throws DataError for an invalid record.
Featurized featurize(const TrialRecord& record);

/// Participants held out as the "new human type" group.
struct SplitSpec {
  std::vector<std::string> heldout;
  std::size_t min_trials = 1;
};

struct RealTasks {
  std::vector<TaskSample> train;
  std::vector<TaskSample> heldout;
  std::vector<std::string> warnings;  // skipped participants
};

/// Per participant (in sorted id order) the trials are shuffled with a
/// seeded stream and cut into disjoint groups of M demonstrations plus one
/// query (K = 1; z and t from the data). Tasks carry a zero theta since the
/// true reward is unknown. Throws ConfigError when the held-out set is empty
/// or names no loaded participant.
RealTasks build_real_tasks(const std::vector<TrialRecord>& records, const SplitSpec& split, int n_demos,
                           std::uint64_t seed);

/// Synthetic stand-in for the behavioral data: integer ratings, choices and
/// response times drawn from a drift-diffusion model whose drift is
/// psi(arm1)^T theta - psi(arm0)^T theta for a per-participant theta.
std::vector<TrialRecord> synthetic_trials(int n_participants, int trials_per_participant, std::uint64_t seed);

}  // namespace icra::ingest
