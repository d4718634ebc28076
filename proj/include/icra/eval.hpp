#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icra/attention.hpp"
#include "icra/core.hpp"
#include "icra/ddm.hpp"
#include "icra/parallel.hpp"
#include "icra/population.hpp"
#include "icra/synthgen.hpp"

namespace icra::eval {

/// What a prediction is scored against.
///   bayes:   the most likely choice sign(phi_q^T theta) (default; removes the
///            irreducible Bradley-Terry noise);
///   sampled: the sign of the recorded query choice (the only option for
///            ingested data, where theta is unknown).
enum class GroundTruth { bayes, sampled };

std::string to_string(GroundTruth g);
GroundTruth parse_ground_truth(const std::string& text);

/// Queries whose margin |phi_q^T theta| is below this have no majority label
/// and are excluded from the accuracy.
inline constexpr double kMarginEpsilon = 1e-9;

struct EvalConfig {
  int n_demos = 32;  // M, demonstrations per evaluation prompt
  int k = 32;        // annotators per demonstration (response-time mode)
  std::size_t n_tasks = 2000;  // per split
  GroundTruth truth = GroundTruth::bayes;
  synth::DdmConfig ddm;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct PredictionRecord {
  std::size_t task = 0;
  synth::ThetaMode split = synth::ThetaMode::in_dist;
  double score = 0.0;  // probability (binary) or regression output
  int z_hat = -1;
  int truth = 0;  // 0 when excluded
  bool excluded = false;
  bool correct = false;
};

struct AccuracyEstimate {
  double accuracy = 0.0;   // NaN when nothing was scored
  double ci_radius = 0.0;  // 1.96 sqrt(p (1 - p) / n)
  std::size_t n_scored = 0;
  std::size_t n_excluded = 0;
};

/// 95% binomial radius for a proportion estimated from n trials.
double binomial_ci_radius(double p, std::size_t n);

struct EvalReport {
  LabelMode mode = LabelMode::binary;
  AccuracyEstimate id;
  AccuracyEstimate ood;
  std::vector<PredictionRecord> records;
  std::size_t n_eval_tasks = 0;  // per split
  int n_demos = 0;
  int k = 1;
};

/// Scores prepared tasks. Predictions use predict_binary (binary mode) or the
/// sign of predict_regression (response-time mode; 0 resolves to -1).
AccuracyEstimate score_tasks(const attention::AttentionParams& params, const std::vector<TaskSample>& tasks,
                             LabelMode mode, GroundTruth truth, synth::ThetaMode split,
                             std::vector<PredictionRecord>* records = nullptr, Exec exec = Exec::parallel);

/// In-distribution and OOD accuracy. Both splits run through the same code
/// path and differ only in how theta is drawn.
EvalReport eval_accuracy(const attention::AttentionParams& params, const PopulationSpec& spec, LabelMode mode,
                         const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Convergence rates

struct SlopeFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(y) on log(x). Throws DataError when fewer than
/// four points have finite positive x and y.
SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

enum class SweepVariable {
  n,            // demonstrations per training prompt, response-time mode
  k,            // annotators per demonstration, response-time mode
  m,            // inference demonstrations at the oracle U, unseen theta
  binary_n_1d,  // demonstrations per prompt, binary mode, 1-d construction
};

std::string to_string(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& text);

struct RateReport {
  std::string variable;
  std::vector<double> grid;
  std::vector<double> errors;
  std::vector<double> error_se;
  SlopeFit fit;
  bool fitted = false;
};

struct RateConfig {
  SweepVariable variable = SweepVariable::n;
  std::vector<int> grid;
  PopulationSpec spec;
  int n_demos = 4096;            // N when not swept
  int k = 4096;                  // K when not swept
  std::size_t n_tasks = 1 << 15;  // tasks per fit (n, k) or per point (m)
  int replications = 4;          // independent corpora per grid value (n, k)
  synth::DdmConfig ddm;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;

  /// Throws ConfigError unless the grid has >= 4 strictly increasing
  /// positive values.
  void validate() const;
};

/// Error per grid value:
///   n, k: ||U - Sigma^{-1}||_F with U the closed-form empirical minimizer of
///         the response-time loss on n_tasks fresh tasks (mean over
///         replications);
///   m:    mean of (o_hat - 2 theta^T phi_q)^2 at U = Sigma^{-1} on OOD tasks;
///   binary_n_1d: |U_N - U_inf| between the exact finite-N and infinite-N
///         minimizers of the binary objective in the 1-d construction.
RateReport rate_sweep(const RateConfig& cfg);

enum class RatioKind {
  shifted_exponentials,  // independent X and Y, each shift + exponential
  identical,             // X = Y, so the ratio is exactly 1
  ddm,                   // X = z and Y = t of one exact DDM draw
};

struct RatioConfig {
  RatioKind kind = RatioKind::shifted_exponentials;
  double mean_x = 1.0;
  double mean_y = 2.0;
  double shift_fraction = 0.5;  // shift = fraction * mean for the exponentials
  double drift = 1.0;           // ddm kind
  std::vector<int> grid;
  int replications = 10000;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;

  /// Throws ConfigError when |E[Y]| < 0.1 or the grid is invalid.
  void validate() const;
};

/// E(mean X / mean Y - mu_X / mu_Y)^2 per sample size, by Monte Carlo. The
/// identical kind returns exact zeros and no fit.
RateReport ratio_concentration_test(const RatioConfig& cfg);

// ---------------------------------------------------------------------------
// Reports

struct EvalRow {
  LabelMode mode = LabelMode::binary;
  std::string split;  // "id" or "ood"
  int n_demos = 0;
  int k = 1;
  double accuracy = 0.0;
  double ci_radius = 0.0;
  std::size_t n_scored = 0;
  std::size_t n_excluded = 0;

  bool operator==(const EvalRow&) const = default;
};

std::vector<EvalRow> eval_rows(const EvalReport& report);

struct Table {
  std::string text;
  std::string csv;
  bool empty = true;
};

/// Mode x {ID, OOD} accuracy grid with confidence radii, plus its CSV mirror.
/// Several reports for the same mode but different M become extra columns
/// (one per M). Empty input yields an explicit "no data" table.
Table table_report(const std::vector<EvalReport>& reports);

/// Parses the CSV written by table_report. Throws DataError on malformed
/// input.
std::vector<EvalRow> parse_eval_csv(const std::string& csv);

std::string rate_report_csv(const std::vector<RateReport>& reports);

}  // namespace icra::eval
