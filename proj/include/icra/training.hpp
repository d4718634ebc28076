#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "icra/attention.hpp"
#include "icra/core.hpp"
#include "icra/ddm.hpp"
#include "icra/parallel.hpp"
#include "icra/population.hpp"

namespace icra::training {

/// Per-task quantities the losses depend on: the label moment s (one column
/// per task), the query feature, and the target (z^q in binary mode, z^q/t^q
/// in response-time mode). Building this once avoids re-reading every
/// demonstration on each gradient evaluation.
struct TaskSummaries {
  LabelMode mode = LabelMode::binary;
  Mat moments;
  Mat queries;
  Vec targets;

  Eigen::Index size() const { return targets.size(); }
  Eigen::Index dim() const { return queries.rows(); }
};

/// Throws DataError when a response-time query has t <= 0.
TaskSummaries summarize(const std::vector<TaskSample>& tasks, LabelMode mode, Exec exec = Exec::parallel);

// Losses and exact gradients in U. The TaskSample overloads summarize first.
double loss_binary(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);
double loss_regression(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);
Mat grad_binary(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);
Mat grad_regression(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);

double loss_binary(const Mat& u, const std::vector<TaskSample>& tasks);
double loss_regression(const Mat& u, const std::vector<TaskSample>& tasks);
Mat grad_binary(const Mat& u, const std::vector<TaskSample>& tasks);
Mat grad_regression(const Mat& u, const std::vector<TaskSample>& tasks);

/// Mode-dispatching helpers.
double loss(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);
Mat gradient(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);

/// Empirical d^2 x d^2 Hessian of the loss in vec(U) (column-major vec):
/// mean of w * (q q^T kron s s^T), with w = sigma(1 - sigma) for the binary
/// loss and w = 1 for the regression loss.
Mat hessian(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);

namespace reference {
// Plain single-accumulator loops kept as the oracle for the chunked OpenMP
// kernels above.
double loss(const Mat& u, const TaskSummaries& batch);
Mat gradient(const Mat& u, const TaskSummaries& batch);
Mat hessian(const Mat& u, const TaskSummaries& batch);
}  // namespace reference

struct HessianProbe {
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double asymmetry = 0.0;  // max |H - H^T| of the assembled matrix
  int iterations = 0;
};

/// Extreme eigenvalues of the empirical Hessian by power iteration (largest)
/// and inverse iteration (smallest). Throws InternalError when the assembled
/// matrix is asymmetric beyond 1e-10.
HessianProbe hessian_probe(const Mat& u, const TaskSummaries& batch, Exec exec = Exec::parallel);

/// Running sums of the regression normal equations, so a closed-form fit can
/// stream over corpora too large to hold in memory.
struct NormalEquations {
  Mat gram;  // sum over tasks of (q kron s)(q kron s)^T
  Vec rhs;   // sum over tasks of target * (q kron s)
  std::size_t count = 0;

  explicit NormalEquations(Eigen::Index d);
  void add(const TaskSummaries& batch, Exec exec = Exec::parallel);
  /// Throws DataError when the accumulated system is singular.
  Mat solve() const;
};

/// Exact minimizer of the empirical regression loss (normal equations).
Mat fit_regression_closed_form(const TaskSummaries& batch, Exec exec = Exec::parallel);

/// Newton iterations on the empirical binary loss.
Mat fit_binary_newton(const TaskSummaries& batch, const Mat& init, double tol = 1e-12, int max_iters = 100,
                      Exec exec = Exec::parallel);

struct TrainConfig {
  std::size_t batch_tasks = 4096;
  std::optional<double> step_size;  // unset: 1 / (top Hessian eigenvalue at U = 0, preconditioned if enabled)
  int max_iters = 200;
  std::optional<double> grad_tol;  // unset: 1e-4 * d
  double radius = 100.0;
  LabelMode mode = LabelMode::response_time;
  bool fresh_tasks = true;
  std::size_t holdout_tasks = 4096;
  int check_every = 10;
  bool precondition = false;  // scale gradients by the inverse moment factors of the Hessian
  Exec exec = Exec::parallel;

  void validate() const;
};

struct TrainReport {
  Mat u;
  std::vector<double> loss_trace;       // batch loss before each update
  std::vector<double> grad_norm_trace;  // batch gradient norm before each update
  int iterations = 0;
  int projection_hits = 0;
  double step_size = 0.0;
  double holdout_grad_norm = 0.0;
  double holdout_grad_se = 0.0;  // sampling SE of that gradient (0 when the holdout is the corpus)
  bool converged = false;    // holdout gradient below grad_tol or within 1.5 SE of zero
  bool no_progress = false;  // step size was zero
};

/// Where training data comes from.
struct TaskSource {
  PopulationSpec spec;
  int n_demos = 32;
  int k = 1;
  synth::DdmConfig ddm;
  std::uint64_t seed = 0;
};

/// Projected gradient descent U <- Pi_R(U - eta * grad). With fresh_tasks a
/// new batch is drawn every iteration; otherwise one corpus of batch_tasks
/// tasks is reused (full-batch descent). Throws DivergenceError when the batch
/// loss exceeds 10^3 times its initial value.
TrainReport train(const TrainConfig& cfg, const TaskSource& source, std::optional<Mat> init = std::nullopt);

/// Full-batch projected gradient descent on a fixed corpus (e.g. ingested
/// data); the corpus doubles as the holdout.
TrainReport train_on_corpus(const TrainConfig& cfg, const TaskSummaries& corpus,
                            std::optional<Mat> init = std::nullopt);

}  // namespace icra::training
