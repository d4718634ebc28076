#include "icra/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "icra/synthgen.hpp"

namespace icra::training {

namespace {

// log(sigma(x)) without overflow.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double item_logit(const Mat& u, const TaskSummaries& b, Eigen::Index i) {
  return b.moments.col(i).dot(u * b.queries.col(i));
}

double item_loss(double logit, double target, LabelMode mode) {
  if (mode == LabelMode::binary) {
    const double log_floor = std::log(kLogClamp);
    const double log_p = std::max(log_sigmoid(logit), log_floor);
    const double log_q = std::max(log_sigmoid(-logit), log_floor);
    return -0.5 * ((1.0 + target) * log_p + (1.0 - target) * log_q);
  }
  const double r = logit - target;
  return 0.5 * r * r;
}

// d(item loss)/d(logit).
double item_residual(double logit, double target, LabelMode mode) {
  return mode == LabelMode::binary ? logistic(logit) - 0.5 * (1.0 + target) : logit - target;
}

// d^2(item loss)/d(logit)^2.
double item_curvature(double logit, LabelMode mode) {
  if (mode == LabelMode::binary) {
    const double p = logistic(logit);
    return p * (1.0 - p);
  }
  return 1.0;
}

// q kron s, the gradient of the logit in column-major vec(U).
Vec kron_feature(const TaskSummaries& b, Eigen::Index i) {
  const auto d = b.dim();
  Vec v(d * d);
  for (Eigen::Index j = 0; j < d; ++j) v.segment(j * d, d) = b.queries(j, i) * b.moments.col(i);
  return v;
}

void check_batch(const Mat& u, const TaskSummaries& b) {
  if (b.size() == 0) throw ContractError("training: empty task batch");
  if (u.rows() != b.dim() || u.cols() != b.dim()) throw ContractError("training: U dimension mismatch");
}

void require_mode(const TaskSummaries& b, LabelMode mode, const char* who) {
  if (b.mode != mode) throw ContractError(std::string(who) + ": batch has the wrong label mode");
}

Mat unvec(const Vec& w, Eigen::Index d) { return Eigen::Map<const Mat>(w.data(), d, d); }
Vec vec(const Mat& u) { return Eigen::Map<const Vec>(u.data(), u.size()); }

}  // namespace

TaskSummaries summarize(const std::vector<TaskSample>& tasks, LabelMode mode, Exec exec) {
  if (tasks.empty()) throw ContractError("summarize: no tasks");
  const auto d = tasks.front().dim();
  const auto n = static_cast<Eigen::Index>(tasks.size());
  TaskSummaries out;
  out.mode = mode;
  out.moments.resize(d, n);
  out.queries.resize(d, n);
  out.targets.resize(n);
  for_each_index(tasks.size(), exec, [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    const TaskSample& task = tasks[idx];
    if (task.dim() != d || task.demos.empty()) throw DataError("summarize: inconsistent task " + std::to_string(idx));
    Vec s = Vec::Zero(d);
    for (const auto& demo : task.demos) {
      double label = demo.z;
      if (mode == LabelMode::response_time) {
        if (!(demo.t > 0.0)) throw DataError("summarize: non-positive demonstration time in task " + std::to_string(idx));
        label /= demo.t;
      }
      s += label * demo.phi_diff.values();
    }
    out.moments.col(i) = s / static_cast<double>(task.demos.size());
    out.queries.col(i) = task.query.values();
    if (mode == LabelMode::binary) {
      out.targets[i] = task.query_truth.z;
    } else {
      const auto t = task.query_truth.t;
      if (!t || !(*t > 0.0)) throw DataError("summarize: query response time must be positive (task " + std::to_string(idx) + ")");
      out.targets[i] = task.query_truth.z / *t;
    }
  });
  return out;
}

double loss(const Mat& u, const TaskSummaries& b, Exec exec) {
  check_batch(u, b);
  const double total = chunked_reduce<double>(
      static_cast<std::size_t>(b.size()), exec, [] { return 0.0; },
      [&](double& acc, std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        acc += item_loss(item_logit(u, b, k), b.targets[k], b.mode);
      },
      [](double& acc, double part) { acc += part; });
  return total / static_cast<double>(b.size());
}

Mat gradient(const Mat& u, const TaskSummaries& b, Exec exec) {
  check_batch(u, b);
  const auto d = b.dim();
  Mat total = chunked_reduce<Mat>(
      static_cast<std::size_t>(b.size()), exec, [d] { return Mat::Zero(d, d).eval(); },
      [&](Mat& acc, std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double r = item_residual(item_logit(u, b, k), b.targets[k], b.mode);
        acc.noalias() += r * b.moments.col(k) * b.queries.col(k).transpose();
      },
      [](Mat& acc, const Mat& part) { acc += part; });
  return total / static_cast<double>(b.size());
}

Mat hessian(const Mat& u, const TaskSummaries& b, Exec exec) {
  check_batch(u, b);
  const auto dd = b.dim() * b.dim();
  Mat total = chunked_reduce<Mat>(
      static_cast<std::size_t>(b.size()), exec, [dd] { return Mat::Zero(dd, dd).eval(); },
      [&](Mat& acc, std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double w = item_curvature(item_logit(u, b, k), b.mode);
        const Vec v = kron_feature(b, k);
        acc.noalias() += w * v * v.transpose();
      },
      [](Mat& acc, const Mat& part) { acc += part; });
  return total / static_cast<double>(b.size());
}

namespace reference {

double loss(const Mat& u, const TaskSummaries& b) {
  check_batch(u, b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) total += item_loss(item_logit(u, b, i), b.targets[i], b.mode);
  return total / static_cast<double>(b.size());
}

Mat gradient(const Mat& u, const TaskSummaries& b) {
  check_batch(u, b);
  Mat g = Mat::Zero(b.dim(), b.dim());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double r = item_residual(item_logit(u, b, i), b.targets[i], b.mode);
    g += r * b.moments.col(i) * b.queries.col(i).transpose();
  }
  return g / static_cast<double>(b.size());
}

Mat hessian(const Mat& u, const TaskSummaries& b) {
  check_batch(u, b);
  const auto dd = b.dim() * b.dim();
  Mat h = Mat::Zero(dd, dd);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const Vec v = kron_feature(b, i);
    h += item_curvature(item_logit(u, b, i), b.mode) * v * v.transpose();
  }
  return h / static_cast<double>(b.size());
}

}  // namespace reference

double loss_binary(const Mat& u, const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::binary, "loss_binary");
  return loss(u, b, exec);
}
double loss_regression(const Mat& u, const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::response_time, "loss_regression");
  return loss(u, b, exec);
}
Mat grad_binary(const Mat& u, const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::binary, "grad_binary");
  return gradient(u, b, exec);
}
Mat grad_regression(const Mat& u, const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::response_time, "grad_regression");
  return gradient(u, b, exec);
}

double loss_binary(const Mat& u, const std::vector<TaskSample>& tasks) {
  return loss(u, summarize(tasks, LabelMode::binary));
}
double loss_regression(const Mat& u, const std::vector<TaskSample>& tasks) {
  return loss(u, summarize(tasks, LabelMode::response_time));
}
Mat grad_binary(const Mat& u, const std::vector<TaskSample>& tasks) {
  return gradient(u, summarize(tasks, LabelMode::binary));
}
Mat grad_regression(const Mat& u, const std::vector<TaskSample>& tasks) {
  return gradient(u, summarize(tasks, LabelMode::response_time));
}

HessianProbe hessian_probe(const Mat& u, const TaskSummaries& batch, Exec exec) {
  const Mat h = hessian(u, batch, exec);
  HessianProbe out;
  out.asymmetry = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (out.asymmetry > 1e-10) throw InternalError("hessian_probe: assembled Hessian is not symmetric");

  const auto n = h.rows();
  // Deterministic, generic start vector.
  Vec start(n);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = 1.0 + 0.1 * std::sin(1.0 + 3.7 * static_cast<double>(i));
  start.normalize();

  auto power = [&](auto&& apply, double& value) {
    Vec x = start;
    double prev = 0.0;
    for (int it = 0; it < 200000; ++it) {
      Vec y = apply(x);
      const double lambda = x.dot(y);
      const double norm = y.norm();
      ++out.iterations;
      if (norm == 0.0) {
        value = 0.0;
        return;
      }
      x = y / norm;
      if (it > 2 && std::abs(lambda - prev) <= 1e-14 * std::abs(lambda)) {
        value = lambda;
        return;
      }
      prev = lambda;
    }
    value = prev;
  };

  power([&](const Vec& x) { return Vec(h * x); }, out.max_eigenvalue);

  Eigen::LLT<Mat> llt(h);
  if (llt.info() == Eigen::Success) {
    double inv_top = 0.0;
    power([&](const Vec& x) { return Vec(llt.solve(x)); }, inv_top);
    out.min_eigenvalue = inv_top > 0.0 ? 1.0 / inv_top : 0.0;
  } else {
    // Not positive definite: largest eigenvalue of (lambda_max I - H).
    double gap = 0.0;
    const double top = out.max_eigenvalue;
    power([&](const Vec& x) { return Vec(top * x - h * x); }, gap);
    out.min_eigenvalue = top - gap;
  }
  return out;
}

NormalEquations::NormalEquations(Eigen::Index d) : gram(Mat::Zero(d * d, d * d)), rhs(Vec::Zero(d * d)) {}

void NormalEquations::add(const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::response_time, "NormalEquations::add");
  const auto d = b.dim();
  if (d * d != rhs.size()) throw ContractError("NormalEquations::add: dimension mismatch");
  const auto n = static_cast<double>(b.size());
  gram += n * hessian(Mat::Zero(d, d), b, exec);
  const auto dd = d * d;
  rhs += chunked_reduce<Vec>(
      static_cast<std::size_t>(b.size()), exec, [dd] { return Vec::Zero(dd).eval(); },
      [&](Vec& acc, std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        acc += b.targets[k] * kron_feature(b, k);
      },
      [](Vec& acc, const Vec& part) { acc += part; });
  count += static_cast<std::size_t>(b.size());
}

Mat NormalEquations::solve() const {
  if (count == 0) throw DataError("fit_regression_closed_form: no tasks");
  Eigen::LDLT<Mat> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw DataError("fit_regression_closed_form: normal equations are singular");
  }
  const auto d = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(rhs.size()))));
  return unvec(ldlt.solve(rhs), d);
}

Mat fit_regression_closed_form(const TaskSummaries& b, Exec exec) {
  require_mode(b, LabelMode::response_time, "fit_regression_closed_form");
  NormalEquations eq(b.dim());
  eq.add(b, exec);
  return eq.solve();
}

Mat fit_binary_newton(const TaskSummaries& b, const Mat& init, double tol, int max_iters, Exec exec) {
  require_mode(b, LabelMode::binary, "fit_binary_newton");
  const auto d = b.dim();
  Mat u = init;
  for (int it = 0; it < max_iters; ++it) {
    const Vec g = vec(gradient(u, b, exec));
    const Mat h = hessian(u, b, exec);
    Eigen::LDLT<Mat> ldlt(h);
    const Vec step = ldlt.solve(g);
    // Backtracking keeps the damped Newton iteration monotone.
    const double base = loss(u, b, exec);
    double scale = 1.0;
    Mat candidate = u - unvec(step, d);
    while (loss(candidate, b, exec) > base + 1e-15 * std::abs(base) && scale > 1e-8) {
      scale *= 0.5;
      candidate = u - scale * unvec(step, d);
    }
    u = candidate;
    if (scale * step.norm() < tol) break;
  }
  return u;
}

void TrainConfig::validate() const {
  if (batch_tasks < 1) throw ConfigError("train: batch_tasks must be >= 1");
  if (step_size && !(*step_size >= 0.0)) throw ConfigError("train: step_size must be >= 0");
  if (max_iters < 1) throw ConfigError("train: max_iters must be >= 1");
  if (grad_tol && !(*grad_tol > 0.0)) throw ConfigError("train: grad_tol must be positive");
  if (!(radius > 0.0)) throw ConfigError("train: projection radius must be positive");
  if (holdout_tasks < 1) throw ConfigError("train: holdout_tasks must be >= 1");
  if (check_every < 1) throw ConfigError("train: check_every must be >= 1");
}

namespace {

// Frobenius standard error of the mean per-task gradient.
double gradient_standard_error(const Mat& u, const TaskSummaries& b, const Mat& mean, Exec exec) {
  const auto n = static_cast<std::size_t>(b.size());
  if (n < 2) return 0.0;
  const double ss = chunked_reduce<double>(
      n, exec, [] { return 0.0; },
      [&](double& acc, std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double r = item_residual(item_logit(u, b, k), b.targets[k], b.mode);
        acc += (r * b.moments.col(k) * b.queries.col(k).transpose() - mean).squaredNorm();
      },
      [](double& acc, double part) { acc += part; });
  return std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1)));
}

// When the holdout is an independent sample its gradient never vanishes; a
// norm within three standard errors of zero counts as converged.
// Inverse square root of the (ridged) second moment of the columns of x.
Mat inverse_sqrt_moment(const Mat& x) {
  const auto d = x.rows();
  Mat m = x * x.transpose() / static_cast<double>(x.cols());
  m += 1e-10 * std::max(m.trace() / static_cast<double>(d), 1e-300) * Mat::Identity(d, d);
  const Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

template <class BatchFor>
TrainReport run_pgd(const TrainConfig& cfg, BatchFor&& batch_for, const TaskSummaries& holdout, Mat init,
                    bool independent_holdout) {
  const auto d = holdout.dim();
  attention::AttentionParams params(std::move(init), cfg.radius);
  TrainReport report;

  // The query is drawn independently of the demonstrations, so the Hessian
  // is c * E[s s^T] (x) E[q q^T] with c the per-item curvature. Scaling the
  // gradient by the inverses of those two factors (estimated once on the
  // holdout) removes the conditioning of the feature and moment laws.
  Mat left = Mat::Identity(d, d);   // E[s s^T]^{-1/2}
  Mat right = Mat::Identity(d, d);  // E[q q^T]^{-1/2}
  if (cfg.precondition) {
    left = inverse_sqrt_moment(holdout.moments);
    right = inverse_sqrt_moment(holdout.queries);
  }
  TaskSummaries whitened = holdout;
  whitened.moments = left * holdout.moments;
  whitened.queries = right * holdout.queries;
  // The curvature at U = 0 bounds it everywhere (sigma' <= 1/4 for the
  // binary loss, constant for the regression loss), so 1/L there is a safe
  // step from any starting point.
  report.step_size =
      cfg.step_size ? *cfg.step_size : 1.0 / hessian_probe(Mat::Zero(d, d), whitened, cfg.exec).max_eigenvalue;
  const double tol = cfg.grad_tol ? *cfg.grad_tol : 1e-4 * static_cast<double>(d);

  auto holdout_converged = [&](const Mat& u) {
    const Mat g = gradient(u, holdout, cfg.exec);
    report.holdout_grad_norm = g.norm();
    report.holdout_grad_se = independent_holdout ? gradient_standard_error(u, holdout, g, cfg.exec) : 0.0;
    // A gradient within 1.5 standard errors of zero cannot be resolved by
    // the holdout any further.
    return report.holdout_grad_norm < tol || report.holdout_grad_norm < 1.5 * report.holdout_grad_se;
  };

  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < cfg.max_iters; ++it) {
    const TaskSummaries& batch = batch_for(it);
    const double value = loss(params.u(), batch, cfg.exec);
    const Mat g = gradient(params.u(), batch, cfg.exec);
    if (it == 0) initial_loss = value;
    if (!std::isfinite(value) || (initial_loss > 0.0 && value > 1e3 * initial_loss)) {
      throw DivergenceError("train: loss " + std::to_string(value) + " exceeded 10^3 x initial loss " +
                            std::to_string(initial_loss) + " at iteration " + std::to_string(it) +
                            "; reduce the step size");
    }
    report.loss_trace.push_back(value);
    report.grad_norm_trace.push_back(g.norm());
    report.iterations = it + 1;
    if (report.step_size == 0.0) {
      report.no_progress = true;
      break;
    }
    const Mat direction = left * left * g * right * right;
    if (params.assign_projected(params.u() - report.step_size * direction)) ++report.projection_hits;
    if ((it + 1) % cfg.check_every == 0 && holdout_converged(params.u())) {
      report.converged = true;
      break;
    }
  }
  report.converged = holdout_converged(params.u()) || report.converged;
  report.u = params.u();
  return report;
}

}  // namespace

TrainReport train(const TrainConfig& cfg, const TaskSource& source, std::optional<Mat> init) {
  cfg.validate();
  source.spec.validate();
  source.ddm.validate();
  const auto d = source.spec.dim;
  synth::BatchRequest request;
  request.n_tasks = cfg.batch_tasks;
  request.n_demos = source.n_demos;
  request.k = source.k;
  request.mode = cfg.mode;
  request.seed = source.seed;
  request.stream = streams::kTrainBatches;

  synth::BatchRequest holdout_request = request;
  holdout_request.n_tasks = cfg.holdout_tasks;
  holdout_request.stream = streams::kHoldout;
  const TaskSummaries holdout =
      summarize(synth::generate_tasks(source.spec, holdout_request, source.ddm, cfg.exec), cfg.mode, cfg.exec);

  TaskSummaries current;
  int current_index = -1;
  auto batch_for = [&](int it) -> const TaskSummaries& {
    const int index = cfg.fresh_tasks ? it : 0;
    if (index != current_index) {
      request.batch_index = static_cast<std::uint64_t>(index);
      current = summarize(synth::generate_tasks(source.spec, request, source.ddm, cfg.exec), cfg.mode, cfg.exec);
      current_index = index;
    }
    return current;
  };
  return run_pgd(cfg, batch_for, holdout, init ? *init : Mat::Zero(d, d), true);
}

TrainReport train_on_corpus(const TrainConfig& cfg, const TaskSummaries& corpus, std::optional<Mat> init) {
  cfg.validate();
  if (corpus.mode != cfg.mode) throw ConfigError("train_on_corpus: corpus label mode differs from config");
  const auto d = corpus.dim();
  return run_pgd(cfg, [&](int) -> const TaskSummaries& { return corpus; }, corpus,
                 init ? *init : Mat::Zero(d, d), false);
}

}  // namespace icra::training
