#include "icra/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "icra/format.hpp"
#include "icra/oracles.hpp"
#include "icra/prompts.hpp"
#include "icra/rng.hpp"
#include "icra/training.hpp"

namespace icra::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_grid(const std::vector<int>& grid, const char* who) {
  if (grid.size() < 4) throw ConfigError(std::string(who) + ": grid needs at least 4 values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) throw ConfigError(std::string(who) + ": grid values must be positive");
    if (i > 0 && grid[i] <= grid[i - 1]) throw ConfigError(std::string(who) + ": grid must be strictly increasing");
  }
}

std::string split_name(synth::ThetaMode m) { return m == synth::ThetaMode::in_dist ? "id" : "ood"; }

}  // namespace

std::string to_string(GroundTruth g) { return g == GroundTruth::bayes ? "bayes" : "sampled"; }

GroundTruth parse_ground_truth(const std::string& text) {
  if (text == "bayes") return GroundTruth::bayes;
  if (text == "sampled") return GroundTruth::sampled;
  throw ConfigError("unknown ground truth '" + text + "' (expected bayes or sampled)");
}

void EvalConfig::validate() const {
  if (n_demos < 1) throw ConfigError("eval: n_demos must be >= 1");
  if (k < 1) throw ConfigError("eval: k must be >= 1");
  if (n_tasks < 1) throw ConfigError("eval: n_tasks must be >= 1");
  ddm.validate();
}

double binomial_ci_radius(double p, std::size_t n) {
  if (n == 0) return kNaN;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

AccuracyEstimate score_tasks(const attention::AttentionParams& params, const std::vector<TaskSample>& tasks,
                             LabelMode mode, GroundTruth truth, synth::ThetaMode split,
                             std::vector<PredictionRecord>* records, Exec exec) {
  std::vector<PredictionRecord> local(tasks.size());
  for_each_index(tasks.size(), exec, [&](std::size_t i) {
    const TaskSample& task = tasks[i];
    PredictionRecord rec;
    rec.task = i;
    rec.split = split;
    const prompts::PromptMatrix prompt = prompts::build_prompt(task, mode);
    if (mode == LabelMode::binary) {
      const auto pred = attention::predict_binary(params, prompt);
      rec.score = pred.prob;
      rec.z_hat = pred.z_hat;
    } else {
      rec.score = attention::predict_regression(params, prompt);
      rec.z_hat = rec.score > 0.0 ? 1 : -1;
    }
    if (truth == GroundTruth::bayes) {
      const double margin = logit(task.query, task.theta);
      rec.excluded = std::abs(margin) < kMarginEpsilon;
      rec.truth = rec.excluded ? 0 : (margin > 0.0 ? 1 : -1);
    } else {
      const double z = task.query_truth.z;
      rec.excluded = z == 0.0;
      rec.truth = rec.excluded ? 0 : (z > 0.0 ? 1 : -1);
    }
    rec.correct = !rec.excluded && rec.z_hat == rec.truth;
    local[i] = rec;
  });
  AccuracyEstimate est;
  std::size_t correct = 0;
  for (const auto& rec : local) {
    if (rec.excluded) {
      ++est.n_excluded;
    } else {
      ++est.n_scored;
      if (rec.correct) ++correct;
    }
  }
  est.accuracy = est.n_scored == 0 ? kNaN : static_cast<double>(correct) / static_cast<double>(est.n_scored);
  est.ci_radius = binomial_ci_radius(est.accuracy, est.n_scored);
  if (records) records->insert(records->end(), local.begin(), local.end());
  return est;
}

EvalReport eval_accuracy(const attention::AttentionParams& params, const PopulationSpec& spec, LabelMode mode,
                         const EvalConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (params.dim() != spec.dim) throw ContractError("eval_accuracy: parameter dimension does not match the population");
  EvalReport report;
  report.mode = mode;
  report.n_eval_tasks = cfg.n_tasks;
  report.n_demos = cfg.n_demos;
  report.k = mode == LabelMode::binary ? 1 : cfg.k;
  for (const auto split : {synth::ThetaMode::in_dist, synth::ThetaMode::ood}) {
    synth::BatchRequest req;
    req.n_tasks = cfg.n_tasks;
    req.n_demos = cfg.n_demos;
    req.k = report.k;
    req.mode = mode;
    req.theta_mode = split;
    req.seed = cfg.seed;
    req.stream = split == synth::ThetaMode::in_dist ? streams::kEvalId : streams::kEvalOod;
    const auto tasks = synth::generate_tasks(spec, req, cfg.ddm, cfg.exec);
    const auto est = score_tasks(params, tasks, mode, cfg.truth, split, &report.records, cfg.exec);
    (split == synth::ThetaMode::in_dist ? report.id : report.ood) = est;
  }
  return report;
}

// ---------------------------------------------------------------------------

SlopeFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractError("loglog_fit: size mismatch");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i]) && x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 4) throw DataError("loglog_fit: fewer than 4 finite positive points");
  const double n = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.points = lx.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    rss += r * r;
  }
  fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return fit;
}

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::n:
      return "N";
    case SweepVariable::k:
      return "K";
    case SweepVariable::m:
      return "M";
    case SweepVariable::binary_n_1d:
      return "binary_N_1d";
  }
  return "?";
}

SweepVariable parse_sweep_variable(const std::string& text) {
  if (text == "N" || text == "n") return SweepVariable::n;
  if (text == "K" || text == "k") return SweepVariable::k;
  if (text == "M" || text == "m") return SweepVariable::m;
  if (text == "binary_N_1d" || text == "binary_n_1d") return SweepVariable::binary_n_1d;
  throw ConfigError("unknown sweep variable '" + text + "' (expected N, K, M or binary_N_1d)");
}

void RateConfig::validate() const {
  validate_grid(grid, "rate_sweep");
  if (variable == SweepVariable::binary_n_1d) return;
  spec.validate();
  if (n_demos < 1 || k < 1) throw ConfigError("rate_sweep: n_demos and k must be >= 1");
  if (n_tasks < 16) throw ConfigError("rate_sweep: n_tasks must be >= 16");
  if (replications < 1) throw ConfigError("rate_sweep: replications must be >= 1");
  ddm.validate();
}

namespace {

constexpr std::size_t kSweepChunk = 2048;

// Closed-form response-time fit on n_tasks fresh tasks, streamed in chunks.
double regression_fit_error(const RateConfig& cfg, int n_demos, int k, std::uint64_t key, const Mat& target) {
  training::NormalEquations eq(cfg.spec.dim);
  std::size_t done = 0;
  std::uint64_t chunk = 0;
  while (done < cfg.n_tasks) {
    const std::size_t count = std::min(kSweepChunk, cfg.n_tasks - done);
    synth::BatchRequest req;
    req.n_tasks = count;
    req.n_demos = n_demos;
    req.k = k;
    req.mode = LabelMode::response_time;
    req.seed = cfg.seed;
    req.stream = streams::kRates;
    req.batch_index = key * 1000003ull + chunk;
    const auto tasks = synth::generate_tasks(cfg.spec, req, cfg.ddm, cfg.exec);
    eq.add(training::summarize(tasks, LabelMode::response_time, cfg.exec), cfg.exec);
    done += count;
    ++chunk;
  }
  return (eq.solve() - target).norm();
}

// Mean squared error of o_hat against 2 theta^T phi_q at U = Sigma^{-1}.
std::pair<double, double> oracle_prediction_error(const RateConfig& cfg, int m, std::uint64_t key,
                                                  const Mat& u) {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t done = 0;
  std::uint64_t chunk = 0;
  while (done < cfg.n_tasks) {
    const std::size_t count = std::min(kSweepChunk, cfg.n_tasks - done);
    synth::BatchRequest req;
    req.n_tasks = count;
    req.n_demos = m;
    req.k = cfg.k;
    req.mode = LabelMode::response_time;
    req.theta_mode = synth::ThetaMode::ood;
    req.seed = cfg.seed;
    req.stream = streams::kRates;
    req.batch_index = key * 1000003ull + chunk;
    const auto tasks = synth::generate_tasks(cfg.spec, req, cfg.ddm, cfg.exec);
    const auto summaries = training::summarize(tasks, LabelMode::response_time, cfg.exec);
    for (std::size_t i = 0; i < count; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      const double o_hat = summaries.moments.col(c).dot(u * summaries.queries.col(c));
      const double truth = 2.0 * tasks[i].query.values().dot(tasks[i].theta.theta());
      const double e = (o_hat - truth) * (o_hat - truth);
      sum += e;
      sum_sq += e * e;
    }
    done += count;
    ++chunk;
  }
  const double n = static_cast<double>(cfg.n_tasks);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

RateReport rate_sweep(const RateConfig& cfg) {
  cfg.validate();
  RateReport report;
  report.variable = to_string(cfg.variable);
  for (int g : cfg.grid) report.grid.push_back(g);

  switch (cfg.variable) {
    case SweepVariable::binary_n_1d: {
      const double limit = oracles::binary_population_minimizer_1d().value;
      for (int g : cfg.grid) {
        report.errors.push_back(std::abs(oracles::binary_finite_n_minimizer_1d(g) - limit));
        report.error_se.push_back(0.0);
      }
      break;
    }
    case SweepVariable::n:
    case SweepVariable::k: {
      const Mat target = oracles::population_minimizer_rt(oracles::feature_second_moment(cfg.spec).value);
      for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
        const int n = cfg.variable == SweepVariable::n ? cfg.grid[gi] : cfg.n_demos;
        const int k = cfg.variable == SweepVariable::k ? cfg.grid[gi] : cfg.k;
        std::vector<double> errs;
        for (int r = 0; r < cfg.replications; ++r) {
          errs.push_back(regression_fit_error(cfg, n, k, gi * 4096 + static_cast<std::uint64_t>(r), target));
        }
        double mean = 0.0;
        for (double e : errs) mean += e;
        mean /= static_cast<double>(errs.size());
        double var = 0.0;
        for (double e : errs) var += (e - mean) * (e - mean);
        const double se =
            errs.size() > 1 ? std::sqrt(var / static_cast<double>(errs.size() - 1) / static_cast<double>(errs.size()))
                            : 0.0;
        report.errors.push_back(mean);
        report.error_se.push_back(se);
      }
      break;
    }
    case SweepVariable::m: {
      const Mat u = oracles::population_minimizer_rt(oracles::feature_second_moment(cfg.spec).value);
      for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
        const auto [mean, se] = oracle_prediction_error(cfg, cfg.grid[gi], gi, u);
        report.errors.push_back(mean);
        report.error_se.push_back(se);
      }
      break;
    }
  }
  report.fit = loglog_fit(report.grid, report.errors);
  report.fitted = true;
  return report;
}

void RatioConfig::validate() const {
  validate_grid(grid, "ratio_concentration_test");
  if (replications < 2) throw ConfigError("ratio_concentration_test: need at least 2 replications");
  double mu_y = mean_y;
  if (kind == RatioKind::ddm) mu_y = synth::ddm_expected_time(drift);
  if (!(std::abs(mu_y) >= 0.1)) throw ConfigError("ratio_concentration_test: |E[Y]| must be at least 0.1");
  if (kind != RatioKind::ddm) {
    if (!(shift_fraction >= 0.0 && shift_fraction < 1.0)) {
      throw ConfigError("ratio_concentration_test: shift_fraction must lie in [0, 1)");
    }
    if (!(mean_y > 0.0) || (kind == RatioKind::shifted_exponentials && !(mean_x > 0.0))) {
      throw ConfigError("ratio_concentration_test: exponential means must be positive");
    }
  }
}

RateReport ratio_concentration_test(const RatioConfig& cfg) {
  cfg.validate();
  RateReport report;
  report.variable = "ratio_N";
  double mu_x = cfg.mean_x;
  double mu_y = cfg.mean_y;
  if (cfg.kind == RatioKind::ddm) {
    mu_x = std::tanh(0.5 * cfg.drift);
    mu_y = synth::ddm_expected_time(cfg.drift);
  } else if (cfg.kind == RatioKind::identical) {
    mu_x = mu_y;
  }
  const double target = mu_x / mu_y;

  auto shifted_exp = [&](double mean, Rng& rng) {
    const double shift = cfg.shift_fraction * mean;
    return shift - (mean - shift) * std::log(rng.uniform_open());
  };

  struct Acc {
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    const int n = cfg.grid[gi];
    const auto acc = chunked_reduce<Acc>(
        static_cast<std::size_t>(cfg.replications), cfg.exec, [] { return Acc{}; },
        [&](Acc& a, std::size_t r) {
          Rng rng = Rng::stream(cfg.seed, streams::kRates, gi, r);
          double sx = 0.0;
          double sy = 0.0;
          for (int i = 0; i < n; ++i) {
            switch (cfg.kind) {
              case RatioKind::shifted_exponentials:
                sx += shifted_exp(cfg.mean_x, rng);
                sy += shifted_exp(cfg.mean_y, rng);
                break;
              case RatioKind::identical: {
                const double v = shifted_exp(cfg.mean_y, rng);
                sx += v;
                sy += v;
                break;
              }
              case RatioKind::ddm: {
                const auto o = synth::sample_ddm_exact(cfg.drift, rng);
                sx += o.z;
                sy += o.t;
                break;
              }
            }
          }
          const double e = (sx / sy - target) * (sx / sy - target);
          a.sum += e;
          a.sum_sq += e * e;
        },
        [](Acc& a, const Acc& b) {
          a.sum += b.sum;
          a.sum_sq += b.sum_sq;
        });
    const double reps = cfg.replications;
    const double mean = acc.sum / reps;
    const double var = std::max(0.0, acc.sum_sq / reps - mean * mean) * reps / (reps - 1.0);
    report.grid.push_back(n);
    report.errors.push_back(mean);
    report.error_se.push_back(std::sqrt(var / reps));
  }
  const bool all_zero = std::all_of(report.errors.begin(), report.errors.end(), [](double e) { return e == 0.0; });
  if (!all_zero) {
    report.fit = loglog_fit(report.grid, report.errors);
    report.fitted = true;
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<EvalRow> eval_rows(const EvalReport& r) {
  std::vector<EvalRow> rows;
  for (const auto split : {synth::ThetaMode::in_dist, synth::ThetaMode::ood}) {
    const AccuracyEstimate& est = split == synth::ThetaMode::in_dist ? r.id : r.ood;
    EvalRow row;
    row.mode = r.mode;
    row.split = split_name(split);
    row.n_demos = r.n_demos;
    row.k = r.k;
    row.accuracy = est.accuracy;
    row.ci_radius = est.ci_radius;
    row.n_scored = est.n_scored;
    row.n_excluded = est.n_excluded;
    rows.push_back(row);
  }
  return rows;
}

namespace {

constexpr const char* kEvalHeader = "mode,split,M,K,accuracy,ci_radius,n_scored,n_excluded";

std::string cell(const EvalRow* row) {
  if (!row || !std::isfinite(row->accuracy)) return "n/a";
  return format_fixed(row->accuracy, 3) + " +- " + format_fixed(row->ci_radius, 3);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

Table table_report(const std::vector<EvalReport>& reports) {
  Table table;
  std::ostringstream csv;
  csv << kEvalHeader << '\n';
  std::vector<EvalRow> rows;
  for (const auto& r : reports) {
    for (auto& row : eval_rows(r)) rows.push_back(row);
  }
  for (const auto& row : rows) {
    csv << to_string(row.mode) << ',' << row.split << ',' << row.n_demos << ',' << row.k << ','
        << format_double(row.accuracy) << ',' << format_double(row.ci_radius) << ',' << row.n_scored << ','
        << row.n_excluded << '\n';
  }
  table.csv = csv.str();
  table.empty = rows.empty();
  if (rows.empty()) {
    table.text = "no data: no evaluation reports\n";
    return table;
  }

  // Columns: one per distinct M, each split into ID and OOD.
  std::vector<int> ms;
  for (const auto& row : rows) {
    if (std::find(ms.begin(), ms.end(), row.n_demos) == ms.end()) ms.push_back(row.n_demos);
  }
  std::sort(ms.begin(), ms.end());
  std::vector<LabelMode> modes;
  for (const auto& row : rows) {
    if (std::find(modes.begin(), modes.end(), row.mode) == modes.end()) modes.push_back(row.mode);
  }
  auto find = [&](LabelMode mode, int m, const char* split) -> const EvalRow* {
    for (const auto& row : rows) {
      if (row.mode == mode && row.n_demos == m && row.split == split) return &row;
    }
    return nullptr;
  };
  constexpr std::size_t kFirst = 15;
  constexpr std::size_t kCell = 17;
  std::ostringstream text;
  text << pad("mode", kFirst);
  for (int m : ms) {
    text << "| " << pad("ID (M=" + std::to_string(m) + ")", kCell) << "| " << pad("OOD (M=" + std::to_string(m) + ")", kCell);
  }
  text << '\n' << std::string(kFirst, '-');
  for (std::size_t i = 0; i < ms.size(); ++i) text << "+" << std::string(kCell + 1, '-') << "+" << std::string(kCell + 1, '-');
  text << '\n';
  for (auto mode : modes) {
    text << pad(to_string(mode), kFirst);
    for (int m : ms) {
      text << "| " << pad(cell(find(mode, m, "id")), kCell) << "| " << pad(cell(find(mode, m, "ood")), kCell);
    }
    text << '\n';
  }
  table.text = text.str();
  return table;
}

std::vector<EvalRow> parse_eval_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kEvalHeader) {
    throw DataError("eval csv: missing or unexpected header");
  }
  std::vector<EvalRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 8) throw DataError("eval csv line " + std::to_string(line_no) + ": expected 8 fields");
    EvalRow row;
    try {
      row.mode = parse_label_mode(f[0]);
    } catch (const ConfigError& e) {
      throw DataError("eval csv line " + std::to_string(line_no) + ": " + e.what());
    }
    if (f[1] != "id" && f[1] != "ood") throw DataError("eval csv line " + std::to_string(line_no) + ": bad split");
    row.split = f[1];
    row.n_demos = static_cast<int>(parse_int(f[2]));
    row.k = static_cast<int>(parse_int(f[3]));
    row.accuracy = f[4] == "nan" || f[4] == "-nan" ? kNaN : parse_double(f[4]);
    row.ci_radius = f[5] == "nan" || f[5] == "-nan" ? kNaN : parse_double(f[5]);
    row.n_scored = static_cast<std::size_t>(parse_int(f[6]));
    row.n_excluded = static_cast<std::size_t>(parse_int(f[7]));
    rows.push_back(row);
  }
  return rows;
}

std::string rate_report_csv(const std::vector<RateReport>& reports) {
  std::ostringstream csv;
  csv << "variable,value,error,error_se,slope,slope_se\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      csv << r.variable << ',' << format_double(r.grid[i]) << ',' << format_double(r.errors[i]) << ','
          << format_double(r.error_se[i]) << ',' << (r.fitted ? format_double(r.fit.slope) : "nan") << ','
          << (r.fitted ? format_double(r.fit.slope_se) : "nan") << '\n';
    }
  }
  return csv.str();
}

}  // namespace icra::eval
