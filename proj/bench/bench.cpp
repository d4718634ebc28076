// Serial reference vs OpenMP timings for the hot kernels. Results must agree
// bit for bit; only the wall time may differ.
#include <chrono>
#include <cstdio>
#include <functional>

#include <CLI11.hpp>

#include "icra/eval.hpp"
#include "icra/experiment.hpp"
#include "icra/oracles.hpp"
#include "icra/parallel.hpp"
#include "icra/synthgen.hpp"
#include "icra/training.hpp"

using namespace icra;

namespace {

double seconds(const std::function<void()>& body, int reps) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) body();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / reps;
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-22s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP kernel timings"};
  std::size_t n_tasks = 8192;
  int reps = 5;
  int threads = 0;
  app.add_option("--tasks", n_tasks, "tasks per batch");
  app.add_option("--reps", reps, "repetitions per timing")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");
  CLI11_PARSE(app, argc, argv);
  set_threads(threads);
  std::printf("threads: %d, tasks: %zu, reps: %d\n", max_threads(), n_tasks, reps);

  const PopulationSpec spec = cli::default_population(5);
  synth::DdmConfig ddm;
  ddm.sampler = synth::Sampler::aggregate;
  synth::BatchRequest req;
  req.n_tasks = n_tasks;
  req.n_demos = 32;
  req.k = 32;
  req.mode = LabelMode::response_time;
  req.seed = 1;

  std::vector<TaskSample> serial_tasks;
  std::vector<TaskSample> parallel_tasks;
  const double gen_s = seconds([&] { serial_tasks = synth::generate_tasks(spec, req, ddm, Exec::serial); }, reps);
  const double gen_p = seconds([&] { parallel_tasks = synth::generate_tasks(spec, req, ddm, Exec::parallel); }, reps);
  bool same = serial_tasks.size() == parallel_tasks.size();
  for (std::size_t i = 0; same && i < serial_tasks.size(); ++i) {
    same = serial_tasks[i].query_truth.t == parallel_tasks[i].query_truth.t &&
           serial_tasks[i].demos.back().t == parallel_tasks[i].demos.back().t;
  }
  report("generate_tasks", gen_s, gen_p, same);

  for (LabelMode mode : {LabelMode::binary, LabelMode::response_time}) {
    const auto batch = training::summarize(parallel_tasks, mode);
    const Mat u = Mat::Identity(5, 5) * 0.5;
    Mat gs;
    Mat gp;
    const double grad_s = seconds([&] { gs = training::gradient(u, batch, Exec::serial); }, reps * 20);
    const double grad_p = seconds([&] { gp = training::gradient(u, batch, Exec::parallel); }, reps * 20);
    report(mode == LabelMode::binary ? "gradient (binary)" : "gradient (rt)", grad_s, grad_p, gs == gp);
    Mat hs;
    Mat hp;
    const double hess_s = seconds([&] { hs = training::hessian(u, batch, Exec::serial); }, reps);
    const double hess_p = seconds([&] { hp = training::hessian(u, batch, Exec::parallel); }, reps);
    report(mode == LabelMode::binary ? "hessian (binary)" : "hessian (rt)", hess_s, hess_p, hs == hp);
  }

  const attention::AttentionParams oracle(
      oracles::population_minimizer_rt(oracles::feature_second_moment(spec).value), 100.0);
  eval::EvalConfig ec;
  ec.n_tasks = n_tasks / 4;
  ec.ddm = ddm;
  ec.seed = 2;
  eval::EvalReport es;
  eval::EvalReport ep;
  ec.exec = Exec::serial;
  const double eval_s = seconds([&] { es = eval::eval_accuracy(oracle, spec, LabelMode::response_time, ec); }, reps);
  ec.exec = Exec::parallel;
  const double eval_p = seconds([&] { ep = eval::eval_accuracy(oracle, spec, LabelMode::response_time, ec); }, reps);
  report("eval_accuracy", eval_s, eval_p, es.id.accuracy == ep.id.accuracy && es.ood.accuracy == ep.ood.accuracy);
  return 0;
}
