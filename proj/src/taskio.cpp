#include "icra/taskio.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icra/format.hpp"

namespace icra::taskio {

namespace {

std::string where(int line_no) { return "task csv line " + std::to_string(line_no) + ": "; }

}  // namespace

std::string write_tasks_csv(const std::vector<TaskSample>& tasks) {
  if (tasks.empty()) throw ContractError("write_tasks_csv: no tasks");
  const auto d = tasks.front().dim();
  std::ostringstream out;
  out << "task_id,role";
  for (Eigen::Index j = 0; j < d; ++j) out << ",phi_" << j;
  out << ",z,t,k\n";
  for (std::size_t id = 0; id < tasks.size(); ++id) {
    const TaskSample& task = tasks[id];
    if (task.dim() != d) throw ContractError("write_tasks_csv: tasks differ in dimension");
    auto row = [&](const char* role, const Vec& phi, double z, std::optional<double> t, int k) {
      out << id << ',' << role;
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(phi[j]);
      out << ',' << format_double(z) << ',' << (t ? format_double(*t) : "") << ',' << k << '\n';
    };
    for (const auto& demo : task.demos) {
      row("demo", demo.phi_diff.values(), demo.z, demo.has_time() ? std::optional<double>(demo.t) : std::nullopt,
          demo.k);
    }
    const int k = task.demos.empty() ? 1 : task.demos.front().k;
    row("query", task.query.values(), task.query_truth.z, task.query_truth.t, k);
  }
  return out.str();
}

std::vector<TaskSample> read_tasks_csv(const std::string& csv, const std::vector<Vec>* thetas) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw DataError("task csv: empty input");
  const auto header = split(trim(line), ',');
  if (header.size() < 6 || header[0] != "task_id" || header[1] != "role" || header[header.size() - 3] != "z" ||
      header[header.size() - 2] != "t" || header.back() != "k") {
    throw DataError("task csv: unexpected header '" + trim(line) + "'");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 5);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (header[static_cast<std::size_t>(2 + j)] != "phi_" + std::to_string(j)) {
      throw DataError("task csv: unexpected feature column '" + header[static_cast<std::size_t>(2 + j)] + "'");
    }
  }

  std::vector<TaskSample> tasks;
  TaskSample current;
  long current_id = 0;
  bool open = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != header.size()) throw DataError(where(line_no) + "expected " + std::to_string(header.size()) + " fields");
    try {
      const long id = parse_int(f[0]);
      if (!open) {
        if (id != static_cast<long>(tasks.size())) throw DataError("task ids must be consecutive from 0");
        current = TaskSample{};
        current_id = id;
        open = true;
      } else if (id != current_id) {
        throw DataError("task " + std::to_string(current_id) + " has no query row");
      }
      Vec phi(d);
      for (Eigen::Index j = 0; j < d; ++j) phi[j] = parse_double(f[static_cast<std::size_t>(2 + j)]);
      const double z = parse_double(f[f.size() - 3]);
      const std::string t_text = trim(f[f.size() - 2]);
      const std::optional<double> t = t_text.empty() ? std::nullopt : std::optional<double>(parse_double(t_text));
      const int k = static_cast<int>(parse_int(f.back()));
      if (f[1] == "demo") {
        Demonstration demo;
        demo.phi_diff = FeatureDiff(phi);
        demo.z = z;
        demo.t = t ? *t : Demonstration::kNoTime;
        demo.k = k;
        validate(demo, t.has_value());
        current.demos.push_back(std::move(demo));
      } else if (f[1] == "query") {
        current.query = FeatureDiff(phi);
        current.query_truth.z = z;
        current.query_truth.t = t;
        const Vec theta = thetas ? (*thetas).at(tasks.size()) : Vec::Zero(d);
        if (theta.size() != d) throw DataError("theta dimension differs from the features");
        current.theta = RewardParam(theta);
        tasks.push_back(std::move(current));
        open = false;
      } else {
        throw DataError("role must be demo or query, got '" + f[1] + "'");
      }
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.rfind("task csv line", 0) == 0) throw;
      throw DataError(where(line_no) + msg);
    } catch (const std::out_of_range&) {
      throw DataError(where(line_no) + "more tasks than thetas");
    }
  }
  if (open) throw DataError("task csv: last task has no query row");
  return tasks;
}

std::string write_thetas_csv(const std::vector<TaskSample>& tasks) {
  if (tasks.empty()) throw ContractError("write_thetas_csv: no tasks");
  const auto d = tasks.front().theta.dim();
  std::ostringstream out;
  out << "task_id";
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta_" << j;
  out << '\n';
  for (std::size_t id = 0; id < tasks.size(); ++id) {
    out << id;
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(tasks[id].theta.theta()[j]);
    out << '\n';
  }
  return out.str();
}

std::vector<Vec> read_thetas_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw DataError("theta csv: empty input");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || header[0] != "task_id") throw DataError("theta csv: unexpected header");
  std::vector<Vec> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != header.size()) throw DataError("theta csv line " + std::to_string(line_no) + ": wrong field count");
    Vec theta(static_cast<Eigen::Index>(f.size() - 1));
    for (std::size_t j = 1; j < f.size(); ++j) theta[static_cast<Eigen::Index>(j - 1)] = parse_double(f[j]);
    out.push_back(theta);
  }
  return out;
}

std::string write_prompt_csv(const prompts::PromptMatrix& prompt) {
  TaskSample task;
  const auto d = prompt.dim();
  task.theta = RewardParam(Vec::Zero(d));
  const bool rt = prompt.mode == LabelMode::response_time;
  for (Eigen::Index l = 0; l < prompt.n_demos(); ++l) {
    Demonstration demo;
    demo.phi_diff = FeatureDiff(prompt.features.col(l));
    const double label = prompt.labels[l];
    if (rt) {
      // z = label / c and t = 1 / c with c a power of two >= |label|: z stays
      // in [-1, 1] and z / t reproduces the label bit for bit.
      const double c = std::exp2(std::ceil(std::log2(std::max(1.0, std::abs(label)))));
      demo.z = label / c;
      demo.t = 1.0 / c;
      demo.k = std::abs(demo.z) == 1.0 ? 1 : 2;
    } else {
      demo.z = label;
    }
    task.demos.push_back(std::move(demo));
  }
  task.query = FeatureDiff(Vec(prompt.query()));
  return write_tasks_csv({task});
}

prompts::PromptMatrix read_prompt_csv(const std::string& csv, LabelMode mode) {
  const auto tasks = read_tasks_csv(csv);
  if (tasks.size() != 1) throw DataError("prompt csv: expected exactly one task");
  return prompts::build_prompt(tasks.front(), mode);
}

}  // namespace icra::taskio
