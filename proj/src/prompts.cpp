#include "icra/prompts.hpp"

#include <cmath>

namespace icra::prompts {

Eigen::Index RawPrompt::rows() const {
  return 2 * phi0.rows() + (mode == LabelMode::response_time ? 2 : 1);
}

RawPrompt& RawPrompt::operator+=(const RawPrompt& other) {
  if (mode != other.mode || phi0.rows() != other.phi0.rows() || phi0.cols() != other.phi0.cols()) {
    throw ContractError("RawPrompt: shape or mode mismatch");
  }
  phi0 += other.phi0;
  phi1 += other.phi1;
  choices += other.choices;
  if (times.size() > 0) times += other.times;
  return *this;
}

RawPrompt& RawPrompt::operator*=(double c) {
  phi0 *= c;
  phi1 *= c;
  choices *= c;
  times *= c;
  return *this;
}

RawPrompt operator+(RawPrompt a, const RawPrompt& b) { return a += b; }
RawPrompt operator*(double c, RawPrompt a) { return a *= c; }

RawPrompt build_raw_prompt(const TaskSample& task, LabelMode mode) {
  validate(task);
  const auto d = task.dim();
  const auto n = static_cast<Eigen::Index>(task.n_demos());
  RawPrompt raw;
  raw.mode = mode;
  raw.phi0 = Mat::Zero(d, n + 1);
  raw.phi1.resize(d, n + 1);
  raw.choices.resize(n);
  if (mode == LabelMode::response_time) raw.times.resize(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& demo = task.demos[static_cast<std::size_t>(l)];
    raw.phi1.col(l) = demo.phi_diff.values();
    raw.choices[l] = demo.z;
    if (mode == LabelMode::response_time) raw.times[l] = demo.t;
  }
  raw.phi1.col(n) = task.query.values();
  return raw;
}

PromptMatrix transform(const RawPrompt& raw) {
  PromptMatrix out;
  out.mode = raw.mode;
  out.features = raw.phi1 - raw.phi0;
  if (raw.mode == LabelMode::binary) {
    out.labels = raw.choices;
    return out;
  }
  if (raw.times.size() != raw.choices.size()) throw DataError("transform: time row has wrong length");
  out.labels.resize(raw.choices.size());
  for (Eigen::Index l = 0; l < raw.choices.size(); ++l) {
    if (!(raw.times[l] > 0.0)) throw DataError("transform: non-positive response time in demonstration " + std::to_string(l));
    out.labels[l] = raw.choices[l] / raw.times[l];
  }
  return out;
}

PromptMatrix build_prompt(const TaskSample& task, LabelMode mode) {
  const auto d = task.dim();
  const auto n = static_cast<Eigen::Index>(task.n_demos());
  if (n < 1) throw DataError("build_prompt: task has no demonstrations");
  PromptMatrix out;
  out.mode = mode;
  out.features.resize(d, n + 1);
  out.labels.resize(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& demo = task.demos[static_cast<std::size_t>(l)];
    if (demo.phi_diff.dim() != d) throw DataError("build_prompt: dimension mismatch");
    out.features.col(l) = demo.phi_diff.values();
    if (mode == LabelMode::binary) {
      out.labels[l] = demo.z;
    } else {
      if (!(demo.t > 0.0)) throw DataError("build_prompt: non-positive response time in demonstration " + std::to_string(l));
      out.labels[l] = demo.z / demo.t;
    }
  }
  out.features.col(n) = task.query.values();
  return out;
}

}  // namespace icra::prompts
