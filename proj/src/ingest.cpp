#include "icra/ingest.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "icra/ddm.hpp"
#include "icra/format.hpp"
#include "icra/rng.hpp"

namespace icra::ingest {

namespace {

std::string at_line(std::size_t line, const std::string& message) {
  return "line " + std::to_string(line) + ": " + message;
}

int parse_rating(const std::string& field) {
  const long v = parse_int(field);
  if (v < kRatingMin || v > kRatingMax) throw DataError("rating out of range [-10,10]: " + trim(field));
  return static_cast<int>(v);
}

void check_record(const TrialRecord& r) {
  for (int v : {r.arm0[0], r.arm0[1], r.arm1[0], r.arm1[1]}) {
    if (v < kRatingMin || v > kRatingMax) throw DataError("rating out of range [-10,10]: " + std::to_string(v));
  }
  if (r.choice != 0 && r.choice != 1) throw DataError("choice must be 0 or 1");
  if (!(r.rt > 0.0) || !std::isfinite(r.rt)) throw DataError("response time must be positive");
}

}  // namespace

LoadResult parse_trials(const std::string& text, const Schema& schema, bool strict) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("trial csv: empty input (missing header)");
  const auto header = split(trim(line), ',');
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw DataError("trial csv: missing column '" + name + "'");
  };
  const std::size_t c_part = column(schema.participant);
  const std::size_t c_r0a = column(schema.r0a);
  const std::size_t c_r0b = column(schema.r0b);
  const std::size_t c_r1a = column(schema.r1a);
  const std::size_t c_r1b = column(schema.r1b);
  const std::size_t c_choice = column(schema.choice);
  const std::size_t c_rt = column(schema.rt);
  const std::size_t needed = std::max({c_part, c_r0a, c_r0b, c_r1a, c_r1b, c_choice, c_rt}) + 1;

  LoadResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto f = split(trim(line), ',');
      if (f.size() < needed) throw DataError("expected at least " + std::to_string(needed) + " fields");
      TrialRecord r;
      r.line = line_no;
      r.participant = trim(f[c_part]);
      if (r.participant.empty()) throw DataError("empty participant id");
      r.arm0 = {parse_rating(f[c_r0a]), parse_rating(f[c_r0b])};
      r.arm1 = {parse_rating(f[c_r1a]), parse_rating(f[c_r1b])};
      const long choice = parse_int(f[c_choice]);
      if (choice != 0 && choice != 1) throw DataError("choice must be 0 or 1");
      r.choice = static_cast<int>(choice);
      r.rt = parse_double(f[c_rt]);
      if (!(r.rt > 0.0) || !std::isfinite(r.rt)) throw DataError("response time must be positive");
      result.records.push_back(std::move(r));
    } catch (const DataError& e) {
      if (strict) throw DataError("trial csv " + at_line(line_no, e.what()));
      result.errors.push_back({line_no, e.what()});
    }
  }
  return result;
}

LoadResult load_trials(const std::filesystem::path& path, const Schema& schema, bool strict) {
  return parse_trials(read_text_file(path), schema, strict);
}

std::string serialize_trials(const std::vector<TrialRecord>& records, const Schema& schema) {
  std::ostringstream out;
  out << schema.participant << ',' << schema.r0a << ',' << schema.r0b << ',' << schema.r1a << ',' << schema.r1b
      << ',' << schema.choice << ',' << schema.rt << '\n';
  for (const auto& r : records) {
    if (r.participant.find(',') != std::string::npos) throw DataError("participant id contains a comma");
    out << r.participant << ',' << r.arm0[0] << ',' << r.arm0[1] << ',' << r.arm1[0] << ',' << r.arm1[1] << ','
        << r.choice << ',' << format_double(r.rt) << '\n';
  }
  return out.str();
}

Vec arm_features(int rating_a, int rating_b) {
  const double hi = std::max(rating_a, rating_b) / 10.0;
  const double lo = std::min(rating_a, rating_b) / 10.0;
  Vec psi(kFeatureDim);
  psi << hi, lo, hi * hi, lo * lo, hi * lo;
  return psi;
}

Featurized featurize(const TrialRecord& record) {
  check_record(record);
  Featurized out;
  out.phi_diff = FeatureDiff(arm_features(record.arm1[0], record.arm1[1]) -
                             arm_features(record.arm0[0], record.arm0[1]));
  out.z = record.choice == 1 ? 1.0 : -1.0;
  out.t = record.rt;
  return out;
}

RealTasks build_real_tasks(const std::vector<TrialRecord>& records, const SplitSpec& split, int n_demos,
                           std::uint64_t seed) {
  if (n_demos < 1) throw ConfigError("build_real_tasks: M must be >= 1");
  if (split.heldout.empty()) throw ConfigError("build_real_tasks: held-out participant set is empty");
  std::map<std::string, std::vector<const TrialRecord*>> by_participant;
  for (const auto& r : records) by_participant[r.participant].push_back(&r);
  for (const auto& id : split.heldout) {
    if (!by_participant.count(id)) throw ConfigError("build_real_tasks: held-out participant '" + id + "' has no trials");
  }

  RealTasks out;
  const auto group = static_cast<std::size_t>(n_demos) + 1;
  std::uint64_t index = 0;
  for (const auto& [id, trials] : by_participant) {
    const std::uint64_t participant_index = index++;
    if (trials.size() < std::max(group, split.min_trials)) {
      out.warnings.push_back("participant '" + id + "' skipped: " + std::to_string(trials.size()) +
                             " trials, need " + std::to_string(std::max(group, split.min_trials)));
      continue;
    }
    // Fisher-Yates with a per-participant stream keeps the split
    // independent of how many other participants exist before this one.
    std::vector<std::size_t> order(trials.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(seed, streams::kIngest, participant_index);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    const bool heldout = std::find(split.heldout.begin(), split.heldout.end(), id) != split.heldout.end();
    for (std::size_t start = 0; start + group <= order.size(); start += group) {
      TaskSample task;
      task.theta = RewardParam(Vec::Zero(kFeatureDim));
      for (std::size_t j = 0; j < static_cast<std::size_t>(n_demos); ++j) {
        const Featurized f = featurize(*trials[order[start + j]]);
        Demonstration demo;
        demo.phi_diff = f.phi_diff;
        demo.z = f.z;
        demo.t = f.t;
        demo.k = 1;
        task.demos.push_back(std::move(demo));
      }
      const Featurized q = featurize(*trials[order[start + static_cast<std::size_t>(n_demos)]]);
      task.query = q.phi_diff;
      task.query_truth.z = q.z;
      task.query_truth.t = q.t;
      (heldout ? out.heldout : out.train).push_back(std::move(task));
    }
  }
  return out;
}

std::vector<TrialRecord> synthetic_trials(int n_participants, int trials_per_participant, std::uint64_t seed) {
  if (n_participants < 1 || trials_per_participant < 1) {
    throw ConfigError("synthetic_trials: counts must be positive");
  }
  std::vector<TrialRecord> out;
  const int width = static_cast<int>(std::to_string(n_participants).size());
  for (int p = 0; p < n_participants; ++p) {
    Rng rng = Rng::stream(seed, streams::kIngest, 1u << 20, static_cast<std::uint64_t>(p));
    // Participants weigh the better item, the worse item and risk
    // differently; the sign of the first weight flips for every third one.
    Vec theta(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j) theta[j] = 0.5 * synth::standard_normal(rng);
    theta[0] += p % 3 == 2 ? -2.0 : 2.0;
    theta[1] += 1.0;
    std::string id = std::to_string(p);
    id = "p" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    for (int i = 0; i < trials_per_participant; ++i) {
      TrialRecord r;
      r.participant = id;
      auto rating = [&] { return static_cast<int>(rng.uniform() * 21.0) + kRatingMin; };
      r.arm0 = {rating(), rating()};
      r.arm1 = {rating(), rating()};
      const double drift = (arm_features(r.arm1[0], r.arm1[1]) - arm_features(r.arm0[0], r.arm0[1])).dot(theta);
      const auto outcome = synth::sample_ddm_exact(drift, rng);
      r.choice = outcome.z > 0.0 ? 1 : 0;
      r.rt = outcome.t;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace icra::ingest
