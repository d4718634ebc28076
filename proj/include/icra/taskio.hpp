#pragma once

#include <string>
#include <vector>

#include "icra/core.hpp"
#include "icra/prompts.hpp"

namespace icra::taskio {

/// Columnar task CSV: task_id, role (demo|query), phi_0..phi_{d-1}, z, t, k.
/// Each task contributes its demonstrations followed by one query row, so a
/// file holds n_tasks * (N + 1) data rows. Binary tasks leave t empty.
std::string write_tasks_csv(const std::vector<TaskSample>& tasks);

/// Parses write_tasks_csv output. Theta is unknown to the CSV, so tasks come
/// back with a zero theta unless `thetas` (one per task) is given. Throws
/// DataError with the line number on malformed input.
std::vector<TaskSample> read_tasks_csv(const std::string& csv, const std::vector<Vec>* thetas = nullptr);

/// task_id, theta_0..theta_{d-1}.
std::string write_thetas_csv(const std::vector<TaskSample>& tasks);
std::vector<Vec> read_thetas_csv(const std::string& csv);

/// A prompt in the same schema, as one task. Response-time labels l are
/// stored as z = l / c, t = 1 / c with c a power of two, so rebuilding the
/// prompt from the parsed task reproduces the matrix exactly.
std::string write_prompt_csv(const prompts::PromptMatrix& prompt);
prompts::PromptMatrix read_prompt_csv(const std::string& csv, LabelMode mode);

}  // namespace icra::taskio
