#pragma once

#include "icra/core.hpp"

namespace icra::prompts {

/// Prompt after the fixed difference transform: d x (N+1) features (last
/// column is the query) and N labels. The query label is absent from
/// `labels`, which is how the mask is represented.
struct PromptMatrix {
  Mat features;
  Vec labels;
  LabelMode mode = LabelMode::binary;

  Eigen::Index dim() const { return features.rows(); }
  Eigen::Index n_demos() const { return labels.size(); }
  auto query() const { return features.col(features.cols() - 1); }
  auto demo_features() const { return features.leftCols(features.cols() - 1); }
};

/// Untransformed prompt: the phi0 and phi1 blocks, the choice row and (in
/// response-time mode) the time row. Label rows have N entries; the query's
/// label cells are absent.
struct RawPrompt {
  Mat phi0;
  Mat phi1;
  Vec times;  // empty in binary mode
  Vec choices;
  LabelMode mode = LabelMode::binary;

  /// 2d+1 (binary) or 2d+2 (response time).
  Eigen::Index rows() const;
  Eigen::Index cols() const { return phi0.cols(); }

  RawPrompt& operator+=(const RawPrompt& other);
  RawPrompt& operator*=(double c);
};

RawPrompt operator+(RawPrompt a, const RawPrompt& b);
RawPrompt operator*(double c, RawPrompt a);

/// Raw layout with phi0 = 0 and phi1 = the stored difference feature.
RawPrompt build_raw_prompt(const TaskSample& task, LabelMode mode);

/// Applies the fixed map [-I, I, 0; 0, 0, 1]; response-time labels become
/// z / t. Throws DataError when a time is not positive.
PromptMatrix transform(const RawPrompt& raw);

/// transform(build_raw_prompt(task, mode)) in one pass.
PromptMatrix build_prompt(const TaskSample& task, LabelMode mode);

}  // namespace icra::prompts
