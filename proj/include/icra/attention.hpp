#pragma once

#include <filesystem>
#include <string>

#include "icra/core.hpp"
#include "icra/prompts.hpp"

namespace icra::attention {

/// Trainable block U of the key-query matrix, kept inside the Frobenius ball
/// of radius `radius`.
class AttentionParams {
 public:
  AttentionParams(Mat u, double radius);
  static AttentionParams zeros(Eigen::Index d, double radius);

  const Mat& u() const { return u_; }
  double radius() const { return radius_; }
  Eigen::Index dim() const { return u_.rows(); }

  /// Replaces U and rescales it onto the ball if it left it. Returns true
  /// when the projection was active.
  bool assign_projected(Mat u);

 private:
  Mat u_;
  double radius_;
};

/// Frobenius-ball projection.
Mat project_frobenius(const Mat& u, double radius, bool* hit = nullptr);

/// Full single-layer update E + W^V E (E^T W^KQ E) / N on the transformed
/// prompt (query label cell set to zero). Returns a (d+1) x (N+1) matrix.
Mat forward_full(const AttentionParams& params, const prompts::PromptMatrix& prompt);

/// Query label readout: s^T U phi_q with s = (1/N) sum_l label_l phi_l.
double forward_logit(const AttentionParams& params, const prompts::PromptMatrix& prompt);

/// Label-weighted mean of the demonstration features.
Vec label_moment(const prompts::PromptMatrix& prompt);

struct BinaryPrediction {
  double prob = 0.5;
  int z_hat = -1;  // ties (prob exactly 1/2) resolve to -1
};

BinaryPrediction predict_binary(const AttentionParams& params, const prompts::PromptMatrix& prompt);

/// Estimate of 2 phi_q^T theta from a response-time prompt.
double predict_regression(const AttentionParams& params, const prompts::PromptMatrix& prompt);

/// Text parameter file: header lines (format version, d, R, mode), one line
/// per row of U, and an FNV-1a checksum over the U rows.
void save_params(const std::filesystem::path& path, const AttentionParams& params, LabelMode mode);

struct LoadedParams {
  AttentionParams params;
  LabelMode mode;
};

/// Throws IoError when the file cannot be read and DataError when it is
/// malformed or the checksum does not match.
LoadedParams load_params(const std::filesystem::path& path);

}  // namespace icra::attention
