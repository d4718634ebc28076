#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace icra {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. Each kind maps onto one CLI exit code (see tools/icra.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ContractError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class DataError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class DivergenceError : public Error {
 public:
  using Error::Error;
};
class SimulationError : public Error {
 public:
  using Error::Error;
};
class InternalError : public Error {
 public:
  using Error::Error;
};

// Clamp used only inside log-loss terms, never on returned probabilities.
inline constexpr double kLogClamp = 1e-12;

/// Overflow-safe logistic function 1/(1+e^{-x}).
inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// tanh(x/2), which equals 2*logistic(x) - 1 and saturates at +-1.
inline double tanh_half(double x) { return std::tanh(0.5 * x); }

/// Difference feature phi(x, y1) - phi(x, y0).
class FeatureDiff {
 public:
  FeatureDiff() = default;
  explicit FeatureDiff(Vec values) : values_(std::move(values)) {
    if (values_.size() < 1) throw ContractError("FeatureDiff: dimension must be >= 1");
  }
  const Vec& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }
  double norm() const { return values_.norm(); }
  FeatureDiff operator-() const { return FeatureDiff(-values_); }

 private:
  Vec values_;
};

/// Reward weights of one human type.
class RewardParam {
 public:
  RewardParam() = default;
  explicit RewardParam(Vec theta) : theta_(std::move(theta)) {
    if (!theta_.allFinite()) throw ContractError("RewardParam: non-finite entry");
  }
  const Vec& theta() const { return theta_; }
  Eigen::Index dim() const { return theta_.size(); }

 private:
  Vec theta_;
};

/// One in-context example. `z` is a K-average of +-1 choices and `t` the
/// matching K-average of response times (seconds). In binary mode `t` holds
/// kNoTime and is never read.
struct Demonstration {
  static constexpr double kNoTime = -1.0;

  FeatureDiff phi_diff;
  double z = 0.0;
  double t = kNoTime;
  int k = 1;

  bool has_time() const { return t > 0.0; }
};

/// Checks the Demonstration invariants; throws DataError on violation.
void validate(const Demonstration& demo, bool require_time);

enum class LabelMode { binary, response_time };

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(const std::string& text);

struct QueryTruth {
  double z = 0.0;
  std::optional<double> t;  // present only in response-time mode
};

struct TaskSample {
  RewardParam theta;
  std::vector<Demonstration> demos;
  FeatureDiff query;
  QueryTruth query_truth;

  Eigen::Index dim() const { return query.dim(); }
  std::size_t n_demos() const { return demos.size(); }
};

void validate(const TaskSample& task);

/// sigma(phi^T theta).
double bt_prob(const FeatureDiff& phi_diff, const RewardParam& theta);

/// E[z | phi] = tanh(phi^T theta / 2) = 2 * bt_prob - 1.
double expected_choice(const FeatureDiff& phi_diff, const RewardParam& theta);

/// phi^T theta with a dimension check.
double logit(const FeatureDiff& phi_diff, const RewardParam& theta);

}  // namespace icra
