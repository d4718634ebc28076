#include "icra/oracles.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "icra/rng.hpp"
#include "icra/synthgen.hpp"

namespace icra::oracles {

namespace {

PopulationSpec features_only(const FeatureDistribution& features, int dim) {
  PopulationSpec spec;
  spec.dim = dim;
  spec.features = features;
  return spec;
}

// Bisection of an increasing function on [lo, hi] with f(lo) < 0 < f(hi).
RootCertificate bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
                       const char* who) {
  RootCertificate cert;
  cert.lo = lo;
  cert.hi = hi;
  cert.f_lo = f(lo);
  cert.f_hi = f(hi);
  if (!(cert.f_lo < 0.0 && cert.f_hi > 0.0)) {
    throw InternalError(std::string(who) + ": root is not bracketed");
  }
  double a = lo;
  double b = hi;
  while (b - a > tol && cert.iterations < 200) {
    const double mid = 0.5 * (a + b);
    if (f(mid) < 0.0) {
      a = mid;
    } else {
      b = mid;
    }
    ++cert.iterations;
  }
  cert.value = 0.5 * (a + b);
  return cert;
}

}  // namespace

VecEstimate mu_of_theta(const MomentMap& map, const RewardParam& theta) {
  if (theta.dim() != map.dim) throw ContractError("mu_of_theta: theta dimension mismatch");
  if (map.exact) {
    if (map.features.kind != FeatureKind::rademacher || map.dim != 1) {
      throw ConfigError("mu_of_theta: exact mode requires one-dimensional Rademacher features");
    }
    Vec v(1);
    v[0] = std::tanh(0.5 * theta.theta()[0]);
    return {v, Vec::Zero(1)};
  }
  if (map.samples < 2) throw ConfigError("mu_of_theta: need at least two samples");
  const PopulationSpec spec = features_only(map.features, map.dim);
  Rng rng = Rng::stream(map.seed, streams::kOracle);
  Vec sum = Vec::Zero(map.dim);
  Vec sum_sq = Vec::Zero(map.dim);
  for (std::size_t i = 0; i < map.samples; ++i) {
    const FeatureDiff phi = synth::sample_feature(spec, rng);
    const Vec x = expected_choice(phi, theta) * phi.values();
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  const double n = static_cast<double>(map.samples);
  Vec mean = sum / n;
  Vec var = (sum_sq / n - mean.cwiseProduct(mean)) * (n / (n - 1.0));
  return {mean, (var.cwiseMax(0.0) / n).cwiseSqrt()};
}

Vec empirical_moment(const std::vector<Demonstration>& demos, LabelMode mode) {
  if (demos.empty()) throw ContractError("empirical_moment: no demonstrations");
  Vec s = Vec::Zero(demos.front().phi_diff.dim());
  for (const auto& demo : demos) {
    double label = demo.z;
    if (mode == LabelMode::response_time) {
      if (!(demo.t > 0.0)) throw DataError("empirical_moment: non-positive response time");
      label /= demo.t;
    }
    s += label * demo.phi_diff.values();
  }
  return s / static_cast<double>(demos.size());
}

Mat population_minimizer_rt(const Mat& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) throw ContractError("population_minimizer_rt: Sigma must be square");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff())) {
    throw ContractError("population_minimizer_rt: Sigma is not symmetric");
  }
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) throw ContractError("population_minimizer_rt: Sigma is not positive definite");
  return llt.solve(Mat::Identity(sigma.rows(), sigma.cols()));
}

MatEstimate feature_second_moment(const PopulationSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
  const int d = spec.dim;
  const auto& f = spec.features;
  const Mat eye = Mat::Identity(d, d);
  switch (f.kind) {
    case FeatureKind::isotropic_gaussian: {
      if (!std::isfinite(f.bound)) return {f.scale * f.scale * eye, Mat::Zero(d, d), true};
      // |phi|^2 / sigma^2 ~ chi^2_d and E[X; X <= c] = d P(chi^2_{d+2} <= c).
      const double c = f.bound * f.bound / (f.scale * f.scale);
      const double kept = boost::math::gamma_p(0.5 * d, 0.5 * c);
      const double shrink = boost::math::gamma_p(0.5 * d + 1.0, 0.5 * c) / kept;
      return {f.scale * f.scale * shrink * eye, Mat::Zero(d, d), true};
    }
    case FeatureKind::uniform_cube:
      if (f.scale * std::sqrt(static_cast<double>(d)) <= f.bound) {
        return {f.scale * f.scale / 3.0 * eye, Mat::Zero(d, d), true};
      }
      break;
    case FeatureKind::rademacher:
      if (std::sqrt(static_cast<double>(d)) <= f.bound) return {eye, Mat::Zero(d, d), true};
      break;
  }
  Rng rng = Rng::stream(seed, streams::kOracle, 1);
  Mat sum = Mat::Zero(d, d);
  Mat sum_sq = Mat::Zero(d, d);
  for (std::size_t i = 0; i < mc_samples; ++i) {
    const Vec phi = synth::sample_feature(spec, rng).values();
    const Mat outer = phi * phi.transpose();
    sum += outer;
    sum_sq += outer.cwiseProduct(outer);
  }
  const double n = static_cast<double>(mc_samples);
  Mat mean = sum / n;
  Mat var = (sum_sq / n - mean.cwiseProduct(mean)) * (n / (n - 1.0));
  return {mean, (var.cwiseMax(0.0) / n).cwiseSqrt(), false};
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw ContractError("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

namespace {

const QuadratureRule& cached_rule(int q) {
  static const QuadratureRule rule64 = gauss_legendre(64);
  static const QuadratureRule rule128 = gauss_legendre(128);
  if (q == 64) return rule64;
  if (q == 128) return rule128;
  thread_local QuadratureRule other;
  if (other.nodes.size() != static_cast<std::size_t>(q)) other = gauss_legendre(q);
  return other;
}

}  // namespace

double counterexample_I(double u, int q) {
  if (q < 64) throw ContractError("counterexample_I: need at least 64 quadrature nodes");
  const QuadratureRule& rule = cached_rule(q);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double m = rule.nodes[i];
    sum += rule.weights[i] * m * std::tanh(0.25 * m * u);
  }
  return 0.5 * sum;
}

RootCertificate counterexample_ustar(double tol) {
  return bisect([](double u) { return counterexample_I(u) - 1.0 / 3.0; }, 0.0, 6.0, tol, "counterexample_ustar");
}

RootCertificate binary_population_minimizer_1d(const SignalDistribution& dist) {
  std::function<double(double)> stationarity;
  if (dist.kind == SignalDistribution::Kind::uniform) {
    // E[m tanh(m u / 2)] - E[m^2] = I(2u) - 1/3.
    stationarity = [](double u) { return counterexample_I(2.0 * u) - 1.0 / 3.0; };
  } else {
    if (!(dist.m0 > 0.0 && dist.m0 < 1.0)) throw ContractError("binary_population_minimizer_1d: m0 must lie in (0, 1)");
    const double m0 = dist.m0;
    stationarity = [m0](double u) { return m0 * (std::tanh(0.5 * m0 * u) - m0); };
  }
  double hi = 1.0;
  while (stationarity(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw InternalError("binary_population_minimizer_1d: no upper bracket");
  }
  return bisect(stationarity, 0.0, hi, 1e-12, "binary_population_minimizer_1d");
}

double binary_population_loss_1d(double u, int q) {
  const QuadratureRule& rule = cached_rule(q);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double m = rule.nodes[i];
    const double p = 0.5 * (1.0 + m);  // sigma(theta) with m = tanh(theta/2)
    const double x = m * u;
    const double log_p = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    const double log_q = log_p - x;
    sum += rule.weights[i] * -(p * log_p + (1.0 - p) * log_q);
  }
  return 0.5 * sum;
}

double binary_finite_n_minimizer_1d(int n_demos, double tol) {
  if (n_demos < 1) throw ContractError("binary_finite_n_minimizer_1d: need at least one demonstration");
  const double n = n_demos;
  // Integrating m ~ U[-1, 1] against the binomial law of B gives weight
  // 1/(N+1) for every B and E[p 1{B}] = (B+1)/((N+1)(N+2)).
  auto stationarity = [&](double u) {
    double g = 0.0;
    for (int b = 0; b <= n_demos; ++b) {
      const double s = (2.0 * b - n) / n;
      g += s * (logistic(s * u) - (b + 1.0) / (n + 2.0));
    }
    return g / (n + 1.0);
  };
  double hi = 1.0;
  while (stationarity(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw InternalError("binary_finite_n_minimizer_1d: no upper bracket");
  }
  return bisect(stationarity, 0.0, hi, tol, "binary_finite_n_minimizer_1d").value;
}

GapResult impossibility_gap(double theta_new) {
  static const double u_bar = binary_population_minimizer_1d().value;
  GapResult out;
  out.theta_new = theta_new;
  out.predicted = logistic(std::tanh(0.5 * theta_new) * u_bar);
  out.truth = logistic(theta_new);
  out.tv = std::abs(out.predicted - out.truth);
  return out;
}

}  // namespace icra::oracles
