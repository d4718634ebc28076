#include <doctest.h>

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "helpers.hpp"
#include "icra/oracles.hpp"
#include "icra/synthgen.hpp"
#include "icra/training.hpp"

using namespace icra;
using namespace icra::oracles;

namespace {

// Independent evaluation of I(u) by adaptive Gauss-Kronrod.
double kronrod_I(double u) {
  return 0.5 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                   [u](double m) { return m * std::tanh(0.25 * m * u); }, -1.0, 1.0, 15, 1e-14);
}

// Independent finite-N binary objective in the 1-d construction: average over
// m ~ U[-1, 1] (Gauss-Kronrod) of the exact binomial expectation.
double finite_n_loss(int n, double u) {
  auto at_m = [n, u](double m) {
    const double p = 0.5 * (1.0 + m);
    double total = 0.0;
    for (int b = 0; b <= n; ++b) {
      const double w = std::exp(std::lgamma(n + 1.0) - std::lgamma(b + 1.0) - std::lgamma(n - b + 1.0) +
                                b * std::log(p) + (n - b) * std::log1p(-p));
      const double s = (2.0 * b - n) / n;
      // Query phi = +1 and -1 are symmetric, so take phi = +1: z = +1 w.p. p.
      const double x = s * u;
      const double log_sig = x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
      total += w * -(p * log_sig + (1.0 - p) * (log_sig - x));
    }
    return total;
  };
  return 0.5 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(at_m, -1.0, 1.0, 10, 1e-13);
}

double argmin(const std::function<double(double)>& f, double lo, double hi) {
  return boost::math::tools::brent_find_minima(f, lo, hi, 50).first;
}

}  // namespace

TEST_SUITE("oracles") {
  TEST_CASE("preference moment, exact mode") {
    MomentMap map;
    map.features.kind = FeatureKind::rademacher;
    map.exact = true;
    CHECK(mu_of_theta(map, RewardParam(Vec::Zero(1))).value[0] == 0.0);
    CHECK(mu_of_theta(map, RewardParam(Vec::Constant(1, 2.0))).value[0] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    CHECK(mu_of_theta(map, RewardParam(Vec::Constant(1, -1.3))).value[0] ==
          -mu_of_theta(map, RewardParam(Vec::Constant(1, 1.3))).value[0]);
    // Compression: mu(2 theta) != 2 mu(theta).
    const double m2 = mu_of_theta(map, RewardParam(Vec::Constant(1, 2.0))).value[0];
    const double m4 = mu_of_theta(map, RewardParam(Vec::Constant(1, 4.0))).value[0];
    CHECK(std::abs(m4 - 2.0 * m2) > 0.5);
    map.dim = 2;
    CHECK_THROWS_AS(mu_of_theta(map, RewardParam(Vec::Zero(2))), ConfigError);
  }

  TEST_CASE("preference moment, Monte Carlo mode") {
    MomentMap map;
    map.features.kind = FeatureKind::rademacher;
    map.samples = 100000;
    map.seed = 3;
    const auto mc = mu_of_theta(map, RewardParam(Vec::Constant(1, 2.0)));
    // With +-1 features tanh(phi theta / 2) phi is constant, so MC is exact.
    CHECK(std::abs(mc.value[0] - std::tanh(1.0)) <= 3.0 * mc.standard_error[0] + 1e-12);

    MomentMap g;
    g.dim = 3;
    g.features.bound = 2.0;
    g.samples = 50000;
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
      const RewardParam theta(test::random_vector(3, rng, 4.0));
      const auto plus = mu_of_theta(g, theta);
      const auto minus = mu_of_theta(g, RewardParam(-theta.theta()));
      CHECK(plus.value.norm() <= 2.0);
      CHECK(((plus.value + minus.value).array().abs() <= 3.0 * (plus.standard_error + minus.standard_error).array()).all());
    }
  }

  TEST_CASE("empirical moments") {
    Demonstration d;
    d.phi_diff = FeatureDiff(Vec::Constant(2, 0.3));
    d.z = 1.0;
    CHECK(empirical_moment({d}, LabelMode::binary) == d.phi_diff.values());

    PopulationSpec spec;
    spec.dim = 1;
    spec.features.kind = FeatureKind::rademacher;
    const RewardParam theta(Vec::Constant(1, 1.5));
    Rng rng(5);
    std::vector<Demonstration> demos;
    for (int i = 0; i < 100000; ++i) {
      demos.push_back(synth::sample_demonstration(synth::sample_feature(spec, rng), theta, 1, LabelMode::binary,
                                                  synth::DdmConfig{}, rng));
    }
    const double se = std::sqrt((1.0 - std::pow(std::tanh(0.75), 2)) / 1e5);
    CHECK(std::abs(empirical_moment(demos, LabelMode::binary)[0] - std::tanh(0.75)) < 3.0 * se);
  }

  TEST_CASE("ratio moment approaches 2 Sigma theta") {
    const PopulationSpec spec = test::gaussian_spec(2, 1.0, 0.7);
    Vec t(2);
    t << 1.0, -0.5;
    const RewardParam theta(t);
    synth::DdmConfig ddm;
    ddm.sampler = synth::Sampler::aggregate;
    Rng rng(6);
    std::vector<Demonstration> demos;
    for (int i = 0; i < 100000; ++i) {
      demos.push_back(synth::sample_demonstration(synth::sample_feature(spec, rng), theta, 100,
                                                  LabelMode::response_time, ddm, rng));
    }
    const Vec target = 2.0 * 0.49 * t;
    // Per-coordinate sampling SE is about 0.004; K = 100 leaves a ratio bias
    // of order 1/K.
    CHECK((empirical_moment(demos, LabelMode::response_time) - target).norm() < 0.03);
  }

  TEST_CASE("population minimizer of the response-time loss") {
    CHECK(population_minimizer_rt(Mat::Identity(3, 3)) == Mat::Identity(3, 3));
    Mat s = Mat::Zero(2, 2);
    s.diagonal() << 2.0, 1.0;
    Mat inv = Mat::Zero(2, 2);
    inv.diagonal() << 0.5, 1.0;
    CHECK((population_minimizer_rt(s) - inv).norm() < 1e-15);
    Rng rng(7);
    for (int i = 0; i < 10; ++i) {
      const Mat a = test::random_matrix(4, 4, rng);
      const Mat spd = a * a.transpose() + 0.1 * Mat::Identity(4, 4);
      CHECK((population_minimizer_rt(spd) * spd - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK_THROWS_AS(population_minimizer_rt(-Mat::Identity(2, 2)), ContractError);
    Mat asym = Mat::Identity(2, 2);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(population_minimizer_rt(asym), ContractError);
  }

  TEST_CASE("feature second moments") {
    PopulationSpec r;
    r.dim = 1;
    r.features.kind = FeatureKind::rademacher;
    CHECK(feature_second_moment(r).value(0, 0) == 1.0);

    PopulationSpec g = test::gaussian_spec(3, 1.0, 2.0);
    const auto closed = feature_second_moment(g);
    CHECK(closed.closed_form);
    CHECK((closed.value - 4.0 * Mat::Identity(3, 3)).norm() < 1e-14);

    // Truncation: closed form against Monte Carlo.
    g.features.bound = 3.0;
    const auto truncated = feature_second_moment(g);
    CHECK(truncated.closed_form);
    CHECK(truncated.value(0, 0) < 4.0);
    Rng rng(8);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = synth::sample_feature(g, rng).values()[1];
      s += x * x;
      s2 += x * x * x * x;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - truncated.value(1, 1)) < 3.0 * se);

    PopulationSpec cube = test::gaussian_spec(2);
    cube.features.kind = FeatureKind::uniform_cube;
    cube.features.scale = 0.6;
    CHECK((feature_second_moment(cube).value - (0.36 / 3.0) * Mat::Identity(2, 2)).norm() < 1e-15);
    cube.features.bound = 0.7;  // cuts the corners: no closed form
    const auto mc = feature_second_moment(cube, 20000, 1);
    CHECK_FALSE(mc.closed_form);
    CHECK(mc.standard_error.maxCoeff() > 0.0);
  }

  TEST_CASE("Gauss-Legendre rules") {
    for (int n : {2, 5, 16, 64, 128}) {
      const auto rule = gauss_legendre(n);
      double w = 0.0, p = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        w += rule.weights[i];
        p += rule.weights[i] * std::pow(rule.nodes[i], 2 * n - 2);  // exact up to degree 2n-1
      }
      CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
      CHECK(p == doctest::Approx(2.0 / (2 * n - 1)).epsilon(1e-12));
    }
  }

  TEST_CASE("I(u): values, monotonicity, independent quadrature") {
    CHECK(counterexample_I(0.0) == 0.0);
    CHECK(counterexample_I(0.0) < 1.0 / 3.0);
    CHECK(counterexample_I(6.0) > 1.0 / 3.0);
    double prev = -1.0;
    for (double u = 0.0; u <= 10.0; u += 0.05) {
      const double v = counterexample_I(u);
      REQUIRE(v > prev);
      prev = v;
    }
    for (double u : {0.5, 2.0, 5.2, 9.0}) CHECK(counterexample_I(u) == doctest::Approx(kronrod_I(u)).epsilon(1e-13));
    CHECK(counterexample_I(3.0, 64) == doctest::Approx(counterexample_I(3.0, 128)).epsilon(1e-14));
    CHECK_THROWS_AS(counterexample_I(1.0, 16), ContractError);
  }

  TEST_CASE("root of I(u) = 1/3") {
    const auto root = counterexample_ustar();
    CHECK(root.value > 0.0);
    CHECK(root.value < 6.0);
    CHECK(std::abs(counterexample_I(root.value) - 1.0 / 3.0) < 1e-9);
    CHECK(root.f_lo < 0.0);
    CHECK(root.f_hi > 0.0);
    CHECK(root.value == doctest::Approx(5.199363816660).epsilon(1e-11));  // pinned golden value

    // Independent root finder (TOMS 748) on an independent quadrature.
    boost::uintmax_t iters = 100;
    const auto bracket = boost::math::tools::toms748_solve([](double u) { return kronrod_I(u) - 1.0 / 3.0; }, 0.0,
                                                           6.0, boost::math::tools::eps_tolerance<double>(50), iters);
    CHECK(std::abs(0.5 * (bracket.first + bracket.second) - root.value) < 1e-8);

    // Uniqueness on the bracket: a fine scan sees exactly one sign change.
    int changes = 0;
    double last = counterexample_I(1e-6) - 1.0 / 3.0;
    for (double u = 0.001; u <= 6.0; u += 0.001) {
      const double v = counterexample_I(u) - 1.0 / 3.0;
      changes += (v > 0.0) != (last > 0.0);
      last = v;
    }
    CHECK(changes == 1);
  }

  TEST_CASE("binary population minimizer in one dimension") {
    const double u_bar = binary_population_minimizer_1d().value;
    CHECK(u_bar == doctest::Approx(2.599681908314).epsilon(1e-11));
    // With this parametrization of I the stationarity condition is I(2u) = 1/3.
    CHECK(u_bar == doctest::Approx(counterexample_ustar().value / 2.0).epsilon(1e-9));
    // Independent: minimize the objective directly.
    CHECK(argmin([](double u) { return binary_population_loss_1d(u); }, 0.0, 10.0) ==
          doctest::Approx(u_bar).epsilon(1e-7));

    for (double m0 : {0.2, 0.5, 0.9}) {
      SignalDistribution point;
      point.kind = SignalDistribution::Kind::point_mass;
      point.m0 = m0;
      CHECK(binary_population_minimizer_1d(point).value == doctest::Approx(2.0 * std::atanh(m0) / m0).epsilon(1e-10));
    }
    SignalDistribution bad;
    bad.kind = SignalDistribution::Kind::point_mass;
    bad.m0 = 1.0;
    CHECK_THROWS_AS(binary_population_minimizer_1d(bad), ContractError);
  }

  TEST_CASE("exact finite-N minimizer") {
    for (int n : {1, 4, 16}) {
      const double closed = binary_finite_n_minimizer_1d(n);
      CHECK(argmin([n](double u) { return finite_n_loss(n, u); }, 0.0, 10.0) == doctest::Approx(closed).epsilon(1e-6));
    }
    CHECK(binary_finite_n_minimizer_1d(4) == doctest::Approx(1.5472).epsilon(1e-4));
    double prev_gap = 1e9;
    const double u_bar = binary_population_minimizer_1d().value;
    for (int n : {16, 64, 256, 1024, 4096}) {
      const double gap = u_bar - binary_finite_n_minimizer_1d(n);
      CHECK(gap > 0.0);
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
    CHECK(prev_gap < 0.005);
  }

  TEST_CASE("binary training in the 1-d construction approaches U_bar, not U*") {
    PopulationSpec spec;
    spec.dim = 1;
    spec.features.kind = FeatureKind::rademacher;
    spec.theta.kind = ThetaKind::tanh_uniform;
    spec.ood.kind = ThetaKind::tanh_uniform;
    synth::BatchRequest req;
    req.n_tasks = 1 << 16;
    req.n_demos = 256;
    req.mode = LabelMode::binary;
    req.seed = 9;
    const auto corpus = training::summarize(synth::generate_tasks(spec, req, synth::DdmConfig{}), LabelMode::binary);
    const double fitted = training::fit_binary_newton(corpus, Mat::Ones(1, 1))(0, 0);
    // Sampling SE of the fit is about 0.02; U_256 sits 0.03 below U_bar.
    CHECK(std::abs(fitted - binary_finite_n_minimizer_1d(256)) < 0.08);
    CHECK(std::abs(fitted - binary_population_minimizer_1d().value) < 0.1);
    CHECK(std::abs(fitted - counterexample_ustar().value) > 2.0);
  }

  TEST_CASE("impossibility gap") {
    CHECK(impossibility_gap(0.0).tv == 0.0);
    const auto g8 = impossibility_gap(8.0);
    CHECK(g8.tv > 0.01);
    CHECK(g8.truth == doctest::Approx(logistic(8.0)).epsilon(1e-15));
    CHECK(g8.predicted == doctest::Approx(logistic(std::tanh(4.0) * binary_population_minimizer_1d().value)).epsilon(1e-15));
    for (double t = 0.25; t <= 10.0; t += 0.25) {
      CHECK(impossibility_gap(t).tv == doctest::Approx(impossibility_gap(-t).tv).epsilon(1e-14));
      if (t > 6.0) CHECK(impossibility_gap(t).tv > 0.0);
    }
  }
}
