#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "icra/core.hpp"
#include "icra/parallel.hpp"
#include "icra/rng.hpp"

using namespace icra;

TEST_SUITE("core") {
  TEST_CASE("logistic values and saturation") {
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
    const double big = logistic(710.0);
    CHECK(std::isfinite(big));
    CHECK(big == 1.0);  // 1 - 1e-300 is not representable below 1
    CHECK(big <= 1.0);
    CHECK(logistic(-710.0) >= 0.0);
    CHECK(std::isfinite(logistic(-1e6)));
  }

  TEST_CASE("logistic agrees with the textbook formula where that is stable") {
    for (double x = -30.0; x <= 30.0; x += 0.37) {
      const double naive = 1.0 / (1.0 + std::exp(-x));
      CHECK(std::abs(logistic(x) - naive) <= 1e-14 * naive);
    }
  }

  TEST_CASE("tanh_half is 2 logistic - 1") {
    for (double x = -20.0; x <= 20.0; x += 0.5) {
      CHECK(tanh_half(x) == doctest::Approx(2.0 * logistic(x) - 1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("bt_prob examples") {
    const FeatureDiff e1(Vec::Unit(2, 0));
    CHECK(bt_prob(e1, RewardParam(Vec::Zero(2))) == 0.5);
    CHECK(bt_prob(e1, RewardParam(2.0 * Vec::Unit(2, 0))) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
  }

  TEST_CASE("bt_prob symmetry, monotonicity and expected_choice identity") {
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
      const FeatureDiff phi(test::random_vector(4, rng, 3.0));
      const RewardParam theta(test::random_vector(4, rng, 3.0));
      CHECK(bt_prob(phi, theta) + bt_prob(-phi, theta) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(std::abs(2.0 * bt_prob(phi, theta) - 1.0 - expected_choice(phi, theta)) <= 1e-12);
      CHECK(expected_choice(-phi, theta) == doctest::Approx(-expected_choice(phi, theta)).epsilon(1e-15));
    }
    const FeatureDiff one(Vec::Ones(1));
    double prev = -1.0;
    for (double x = -40.0; x <= 40.0; x += 0.25) {
      const double p = bt_prob(one, RewardParam(Vec::Constant(1, x)));
      CHECK(p >= prev);
      if (std::abs(x) < 30.0) CHECK(p > prev);
      prev = p;
    }
  }

  TEST_CASE("expected_choice examples") {
    const FeatureDiff one(Vec::Ones(1));
    CHECK(expected_choice(one, RewardParam(Vec::Zero(1))) == 0.0);
    CHECK(expected_choice(one, RewardParam(Vec::Constant(1, 2.0))) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
  }

  TEST_CASE("dimension mismatches and bad values are rejected") {
    CHECK_THROWS_AS(logit(FeatureDiff(Vec::Ones(2)), RewardParam(Vec::Ones(3))), ContractError);
    CHECK_THROWS_AS(FeatureDiff{Vec()}, ContractError);
    Vec bad = Vec::Ones(2);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(RewardParam{bad}, ContractError);
  }

  TEST_CASE("demonstration validation") {
    Demonstration d;
    d.phi_diff = FeatureDiff(Vec::Ones(2));
    d.z = 1.0;
    CHECK_NOTHROW(validate(d, false));
    d.z = 0.5;  // k = 1 requires +-1
    CHECK_THROWS_AS(validate(d, false), DataError);
    d.k = 4;
    CHECK_NOTHROW(validate(d, false));
    CHECK_THROWS_AS(validate(d, true), DataError);  // time required but absent
    d.t = 0.3;
    CHECK_NOTHROW(validate(d, true));
    d.z = 1.5;
    CHECK_THROWS_AS(validate(d, true), DataError);
  }

  TEST_CASE("label mode parsing") {
    CHECK(parse_label_mode("binary") == LabelMode::binary);
    CHECK(parse_label_mode("response_time") == LabelMode::response_time);
    CHECK(parse_label_mode("rt") == LabelMode::response_time);
    CHECK(to_string(LabelMode::response_time) == "response_time");
    CHECK_THROWS_AS(parse_label_mode("ternary"), ConfigError);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible and distinct") {
    Rng a = Rng::stream(1, 2, 3, 4);
    Rng b = Rng::stream(1, 2, 3, 4);
    Rng c = Rng::stream(1, 2, 3, 5);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a();
      CHECK(x == b());
      differs = differs || x != c();
    }
    CHECK(differs);
  }

  TEST_CASE("uniform draws lie in [0, 1) with the right mean") {
    Rng rng(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  }
}

TEST_SUITE("parallel") {
  TEST_CASE("chunked_reduce is identical for serial and parallel execution") {
    const std::size_t n = 100003;
    auto run = [&](Exec exec) {
      return chunked_reduce<double>(
          n, exec, [] { return 0.0; },
          [](double& acc, std::size_t i) { acc += std::sin(static_cast<double>(i)) * 1e-3; },
          [](double& acc, double part) { acc += part; });
    };
    const double serial = run(Exec::serial);
    for (int threads : {1, 2, 4}) {
      set_threads(threads);
      CHECK(run(Exec::parallel) == serial);  // bit-identical
    }
    set_threads(max_threads());
  }

  TEST_CASE("exceptions thrown inside parallel loops propagate") {
    CHECK_THROWS_AS(for_each_index(1000, Exec::parallel,
                                   [](std::size_t i) {
                                     if (i == 517) throw DataError("boom");
                                   }),
                    DataError);
  }

  TEST_CASE("empty ranges are fine") {
    const double total = chunked_reduce<double>(
        0, Exec::parallel, [] { return 1.5; }, [](double&, std::size_t) {}, [](double& a, double b) { a += b; });
    CHECK(total == 1.5);
  }
}
