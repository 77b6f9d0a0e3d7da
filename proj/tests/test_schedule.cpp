#include <catch2/catch_amalgamated.hpp>

#include "blockdiff/train/noise_schedule.hpp"

using namespace blockdiff::train;

TEST_CASE("schedule endpoints and monotonicity") {
  for (auto family : {ScheduleFamily::kLinear, ScheduleFamily::kCosine}) {
    NoiseSchedule s{family};
    CHECK(s.alpha(0.0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(s.alpha(1.0) == Catch::Approx(0.0).margin(1e-12));
    double prev = s.alpha(0.0);
    for (int i = 1; i <= 1000; ++i) {
      double t = i / 1000.0;
      double a = s.alpha(t);
      CHECK(a < prev);
      prev = a;
    }
  }
}

TEST_CASE("analytic derivative matches central finite differences") {
  const double h = 1e-6;
  for (auto family : {ScheduleFamily::kLinear, ScheduleFamily::kCosine}) {
    NoiseSchedule s{family};
    for (int i = 1; i < 1000; ++i) {
      double t = i / 1000.0;
      double fd = (s.alpha(t + h) - s.alpha(t - h)) / (2.0 * h);
      REQUIRE(std::abs(fd - s.alpha_deriv(t)) < 1e-6);
    }
  }
}

TEST_CASE("linear loss weight is 1/t") {
  NoiseSchedule s{ScheduleFamily::kLinear};
  CHECK(loss_weight(0.5, s) == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(loss_weight(1.0, s) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(loss_weight(0.1, s) == Catch::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("weight-schedule identity holds for both families") {
  for (auto family : {ScheduleFamily::kLinear, ScheduleFamily::kCosine}) {
    NoiseSchedule s{family};
    for (int i = 1; i <= 1000; ++i) {
      double t = i / 1000.0;
      double lhs = loss_weight(t, s) * (1.0 - s.alpha(t));
      double rhs = std::abs(s.alpha_deriv(t));
      REQUIRE(std::abs(lhs - rhs) < 1e-9);
    }
  }
}

TEST_CASE("loss weight rejects t = 0") {
  NoiseSchedule s{ScheduleFamily::kLinear};
  CHECK_THROWS_AS(loss_weight(0.0, s), blockdiff::config_error);
}
