#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "geosteer/errors.hpp"
#include "geosteer/mechanics.hpp"

using namespace geosteer;
using namespace geosteer::env;

namespace {

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Depth drop over horizontal distance `length` along an arc whose sine of
// inclination changes linearly with x, by composite Simpson integration of
// tan θ(x).
double integrate_arc(double inc0_deg, double inc1_deg, double length, int n = 200000) {
  const double s0 = std::sin(deg(inc0_deg));
  const double s1 = std::sin(deg(inc1_deg));
  auto slope = [&](double x) {
    const double s = s0 + (s1 - s0) * x / length;
    return s / std::sqrt(1.0 - s * s);
  };
  const double h = length / n;
  double sum = slope(0.0) + slope(length);
  for (int i = 1; i < n; ++i) sum += slope(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("proximity reward polynomial") {
  CHECK(std::abs(reward_r1(0.5) - 0.99985) < 1e-9);
  CHECK(reward_r1(0.0) == 0.0);
  CHECK(std::abs(reward_r1(0.25) - 0.92414375) < 1e-12);
  CHECK(reward_r1(-0.2) < -2.0);
}

TEST_CASE("quality reward polynomial") {
  CHECK(reward_r2(200.0) == 1.0);
  CHECK(reward_r2(0.0) == 0.0);
  CHECK(std::abs(reward_r2(100.0) - 0.7) < 1e-12);
  CHECK(std::abs(reward_r2(20.0) - 0.172) < 1e-12);
}

TEST_CASE("environment 1 stage reward") {
  const std::vector<double> ones(10, 1.0), zeros(10, 0.0);
  CHECK(stage_reward_env1(ones, ones, 0.67, 0.33) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(stage_reward_env1(ones, ones, 0.41, 0.59) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(stage_reward_env1(zeros, zeros, 0.5, 0.5) == 0.0);
  const std::vector<double> half(10, 0.5), seven(10, 0.7);
  CHECK(std::abs(stage_reward_env1(half, seven, 0.67, 0.33) - 5.66) < 1e-12);

  SUBCASE("linear in the weights") {
    std::vector<double> r1(10), r2(10);
    for (int k = 0; k < 10; ++k) {
      r1[k] = 0.1 * k - 0.3;
      r2[k] = 0.05 * k * k;
    }
    for (double w1 : {0.0, 0.2, 0.41, 0.67, 1.0}) {
      const double direct = stage_reward_env1(r1, r2, w1, 1.0 - w1);
      const double combined = w1 * stage_reward_env1(r1, r2, 1.0, 0.0) +
                              (1.0 - w1) * stage_reward_env1(r1, r2, 0.0, 1.0);
      CHECK(std::abs(direct - combined) < 1e-12);
    }
  }

  SUBCASE("invalid weights") {
    CHECK_THROWS_AS(stage_reward_env1(ones, ones, 0.5, 0.6), ConfigError);
    CHECK_THROWS_AS(stage_reward_env1(ones, ones, -0.1, 1.1), ConfigError);
  }
  SUBCASE("wrong number of sub-points") {
    const std::vector<double> nine(9, 1.0);
    CHECK_THROWS_AS(stage_reward_env1(nine, nine, 0.5, 0.5), UsageError);
  }
}

TEST_CASE("environment 2 stage reward") {
  const CostParams p;
  CHECK(std::abs(stage_reward_env2(true, false, p, 2.0) - 1.9375) < 1e-15);
  CHECK(std::abs(stage_reward_env2(false, false, p, 2.0) + 0.0625) < 1e-15);
  CHECK(std::abs(stage_reward_env2(true, true, p, 4.0) - 1.3705) < 1e-12);
}

TEST_CASE("minimum curvature segment") {
  SUBCASE("horizontal and straight") {
    for (double v : min_curvature_segment(0.0, 0.0, 10, 10.0)) CHECK(v == 0.0);
  }
  SUBCASE("constant slope is collinear") {
    const auto inc = min_curvature_segment(3.0, 0.0, 10, 10.0);
    for (double v : inc) {
      CHECK(v == inc.front());
      CHECK(v == doctest::Approx(10.0 * std::tan(deg(3.0))).epsilon(1e-14));
    }
  }
  SUBCASE("build of 5 degrees matches numerical integration") {
    const auto inc = min_curvature_segment(0.0, 5.0, 10, 10.0);
    double total = 0.0;
    for (double v : inc) total += v;
    CHECK(std::abs(total - integrate_arc(0.0, 5.0, 100.0)) < 1e-6);
    // every sub-step individually as well
    const double s0 = 0.0, s1 = std::sin(deg(5.0));
    for (int k = 0; k < 10; ++k) {
      const double a = std::asin(s0 + (s1 - s0) * k / 10.0) * 180.0 / std::numbers::pi;
      const double b = std::asin(s0 + (s1 - s0) * (k + 1) / 10.0) * 180.0 / std::numbers::pi;
      CHECK(std::abs(inc[k] - integrate_arc(a, b, 10.0, 2000)) < 1e-9);
    }
  }
  SUBCASE("arcs from an inclined start") {
    for (double start : {-12.0, -4.0, 7.0, 20.0}) {
      for (double d : {-5.0, -2.0, 3.0}) {
        const auto inc = min_curvature_segment(start, d, 10, 10.0);
        double total = 0.0;
        for (double v : inc) total += v;
        CHECK(std::abs(total - integrate_arc(start, start + d, 100.0)) < 1e-6);
      }
    }
  }
  SUBCASE("mirror symmetry") {
    const auto up = min_curvature_segment(2.0, -4.0, 10, 10.0);
    const auto down = min_curvature_segment(-2.0, 4.0, 10, 10.0);
    for (int k = 0; k < 10; ++k) CHECK(up[k] == doctest::Approx(-down[k]).epsilon(1e-14));
  }
  SUBCASE("approaching vertical") {
    CHECK_THROWS_AS(min_curvature_segment(86.0, 5.0, 10, 10.0), GeometryError);
    CHECK_THROWS_AS(min_curvature_segment(-89.5, 0.0, 10, 10.0), GeometryError);
  }
}

TEST_CASE("point scoring") {
  const auto mid = score_point(1012.5, 1000.0, 25.0, 0.4, 200.0, 100.0);
  CHECK(mid.inside);
  CHECK_FALSE(mid.high_quality);
  CHECK(mid.x == 0.5);
  CHECK(mid.y == 100.0);

  const auto upper = score_point(1005.0, 1000.0, 25.0, 0.4, 200.0, 20.0);
  CHECK(upper.high_quality);
  CHECK(upper.y == 200.0);
  CHECK(upper.x == doctest::Approx(0.2));
  CHECK(upper.r2 == 1.0);

  const auto above = score_point(995.0, 1000.0, 25.0, 0.4, 200.0, 100.0);
  CHECK_FALSE(above.inside);
  CHECK(above.x == doctest::Approx(-0.2));
  CHECK(above.y == 0.0);
  CHECK(above.r2 == 0.0);
  CHECK(above.r1 == reward_r1(-0.2));

  const auto below = score_point(1030.0, 1000.0, 25.0, 0.4, 200.0, 100.0);
  CHECK_FALSE(below.inside);
  CHECK(below.x == doctest::Approx(-0.2));
}

TEST_CASE("episode metrics") {
  SUBCASE("fully inside and fully above") {
    const std::vector<double> top(30, 0.0), bottom(30, 5.0), hq(30, 2.0);
    const std::vector<double> inside(30, 1.0), above(30, -1.0);
    CHECK(episode_metrics(inside, top, bottom, hq).reservoir_contact == 100.0);
    CHECK(*episode_metrics(inside, top, bottom, hq).high_quality == 100.0);
    const auto r = episode_metrics(above, top, bottom, hq);
    CHECK(r.reservoir_contact == 0.0);
    CHECK(*r.high_quality == 0.0);
  }
  SUBCASE("hand-built alternating path") {
    std::vector<double> top(30), bottom(30), tvd(30);
    int inside = 0;
    for (int j = 0; j < 30; ++j) {
      top[j] = 100.0 + 0.5 * j;
      bottom[j] = top[j] + 5.0;
      const bool in = (j / 3) % 2 == 0;  // three in, three out
      tvd[j] = in ? top[j] + 2.5 : bottom[j] + 1.0;
      inside += in;
    }
    CHECK(inside == 15);
    const auto r = episode_metrics(tvd, top, bottom);
    CHECK(r.reservoir_contact == doctest::Approx(100.0 * 15 / 30));
    CHECK_FALSE(r.high_quality.has_value());
  }
  SUBCASE("boundary points count as inside") {
    const std::vector<double> top = {0.0, 0.0}, bottom = {5.0, 5.0}, tvd = {0.0, 5.0};
    CHECK(episode_metrics(tvd, top, bottom).reservoir_contact == 100.0);
  }
}
