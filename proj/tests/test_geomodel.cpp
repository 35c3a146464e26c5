#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "geosteer/errors.hpp"
#include "geosteer/geomodel.hpp"

using namespace geosteer;
using namespace geosteer::geomodel;

TEST_CASE("environment 1 realizations") {
  ForwardFnParams1 p;

  SUBCASE("zero variance gives flat boundaries") {
    p.boundary_step_sd = 0.0;
    p.thickness_sd = 0.0;
    Rng rng = make_rng(7);
    const auto r = sample_realization_env1(p, rng);
    REQUIRE(r.size() == 100);
    for (int i = 0; i < r.size(); ++i) {
      CHECK(r.top[i] == doctest::Approx(p.mean_top_depth).epsilon(1e-15));
      CHECK(r.thickness[i] == doctest::Approx(p.thickness_mean).epsilon(1e-15));
    }
  }

  SUBCASE("deterministic for a seed") {
    Rng a = make_rng(3), b = make_rng(3), c = make_rng(4);
    const auto ra = sample_realization_env1(p, a);
    const auto rb = sample_realization_env1(p, b);
    const auto rc = sample_realization_env1(p, c);
    CHECK(ra.top == rb.top);
    CHECK(ra.thickness == rb.thickness);
    CHECK(realization_hash(ra) == realization_hash(rb));
    CHECK(ra.top != rc.top);
    CHECK(realization_hash(ra) != realization_hash(rc));
  }

  SUBCASE("seed 1: thickness floor and zone ordering at every point") {
    Rng rng = make_rng(1);
    const auto r = sample_realization_env1(p, rng);
    REQUIRE(r.size() == 100);
    REQUIRE(static_cast<int>(r.thickness.size()) == 100);
    for (int i = 0; i < 100; ++i) {
      CHECK(r.thickness[i] >= p.thickness_min);
      CHECK(r.top[i] < r.hq_boundary(i));
      CHECK(r.hq_boundary(i) < r.bottom(i));
    }
  }

  SUBCASE("thickness floor over 10000 realizations") {
    ForwardFnParams1 thin = p;
    thin.thickness_mean = 12.0;
    thin.thickness_sd = 1.0;  // walk often reaches the floor
    double min_h = 1e9;
    int clamped = 0;
    for (int k = 0; k < 10000; ++k) {
      Rng rng = make_rng(11, 0, k);
      const auto r = sample_realization_env1(thin, rng);
      for (double h : r.thickness) {
        min_h = std::min(min_h, h);
        clamped += h == thin.thickness_min;
      }
    }
    CHECK(min_h >= thin.thickness_min);
    CHECK(clamped > 0);
  }

  SUBCASE("invalid parameters name the field") {
    ForwardFnParams1 bad = p;
    bad.hq_fraction = 1.0;
    Rng rng = make_rng(1);
    try {
      (void)sample_realization_env1(bad, rng);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("hq_fraction") != std::string::npos);
    }
    bad = p;
    bad.n_points = 1;
    CHECK_THROWS_AS(sample_realization_env1(bad, rng), ConfigError);
    bad = p;
    bad.perm_low = 300.0;
    CHECK_THROWS_AS(sample_realization_env1(bad, rng), ConfigError);
    bad = p;
    bad.dx = 0.0;
    CHECK_THROWS_AS(sample_realization_env1(bad, rng), ConfigError);
  }
}

namespace {

std::vector<double> linear_trend(double top, double dip, int n = 30) {
  std::vector<double> t(n);
  for (int j = 0; j < n; ++j) t[j] = top + dip * j;
  return t;
}

}  // namespace

TEST_CASE("environment 2 realizations") {
  const auto trend = linear_trend(1000.0, 0.25);

  SUBCASE("no faults follows the trend exactly") {
    Rng rng = make_rng(5);
    const auto r = sample_realization_env2({}, trend, 5.0, 30.0, rng);
    CHECK(r.upper == trend);
    CHECK(r.fault_draws.empty());
  }

  SUBCASE("single certain fault of 3 m at 120 m") {
    const FaultSpec f{{120.0}, 3.0, 0.0};
    Rng rng = make_rng(5);
    const auto r = sample_realization_env2({f}, trend, 5.0, 30.0, rng);
    REQUIRE(r.fault_draws.size() == 1);
    CHECK(r.fault_draws[0].point == 4);
    for (int j = 0; j < 30; ++j) {
      const double expected = trend[j] + (j * 30.0 >= 120.0 ? 3.0 : 0.0);
      CHECK(r.upper[j] == expected);
    }
  }

  SUBCASE("three faults: cumulative offset equals the re-summed draws") {
    const auto prior = default_env2_prior();
    for (int seed = 1; seed <= 20; ++seed) {
      Rng rng = make_rng(seed);
      const auto r = sample_realization_env2(prior, rng);
      REQUIRE(r.fault_draws.size() == 3);
      double sum = 0.0;
      for (const auto& d : r.fault_draws) sum += d.displacement;
      CHECK(r.upper.back() - prior.base_trend.back() == doctest::Approx(sum).epsilon(1e-12));

      // piecewise structure: detrended jumps only at drawn fault points
      std::map<int, double> jumps;
      for (const auto& d : r.fault_draws) jumps[d.point] += d.displacement;
      for (int j = 0; j + 1 < 30; ++j) {
        const double jump = (r.upper[j + 1] - r.upper[j]) -
                            (prior.base_trend[j + 1] - prior.base_trend[j]);
        const auto it = jumps.find(j + 1);
        const double expected = it == jumps.end() ? 0.0 : it->second;
        CHECK(std::abs(jump - expected) < 1e-9);
      }
      // each draw is one of its candidates and lands on a grid point
      for (std::size_t f = 0; f < 3; ++f) {
        const auto& c = prior.faults[f].candidate_locations;
        CHECK(std::find(c.begin(), c.end(), r.fault_draws[f].location) != c.end());
        CHECK(r.fault_draws[f].point * 30.0 == r.fault_draws[f].location);
      }
    }
  }

  SUBCASE("fault locations are uniform over the candidates") {
    const FaultSpec f{{120.0, 150.0, 180.0}, 3.0, 1.0};
    std::map<double, int> counts;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
      Rng rng = make_rng(99, 0, k);
      counts[sample_realization_env2({f}, trend, 5.0, 30.0, rng).fault_draws[0].location]++;
    }
    REQUIRE(counts.size() == 3);
    for (const auto& [loc, c] : counts) CHECK(std::abs(100.0 * c / n - 100.0 / 3.0) < 2.0);
  }

  SUBCASE("displacement moments") {
    const FaultSpec f{{150.0}, 3.0, 1.0};
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
      Rng rng = make_rng(42, 0, k);
      const double d = sample_realization_env2({f}, trend, 5.0, 30.0, rng).fault_draws[0].displacement;
      sum += d;
      sq += d * d;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - 3.0) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 0.05);
  }

  SUBCASE("invalid inputs") {
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(sample_realization_env2({}, trend, -1.0, 30.0, rng), ConfigError);
    const FaultSpec off_grid{{125.0}, 3.0, 1.0};
    CHECK_THROWS_AS(sample_realization_env2({off_grid}, trend, 5.0, 30.0, rng), ConfigError);
    const FaultSpec empty{{}, 3.0, 1.0};
    CHECK_THROWS_AS(sample_realization_env2({empty}, trend, 5.0, 30.0, rng), ConfigError);
  }

  SUBCASE("default prior") {
    const auto prior = default_env2_prior();
    CHECK(prior.n_points == 30);
    CHECK(prior.spacing == 30.0);
    CHECK(prior.thickness == 5.0);
    REQUIRE(prior.faults.size() == 3);
    CHECK(prior.faults[0].candidate_locations == std::vector<double>{120.0, 150.0, 180.0});
    CHECK(prior.faults[0].displacement_mean == 3.0);
    CHECK(prior.faults[0].displacement_sd == 1.0);
    CHECK(prior.base_trend.front() == 1000.0);
    CHECK(prior.base_trend[1] - prior.base_trend[0] == doctest::Approx(0.25));
  }
}

TEST_CASE("realization dumps") {
  Rng rng = make_rng(2);
  const auto r1 = sample_realization_env1(ForwardFnParams1{}, rng);
  std::ostringstream os1;
  write_realization(os1, r1);
  int lines = 0;
  for (char c : os1.str()) lines += c == '\n';
  CHECK(lines == 101);  // header + one row per point

  const auto r2 = sample_realization_env2(default_env2_prior(), rng);
  std::ostringstream os2;
  write_realization(os2, r2);
  CHECK(os2.str().find("fault") != std::string::npos);
}
