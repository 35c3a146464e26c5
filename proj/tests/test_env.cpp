#include <doctest.h>

#include <cmath>
#include <sstream>

#include "geosteer/bayes.hpp"
#include "geosteer/errors.hpp"
#include "geosteer/env.hpp"

using namespace geosteer;
using namespace geosteer::env;

namespace {

geomodel::GeoRealization1 flat_env1(double top = 1000.0, double h = 25.0) {
  geomodel::GeoRealization1 r;
  r.top.assign(100, top);
  r.thickness.assign(100, h);
  return r;
}

geomodel::Env2Prior flat_prior(std::vector<geomodel::FaultSpec> faults = {}) {
  geomodel::Env2Prior p;
  p.base_trend.assign(30, 1000.0);
  p.faults = std::move(faults);
  return p;
}

}  // namespace

TEST_CASE("environment 1 episode") {
  SUBCASE("centered on flat boundaries, holding inclination") {
    Env1 env;
    const Env1Scenario sc{0.67, 0.33, 100.0};
    env.reset(flat_env1(), sc);
    CHECK(env.state().tvd == 1012.5);
    int stages = 0;
    while (!env.done()) {
      const auto [reward, done] = env.step(5);
      ++stages;
      CHECK(done == (stages == 10));
      // mid-reservoir lies in the low-quality zone
      const double per_point = 0.67 * reward_r1(0.5) + 0.33 * reward_r2(100.0);
      CHECK(reward == doctest::Approx(10.0 * per_point).epsilon(1e-12));
      CHECK(env.state().point == 10 * stages);
    }
    CHECK(stages == 10);
    const auto res = env.result();
    CHECK(res.stage_rewards.size() == 10);
    CHECK(res.reservoir_contact == 100.0);
    CHECK(*res.high_quality == 0.0);
    CHECK(res.trajectory.size() == 100);
    CHECK_THROWS_AS(env.step(5), UsageError);
  }

  SUBCASE("illegal action index") {
    Env1 env;
    env.reset(flat_env1(), {});
    CHECK_THROWS_AS(env.step(11), IllegalActionError);
    CHECK_THROWS_AS(env.step(-1), IllegalActionError);
  }

  SUBCASE("all actions legal") {
    Env1 env;
    env.reset(flat_env1(), {});
    const auto mask = env.legal_actions();
    CHECK(mask.size() == 11);
    for (bool b : mask) CHECK(b);
  }

  SUBCASE("stage path follows the arc increments") {
    Env1 env;
    env.reset(flat_env1(), {});
    const auto plan = env.plan_stage(10);
    const auto inc = min_curvature_segment(0.0, 5.0, 10, 10.0);
    double z = 1012.5;
    for (int k = 0; k < 10; ++k) {
      CHECK(plan[k] == doctest::Approx(z).epsilon(1e-15));
      z += inc[k];
    }
    CHECK(plan[10] == doctest::Approx(z).epsilon(1e-15));
    env.step(10);
    CHECK(env.state().inclination == 5.0);
    CHECK(env.state().tvd == doctest::Approx(z).epsilon(1e-15));
  }

  SUBCASE("stage reward sums weighted point rewards") {
    Rng rng = make_rng(8);
    Env1 env;
    env.reset(geomodel::sample_realization_env1({}, rng), {0.41, 0.59, 20.0});
    for (int a : {10, 10, 0, 3, 7, 5, 5, 2, 8, 5}) {
      const int first = env.state().point;
      const double r = env.step(a).reward;
      double sum = 0.0;
      for (int k = 0; k < 10; ++k) sum += env.point_rewards()[first + k];
      CHECK(r == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("environment 1 observations") {
  Rng rng = make_rng(12);
  Env1 env;
  env.reset(geomodel::sample_realization_env1({}, rng), {0.67, 0.33, 100.0});

  SUBCASE("sensor layout") {
    auto obs = observe(env, ObservationMode::kSensor);
    CHECK(obs.size() == 49);
    // only the current point is known at the start
    for (int slot = 0; slot < 10; ++slot) CHECK(obs[slot] == 0.0);
    CHECK(obs[10] == doctest::Approx(obs[21]));  // mid-reservoir: DTUB == DTLB
    CHECK(obs[10] == doctest::Approx(0.5));
    CHECK(obs[44] == 0.0);
    CHECK(obs[46] == 0.5);
    CHECK(obs[47] == 0.67);
    CHECK(obs[48] == 0.33);

    env.step(8);
    obs = observe(env, ObservationMode::kSensor);
    const auto& t = env.truth();
    const auto& z = env.trajectory();
    for (int slot = 0; slot < 10; ++slot) {
      const int p = slot;  // points 0..9 behind the sensor at 10
      CHECK(obs[slot] == doctest::Approx((z[p] - t.top[p]) / t.thickness[p]));
      CHECK(obs[11 + slot] == doctest::Approx((t.bottom(p) - z[p]) / t.thickness[p]));
    }
    CHECK(obs[44] == doctest::Approx(0.3));
    CHECK(obs[45] == doctest::Approx(0.1));
  }

  SUBCASE("posterior layout") {
    CHECK_THROWS_AS(observe(env, ObservationMode::kPosterior), UsageError);
    auto belief = bayes::condition_on_measurement(
        bayes::make_boundary_belief(10, 0.4, 0.2), env.measured_top(), env.measured_thickness());
    const auto obs = observe(env, ObservationMode::kPosterior, &belief);
    CHECK(obs.size() == 49);
    // straight-ahead horizontal extension against a constant posterior mean
    for (int k = 0; k <= 10; ++k) CHECK(obs[k] == doctest::Approx(0.5));
  }
}

TEST_CASE("environment 2 episode") {
  const CostParams costs;

  SUBCASE("no exits and no sidetracks costs 29 c_d") {
    Env2 env(flat_prior(), costs);
    geomodel::GeoRealization2 truth;
    truth.upper.assign(30, 1000.0);
    env.reset(truth, 2.0);
    int stages = 0;
    while (!env.done()) {
      const auto mask = env.legal_actions();
      CHECK(mask == std::vector<bool>{true, true, true, true, true, false});
      const auto [r, done] = env.step(2);
      CHECK(r == 1.9375);
      ++stages;
    }
    CHECK(stages == 29);
    const auto res = env.result();
    CHECK(*res.operating_cost == 29 * 0.0625);
    CHECK(*res.operating_cost == 1.8125);
    CHECK(res.stage_rewards.size() == 29);
    CHECK(res.reservoir_contact == 100.0);
    CHECK(res.total_reward == doctest::Approx(29 * 2.0 - 1.8125).epsilon(1e-14));
  }

  SUBCASE("steering inside keeps v_prod - c_d") {
    Env2 env(flat_prior(), costs);
    geomodel::GeoRealization2 truth;
    truth.upper.assign(30, 1000.0);
    env.reset(truth, 3.0);
    const double before = env.state().tvd;
    CHECK(env.step(3).reward == 3.0 - 0.0625);
    CHECK(env.state().tvd == before + 0.25);
  }

  SUBCASE("exit, masking and sidetrack") {
    Env2 env(flat_prior(), costs);
    geomodel::GeoRealization2 truth;
    truth.upper.assign(30, 1000.0);
    for (int j = 3; j < 30; ++j) truth.upper[j] = 1004.0;  // 4 m step down at point 3
    env.reset(truth, 4.0);
    env.step(2);
    env.step(2);
    const auto r = env.step(2);
    CHECK_FALSE(env.state().in_reservoir);
    CHECK(r.reward == -0.0625);
    CHECK(env.legal_actions() == std::vector<bool>(6, true));
    const auto st = env.step(Env2::kSidetrack);
    CHECK(env.state().tvd == 0.5 * (1004.0 + 1009.0));
    CHECK(env.state().in_reservoir);
    CHECK(st.reward == doctest::Approx(4.0 - 0.0625 - 2.567).epsilon(1e-14));
    CHECK(env.state().sidetrack_count == 1);
    CHECK_THROWS_AS(env.step(Env2::kSidetrack), IllegalActionError);
  }

  SUBCASE("accounting identity over random rollouts") {
    const auto prior = geomodel::default_env2_prior();
    Env2 env(prior, costs);
    for (int k = 0; k < 200; ++k) {
      Rng rng = make_rng(77, 0, k);
      const double v = uniform(rng, 0.5, 4.0);
      env.reset(geomodel::sample_realization_env2(prior, rng), v);
      int inside_points = 0;
      double sum = 0.0;
      while (!env.done()) {
        const auto mask = env.legal_actions();
        if (env.state().in_reservoir) CHECK_FALSE(mask[Env2::kSidetrack]);
        std::vector<int> legal;
        for (int a = 0; a < 6; ++a)
          if (mask[a]) legal.push_back(a);
        const int a = legal[uniform_index(rng, legal.size())];
        sum += env.step(a).reward;
        inside_points += env.state().in_reservoir;
      }
      const auto res = env.result();
      const double values = inside_points * v;
      CHECK(std::abs(res.total_reward - (values - *res.operating_cost)) < 1e-12);
      CHECK(std::abs(res.total_reward - sum) < 1e-9);
      CHECK(res.reservoir_contact == doctest::Approx(100.0 * inside_points / 29));
      CHECK(*res.operating_cost ==
            doctest::Approx(29 * 0.0625 + res.sidetracks * 2.567).epsilon(1e-14));
    }
  }
}

TEST_CASE("environment 2 observations") {
  const auto prior = geomodel::default_env2_prior();
  Env2 env(prior);
  Rng rng = make_rng(21);
  env.reset(geomodel::sample_realization_env2(prior, rng), 2.0);
  auto obs = observe(env);
  CHECK(obs.size() == 10);
  CHECK(obs[1] == doctest::Approx(obs[3]));  // mid-reservoir at the start
  CHECK(obs[0] == 0.0);
  CHECK(obs[2] == 0.0);
  const double length = 29 * 30.0;
  CHECK(obs[4] == doctest::Approx(120.0 / length));
  CHECK(obs[5] == doctest::Approx(180.0 / length));
  CHECK(obs[6] == doctest::Approx(3.0 / 5.0));
  CHECK(obs[7] == 0.0);
  CHECK(obs[8] == 0.0);
  CHECK(obs[9] == 0.5);

  // past the last fault window the sentinel appears
  while (!env.done() && env.state().stage < 25) env.step(env.state().in_reservoir ? 2 : 5);
  obs = observe(env);
  CHECK(obs[4] == 1.0);
  CHECK(obs[5] == 1.0);
  CHECK(obs[6] == 0.0);
  CHECK(obs[8] == doctest::Approx(25 * 30.0 / length));
}

TEST_CASE("trajectory dumps") {
  Env1 env1;
  env1.reset(flat_env1(), {});
  while (!env1.done()) env1.step(5);
  std::ostringstream os;
  write_trajectory(os, env1);
  int lines = 0;
  for (char c : os.str()) lines += c == '\n';
  CHECK(lines == 101);
}
