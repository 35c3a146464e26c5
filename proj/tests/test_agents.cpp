#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "geosteer/agents.hpp"
#include "geosteer/errors.hpp"
#include "oracles.hpp"

using namespace geosteer;
using namespace geosteer::agents;


TEST_CASE("tabular Q-learning converges to value iteration") {
  const double max_err = oracles::qlearning_max_error(2024, 1000000);
  MESSAGE("max |Q - Q*| = " << max_err);
  CHECK(max_err < 0.01);
}

TEST_CASE("Q-learning update rule") {
  SUBCASE("alpha zero leaves the table unchanged") {
    QTable t(3, 0.0, 0.9);
    t.row(1) = {1.0, 2.0, 3.0};
    t.row(2) = {5.0, 0.0, 0.0};
    qlearning_update(t, 1, 0, 10.0, 2, false);
    CHECK(t.value(1, 0) == 1.0);
  }
  SUBCASE("half step towards the target") {
    QTable t(3, 0.5, 0.9);
    t.row(1) = {1.0, 2.0, 3.0};
    t.row(2) = {5.0, -1.0, 4.0};
    qlearning_update(t, 1, 0, 2.0, 2, false);
    // target 2 + 0.9·5 = 6.5
    CHECK(t.value(1, 0) == doctest::Approx(1.0 + 0.5 * (6.5 - 1.0)).epsilon(1e-15));
  }
  SUBCASE("hand example from zero") {
    QTable t(2, 0.5, 1.0);
    qlearning_update(t, 0, 1, 1.0, 1, false);
    CHECK(t.value(0, 1) == 0.5);
  }
  SUBCASE("terminal transitions drop the bootstrap term") {
    QTable t(3, 1.0, 0.9);
    t.row(2) = {5.0, 5.0, 5.0};
    qlearning_update(t, 1, 2, -3.0, 2, true);
    CHECK(t.value(1, 2) == -3.0);
  }
  SUBCASE("max respects the legal mask") {
    QTable t(3, 1.0, 1.0);
    t.row(2) = {1.0, 9.0, 2.0};
    const std::vector<bool> legal = {true, false, true};
    qlearning_update(t, 1, 0, 0.0, 2, false, &legal);
    CHECK(t.value(1, 0) == 2.0);
    CHECK(qtable_greedy(t, 2, legal) == 2);
  }
  SUBCASE("unseen states read as zero") {
    QTable t(2, 0.1, 0.9);
    CHECK(t.value(42, 1) == 0.0);
    CHECK(t.max_value(42) == 0.0);
    CHECK(t.size() == 0);
  }
}

TEST_CASE("DSDP matches exhaustive search on a deterministic miniature") {
  const auto res = oracles::dsdp_vs_exhaustive();
  CHECK(res.cases == 6);
  CHECK(res.mismatches == 0);
  CHECK(res.worst < 1e-9);
}

TEST_CASE("DSDP lookups") {
  const auto pol = dsdp_solve(oracles::miniature_prior(3.0), {}, 2.0, {});
  SUBCASE("mid-bin states take the bin centre's action") {
    for (int j = 0; j < pol.n_stages; ++j)
      for (int b = 1; b + 1 < pol.n_bins; ++b)
        if (pol.bin_inside(b) == pol.bin_inside(b + 1) && pol.bin_inside(b) == pol.bin_inside(b - 1))
          CHECK(pol.action(j, 0, pol.bin_depth(b) + 0.4 * pol.bin_width) ==
                pol.actions[pol.index(j, 0, b)]);
  }
  SUBCASE("the last stage uses the last table row") {
    const int last = pol.n_stages - 1;
    CHECK(pol.action(last, 0, 2.5) == pol.actions[pol.index(last, 0, pol.bin_of(2.5))]);
  }
  SUBCASE("out-of-span depths clamp to the edge bins") {
    CHECK(pol.bin_of(-100.0) == 0);
    CHECK(pol.bin_of(100.0) == pol.n_bins - 1);
  }
}

TEST_CASE("DSDP on fault-free ground") {
  geomodel::Env2Prior prior;
  prior.base_trend.assign(30, 1000.0);
  const env::CostParams costs;

  SUBCASE("holds depth in the reservoir for the whole section") {
    const auto pol = dsdp_solve(prior, costs, 2.0, {});
    CHECK(pol.root_value() == doctest::Approx(29 * 2.0 - 1.8125).epsilon(1e-12));
    CHECK(pol.action(0, 0, 2.5) == 2);
  }
  SUBCASE("worthless production only pays drilling") {
    const auto pol = dsdp_solve(prior, costs, 0.0, {});
    CHECK(pol.root_value() == doctest::Approx(-1.8125).epsilon(1e-12));
  }
}

TEST_CASE("DSDP value grows with production value") {
  const auto prior = geomodel::default_env2_prior();
  const env::CostParams costs;
  double prev = -std::numeric_limits<double>::infinity();
  for (double v : {0.5, 1.0, 2.0, 3.0, 4.0}) {
    const double value = dsdp_solve(prior, costs, v, {}).root_value();
    CHECK(value > prev);
    prev = value;
  }
}

TEST_CASE("DSDP policy text round trip") {
  const auto pol = dsdp_solve(oracles::miniature_prior(3.0), {}, 2.0, {});
  std::stringstream ss;
  write_policy(ss, pol);
  const auto back = read_policy(ss);
  CHECK(back.n_stages == pol.n_stages);
  CHECK(back.n_bins == pol.n_bins);
  CHECK(back.actions == pol.actions);
  CHECK(back.open_fault == pol.open_fault);
  for (std::size_t i = 0; i < pol.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(pol.values[i]).epsilon(1e-12));
}

TEST_CASE("greedy environment 1 action equals brute force over all actions") {
  const auto res = oracles::greedy_vs_brute_force(100, 300);
  CHECK(res.cases == 100);
  CHECK(res.value_mismatches == 0);
  CHECK(res.action_mismatches == 0);
  CHECK(res.unique > 80);
}

TEST_CASE("greedy environment 2 rule") {
  const env::CostParams costs;
  geomodel::Env2Prior prior;
  prior.base_trend.assign(30, 1000.0);
  geomodel::GeoRealization2 truth;
  truth.upper.assign(30, 1000.0);
  for (int j = 3; j < 30; ++j) truth.upper[j] = 1006.0;

  for (double v : {0.5, 2.0, 4.0}) {
    env::Env2 env(prior, costs);
    env.reset(truth, v);
    CHECK(greedy_select(env) == 2);
    while (env.state().in_reservoir) env.step(2);
    if (v > costs.c_st)
      CHECK(greedy_select(env) == env::Env2::kSidetrack);
    else
      CHECK(greedy_select(env) != env::Env2::kSidetrack);
  }
}

TEST_CASE("replay buffer") {
  SUBCASE("ring overwrite") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.push({{static_cast<double>(i)}, 0, 0.0, {}, true, {}});
    CHECK(buf.size() == 3);
    std::vector<double> seen;
    for (std::size_t i = 0; i < 3; ++i) seen.push_back(buf[i].s[0]);
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<double>{2.0, 3.0, 4.0});
  }
  SUBCASE("uniform sampling passes a chi-square test") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) buf.push({{static_cast<double>(i)}, 0, 0.0, {}, true, {}});
    Rng rng = make_rng(5);
    std::vector<int> counts(10, 0);
    const int n = 100000;
    for (int b = 0; b < n / 50; ++b)
      for (std::size_t i : buf.sample_indices(50, rng)) counts[i]++;
    double chi2 = 0.0;
    const double expected = n / 10.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 27.88);  // 9 degrees of freedom, p = 0.001
  }
}

TEST_CASE("epsilon-greedy action selection") {
  Rng init = make_rng(3);
  const auto net = neural::QNetwork::he_uniform({4, 8, 6}, init);
  const std::vector<double> obs = {0.1, -0.2, 0.3, 0.4};
  const std::vector<bool> legal = {true, true, false, true, true, true};

  SUBCASE("epsilon one is uniform over legal actions") {
    Rng rng = make_rng(8);
    std::vector<int> counts(6, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[dqn_select_action(net, obs, 1.0, legal, rng)]++;
    CHECK(counts[2] == 0);
    for (int a : {0, 1, 3, 4, 5}) CHECK(std::abs(counts[a] / double(n) - 0.2) < 0.01);
  }
  SUBCASE("epsilon zero takes the best legal output") {
    const auto q = net.forward(obs);
    int best = -1;
    for (int a = 0; a < 6; ++a)
      if (legal[a] && (best < 0 || q[a] > q[best])) best = a;
    Rng rng = make_rng(9);
    for (int i = 0; i < 10; ++i) CHECK(dqn_select_action(net, obs, 0.0, legal, rng) == best);
  }
  SUBCASE("masked actions are never chosen") {
    Rng rng = make_rng(10);
    const std::vector<bool> only = {false, false, false, false, true, false};
    for (double eps : {0.0, 0.3, 1.0})
      for (int i = 0; i < 200; ++i) CHECK(dqn_select_action(net, obs, eps, only, rng) == 4);
    CHECK_THROWS_AS(dqn_select_action(net, obs, 0.5, std::vector<bool>(6, false), rng),
                    UsageError);
  }
}

TEST_CASE("epsilon schedule") {
  const DqnConfig cfg;
  CHECK(epsilon_at(cfg, 0, 1000) == 1.0);
  CHECK(epsilon_at(cfg, 400, 1000) == doctest::Approx(1.0 - 0.95 * 0.5));
  CHECK(epsilon_at(cfg, 800, 1000) == doctest::Approx(0.05));
  CHECK(epsilon_at(cfg, 999, 1000) == doctest::Approx(0.05));
}

TEST_CASE("DQN targets and training step") {
  Rng init = make_rng(11);
  auto net = neural::QNetwork::he_uniform({3, 5, 2}, init);
  const auto target = neural::clone_weights(net);

  ReplayBuffer buf(10);
  buf.push({{0.1, 0.2, 0.3}, 0, 1.5, {0.3, 0.2, 0.1}, false, {true, true}});
  buf.push({{0.4, 0.5, 0.6}, 1, -2.0, {0.0, 0.0, 0.0}, true, {true, true}});
  buf.push({{0.7, 0.1, 0.2}, 1, 0.5, {0.9, 0.9, 0.9}, false, {false, true}});
  const std::vector<std::size_t> idx = {0, 1, 2};

  SUBCASE("hand-computed targets") {
    const auto q0 = target.forward(buf[0].s_next);
    const auto q2 = target.forward(buf[2].s_next);
    const auto t = dqn_targets(target, buf, idx, 0.9);
    CHECK(t[0] == doctest::Approx(1.5 + 0.9 * std::max(q0[0], q0[1])).epsilon(1e-14));
    CHECK(t[1] == -2.0);
    CHECK(t[2] == doctest::Approx(0.5 + 0.9 * q2[1]).epsilon(1e-14));
  }
  SUBCASE("gamma zero gives the rewards") {
    const auto t = dqn_targets(target, buf, idx, 0.0);
    CHECK(t == std::vector<double>{1.5, -2.0, 0.5});
  }
  SUBCASE("terminal-only batch ignores gamma") {
    const std::vector<std::size_t> term = {1, 1};
    for (double g : {0.0, 0.5, 1.0}) CHECK(dqn_targets(target, buf, term, g)[0] == -2.0);
  }
  SUBCASE("loss of a two-transition batch") {
    const std::vector<std::size_t> two = {0, 1};
    const auto t = dqn_targets(target, buf, two, 1.0);
    const double e0 = t[0] - net.forward(buf[0].s)[0];
    const double e1 = t[1] - net.forward(buf[1].s)[1];
    std::vector<neural::TrainingSample> batch = {{buf[0].s, 0, t[0]}, {buf[1].s, 1, t[1]}};
    CHECK(neural::loss_and_gradients(net, batch).loss ==
          doctest::Approx(0.5 * (e0 * e0 + e1 * e1)).epsilon(1e-14));
  }
  SUBCASE("no update before the buffer holds a batch") {
    neural::Optimizer opt({}, net);
    Rng rng = make_rng(1);
    const auto before = neural::weights_hash(net);
    CHECK_FALSE(dqn_train_step(net, target, buf, 4, 1.0, opt, rng).has_value());
    CHECK(neural::weights_hash(net) == before);
    CHECK(dqn_train_step(net, target, buf, 3, 1.0, opt, rng).has_value());
    CHECK(neural::weights_hash(net) != before);
    CHECK(opt.step_count() == 1);
  }
}

TEST_CASE("target network synchronizes on schedule") {
  Rng init = make_rng(12);
  auto net = neural::QNetwork::he_uniform({3, 4, 2}, init);
  auto target = neural::clone_weights(net);
  neural::OptimizerConfig oc;
  oc.kind = neural::OptimizerKind::kSgd;
  oc.learning_rate = 0.01;
  neural::Optimizer opt(oc, net);
  const std::vector<neural::TrainingSample> batch = {{{0.5, -0.5, 1.0}, 1, 3.0}};
  std::vector<std::int64_t> synced;
  for (std::int64_t step = 1; step <= 25; ++step) {
    opt.apply(net, neural::loss_and_gradients(net, batch).gradients);
    if (target_sync(net, target, step, 10)) synced.push_back(step);
    const bool equal = neural::weights_hash(net) == neural::weights_hash(target);
    CHECK(equal == (step % 10 == 0));
  }
  CHECK(synced == std::vector<std::int64_t>{10, 20});
}

TEST_CASE("checkpoint round trip") {
  Rng init = make_rng(13);
  Checkpoint ck{{"ex2", env::ObservationMode::kSensor, 10, 6, 4, 800, {{"v_prod_max", 4.0}}},
                neural::QNetwork::he_uniform(neural::default_architecture(10, 6), init)};
  std::stringstream ss;
  save_checkpoint(ss, ck);
  const auto back = load_checkpoint(ss);
  CHECK(back.meta.env_id == "ex2");
  CHECK(back.meta.seed == 4);
  CHECK(back.meta.episodes == 800);
  CHECK(back.meta.observation_size == 10);
  CHECK(back.meta.action_count == 6);
  CHECK(back.meta.normalization == ck.meta.normalization);
  CHECK(neural::weights_hash(back.net) == neural::weights_hash(ck.net));

  std::stringstream bad("not a checkpoint\n");
  CHECK_THROWS(load_checkpoint(bad));
}

TEST_CASE("agents never choose illegal environment 2 actions") {
  const auto prior = geomodel::default_env2_prior();
  const env::CostParams costs;
  Rng init = make_rng(14);
  DqnAgent dqn({{"ex2", env::ObservationMode::kSensor, 10, 6, 1, 0, {}},
                neural::QNetwork::he_uniform(neural::default_architecture(10, 6), init)});
  GreedyAgent greedy;
  for (int k = 0; k < 50; ++k) {
    Rng rng = make_rng(15, 0, k);
    const auto truth = geomodel::sample_realization_env2(prior, rng);
    for (Agent* agent : {static_cast<Agent*>(&dqn), static_cast<Agent*>(&greedy)}) {
      env::Env2 env(prior, costs);
      env.reset(truth, 2.0);
      while (!env.done()) {
        const int a = agent->act(env, rng);
        CHECK(env.legal_actions()[a]);
        env.step(a);
      }
    }
  }
}
