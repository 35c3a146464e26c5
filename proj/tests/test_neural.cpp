#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geosteer/errors.hpp"
#include "geosteer/neural.hpp"
#include "oracles.hpp"

using namespace geosteer;
using namespace geosteer::neural;

using oracles::random_net;
using oracles::random_vector;

TEST_CASE("forward pass") {
  SUBCASE("zero network outputs zeros") {
    const QNetwork net({4, 8, 3});
    for (double q : net.forward(std::vector<double>{1.0, -2.0, 3.0, 0.5})) CHECK(q == 0.0);
  }
  SUBCASE("single rectifier unit") {
    QNetwork net({1, 1, 1});
    net.assign(std::vector<double>{1.0, 0.0, 1.0, 0.0});
    for (double x : {-2.0, -0.1, 0.0, 0.3, 5.0})
      CHECK(net.forward(std::vector<double>{x})[0] == std::max(0.0, x));
  }
  SUBCASE("matches the independent oracle") {
    CHECK(oracles::forward_check_worst(20, 5) < 1e-12);
  }
  SUBCASE("batch and single forward agree") {
    Rng rng = make_rng(3);
    const auto net = random_net({6, 10, 4}, rng);
    Eigen::MatrixXd xs(6, 5);
    for (int c = 0; c < 5; ++c)
      for (int r = 0; r < 6; ++r) xs(r, c) = normal(rng, 0.0, 1.0);
    const auto qb = net.forward_batch(xs);
    for (int c = 0; c < 5; ++c) {
      std::vector<double> x(6);
      for (int r = 0; r < 6; ++r) x[r] = xs(r, c);
      const auto q = net.forward(x);
      for (int a = 0; a < 4; ++a) CHECK(std::abs(q[a] - qb(a, c)) < 1e-12);
    }
  }
  SUBCASE("input length mismatch") {
    const QNetwork net({4, 8, 3});
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), UsageError);
  }
  SUBCASE("parameter counts") {
    CHECK(QNetwork(default_architecture(49, 11)).parameter_count() ==
          49 * 128 + 128 + 128 * 64 + 64 + 64 * 11 + 11);
    CHECK(QNetwork(default_architecture(49, 11)).parameter_count() == 15371);
    CHECK(QNetwork(default_architecture(10, 6)).parameter_count() ==
          10 * 128 + 128 + 128 * 64 + 64 + 64 * 6 + 6);
  }
  SUBCASE("initialization bounds") {
    Rng rng = make_rng(2);
    const auto net = QNetwork::he_uniform({49, 128, 64, 11}, rng);
    const double bound = std::sqrt(6.0 / 49.0);
    for (int r = 0; r < 128; ++r)
      for (int c = 0; c < 49; ++c) CHECK(std::abs(net.layers()[0].weights(r, c)) <= bound);
    CHECK(net.layers()[0].bias.isZero());
  }
}

TEST_CASE("loss and gradients") {
  SUBCASE("exact predictions give zero loss and gradient") {
    Rng rng = make_rng(8);
    const auto net = random_net({3, 5, 2}, rng);
    std::vector<TrainingSample> batch;
    for (int i = 0; i < 4; ++i) {
      auto x = random_vector(3, rng);
      batch.push_back({x, i % 2, net.forward(x)[i % 2]});
    }
    const auto lg = loss_and_gradients(net, batch);
    CHECK(lg.loss == 0.0);
    for (double g : lg.gradients.flatten()) CHECK(g == 0.0);
  }

  SUBCASE("linear single-parameter network") {
    QNetwork net({1, 1});
    net.assign(std::vector<double>{1.5, 0.0});
    const double x = 2.0, y = 1.0;
    const auto lg = loss_and_gradients(net, std::vector<TrainingSample>{{{x}, 0, y}});
    const double q = 1.5 * x;
    CHECK(lg.loss == doctest::Approx((q - y) * (q - y)));
    CHECK(lg.gradients.flatten()[0] == doctest::Approx(2.0 * (q - y) * x));
    CHECK(lg.gradients.flatten()[1] == doctest::Approx(2.0 * (q - y)));
  }

  SUBCASE("only the taken action receives gradient") {
    Rng rng = make_rng(12);
    const auto net = random_net({3, 4, 3}, rng);
    const auto lg = loss_and_gradients(net, std::vector<TrainingSample>{{random_vector(3, rng), 1, 5.0}});
    const auto& out = lg.gradients.layers.back();
    for (int c = 0; c < 4; ++c) {
      CHECK(out.weights(0, c) == 0.0);
      CHECK(out.weights(2, c) == 0.0);
    }
    CHECK(out.bias(0) == 0.0);
    CHECK(out.bias(1) != 0.0);
  }

  SUBCASE("loss matches the oracle") {
    Rng rng = make_rng(13);
    const auto net = random_net({5, 9, 7, 4}, rng);
    std::vector<TrainingSample> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({random_vector(5, rng), i % 4, normal(rng, 0, 2)});
    CHECK(loss_and_gradients(net, batch).loss ==
          doctest::Approx(oracles::loss(net.dims(), net.flatten(), batch)).epsilon(1e-12));
  }

  SUBCASE("gradients match central differences on 100 random cases") {
    CHECK(oracles::gradient_check_worst(100, 777) < 1e-4);
  }
}

TEST_CASE("optimizers") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Rng rng = make_rng(4);
    auto net = random_net({3, 4, 2}, rng);
    const auto before = net.flatten();
    Optimizer adam({}, net);
    Gradients g;
    for (const auto& l : net.layers())
      g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                          Eigen::VectorXd::Zero(l.bias.size())});
    adam.apply(net, g);
    CHECK(net.flatten() == before);
    CHECK(adam.step_count() == 1);
  }

  SUBCASE("plain gradient descent step") {
    Rng rng = make_rng(5);
    auto net = random_net({3, 4, 2}, rng);
    const auto before = net.flatten();
    const auto lg = loss_and_gradients(net, std::vector<TrainingSample>{{random_vector(3, rng), 0, 1.0}});
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::kSgd;
    cfg.learning_rate = 0.1;
    Optimizer sgd(cfg, net);
    sgd.apply(net, lg.gradients);
    const auto after = net.flatten();
    const auto g = lg.gradients.flatten();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i] - 0.1 * g[i]);
  }

  SUBCASE("adaptive moments converge on a one-dimensional quadratic") {
    // With a zero input only the output bias matters: loss = (b - 3)².
    QNetwork net({1, 1});
    net.assign(std::vector<double>{0.7, -2.0});
    Optimizer adam({}, net);
    int steps = 0;
    while (steps < 10000 && std::abs(net.layers()[0].bias(0) - 3.0) >= 1e-3) {
      adam.apply(net, loss_and_gradients(net, std::vector<TrainingSample>{{{0.0}, 0, 3.0}}).gradients);
      ++steps;
    }
    CHECK(std::abs(net.layers()[0].bias(0) - 3.0) < 1e-3);
    CHECK(steps < 10000);
    CHECK(net.layers()[0].weights(0, 0) == 0.7);
  }

  SUBCASE("invalid learning rate") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(Optimizer(cfg, QNetwork({2, 2})), ConfigError);
  }
}

TEST_CASE("clones and weight files") {
  Rng rng = make_rng(6);
  auto net = random_net({5, 8, 3}, rng);
  const auto target = clone_weights(net);
  const auto x = random_vector(5, rng);
  CHECK(net.forward(x) == target.forward(x));
  const auto target_hash = weights_hash(target);

  Optimizer opt({}, net);
  opt.apply(net, loss_and_gradients(net, std::vector<TrainingSample>{{x, 2, 10.0}}).gradients);
  CHECK(net.forward(x) != target.forward(x));
  CHECK(weights_hash(target) == target_hash);
  CHECK(weights_hash(net) != target_hash);

  SUBCASE("round trip") {
    std::stringstream ss;
    save(ss, net);
    const auto loaded = load(ss, std::vector<int>{5, 8, 3});
    CHECK(loaded.flatten() == net.flatten());
    CHECK(weights_hash(loaded) == weights_hash(net));
  }
  SUBCASE("dimension mismatch is rejected") {
    std::stringstream ss;
    save(ss, net);
    CHECK_THROWS_AS(load(ss, std::vector<int>{5, 9, 3}), UsageError);
  }
  SUBCASE("garbage and truncation are rejected") {
    std::stringstream junk("not a network");
    CHECK_THROWS_AS(load(junk), UsageError);
    std::stringstream ss;
    save(ss, net);
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load(cut), UsageError);
  }
}
