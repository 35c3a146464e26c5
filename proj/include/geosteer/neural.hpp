#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geosteer/random.hpp"

// Dense feed-forward Q-network: ReLU hidden layers, linear output, one output
// per action. Parameters are 64-bit floats.
namespace geosteer::neural {

struct DenseLayer {
  Eigen::MatrixXd weights;  // out × in
  Eigen::VectorXd bias;     // out
};

class QNetwork {
 public:
  QNetwork() = default;
  // Zero-initialized network with layer widths dims[0] → … → dims.back().
  explicit QNetwork(std::vector<int> dims);
  // Uniform fan-in scaling, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
  static QNetwork he_uniform(std::vector<int> dims, Rng& rng);

  const std::vector<int>& dims() const { return dims_; }
  int input_size() const { return dims_.front(); }
  int output_size() const { return dims_.back(); }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<double> forward(std::span<const double> input) const;
  // One sample per column.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  // Row-major weights then bias, layer by layer.
  std::vector<double> flatten() const;
  void assign(std::span<const double> params);

  bool all_finite() const;

 private:
  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

// Q-network shape used for both environments: input → 128 → 64 → actions.
std::vector<int> default_architecture(int input_size, int num_actions);

struct Gradients {
  std::vector<DenseLayer> layers;

  std::vector<double> flatten() const;
};

struct TrainingSample {
  std::vector<double> observation;
  int action = 0;
  double target = 0.0;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

// Mean over the batch of (target - Q(s, a))²; only the taken action's output
// receives gradient.
LossAndGradients loss_and_gradients(const QNetwork& net,
                                    std::span<const TrainingSample> batch);
// Same, with observations packed one per column.
LossAndGradients loss_and_gradients(const QNetwork& net,
                                    const Eigen::MatrixXd& inputs,
                                    std::span<const int> actions,
                                    std::span<const double> targets);

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
};

class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const QNetwork& shape);

  void apply(QNetwork& net, const Gradients& grads);

  std::int64_t step_count() const { return step_; }
  const OptimizerConfig& config() const { return config_; }
  const std::vector<DenseLayer>& first_moments() const { return m_; }
  const std::vector<DenseLayer>& second_moments() const { return v_; }

 private:
  OptimizerConfig config_;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  std::int64_t step_ = 0;
};

// Deep copy used as the target network.
QNetwork clone_weights(const QNetwork& net);

// Binary weight file: "GSQN", format version, layer count, widths, then each
// layer's row-major weights followed by its bias.
void save(std::ostream& os, const QNetwork& net);
// Rejects files whose widths differ from `expected_dims` when given.
QNetwork load(std::istream& is,
              const std::optional<std::vector<int>>& expected_dims = {});

std::uint64_t weights_hash(const QNetwork& net);

}  // namespace geosteer::neural
