#include "geosteer/neural.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "geosteer/errors.hpp"
#include "geosteer/hash.hpp"

namespace geosteer::neural {
namespace {

constexpr char kMagic[4] = {'G', 'S', 'Q', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

std::vector<DenseLayer> zero_layers(const std::vector<int>& dims) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layers.push_back({Eigen::MatrixXd::Zero(dims[l + 1], dims[l]),
                      Eigen::VectorXd::Zero(dims[l + 1])});
  }
  return layers;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw UsageError("weight file truncated");
  return v;
}

void append_row_major(std::vector<double>& out, const DenseLayer& layer) {
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      out.push_back(layer.weights(r, c));
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(layer.bias(r));
}

}  // namespace

QNetwork::QNetwork(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw UsageError("QNetwork: need at least input and output widths");
  for (int d : dims_)
    if (d <= 0) throw UsageError("QNetwork: layer widths must be positive");
  layers_ = zero_layers(dims_);
}

QNetwork QNetwork::he_uniform(std::vector<int> dims, Rng& rng) {
  QNetwork net(std::move(dims));
  for (auto& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        layer.weights(r, c) = dist(rng);
  }
  return net;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> QNetwork::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_size())
    throw UsageError("QNetwork::forward: expected " + std::to_string(input_size()) +
                     " inputs, got " + std::to_string(input.size()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return {a.data(), a.data() + a.size()};
}

Eigen::MatrixXd QNetwork::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_size())
    throw UsageError("QNetwork::forward_batch: input width mismatch");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

std::vector<double> QNetwork::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) append_row_major(out, l);
  return out;
}

void QNetwork::assign(std::span<const double> params) {
  if (params.size() != parameter_count())
    throw UsageError("QNetwork::assign: parameter count mismatch");
  std::size_t i = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = params[i++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = params[i++];
  }
}

bool QNetwork::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

std::vector<int> default_architecture(int input_size, int num_actions) {
  return {input_size, 128, 64, num_actions};
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) append_row_major(out, l);
  return out;
}

LossAndGradients loss_and_gradients(const QNetwork& net,
                                    const Eigen::MatrixXd& inputs,
                                    std::span<const int> actions,
                                    std::span<const double> targets) {
  const Eigen::Index batch = inputs.cols();
  if (batch == 0) throw UsageError("loss_and_gradients: empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch)
    throw UsageError("loss_and_gradients: batch arrays differ in length");
  if (inputs.rows() != net.input_size())
    throw UsageError("loss_and_gradients: input width mismatch");

  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  // Forward pass keeping every activation (activations[0] is the input).
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  activations[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = layers[l].weights * activations[l];
    z.colwise() += layers[l].bias;
    if (l + 1 < depth) z = z.cwiseMax(0.0);
    activations[l + 1] = std::move(z);
  }

  const Eigen::MatrixXd& q = activations[depth];
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  LossAndGradients out;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[b];
    if (a < 0 || a >= q.rows()) throw UsageError("loss_and_gradients: action out of range");
    const double err = q(a, b) - targets[b];
    out.loss += err * err;
    delta(a, b) = 2.0 * err / static_cast<double>(batch);
  }
  out.loss /= static_cast<double>(batch);

  out.gradients.layers.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    auto& g = out.gradients.layers[l];
    g.weights = delta * activations[l].transpose();
    g.bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
      // ReLU: an activation of exactly zero passes no gradient.
      delta = (activations[l].array() > 0.0).select(back, 0.0);
    }
  }
  return out;
}

LossAndGradients loss_and_gradients(const QNetwork& net,
                                    std::span<const TrainingSample> batch) {
  if (batch.empty()) throw UsageError("loss_and_gradients: empty batch");
  Eigen::MatrixXd inputs(net.input_size(), static_cast<Eigen::Index>(batch.size()));
  std::vector<int> actions(batch.size());
  std::vector<double> targets(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<int>(batch[b].observation.size()) != net.input_size())
      throw UsageError("loss_and_gradients: observation width mismatch");
    for (int r = 0; r < net.input_size(); ++r)
      inputs(r, static_cast<Eigen::Index>(b)) = batch[b].observation[r];
    actions[b] = batch[b].action;
    targets[b] = batch[b].target;
  }
  return loss_and_gradients(net, inputs, actions, targets);
}

Optimizer::Optimizer(OptimizerConfig config, const QNetwork& shape)
    : config_(config), m_(zero_layers(shape.dims())), v_(zero_layers(shape.dims())) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("agent.learning_rate: must be > 0");
}

void Optimizer::apply(QNetwork& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size())
    throw UsageError("Optimizer::apply: gradient shape mismatch");
  ++step_;
  double scale = 1.0;
  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads.layers)
      sq += g.weights.squaredNorm() + g.bias.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) scale = config_.max_grad_norm / norm;
  }
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weights -= (lr * scale) * grads.layers[l].weights;
      layers[l].bias -= (lr * scale) * grads.layers[l].bias;
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double eps = config_.epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + ((1.0 - b1) * scale) * g;
    v = b2 * v + ((1.0 - b2) * scale * scale) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, m_[l].weights, v_[l].weights, grads.layers[l].weights);
    update(layers[l].bias, m_[l].bias, v_[l].bias, grads.layers[l].bias);
  }
}

QNetwork clone_weights(const QNetwork& net) { return net; }

void save(std::ostream& os, const QNetwork& net) {
  os.write(kMagic, sizeof kMagic);
  write_pod(os, kFormatVersion);
  write_pod(os, static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) write_pod(os, static_cast<std::int32_t>(d));
  for (double p : net.flatten()) write_pod(os, p);
  if (!os) throw UsageError("failed to write weight file");
}

QNetwork load(std::istream& is, const std::optional<std::vector<int>>& expected_dims) {
  char magic[4];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw UsageError("not a Q-network weight file");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion)
    throw UsageError("unsupported weight file version " + std::to_string(version));
  const auto n = read_pod<std::uint32_t>(is);
  if (n < 2 || n > 64) throw UsageError("weight file has an invalid layer count");
  std::vector<int> dims(n);
  for (auto& d : dims) d = read_pod<std::int32_t>(is);
  if (expected_dims && *expected_dims != dims)
    throw UsageError("weight file dimensions do not match the expected network");
  QNetwork net(dims);
  std::vector<double> params(net.parameter_count());
  for (double& p : params) p = read_pod<double>(is);
  net.assign(params);
  return net;
}

std::uint64_t weights_hash(const QNetwork& net) {
  Fnv1a h;
  for (int d : net.dims()) h.add(static_cast<std::int64_t>(d));
  h.add(net.flatten());
  return h.value();
}

}  // namespace geosteer::neural
