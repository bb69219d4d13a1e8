#include "rrm/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "rrm/rng.hpp"

namespace rrm {

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw Error(ErrorCode::parse, "unknown activation '" + s + "'");
}

std::string to_string(NormalizerMethod m) { return m == NormalizerMethod::min_max ? "min_max" : "z_score"; }

NormalizerMethod normalizer_method_from_string(const std::string& s) {
  if (s == "min_max") return NormalizerMethod::min_max;
  if (s == "z_score") return NormalizerMethod::z_score;
  throw Error(ErrorCode::parse, "unknown normalizer method '" + s + "'");
}

void NetConfig::validate() const {
  if (input_dim == 0) throw Error(ErrorCode::invalid_argument, "input_dim must be >= 1");
  if (output_dim == 0) throw Error(ErrorCode::invalid_argument, "output_dim must be >= 1");
  if (hidden_layers.empty()) throw Error(ErrorCode::invalid_argument, "hidden_layers must be non-empty");
  for (auto h : hidden_layers)
    if (h == 0) throw Error(ErrorCode::invalid_argument, "hidden layer width must be >= 1");
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

void NetworkWeights::validate() const {
  if (layers.empty()) throw Error(ErrorCode::shape, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0)
      throw Error(ErrorCode::shape, "layer " + std::to_string(i) + " is empty");
    if (l.bias.size() != l.weights.rows())
      throw Error(ErrorCode::shape, "layer " + std::to_string(i) + " bias length differs from fan_out");
    if (i > 0 && l.fan_in() != layers[i - 1].fan_out())
      throw Error(ErrorCode::shape, "layer " + std::to_string(i) + " fan_in does not match previous fan_out");
    if (!l.weights.allFinite() || !l.bias.allFinite())
      throw Error(ErrorCode::shape, "layer " + std::to_string(i) + " has non-finite entries");
  }
}

NetworkWeights NetworkWeights::zeros_like() const {
  NetworkWeights z;
  z.activation = activation;
  z.layers.reserve(layers.size());
  for (const auto& l : layers)
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return z;
}

bool NetworkWeights::operator==(const NetworkWeights& other) const {
  if (activation != other.activation || layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size())
      return false;
    if (a.weights != b.weights || a.bias != b.bias) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Normalizer

Normalizer Normalizer::identity(std::size_t dim) {
  Normalizer n;
  n.shift.assign(dim, 0.0);
  n.scale.assign(dim, 1.0);
  return n;
}

Normalizer Normalizer::fit(std::span<const std::vector<double>> rows, NormalizerMethod method) {
  if (rows.empty()) throw Error(ErrorCode::empty_batch, "cannot fit a normalizer on zero rows");
  const std::size_t dim = rows.front().size();
  Normalizer n;
  n.method = method;
  n.shift.assign(dim, 0.0);
  n.scale.assign(dim, 1.0);
  for (std::size_t j = 0; j < dim; ++j) {
    if (method == NormalizerMethod::min_max) {
      double lo = rows.front()[j], hi = rows.front()[j];
      for (const auto& r : rows) {
        lo = std::min(lo, r[j]);
        hi = std::max(hi, r[j]);
      }
      n.shift[j] = lo;
      n.scale[j] = hi > lo ? hi - lo : 1.0;
    } else {
      double mean = 0.0;
      for (const auto& r : rows) mean += r[j];
      mean /= static_cast<double>(rows.size());
      double var = 0.0;
      for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
      var /= static_cast<double>(rows.size());
      n.shift[j] = mean;
      n.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  }
  return n;
}

std::vector<double> Normalizer::normalize(std::span<const double> x) const {
  if (x.size() != dim()) throw Error(ErrorCode::shape, "normalizer input has wrong length");
  std::vector<double> y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = (x[j] - shift[j]) / scale[j];
  return y;
}

std::vector<double> Normalizer::denormalize(std::span<const double> y) const {
  if (y.size() != dim()) throw Error(ErrorCode::shape, "normalizer input has wrong length");
  std::vector<double> x(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) x[j] = y[j] * scale[j] + shift[j];
  return x;
}

void Normalizer::normalize_into(std::span<const double> x, Eigen::Ref<Eigen::VectorXd> out) const {
  if (x.size() != dim()) throw Error(ErrorCode::shape, "normalizer input has wrong length");
  for (std::size_t j = 0; j < x.size(); ++j) out(static_cast<Eigen::Index>(j)) = (x[j] - shift[j]) / scale[j];
}

void Normalizer::validate() const {
  if (shift.size() != scale.size()) throw Error(ErrorCode::shape, "normalizer shift/scale length mismatch");
  for (std::size_t j = 0; j < scale.size(); ++j) {
    if (!(scale[j] > 0.0) || !std::isfinite(scale[j]))
      throw Error(ErrorCode::invalid_argument, "normalizer scale must be positive and finite");
    if (!std::isfinite(shift[j])) throw Error(ErrorCode::invalid_argument, "normalizer shift must be finite");
  }
}

// ---------------------------------------------------------------------------

void FitConfig::validate() const {
  if (epochs == 0) throw Error(ErrorCode::invalid_argument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning_rate must be > 0");
  if (batch_mode == BatchMode::mini_batch && batch_size == 0)
    throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
}

Dataset::Dataset(std::size_t input_dim, std::size_t output_dim, std::size_t n)
    : inputs(Eigen::MatrixXd::Zero(input_dim, n)),
      targets(Eigen::MatrixXd::Zero(output_dim, n)),
      mask(Eigen::MatrixXd::Zero(output_dim, n)) {}

void Dataset::set(std::size_t i, std::span<const double> input, std::span<const double> target,
                  std::span<const double> mask_row) {
  const auto col = static_cast<Eigen::Index>(i);
  if (input.size() != static_cast<std::size_t>(inputs.rows()) ||
      target.size() != static_cast<std::size_t>(targets.rows()) || mask_row.size() != target.size())
    throw Error(ErrorCode::shape, "dataset sample has wrong shape");
  for (std::size_t j = 0; j < input.size(); ++j) inputs(static_cast<Eigen::Index>(j), col) = input[j];
  for (std::size_t k = 0; k < target.size(); ++k) {
    targets(static_cast<Eigen::Index>(k), col) = target[k];
    mask(static_cast<Eigen::Index>(k), col) = mask_row[k];
  }
}

void Dataset::set_single(std::size_t i, std::span<const double> input, std::size_t action, double target) {
  const auto col = static_cast<Eigen::Index>(i);
  if (input.size() != static_cast<std::size_t>(inputs.rows()))
    throw Error(ErrorCode::shape, "dataset sample has wrong input length");
  if (action >= static_cast<std::size_t>(targets.rows()))
    throw Error(ErrorCode::shape, "dataset action index out of range");
  for (std::size_t j = 0; j < input.size(); ++j) inputs(static_cast<Eigen::Index>(j), col) = input[j];
  targets.col(col).setZero();
  mask.col(col).setZero();
  targets(static_cast<Eigen::Index>(action), col) = target;
  mask(static_cast<Eigen::Index>(action), col) = 1.0;
}

// ---------------------------------------------------------------------------

NetworkWeights init_weights(const NetConfig& config) {
  config.validate();
  SplitMix rng(config.seed);
  NetworkWeights w;
  w.activation = config.activation;
  std::vector<std::size_t> dims;
  dims.push_back(config.input_dim);
  dims.insert(dims.end(), config.hidden_layers.begin(), config.hidden_layers.end());
  dims.push_back(config.output_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto fan_in = static_cast<Eigen::Index>(dims[i]);
    const auto fan_out = static_cast<Eigen::Index>(dims[i + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < fan_out; ++r) layer.bias(r) = rng.uniform(-bound, bound);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

namespace {

void activate(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::tanh)
    z = z.array().tanh().matrix();
  else
    z = z.cwiseMax(0.0);
}

// Stores every layer's post-activation output; acts.back() is the net output.
void forward_trace(const NetworkWeights& w, const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& acts) {
  acts.resize(w.layers.size() + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& layer = w.layers[l];
    acts[l + 1].noalias() = layer.weights * acts[l];
    acts[l + 1].colwise() += layer.bias;
    if (l + 1 < w.layers.size()) activate(w.activation, acts[l + 1]);
  }
}

void check_dataset(const NetworkWeights& w, const Dataset& data) {
  if (data.size() == 0) throw Error(ErrorCode::empty_batch, "empty batch");
  if (static_cast<std::size_t>(data.inputs.rows()) != w.input_dim())
    throw Error(ErrorCode::shape, "batch input_dim does not match network");
  if (static_cast<std::size_t>(data.targets.rows()) != w.output_dim() || data.mask.rows() != data.targets.rows() ||
      data.targets.cols() != data.inputs.cols() || data.mask.cols() != data.inputs.cols())
    throw Error(ErrorCode::shape, "batch target/mask shape does not match network");
}

// Returns the loss and writes the gradient into grad (same shapes as w).
double loss_and_gradient(const NetworkWeights& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& mask, NetworkWeights& grad, std::vector<Eigen::MatrixXd>& acts) {
  forward_trace(w, x, acts);
  const double n = static_cast<double>(x.cols());
  Eigen::MatrixXd delta = mask.cwiseProduct(acts.back() - targets);
  const double loss = delta.squaredNorm() / n;
  delta *= 2.0 / n;
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    grad.layers[l].weights.noalias() = delta * acts[l].transpose();
    grad.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = w.layers[l].weights.transpose() * delta;
    const auto& a = acts[l];
    if (w.activation == Activation::tanh)
      delta = back.cwiseProduct((1.0 - a.array().square()).matrix());
    else
      delta = back.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

// iRprop-: sign-based per-parameter step adaptation.
struct RpropState {
  NetworkWeights step;
  NetworkWeights prev_grad;
  static constexpr double kIncrease = 1.2;
  static constexpr double kDecrease = 0.5;
  static constexpr double kMaxStep = 50.0;
  static constexpr double kMinStep = 1e-8;

  static void update(double* param, double* g, double* prev, double* st, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = g[i] * prev[i];
      if (s > 0.0) {
        st[i] = std::min(st[i] * kIncrease, kMaxStep);
      } else if (s < 0.0) {
        st[i] = std::max(st[i] * kDecrease, kMinStep);
        g[i] = 0.0;
      }
      if (g[i] > 0.0)
        param[i] -= st[i];
      else if (g[i] < 0.0)
        param[i] += st[i];
      prev[i] = g[i];
    }
  }
};

void apply_step(NetworkWeights& w, NetworkWeights& grad, const FitConfig& config, RpropState* rprop) {
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& layer = w.layers[l];
    auto& g = grad.layers[l];
    if (config.optimizer == Optimizer::gradient_descent) {
      layer.weights.noalias() -= config.learning_rate * g.weights;
      layer.bias.noalias() -= config.learning_rate * g.bias;
    } else {
      auto& st = rprop->step.layers[l];
      auto& pv = rprop->prev_grad.layers[l];
      RpropState::update(layer.weights.data(), g.weights.data(), pv.weights.data(), st.weights.data(),
                         layer.weights.size());
      RpropState::update(layer.bias.data(), g.bias.data(), pv.bias.data(), st.bias.data(), layer.bias.size());
    }
  }
}

}  // namespace

std::vector<double> forward(const NetworkWeights& weights, std::span<const double> input) {
  if (input.size() != weights.input_dim())
    throw Error(ErrorCode::shape, "input has " + std::to_string(input.size()) + " features, network expects " +
                                      std::to_string(weights.input_dim()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    Eigen::VectorXd z = weights.layers[l].weights * a + weights.layers[l].bias;
    if (l + 1 < weights.layers.size()) {
      if (weights.activation == Activation::tanh)
        z = z.array().tanh().matrix();
      else
        z = z.cwiseMax(0.0);
    }
    a = std::move(z);
  }
  return {a.data(), a.data() + a.size()};
}

Eigen::MatrixXd forward_batch(const NetworkWeights& weights, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != weights.input_dim())
    throw Error(ErrorCode::shape, "batch input_dim does not match network");
  std::vector<Eigen::MatrixXd> acts;
  forward_trace(weights, inputs, acts);
  return std::move(acts.back());
}

double masked_mse(const NetworkWeights& weights, const Dataset& data) {
  check_dataset(weights, data);
  const Eigen::MatrixXd out = forward_batch(weights, data.inputs);
  return data.mask.cwiseProduct(out - data.targets).squaredNorm() / static_cast<double>(data.size());
}

NetworkWeights gradient(const NetworkWeights& weights, const Dataset& data) {
  check_dataset(weights, data);
  NetworkWeights grad = weights.zeros_like();
  std::vector<Eigen::MatrixXd> acts;
  loss_and_gradient(weights, data.inputs, data.targets, data.mask, grad, acts);
  return grad;
}

FitResult fit(NetworkWeights weights, const Dataset& data, const FitConfig& config) {
  config.validate();
  check_dataset(weights, data);
  FitResult result;
  result.loss_history.reserve(config.epochs);
  NetworkWeights grad = weights.zeros_like();
  std::vector<Eigen::MatrixXd> acts;

  std::optional<RpropState> rprop;
  if (config.optimizer == Optimizer::rprop) {
    rprop.emplace();
    rprop->step = weights.zeros_like();
    for (auto& l : rprop->step.layers) {
      l.weights.setConstant(config.learning_rate);
      l.bias.setConstant(config.learning_rate);
    }
    rprop->prev_grad = weights.zeros_like();
  }

  const bool full = config.batch_mode == BatchMode::full_batch || config.batch_size >= data.size();
  SplitMix rng(config.seed);
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss;
    if (full) {
      loss = loss_and_gradient(weights, data.inputs, data.targets, data.mask, grad, acts);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch));
      result.loss_history.push_back(loss);
      apply_step(weights, grad, config, rprop ? &*rprop : nullptr);
      continue;
    }
    loss = masked_mse(weights, data);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch));
    result.loss_history.push_back(loss);
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto idx = std::span(order).subspan(start, end - start);
      Eigen::MatrixXd x = data.inputs(Eigen::all, idx);
      Eigen::MatrixXd t = data.targets(Eigen::all, idx);
      Eigen::MatrixXd m = data.mask(Eigen::all, idx);
      const double l = loss_and_gradient(weights, x, t, m, grad, acts);
      if (!std::isfinite(l))
        throw Error(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch));
      apply_step(weights, grad, config, rprop ? &*rprop : nullptr);
    }
  }
  if (!weights.layers.empty()) {
    for (const auto& l : weights.layers)
      if (!l.weights.allFinite() || !l.bias.allFinite())
        throw Error(ErrorCode::divergence, "non-finite weights after epoch " + std::to_string(config.epochs - 1));
  }
  result.weights = std::move(weights);
  return result;
}

}  // namespace rrm
