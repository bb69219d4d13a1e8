#pragma once

// Small dense feed-forward networks used as Q-function approximators.
//
// A network maps a (normalized) state feature vector to one value per
// action. Hidden layers use tanh or relu, the output layer is linear.
// Training minimizes a masked mean squared error so that each sample only
// constrains the output unit of the action it was collected with.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rrm/error.hpp"

namespace rrm {

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct NetConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers{16};
  std::size_t output_dim = 1;
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;

  /// Throws Error(invalid_argument) when any dimension is zero or no hidden
  /// layer is given.
  void validate() const;
};

/// Weight matrix is fan_out x fan_in.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  std::size_t fan_in() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t fan_out() const { return static_cast<std::size_t>(weights.rows()); }
};

struct NetworkWeights {
  Activation activation = Activation::tanh;
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().fan_in(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().fan_out(); }
  std::size_t parameter_count() const;

  /// Rejects broken shape chains and non-finite entries.
  void validate() const;

  /// Same shapes, every entry zero.
  NetworkWeights zeros_like() const;

  bool operator==(const NetworkWeights& other) const;
};

enum class NormalizerMethod { min_max, z_score };

std::string to_string(NormalizerMethod m);
NormalizerMethod normalizer_method_from_string(const std::string& s);

/// Per-feature affine map x -> (x - shift) / scale.
struct Normalizer {
  NormalizerMethod method = NormalizerMethod::z_score;
  std::vector<double> shift;
  std::vector<double> scale;

  static Normalizer identity(std::size_t dim);
  /// Fits on the rows given; constant features get scale 1.
  static Normalizer fit(std::span<const std::vector<double>> rows, NormalizerMethod method);

  std::size_t dim() const { return shift.size(); }
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> y) const;
  void normalize_into(std::span<const double> x, Eigen::Ref<Eigen::VectorXd> out) const;
  void validate() const;

  bool operator==(const Normalizer& other) const = default;
};

enum class BatchMode { full_batch, mini_batch };
enum class Optimizer { gradient_descent, rprop };

struct FitConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.01;
  BatchMode batch_mode = BatchMode::full_batch;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::gradient_descent;
  std::uint64_t seed = 0;  // mini-batch shuffling only

  void validate() const;
};

/// Column-per-sample training set. Targets outside the mask are ignored.
struct Dataset {
  Eigen::MatrixXd inputs;   // input_dim x n
  Eigen::MatrixXd targets;  // output_dim x n
  Eigen::MatrixXd mask;     // output_dim x n, entries 0 or 1

  Dataset() = default;
  Dataset(std::size_t input_dim, std::size_t output_dim, std::size_t n);

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  void set(std::size_t i, std::span<const double> input, std::span<const double> target,
           std::span<const double> mask_row);
  /// Single-action sample: only output `action` carries a target.
  void set_single(std::size_t i, std::span<const double> input, std::size_t action, double target);
};

struct FitResult {
  NetworkWeights weights;
  std::vector<double> loss_history;  // loss before each epoch's update
};

NetworkWeights init_weights(const NetConfig& config);

std::vector<double> forward(const NetworkWeights& weights, std::span<const double> input);

/// Evaluates a whole batch; returns output_dim x n.
Eigen::MatrixXd forward_batch(const NetworkWeights& weights, const Eigen::MatrixXd& inputs);

/// Masked mean squared error, averaged over samples (not over outputs).
double masked_mse(const NetworkWeights& weights, const Dataset& data);

/// Gradient of masked_mse with respect to every weight and bias.
NetworkWeights gradient(const NetworkWeights& weights, const Dataset& data);

FitResult fit(NetworkWeights weights, const Dataset& data, const FitConfig& config);

}  // namespace rrm
