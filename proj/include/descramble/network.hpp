#pragma once

#include "descramble/matrix.hpp"
#include "descramble/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace descramble {

enum class Activation { kTanh, kRelu, kSigmoid, kIdentity };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

/// Elementwise activation and its derivative (relu'(0) = 0).
Matrix activate(Activation a, const Matrix& z);
Matrix activate_derivative(Activation a, const Matrix& z);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;
};

struct FeedForwardNet {
  std::vector<DenseLayer> layers;
  bool renormalize_output = false;  // clip at zero, scale columns to unit sum

  Index input_dim() const;
  Index output_dim() const;
  Index depth() const { return static_cast<Index>(layers.size()); }
  void validate() const;
};

/// dims has one more entry than activations: dims = {in, h1, ..., out}.
struct NetArch {
  std::vector<Index> dims;
  std::vector<Activation> activations;
  bool renormalize_output = false;
};

/// Xavier-uniform weights for tanh, sigmoid and identity layers, He-normal for
/// relu, zero biases.
FeedForwardNet init_net(const NetArch& arch, std::uint64_t seed);

/// Pre-activation tap f_k(X) = W_k g(... g(W_1 X + b_1) ...) + b_k, k = 1..L.
Matrix layer_output(const FeedForwardNet& net, Index k, const Matrix& x);

/// Full evaluation including the last activation and the optional renormalization.
Matrix forward(const FeedForwardNet& net, const Matrix& x);

/// Clip negatives, scale each column to unit sum; an all-zero column becomes uniform.
Matrix renormalize_columns(const Matrix& a);

/// Jacobian of x -> f_k(x) at xbar: W_k diag(g'(z_{k-1})) W_{k-1} ... diag(g'(z_1)) W_1.
Matrix jacobian_at(const FeedForwardNet& net, Index k, const Vector& xbar);

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  int epochs = 10;
  Index batch_size = 64;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool train_biases = true;

  void validate() const;
};

struct TrainResult {
  FeedForwardNet net;
  double initial_loss = 0.0;
  std::vector<double> loss;  // full-data RMSE after each epoch
  bool diverged = false;
  int diverged_epoch = -1;
};

/// RMSE between two equally shaped matrices, over all entries.
double rmse(const Matrix& prediction, const Matrix& target);

/// Minibatch training on RMSE. Shuffling comes from substream(cfg.seed, epoch),
/// so identical inputs give identical traces. Stops at the first non-finite loss.
TrainResult train(const FeedForwardNet& net, const Matrix& inputs, const Matrix& targets,
                  const TrainConfig& cfg);

/// m x m circulant: row 0 is the zero-padded filter, row i is row 0 shifted right by i.
Matrix circulant_from_filter(const Vector& w, Index m);

// Persistence: a directory holding manifest.json and layer_<k>.bin, where each
// layer file stores the out x (in + 1) matrix [W | b].

inline constexpr int kNetFormatVersion = 1;

void save_net(const FeedForwardNet& net, const std::filesystem::path& dir);
FeedForwardNet load_net(const std::filesystem::path& dir);

}  // namespace descramble
