#include "descramble/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace descramble {

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw InvalidArgument("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kRelu: return z.cwiseMax(0.0);
    case Activation::kSigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    case Activation::kIdentity: return z;
  }
  return z;
}

Matrix activate_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kTanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kRelu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kSigmoid: {
      const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
      return (s * (1.0 - s)).matrix();
    }
    case Activation::kIdentity: return Matrix::Ones(z.rows(), z.cols());
  }
  return z;
}

Index FeedForwardNet::input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }

Index FeedForwardNet::output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

void FeedForwardNet::validate() const {
  if (layers.empty()) throw InvalidArgument("FeedForwardNet: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weight.rows() < 1 || l.weight.cols() < 1)
      throw InvalidArgument("FeedForwardNet: empty weight in layer " + std::to_string(i + 1));
    if (l.bias.size() != l.weight.rows())
      throw InvalidArgument("FeedForwardNet: bias length mismatch in layer " + std::to_string(i + 1));
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
      throw InvalidArgument("FeedForwardNet: layer " + std::to_string(i + 1) + " input does not match previous output");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw InvalidArgument("FeedForwardNet: non-finite parameters in layer " + std::to_string(i + 1));
  }
}

FeedForwardNet init_net(const NetArch& arch, std::uint64_t seed) {
  if (arch.dims.size() < 2 || arch.activations.size() + 1 != arch.dims.size())
    throw InvalidArgument("init_net: need dims.size() == activations.size() + 1 >= 2");
  for (Index d : arch.dims)
    if (d < 1) throw InvalidArgument("init_net: dimensions must be >= 1");
  FeedForwardNet net;
  net.renormalize_output = arch.renormalize_output;
  for (std::size_t i = 0; i + 1 < arch.dims.size(); ++i) {
    const Index in = arch.dims[i], out = arch.dims[i + 1];
    Rng rng = substream(seed, i);
    DenseLayer layer;
    layer.activation = arch.activations[i];
    layer.weight.resize(out, in);
    layer.bias = Vector::Zero(out);
    if (layer.activation == Activation::kRelu) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
      for (Index c = 0; c < in; ++c)
        for (Index r = 0; r < out; ++r) layer.weight(r, c) = dist(rng);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index c = 0; c < in; ++c)
        for (Index r = 0; r < out; ++r) layer.weight(r, c) = dist(rng);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace {

void check_input(const FeedForwardNet& net, const Matrix& x, const char* what) {
  if (net.layers.empty()) throw InvalidArgument(std::string(what) + ": empty network");
  if (x.rows() != net.input_dim())
    throw InvalidArgument(std::string(what) + ": input has " + std::to_string(x.rows()) + " rows, network expects " +
                          std::to_string(net.input_dim()));
}

void check_layer_index(const FeedForwardNet& net, Index k, const char* what) {
  if (k < 1 || k > net.depth())
    throw InvalidArgument(std::string(what) + ": layer index " + std::to_string(k) + " outside 1.." +
                          std::to_string(net.depth()));
}

}  // namespace

Matrix layer_output(const FeedForwardNet& net, Index k, const Matrix& x) {
  check_input(net, x, "layer_output");
  check_layer_index(net, k, "layer_output");
  Matrix h = x;
  for (Index j = 0; j < k; ++j) {
    const DenseLayer& l = net.layers[static_cast<std::size_t>(j)];
    Matrix z = l.weight * h;
    z.colwise() += l.bias;
    if (j + 1 == k) return z;
    h = activate(l.activation, z);
  }
  return h;
}

Matrix renormalize_columns(const Matrix& a) {
  Matrix c = a.cwiseMax(0.0);
  for (Index j = 0; j < c.cols(); ++j) {
    const double s = c.col(j).sum();
    if (s > 0.0) {
      c.col(j) /= s;
    } else {
      c.col(j).setConstant(1.0 / static_cast<double>(c.rows()));
    }
  }
  return c;
}

Matrix forward(const FeedForwardNet& net, const Matrix& x) {
  const Matrix z = layer_output(net, net.depth(), x);
  Matrix out = activate(net.layers.back().activation, z);
  if (net.renormalize_output) out = renormalize_columns(out);
  return out;
}

Matrix jacobian_at(const FeedForwardNet& net, Index k, const Vector& xbar) {
  check_input(net, xbar, "jacobian_at");
  check_layer_index(net, k, "jacobian_at");
  Vector h = xbar;
  Matrix j = Matrix::Identity(xbar.size(), xbar.size());
  for (Index i = 0; i < k; ++i) {
    const DenseLayer& l = net.layers[static_cast<std::size_t>(i)];
    const Vector z = l.weight * h + l.bias;
    j = l.weight * j;
    if (i + 1 == k) break;
    j = activate_derivative(l.activation, z).col(0).asDiagonal() * j;
    h = activate(l.activation, z);
  }
  return j;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("TrainConfig: learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw InvalidArgument("TrainConfig: bad Adam parameters");
}

double rmse(const Matrix& prediction, const Matrix& target) {
  require_same_shape(prediction, target, "rmse");
  return std::sqrt((prediction - target).squaredNorm() / static_cast<double>(prediction.size()));
}

namespace {

struct Moments {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
};

// Backpropagates the RMSE of one minibatch; returns gradients per layer.
void batch_gradients(const FeedForwardNet& net, const Matrix& x, const Matrix& y, std::vector<Matrix>& gw,
                     std::vector<Vector>& gb) {
  const std::size_t depth = net.layers.size();
  std::vector<Matrix> inputs(depth), pre(depth);
  Matrix h = x;
  for (std::size_t i = 0; i < depth; ++i) {
    inputs[i] = h;
    pre[i] = net.layers[i].weight * h;
    pre[i].colwise() += net.layers[i].bias;
    h = activate(net.layers[i].activation, pre[i]);
  }
  Matrix out = net.renormalize_output ? renormalize_columns(h) : h;
  const double count = static_cast<double>(out.size());
  const double loss = std::sqrt((out - y).squaredNorm() / count);
  Matrix delta;
  if (loss == 0.0) {
    delta = Matrix::Zero(out.rows(), out.cols());
  } else {
    delta = (out - y) / (count * loss);
  }
  if (net.renormalize_output) {
    // o = c / sum(c), c = max(h, 0): dL/dc = (g - (g . o)) / sum(c).
    for (Index j = 0; j < h.cols(); ++j) {
      const Vector c = h.col(j).cwiseMax(0.0);
      const double s = c.sum();
      if (s <= 0.0) {
        delta.col(j).setZero();
        continue;
      }
      const double go = delta.col(j).dot(out.col(j));
      Vector d = (delta.col(j).array() - go).matrix() / s;
      for (Index i = 0; i < h.rows(); ++i)
        if (h(i, j) <= 0.0) d(i) = 0.0;
      delta.col(j) = d;
    }
  }
  for (std::size_t ii = depth; ii-- > 0;) {
    delta = delta.cwiseProduct(activate_derivative(net.layers[ii].activation, pre[ii]));
    gw[ii] = delta * inputs[ii].transpose();
    gb[ii] = delta.rowwise().sum();
    if (ii > 0) delta = net.layers[ii].weight.transpose() * delta;
  }
}

}  // namespace

TrainResult train(const FeedForwardNet& net, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  if (inputs.cols() != targets.cols()) throw InvalidArgument("train: inputs and targets differ in sample count");
  if (inputs.rows() != net.input_dim()) throw InvalidArgument("train: input dimension mismatch");
  if (targets.rows() != net.output_dim()) throw InvalidArgument("train: target dimension mismatch");
  require_finite(inputs, "train: inputs");
  require_finite(targets, "train: targets");

  TrainResult result;
  result.net = net;
  FeedForwardNet& w = result.net;
  const std::size_t depth = w.layers.size();
  const Index n = inputs.cols();
  result.initial_loss = rmse(forward(w, inputs), targets);

  Moments mom;
  for (const DenseLayer& l : w.layers) {
    mom.mw.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    mom.vw.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    mom.mb.push_back(Vector::Zero(l.bias.size()));
    mom.vb.push_back(Vector::Zero(l.bias.size()));
  }
  std::vector<Matrix> gw(depth);
  std::vector<Vector> gb(depth);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, n - start);
      Matrix xb(inputs.rows(), len), yb(targets.rows(), len);
      for (Index j = 0; j < len; ++j) {
        xb.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);
        yb.col(j) = targets.col(order[static_cast<std::size_t>(start + j)]);
      }
      batch_gradients(w, xb, yb, gw, gb);
      ++step;
      for (std::size_t i = 0; i < depth; ++i) {
        DenseLayer& l = w.layers[i];
        if (cfg.optimizer == Optimizer::kSgd) {
          l.weight -= cfg.learning_rate * gw[i];
          if (cfg.train_biases) l.bias -= cfg.learning_rate * gb[i];
          continue;
        }
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        mom.mw[i] = cfg.beta1 * mom.mw[i] + (1.0 - cfg.beta1) * gw[i];
        mom.vw[i] = cfg.beta2 * mom.vw[i] + (1.0 - cfg.beta2) * gw[i].cwiseAbs2();
        l.weight.array() -= cfg.learning_rate * (mom.mw[i].array() / c1) /
                            ((mom.vw[i].array() / c2).sqrt() + cfg.epsilon);
        if (cfg.train_biases) {
          mom.mb[i] = cfg.beta1 * mom.mb[i] + (1.0 - cfg.beta1) * gb[i];
          mom.vb[i] = cfg.beta2 * mom.vb[i] + (1.0 - cfg.beta2) * gb[i].cwiseAbs2();
          l.bias.array() -= cfg.learning_rate * (mom.mb[i].array() / c1) /
                            ((mom.vb[i].array() / c2).sqrt() + cfg.epsilon);
        }
      }
    }
    const double loss = rmse(forward(w, inputs), targets);
    result.loss.push_back(loss);
    if (!std::isfinite(loss)) {
      result.diverged = true;
      result.diverged_epoch = epoch;
      break;
    }
  }
  return result;
}

Matrix circulant_from_filter(const Vector& w, Index m) {
  if (m < 1) throw InvalidArgument("circulant_from_filter: m must be >= 1");
  if (w.size() < 1 || w.size() > m) throw InvalidArgument("circulant_from_filter: filter length must be in 1..m");
  Vector row = Vector::Zero(m);
  row.head(w.size()) = w;
  Matrix c(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) c(i, j) = row(((j - i) % m + m) % m);
  return c;
}

}  // namespace descramble
