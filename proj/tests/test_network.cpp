#include "descramble/network.hpp"
#include "descramble/linalg.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace descramble;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  auto dir = fs::temp_directory_path() / "descramble_tests" / name;
  fs::remove_all(dir);
  return dir;
}

FeedForwardNet random_net(const NetArch& arch, std::uint64_t seed) {
  FeedForwardNet net = init_net(arch, seed);
  Rng rng = substream(seed, 77);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& l : net.layers)
    for (Index i = 0; i < l.bias.size(); ++i) l.bias(i) = nd(rng);
  return net;
}

}  // namespace

TEST_CASE("initialization") {
  const FeedForwardNet lin = init_net({{4, 3}, {Activation::kIdentity}, false}, 1);
  CHECK(lin.depth() == 1);
  CHECK(lin.layers[0].weight.rows() == 3);
  CHECK(lin.layers[0].weight.cols() == 4);
  CHECK(lin.layers[0].bias.norm() == 0.0);

  const NetArch deer{{256, 80, 256}, {Activation::kTanh, Activation::kSigmoid}, true};
  const FeedForwardNet a = init_net(deer, 5), b = init_net(deer, 5);
  CHECK((a.layers[0].weight - b.layers[0].weight).norm() == 0.0);
  const Matrix& w = a.layers[0].weight;
  const double sd = std::sqrt((w.array() - w.mean()).square().mean());
  const double expect = std::sqrt(6.0 / (256 + 80)) / std::sqrt(3.0);
  CHECK(std::abs(sd - expect) / expect < 0.1);

  const FeedForwardNet relu = init_net({{128, 32, 2}, {Activation::kRelu, Activation::kIdentity}, false}, 2);
  const Matrix& r = relu.layers[0].weight;
  CHECK(std::abs(std::sqrt(r.array().square().mean()) - std::sqrt(2.0 / 128)) / std::sqrt(2.0 / 128) < 0.1);
  CHECK_THROWS_AS(init_net({{4, 3}, {}, false}, 1), InvalidArgument);
  CHECK(parse_activation("tanh") == Activation::kTanh);
  CHECK_THROWS_AS(parse_activation("gelu"), InvalidArgument);
}

TEST_CASE("layer taps and forward pass") {
  const FeedForwardNet one = init_net({{5, 3}, {Activation::kTanh}, false}, 3);
  Rng rng = substream(3, 1);
  const Matrix x = gaussian_matrix(5, 7, rng);
  CHECK((layer_output(one, 1, x) - one.layers[0].weight * x).norm() == 0.0);

  const FeedForwardNet lin = init_net({{5, 4, 3, 2}, {Activation::kIdentity, Activation::kIdentity, Activation::kIdentity}, false}, 4);
  const Matrix prod = lin.layers[2].weight * lin.layers[1].weight * lin.layers[0].weight;
  CHECK((layer_output(lin, 3, x) - prod * x).norm() < 1e-12);

  const NetArch arch{{6, 5, 4}, {Activation::kTanh, Activation::kSigmoid}, false};
  const FeedForwardNet net = random_net(arch, 8);
  const Matrix x6 = gaussian_matrix(6, 4, rng);
  std::vector<oracle::Mat> w;
  std::vector<oracle::Vec> b;
  for (const auto& l : net.layers) {
    w.push_back(l.weight);
    b.push_back(l.bias);
  }
  const std::vector<std::function<double(double)>> act = {[](double z) { return std::tanh(z); }};
  for (Index j = 0; j < 4; ++j)
    CHECK((layer_output(net, 2, x6).col(j) - oracle::dense_forward(w, b, act, x6.col(j), 2)).norm() < 1e-13);

  const FeedForwardNet ident = random_net({{3, 2}, {Activation::kIdentity}, false}, 9);
  const Matrix x3 = gaussian_matrix(3, 5, rng);
  CHECK((forward(ident, x3) - ((ident.layers[0].weight * x3).colwise() + ident.layers[0].bias)).norm() < 1e-14);

  const FeedForwardNet deer = init_net({{256, 80, 256}, {Activation::kTanh, Activation::kSigmoid}, true}, 10);
  const Matrix out = forward(deer, gaussian_matrix(256, 6, rng));
  CHECK(out.allFinite());
  CHECK(out.minCoeff() >= 0.0);
  CHECK(out.maxCoeff() <= 1.0);
  CHECK((out.colwise().sum().array() - 1).abs().maxCoeff() < 1e-12);

  Matrix neg(2, 2);
  neg << -1, 0, -2, 0;
  const Matrix rn = renormalize_columns(neg);
  CHECK((rn.array() - 0.5).abs().maxCoeff() == 0.0);
}

TEST_CASE("Jacobian of a layer tap") {
  const FeedForwardNet lin = init_net({{4, 3, 2}, {Activation::kIdentity, Activation::kIdentity}, false}, 1);
  const Matrix prod = lin.layers[1].weight * lin.layers[0].weight;
  CHECK((jacobian_at(lin, 2, Vector::Zero(4)) - prod).norm() < 1e-14);
  CHECK((jacobian_at(lin, 2, Vector::Constant(4, 3.0)) - prod).norm() < 1e-14);

  const FeedForwardNet t = init_net({{4, 3, 2}, {Activation::kTanh, Activation::kIdentity}, false}, 2);
  CHECK((jacobian_at(t, 2, Vector::Zero(4)) - t.layers[1].weight * t.layers[0].weight).norm() < 1e-14);

  const NetArch arch{{5, 6, 4, 3}, {Activation::kTanh, Activation::kTanh, Activation::kTanh}, false};
  const FeedForwardNet net = random_net(arch, 3);
  Rng rng = substream(3, 2);
  const Vector x = gaussian_matrix(5, 1, rng).col(0);
  auto f = [&](const oracle::Vec& v) { return oracle::Vec(layer_output(net, 3, v).col(0)); };
  const Matrix num = oracle::numeric_jacobian(f, x, 1e-6 * std::max(1.0, x.norm()));
  const Matrix ana = jacobian_at(net, 3, x);
  CHECK((num - ana).cwiseAbs().maxCoeff() / ana.cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("training") {
  Rng rng = substream(21, 0);
  const Matrix a = gaussian_matrix(3, 4, rng);
  const Matrix x = gaussian_matrix(4, 512, rng);
  const Matrix y = a * x;
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.seed = 4;
  const TrainResult r = train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x, y, cfg);
  CHECK((r.net.layers[0].weight - a).norm() / a.norm() <= 1e-2);  // Adam jitters at the scale of lr

  TrainConfig fine = cfg;
  fine.learning_rate = 1e-4;
  fine.epochs = 200;
  const TrainResult exact = train(r.net, x, y, fine);
  CHECK((exact.net.layers[0].weight - a).norm() / a.norm() <= 1e-3);
  CHECK(r.loss.back() < r.initial_loss);
  CHECK_FALSE(r.diverged);

  TrainConfig frozen = cfg;
  frozen.epochs = 5;
  frozen.learning_rate = 0.0;
  const TrainResult z = train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x, y, frozen);
  for (double l : z.loss) CHECK(l == z.initial_loss);

  TrainConfig sgd = cfg;
  sgd.optimizer = Optimizer::kSgd;
  sgd.epochs = 3;
  const TrainResult s1 = train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x, y, sgd);
  const TrainResult s2 = train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x, y, sgd);
  CHECK(s1.loss == s2.loss);
  CHECK(s1.loss.back() < s1.initial_loss);

  TrainConfig wild = cfg;
  wild.optimizer = Optimizer::kSgd;
  wild.learning_rate = 1e3;
  wild.epochs = 20;
  // squared residuals overflow at this scale
  const TrainResult d = train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x * 1e200, y * 1e200, wild);
  CHECK(d.diverged);
  CHECK(d.diverged_epoch >= 0);
  CHECK(d.loss.size() == static_cast<std::size_t>(d.diverged_epoch) + 1);

  CHECK_THROWS_AS(train(init_net({{4, 3}, {Activation::kIdentity}, false}, 6), x, y.topRows(2), cfg), InvalidArgument);
  CHECK(rmse(Matrix::Ones(2, 2), Matrix::Zero(2, 2)) == doctest::Approx(1.0));
}

TEST_CASE("circulant layers") {
  CHECK((circulant_from_filter(Vector::Ones(1), 3) - Matrix::Identity(3, 3)).norm() == 0.0);
  Vector shift = Vector::Zero(2);
  shift(1) = 1;
  const Matrix p = circulant_from_filter(shift, 3);
  Matrix expect(3, 3);
  expect << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  CHECK((p - expect).norm() == 0.0);
  Vector sym = Vector::Zero(8);
  sym << 2, 1, 0, 0, 0, 0, 0, 1;
  const Matrix c = circulant_from_filter(sym, 8);
  CHECK((c - c.transpose()).norm() == 0.0);
}

TEST_CASE("network persistence") {
  const NetArch arch{{6, 5, 4, 3}, {Activation::kTanh, Activation::kRelu, Activation::kSigmoid}, true};
  const FeedForwardNet net = random_net(arch, 31);
  const fs::path dir = tmp("net_roundtrip");
  save_net(net, dir);
  const FeedForwardNet back = load_net(dir);
  REQUIRE(back.depth() == 3);
  CHECK(back.renormalize_output);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = net.layers[i];
    const auto& b = back.layers[i];
    CHECK(a.activation == b.activation);
    CHECK(std::memcmp(a.weight.data(), b.weight.data(), sizeof(double) * a.weight.size()) == 0);
    CHECK(std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * a.bias.size()) == 0);
  }

  const fs::path cut = tmp("net_truncated");
  save_net(net, cut);
  const fs::path layer = cut / "layer_2.bin";
  fs::resize_file(layer, fs::file_size(layer) - 8);
  try {
    load_net(cut);
    FAIL("expected a load error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }

  const fs::path bad = tmp("net_bad_manifest");
  save_net(net, bad);
  nlohmann::json m;
  {
    std::ifstream in(bad / "manifest.json");
    in >> m;
  }
  m["layers"][1]["in"] = 7;
  std::ofstream(bad / "manifest.json") << m.dump();
  CHECK_THROWS_AS(load_net(bad), FormatError);

  m["layers"][1]["in"] = 5;
  m["format_version"] = 99;
  std::ofstream(bad / "manifest.json") << m.dump();
  CHECK_THROWS_AS(load_net(bad), FormatError);
}
