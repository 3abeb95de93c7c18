#include "descramble/network.hpp"

#include <json.hpp>

#include <fstream>

namespace descramble {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string layer_file(std::size_t i) { return "layer_" + std::to_string(i + 1) + ".bin"; }

}  // namespace

void save_net(const FeedForwardNet& net, const fs::path& dir) {
  net.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = kNetFormatVersion;
  manifest["renormalize_output"] = net.renormalize_output;
  manifest["layers"] = json::array();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const DenseLayer& l = net.layers[i];
    Matrix packed(l.weight.rows(), l.weight.cols() + 1);
    packed.leftCols(l.weight.cols()) = l.weight;
    packed.col(l.weight.cols()) = l.bias;
    write_matrix_bin(packed, dir / layer_file(i));
    manifest["layers"].push_back({{"in", l.weight.cols()},
                                  {"out", l.weight.rows()},
                                  {"activation", to_string(l.activation)},
                                  {"file", layer_file(i)}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw FormatError("save_net: cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

FeedForwardNet load_net(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw FormatError("load_net: cannot open " + mpath.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("load_net: malformed manifest " + mpath.string() + ": " + e.what());
  }
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kNetFormatVersion)
      throw FormatError("load_net: unsupported format version " + std::to_string(version));
    FeedForwardNet net;
    net.renormalize_output = manifest.at("renormalize_output").get<bool>();
    const json& layers = manifest.at("layers");
    if (!layers.is_array() || layers.empty()) throw FormatError("load_net: manifest lists no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const json& spec = layers[i];
      const Index in_dim = spec.at("in").get<Index>();
      const Index out_dim = spec.at("out").get<Index>();
      const std::string name = "layer " + std::to_string(i + 1);
      Matrix packed;
      try {
        packed = read_matrix_bin(dir / spec.at("file").get<std::string>());
      } catch (const FormatError& e) {
        throw FormatError("load_net: " + name + ": " + e.what());
      }
      if (packed.rows() != out_dim || packed.cols() != in_dim + 1)
        throw FormatError("load_net: " + name + " is " + std::to_string(packed.rows()) + "x" +
                          std::to_string(packed.cols()) + ", manifest says " + std::to_string(out_dim) + "x" +
                          std::to_string(in_dim + 1));
      if (i > 0 && in_dim != net.layers.back().weight.rows())
        throw FormatError("load_net: " + name + " input does not match previous layer output");
      DenseLayer l;
      l.weight = packed.leftCols(in_dim);
      l.bias = packed.col(in_dim);
      l.activation = parse_activation(spec.at("activation").get<std::string>());
      net.layers.push_back(std::move(l));
    }
    return net;
  } catch (const json::exception& e) {
    throw FormatError("load_net: bad manifest " + mpath.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("load_net: ") + e.what());
  }
}

}  // namespace descramble
