#include "netspec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace cennforge {

using nlohmann::json;

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::Pool: return "pool";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

LayerKind kind_from(const std::string& s, const std::string& layer) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "pool") return LayerKind::Pool;
  if (s == "fc") return LayerKind::Fc;
  throw parse_error("layer '" + layer + "': unknown kind '" + s + "'");
}

std::string pool_name(PoolKind k) {
  switch (k) {
    case PoolKind::MaxLinear: return "max_linear";
    case PoolKind::Avg: return "avg";
    case PoolKind::Nonlinear: return "nonlinear";
  }
  return "?";
}

PoolKind pool_from(const std::string& s, const std::string& layer) {
  if (s == "max_linear") return PoolKind::MaxLinear;
  if (s == "avg") return PoolKind::Avg;
  if (s == "nonlinear") return PoolKind::Nonlinear;
  throw parse_error("layer '" + layer + "': unknown pool_kind '" + s + "'");
}

}  // namespace

bool LayerSpec::has_weights() const {
  switch (kind) {
    case LayerKind::Conv:
      return kernels.size() == static_cast<size_t>(in_maps) * out_maps &&
             biases.size() == static_cast<size_t>(out_maps);
    case LayerKind::Fc:
      return !fc_weights.empty();
    default:
      return true;
  }
}

void NetworkSpec::validate() {
  if (input_shape.rows <= 0 || input_shape.cols <= 0)
    throw shape_error("network '" + name + "': input shape must be positive");
  if (input_maps <= 0) throw shape_error("network '" + name + "': input_maps must be positive");
  if (layers.empty()) throw shape_error("network '" + name + "': no layers");
  if (class_count <= 0) throw shape_error("network '" + name + "': class_count must be positive");

  int maps = input_maps;
  Shape2 shape = input_shape;
  for (size_t i = 0; i < layers.size(); ++i) {
    LayerSpec& l = layers[i];
    if (l.name.empty()) l.name = kind_name(l.kind) + std::to_string(i);
    l.in_shape = shape;
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.in_maps == 0) l.in_maps = maps;
        if (l.in_maps != maps)
          throw shape_error("layer '" + l.name + "': expects " + std::to_string(l.in_maps) +
                            " input maps, previous layer provides " + std::to_string(maps));
        if (l.out_maps <= 0)
          throw shape_error("layer '" + l.name + "': out_maps must be positive");
        if (!l.kernels.empty() &&
            l.kernels.size() != static_cast<size_t>(l.in_maps) * l.out_maps)
          throw shape_error("layer '" + l.name + "': kernel tensor has " +
                            std::to_string(l.kernels.size()) + " kernels, expected " +
                            std::to_string(l.in_maps * l.out_maps));
        if (!l.biases.empty() && l.biases.size() != static_cast<size_t>(l.out_maps))
          throw shape_error("layer '" + l.name + "': bias vector has " +
                            std::to_string(l.biases.size()) + " entries, expected " +
                            std::to_string(l.out_maps));
        maps = l.out_maps;
        l.out_shape = shape;
        break;
      case LayerKind::Relu:
        l.in_maps = l.out_maps = maps;
        l.out_shape = shape;
        break;
      case LayerKind::Pool:
        l.in_maps = l.out_maps = maps;
        if (l.pool_kind == PoolKind::Avg && l.pool_window != 2 && l.pool_window != 3)
          throw shape_error("layer '" + l.name + "': average pooling window must be 2 or 3");
        if (l.downsample) {
          if (shape.rows < 2 || shape.cols < 2)
            throw shape_error("layer '" + l.name + "': map " + std::to_string(shape.rows) + "x" +
                              std::to_string(shape.cols) + " too small to downsample");
          shape = Shape2{shape.rows / 2, shape.cols / 2};
        }
        l.out_shape = shape;
        break;
      case LayerKind::Fc:
        if (i + 1 != layers.size())
          throw shape_error("layer '" + l.name + "': fc layers may only appear last");
        l.in_maps = maps;
        if (l.out_maps <= 0) l.out_maps = class_count;
        if (!l.fc_weights.empty()) {
          size_t expect = static_cast<size_t>(l.out_maps) * maps * shape.rows * shape.cols;
          if (l.fc_weights.size() != expect)
            throw shape_error("layer '" + l.name + "': fc weight matrix has " +
                              std::to_string(l.fc_weights.size()) + " entries, expected " +
                              std::to_string(expect));
        }
        maps = l.out_maps;
        l.out_shape = Shape2{1, 1};
        shape = l.out_shape;
        break;
    }
    for (const Mat3& k : l.kernels)
      for (auto& row : k)
        for (double v : row)
          if (!std::isfinite(v))
            throw parse_error("layer '" + l.name + "': non-finite kernel value");
    for (double v : l.biases)
      if (!std::isfinite(v)) throw parse_error("layer '" + l.name + "': non-finite bias");
    for (double v : l.fc_weights)
      if (!std::isfinite(v)) throw parse_error("layer '" + l.name + "': non-finite fc weight");
    if (l.precision != 32 && (l.precision < 2 || l.precision > 16))
      throw parse_error("layer '" + l.name + "': precision must be 32 or in [2, 16]");
  }
  if (maps != class_count)
    throw shape_error("network '" + name + "': final layer produces " + std::to_string(maps) +
                      " outputs, class_count is " + std::to_string(class_count));
}

bool NetworkSpec::has_fc() const {
  return !layers.empty() && layers.back().kind == LayerKind::Fc;
}

const LayerSpec* NetworkSpec::final_fc() const {
  return has_fc() ? &layers.back() : nullptr;
}

int NetworkSpec::fc_input_features() const {
  const LayerSpec* fc = final_fc();
  if (!fc) return 0;
  return fc->in_maps * fc->in_shape.rows * fc->in_shape.cols;
}

// --- JSON + blob ------------------------------------------------------------

namespace {

constexpr char kFormatTag[] = "cennforge-network-v1";
constexpr uint64_t kBlobMagic = 0x43464E5742313031ULL;  // "CFNWB101"

void write_u64(std::ofstream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw parse_error("weights blob truncated: " + path);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ofstream& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64(out, v);
}

double read_f64(std::ifstream& in, const std::string& path) {
  uint64_t v = read_u64(in, path);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

size_t weight_count(const NetworkSpec& net) {
  size_t n = 0;
  for (const LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::Conv)
      n += static_cast<size_t>(l.in_maps) * l.out_maps * 9 + l.out_maps;
    else if (l.kind == LayerKind::Fc)
      n += static_cast<size_t>(l.out_maps) * l.in_maps * l.in_shape.rows * l.in_shape.cols;
  }
  return n;
}

}  // namespace

void save_weights(const NetworkSpec& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write weights blob: " + path);
  write_u64(out, kBlobMagic);
  write_u64(out, weight_count(net));
  for (const LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::Conv) {
      if (!l.has_weights())
        throw invalid_argument_error("save_weights: layer '" + l.name + "' has no weights");
      for (int o = 0; o < l.out_maps; ++o)
        for (int i = 0; i < l.in_maps; ++i)
          for (const auto& row : l.kernel(o, i))
            for (double v : row) write_f64(out, v);
      for (double v : l.biases) write_f64(out, v);
    } else if (l.kind == LayerKind::Fc) {
      if (!l.has_weights())
        throw invalid_argument_error("save_weights: layer '" + l.name + "' has no weights");
      for (double v : l.fc_weights) write_f64(out, v);
    }
  }
}

void load_weights(const std::string& path, NetworkSpec& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open weights blob: " + path);
  if (read_u64(in, path) != kBlobMagic)
    throw parse_error("weights blob has wrong magic: " + path);
  size_t expect = weight_count(net);
  size_t have = read_u64(in, path);
  if (have != expect)
    throw shape_error("weights blob " + path + " holds " + std::to_string(have) +
                      " values, network '" + net.name + "' needs " + std::to_string(expect));
  for (LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::Conv) {
      l.kernels.assign(static_cast<size_t>(l.in_maps) * l.out_maps, kZeros3);
      l.biases.assign(l.out_maps, 0.0);
      for (int o = 0; o < l.out_maps; ++o)
        for (int i = 0; i < l.in_maps; ++i)
          for (auto& row : l.kernel(o, i))
            for (double& v : row) v = read_f64(in, path);
      for (double& v : l.biases) v = read_f64(in, path);
    } else if (l.kind == LayerKind::Fc) {
      size_t n = static_cast<size_t>(l.out_maps) * l.in_maps * l.in_shape.rows * l.in_shape.cols;
      l.fc_weights.resize(n);
      for (double& v : l.fc_weights) v = read_f64(in, path);
    }
  }
  net.validate();
}

void save_network(const NetworkSpec& net, const std::string& json_path,
                  const std::string& blob_path) {
  json j;
  j["format"] = kFormatTag;
  j["name"] = net.name;
  j["input_shape"] = {net.input_shape.rows, net.input_shape.cols};
  j["input_maps"] = net.input_maps;
  j["class_count"] = net.class_count;
  json layers = json::array();
  for (const LayerSpec& l : net.layers) {
    json jl;
    jl["name"] = l.name;
    jl["kind"] = kind_name(l.kind);
    if (l.precision != 32) jl["precision"] = l.precision;
    if (l.kind == LayerKind::Conv) jl["out_maps"] = l.out_maps;
    if (l.kind == LayerKind::Relu && l.relu_nonlinear) jl["nonlinear"] = true;
    if (l.kind == LayerKind::Pool) {
      jl["pool_kind"] = pool_name(l.pool_kind);
      jl["downsample"] = l.downsample;
      if (l.pool_kind == PoolKind::Avg) jl["window"] = l.pool_window;
      if (l.pool_kind == PoolKind::Nonlinear) jl["t_max"] = l.nonlinear_t_max;
    }
    if (l.kind == LayerKind::Fc) jl["outputs"] = l.out_maps;
    layers.push_back(jl);
  }
  j["layers"] = layers;
  if (!blob_path.empty()) {
    // reference by basename; loader resolves it next to the json file
    auto slash = blob_path.find_last_of('/');
    j["weights_blob"] = (slash == std::string::npos) ? blob_path : blob_path.substr(slash + 1);
  }
  std::ofstream out(json_path);
  if (!out) throw io_error("cannot write network file: " + json_path);
  out << j.dump(2) << "\n";
  if (!blob_path.empty()) save_weights(net, blob_path);
}

NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open network file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw parse_error("network file " + path + ": " + e.what());
  }
  try {
    if (j.value("format", "") != kFormatTag)
      throw parse_error("network file " + path + ": missing or unknown format tag");
    NetworkSpec net;
    net.name = j.value("name", "unnamed");
    auto shp = j.at("input_shape");
    net.input_shape = Shape2{shp.at(0).get<int>(), shp.at(1).get<int>()};
    net.input_maps = j.value("input_maps", 1);
    net.class_count = j.at("class_count").get<int>();
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.name = jl.value("name", "");
      l.kind = kind_from(jl.at("kind").get<std::string>(), l.name);
      l.precision = jl.value("precision", 32);
      if (l.kind == LayerKind::Conv) {
        l.out_maps = jl.at("out_maps").get<int>();
        if (jl.contains("kernel_size")) {
          int ks = jl.at("kernel_size").get<int>();
          if (ks != 3)
            throw shape_error("layer '" + l.name + "': " + std::to_string(ks) + "x" +
                              std::to_string(ks) + " kernels are not supported (radius-1 only)");
        }
      }
      if (l.kind == LayerKind::Relu) l.relu_nonlinear = jl.value("nonlinear", false);
      if (l.kind == LayerKind::Pool) {
        l.pool_kind = pool_from(jl.value("pool_kind", "max_linear"), l.name);
        l.downsample = jl.value("downsample", false);
        l.pool_window = jl.value("window", l.downsample ? 2 : 3);
        l.nonlinear_t_max = jl.value("t_max", 25.0);
      }
      if (l.kind == LayerKind::Fc) l.out_maps = jl.value("outputs", 0);
      net.layers.push_back(std::move(l));
    }
    net.validate();
    if (j.contains("weights_blob")) {
      std::string blob = j.at("weights_blob").get<std::string>();
      if (!blob.empty() && blob[0] != '/') {
        auto slash = path.find_last_of('/');
        if (slash != std::string::npos) blob = path.substr(0, slash + 1) + blob;
      }
      load_weights(blob, net);
    }
    return net;
  } catch (const json::exception& e) {
    throw parse_error("network file " + path + ": " + e.what());
  }
}

// --- IDX --------------------------------------------------------------------

namespace {

uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw parse_error("IDX file truncated: " + path);
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | b[3];
}

}  // namespace

double idx_normalize(uint8_t byte) { return byte / 127.5 - 1.0; }

uint8_t idx_denormalize(double v) {
  double p = (v + 1.0) * 127.5;
  long r = std::lround(p);
  return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw io_error("cannot open IDX image file: " + images_path);
  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw io_error("cannot open IDX label file: " + labels_path);

  if (read_u32_be(imgs, images_path) != 0x00000803u)
    throw parse_error("IDX image file has wrong magic (want 0x00000803): " + images_path);
  uint32_t n = read_u32_be(imgs, images_path);
  uint32_t rows = read_u32_be(imgs, images_path);
  uint32_t cols = read_u32_be(imgs, images_path);

  if (read_u32_be(lbls, labels_path) != 0x00000801u)
    throw parse_error("IDX label file has wrong magic (want 0x00000801): " + labels_path);
  uint32_t nl = read_u32_be(lbls, labels_path);
  if (n != nl)
    throw parse_error("IDX image/label counts differ: " + std::to_string(n) + " vs " +
                      std::to_string(nl));

  Dataset ds;
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (uint32_t i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!imgs) throw parse_error("IDX image file truncated: " + images_path);
    Grid g(static_cast<int>(rows), static_cast<int>(cols));
    for (size_t k = 0; k < buf.size(); ++k) g.data()[k] = idx_normalize(buf[k]);
    ds.images.push_back(std::move(g));
    int lb = lbls.get();
    if (lb == EOF) throw parse_error("IDX label file truncated: " + labels_path);
    ds.labels.push_back(lb);
  }
  return ds;
}

// --- presets ----------------------------------------------------------------

namespace {

LayerSpec conv_layer(const std::string& name, int out_maps, int precision) {
  LayerSpec l;
  l.name = name;
  l.kind = LayerKind::Conv;
  l.out_maps = out_maps;
  l.precision = precision;
  return l;
}

LayerSpec relu_layer(const std::string& name, int precision) {
  LayerSpec l;
  l.name = name;
  l.kind = LayerKind::Relu;
  l.precision = precision;
  return l;
}

LayerSpec pool_layer(const std::string& name, bool downsample, int precision) {
  LayerSpec l;
  l.name = name;
  l.kind = LayerKind::Pool;
  l.pool_kind = PoolKind::MaxLinear;
  l.downsample = downsample;
  l.pool_window = downsample ? 2 : 3;
  l.precision = precision;
  return l;
}

NetworkSpec mnist_design1() {
  NetworkSpec n;
  n.name = "mnist_design1";
  n.input_shape = {28, 28};
  n.input_maps = 1;
  n.class_count = 10;
  n.layers = {conv_layer("conv1", 4, 4), relu_layer("relu1", 4), pool_layer("pool1", false, 4),
              conv_layer("conv2", 4, 4), relu_layer("relu2", 4), pool_layer("pool2", false, 4)};
  LayerSpec fc;
  fc.name = "fc";
  fc.kind = LayerKind::Fc;
  fc.out_maps = 10;
  fc.precision = 4;
  n.layers.push_back(fc);
  n.validate();
  return n;
}

NetworkSpec mnist_design2() {
  NetworkSpec n;
  n.name = "mnist_design2";
  n.input_shape = {28, 28};
  n.input_maps = 1;
  n.class_count = 10;
  n.layers = {conv_layer("conv1", 4, 4),  relu_layer("relu1", 4), pool_layer("pool1", true, 4),
              conv_layer("conv2", 4, 4),  relu_layer("relu2", 4), pool_layer("pool2", true, 4),
              conv_layer("conv3", 4, 4),  relu_layer("relu3", 4), pool_layer("pool3", true, 4),
              conv_layer("conv4", 10, 4)};
  n.validate();
  return n;
}

NetworkSpec cifar_alexnet(const std::string& name, const std::vector<int>& widths) {
  NetworkSpec n;
  n.name = name;
  n.input_shape = {32, 32};
  n.input_maps = 3;
  n.class_count = 10;
  // AlexNet-style: pooling (no downsampling) after conv 1, 2 and 5; a final
  // 10-map conv supplies the class scores in place of an fc layer.
  n.layers.push_back(conv_layer("conv1", widths[0], 4));
  n.layers.push_back(relu_layer("relu1", 4));
  n.layers.push_back(pool_layer("pool1", false, 4));
  n.layers.push_back(conv_layer("conv2", widths[1], 4));
  n.layers.push_back(relu_layer("relu2", 4));
  n.layers.push_back(pool_layer("pool2", false, 4));
  n.layers.push_back(conv_layer("conv3", widths[2], 4));
  n.layers.push_back(relu_layer("relu3", 4));
  n.layers.push_back(conv_layer("conv4", widths[3], 4));
  n.layers.push_back(relu_layer("relu4", 4));
  n.layers.push_back(conv_layer("conv5", widths[4], 4));
  n.layers.push_back(relu_layer("relu5", 4));
  n.layers.push_back(pool_layer("pool5", false, 4));
  n.layers.push_back(conv_layer("conv6", 10, 4));
  n.validate();
  return n;
}

}  // namespace

NetworkSpec network_preset(const std::string& name) {
  if (name == "mnist_design1") return mnist_design1();
  if (name == "mnist_design2") return mnist_design2();
  if (name == "cifar_alexnet_c96") return cifar_alexnet(name, {96, 256, 384, 384, 256});
  if (name == "cifar_alexnet_c64w") return cifar_alexnet(name, {64, 128, 256, 256, 128});
  if (name == "cifar_alexnet_c64") return cifar_alexnet(name, {64, 128, 128, 128, 64});
  throw invalid_argument_error("unknown network preset: " + name);
}

std::vector<std::string> network_preset_names() {
  return {"mnist_design1", "mnist_design2", "cifar_alexnet_c96", "cifar_alexnet_c64w",
          "cifar_alexnet_c64"};
}

void randomize_weights(NetworkSpec& net, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (LayerSpec& l : net.layers) {
    if (l.kind == LayerKind::Conv) {
      double r = 1.0 / std::sqrt(9.0 * l.in_maps);
      std::uniform_real_distribution<double> dist(-r, r);
      l.kernels.assign(static_cast<size_t>(l.in_maps) * l.out_maps, kZeros3);
      l.biases.assign(l.out_maps, 0.0);
      for (auto& k : l.kernels)
        for (auto& row : k)
          for (double& v : row) v = dist(rng);
      for (double& v : l.biases) v = dist(rng);
    } else if (l.kind == LayerKind::Fc) {
      size_t in_features =
          static_cast<size_t>(l.in_maps) * l.in_shape.rows * l.in_shape.cols;
      double r = 1.0 / std::sqrt(static_cast<double>(in_features));
      std::uniform_real_distribution<double> dist(-r, r);
      l.fc_weights.resize(static_cast<size_t>(l.out_maps) * in_features);
      for (double& v : l.fc_weights) v = dist(rng);
    }
  }
}

}  // namespace cennforge
