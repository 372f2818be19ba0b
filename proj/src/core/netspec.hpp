#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cenn.hpp"
#include "grid.hpp"

namespace cennforge {

enum class LayerKind : uint8_t { Conv, Relu, Pool, Fc };
enum class PoolKind : uint8_t { MaxLinear, Avg, Nonlinear };

struct Shape2 {
  int rows = 0;
  int cols = 0;
  bool operator==(const Shape2&) const = default;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int in_maps = 0;
  int out_maps = 0;
  Shape2 in_shape{};   // derived by chaining
  Shape2 out_shape{};  // derived by chaining
  int precision = 32;  // Nb bits; 32 means float (no quantization annotation)

  // conv
  std::vector<Mat3> kernels;  // [out][in] flattened out-major
  std::vector<double> biases; // [out]

  // relu: single-step nonlinear-template variant instead of the two shifts
  bool relu_nonlinear = false;

  // pool
  PoolKind pool_kind = PoolKind::MaxLinear;
  bool downsample = false;
  int pool_window = 3;          // 2 or 3, average pooling
  double nonlinear_t_max = 25.0;

  // fc: weights[out][in], in = in_maps * in_shape cells, map-major row-major
  std::vector<double> fc_weights;

  const Mat3& kernel(int out, int in) const { return kernels[static_cast<size_t>(out) * in_maps + in]; }
  Mat3& kernel(int out, int in) { return kernels[static_cast<size_t>(out) * in_maps + in]; }
  bool has_weights() const;
};

struct NetworkSpec {
  std::string name;
  Shape2 input_shape{};
  int input_maps = 1;
  int class_count = 0;
  std::vector<LayerSpec> layers;

  // Recomputes the shape chain and checks every invariant; throws a
  // shape/parse error naming the offending layer.
  void validate();

  bool has_fc() const;
  const LayerSpec* final_fc() const;
  int fc_input_features() const;  // 0 when no fc layer
};

struct Dataset {
  std::vector<Grid> images;   // pixels in [-1, 1]
  std::vector<int> labels;
  int class_count = 10;
};

// --- file formats -----------------------------------------------------------

// JSON network description (layers, shapes, precision) with an optional
// sibling weights blob. See FORMATS.md.
NetworkSpec load_network(const std::string& path);
void save_network(const NetworkSpec& net, const std::string& json_path,
                  const std::string& blob_path = "");

// Flat little-endian float64 tensor blob in layer order.
void load_weights(const std::string& path, NetworkSpec& net);
void save_weights(const NetworkSpec& net, const std::string& path);

// IDX image/label pair (the public MNIST convention). Bytes are mapped
// affinely: p/127.5 - 1.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path);

double idx_normalize(uint8_t byte);
uint8_t idx_denormalize(double v);

// --- shipped topologies -----------------------------------------------------

// mnist_design1, mnist_design2, cifar_alexnet_{c96,c64w,c64}
NetworkSpec network_preset(const std::string& name);
std::vector<std::string> network_preset_names();

// Uniform random weights in [-r, r], r = 1/sqrt(9 * in_maps) for conv and
// 1/sqrt(in_features) for fc. Deterministic in the seed.
void randomize_weights(NetworkSpec& net, uint64_t seed);

}  // namespace cennforge
