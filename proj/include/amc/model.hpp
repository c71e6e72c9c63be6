#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amc/autograd.hpp"
#include "amc/ops.hpp"
#include <json.hpp>

namespace amc {

enum class Preset { cifar_net, mnist_net };

Preset parse_preset(const std::string& s);
std::string to_string(Preset p);

enum class LayerKind { gaussian_noise, conv, maxpool, dropout, global_avg_pool, dense };

/// One row of an architecture table. `conv` rows expand to
/// conv -> batch norm -> leaky ReLU; `dense` uses `channels` as its output width.
struct LayerSpec {
  LayerKind kind;
  std::size_t channels = 0;
  std::size_t kernel = 0;
  Padding padding = Padding::same;
  double alpha = 0.0;
  double rate = 0.0;
  double sigma = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  std::string name;
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::vector<LayerSpec> layers;
  std::size_t embed_dim = 0;
  std::size_t num_classes = 0;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Preset layer table. The width of the last 1x1 conv is the embedding dimension.
ArchitectureSpec make_spec(Preset preset, std::size_t embed_dim, std::size_t num_classes);

/// Shape after each layer for a batch of `batch` images; throws ShapeError or
/// ConfigError when the table is inconsistent.
std::vector<Shape> infer_shapes(const ArchitectureSpec& spec, std::size_t batch);

/// Full consistency check: layer wiring, embed_dim equals the width feeding the
/// global average pool, dense width equals num_classes, presets keep their
/// documented GAP window (6x6 for cifar_net, 5x5 for mnist_net).
void validate(const ArchitectureSpec& spec);

nlohmann::json to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const nlohmann::json& j);

class Model {
 public:
  /// He-normal conv/dense weights, zero dense bias, gamma=1, beta=0.
  Model(ArchitectureSpec spec, std::uint64_t seed);

  static Model build(Preset preset, std::size_t embed_dim, std::size_t num_classes,
                     std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ArchitectureSpec& spec() const { return spec_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::vector<BatchNormState>& bn_states() { return bn_; }
  const std::vector<BatchNormState>& bn_states() const { return bn_; }

  Parameter& param(const std::string& name);
  std::size_t num_weights() const;
  void zero_grad();

 private:
  ArchitectureSpec spec_;
  std::vector<Parameter> params_;
  std::vector<BatchNormState> bn_;
};

struct ForwardResult {
  Var features;    // global-average-pool output, N x embed_dim
  Var logits;      // N x num_classes
  Var final_conv;  // activation of the last conv block (the GAP input)
  std::vector<Shape> trace;  // shape after every layer
};

/// One pass through the network. `rng` drives noise and dropout in train mode.
ForwardResult forward(Model& model, Tape& tape, Var images, Mode mode, Rng& rng);

struct Prediction {
  Tensor features;
  Tensor logits;
};

/// Eval-mode features and logits for a stack of images, processed in batches.
Prediction predict(Model& model, const Tensor& images, std::size_t batch = 250);

/// Binary checkpoint; layout documented in docs/checkpoint_format.md.
void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata);

struct Checkpoint {
  Model model;
  nlohmann::json metadata;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace amc
