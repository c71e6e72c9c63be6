#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amc/model.hpp"
#include "amc/tensor.hpp"

namespace amc {

enum class Split { train, test };
enum class CifarVariant { cifar10, cifar100_coarse };
enum class Preprocessing { raw, unit_range, standardize };

Preprocessing parse_preprocessing(const std::string& s);
std::string to_string(Preprocessing p);
std::string to_string(Split s);

/// Images as N x C x H x W doubles plus integer labels. Immutable once loaded.
struct Dataset {
  std::string name;
  Split split = Split::train;
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Preprocessing preprocessing = Preprocessing::raw;
  /// CIFAR-100 fine labels, kept only so records can be re-encoded byte-exactly.
  std::vector<int> fine_labels;

  std::size_t size() const { return labels.size(); }
};

/// IDX pair (magic 2051 images, 2049 labels). Pixels are returned as raw 0..255 values.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, Split split);

/// CIFAR binary batches. cifar10 records: label byte + 3072 pixel bytes (R, G, B planes);
/// cifar100 records: coarse byte + fine byte + 3072 pixel bytes, coarse label kept.
Dataset load_cifar_bin(const std::vector<std::filesystem::path>& paths, CifarVariant variant,
                       Split split);

/// Inverse of the loaders for raw (un-normalised) datasets.
std::vector<std::uint8_t> encode_idx_images(const Dataset& raw);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& raw);
std::vector<std::uint8_t> encode_cifar_bin(const Dataset& raw, CifarVariant variant);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Per-channel mean and (population) standard deviation.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

ChannelStats channel_stats(const Dataset& raw);

/// unit_range divides by 255; standardize applies (x - mean) / std with `stats`
/// (which must come from the train split).
Dataset normalize_images(const Dataset& raw, Preprocessing scheme, const ChannelStats& stats);

/// Normalises both splits, taking standardisation statistics from `train`.
void normalize_splits(Dataset& train, Dataset& test, Preprocessing scheme);

/// `n` samples drawn without replacement with a seeded shuffle, kept in dataset order.
Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed);

/// Per-epoch seeded permutations split into full mini-batches (the partial tail is dropped).
class BatchPlan {
 public:
  BatchPlan(std::size_t num_samples, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> permutation(std::size_t epoch) const;
  std::vector<std::vector<std::size_t>> batches(std::size_t epoch) const;
  std::size_t batches_per_epoch() const { return num_samples_ / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::size_t num_samples_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

/// Writes `index,label,f1..fp` rows of eval-mode penultimate features; unit-norm rows
/// when `normalized`. Returns the row count.
std::size_t export_embeddings(Model& model, const Dataset& data, const std::filesystem::path& path,
                              bool normalized);

}  // namespace amc
