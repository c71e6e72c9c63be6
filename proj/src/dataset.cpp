#include "amc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "amc/losses.hpp"
#include "amc/rng.hpp"

namespace amc {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 2051;
constexpr std::uint32_t kIdxLabelsMagic = 2049;
constexpr std::size_t kCifarPixels = 3 * 32 * 32;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t to_byte(double v) {
  if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
    throw DataError("only raw 0..255 integer pixels can be encoded");
  return static_cast<std::uint8_t>(v);
}

}  // namespace

Preprocessing parse_preprocessing(const std::string& s) {
  if (s == "raw") return Preprocessing::raw;
  if (s == "unit_range") return Preprocessing::unit_range;
  if (s == "standardize") return Preprocessing::standardize;
  throw ConfigError("unknown preprocessing '" + s + "' (expected unit_range or standardize)");
}

std::string to_string(Preprocessing p) {
  switch (p) {
    case Preprocessing::raw: return "raw";
    case Preprocessing::unit_range: return "unit_range";
    case Preprocessing::standardize: return "standardize";
  }
  return "?";
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes(std::filesystem::file_size(path));
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw DataError("failed reading " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, Split split) {
  const auto img = read_bytes(images_path);
  const auto lab = read_bytes(labels_path);
  if (img.size() < 16) throw DataError(images_path.string() + ": truncated IDX header");
  if (lab.size() < 8) throw DataError(labels_path.string() + ": truncated IDX header");
  if (read_be32(img, 0) != kIdxImagesMagic)
    throw DataError(images_path.string() + ": bad magic " + std::to_string(read_be32(img, 0)) +
                    " (expected 2051)");
  if (read_be32(lab, 0) != kIdxLabelsMagic)
    throw DataError(labels_path.string() + ": bad magic " + std::to_string(read_be32(lab, 0)) +
                    " (expected 2049)");
  const std::size_t n = read_be32(img, 4), rows = read_be32(img, 8), cols = read_be32(img, 12);
  const std::size_t n_labels = read_be32(lab, 4);
  if (n != n_labels)
    throw DataError("image count " + std::to_string(n) + " does not match label count " +
                    std::to_string(n_labels));
  if (n == 0 || rows == 0 || cols == 0) throw DataError(images_path.string() + ": empty IDX file");
  if (img.size() < 16 + n * rows * cols) throw DataError(images_path.string() + ": truncated");
  if (lab.size() < 8 + n) throw DataError(labels_path.string() + ": truncated");

  Dataset d;
  d.name = "mnist";
  d.split = split;
  d.num_classes = 10;
  d.images = Tensor(Shape{n, 1, rows, cols});
  std::transform(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(n * rows * cols),
                 d.images.ptr(), [](std::uint8_t v) { return static_cast<double>(v); });
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = lab[8 + i];
    if (d.labels[i] > 9) throw DataError(labels_path.string() + ": label out of range");
  }
  return d;
}

Dataset load_cifar_bin(const std::vector<std::filesystem::path>& paths, CifarVariant variant,
                       Split split) {
  if (paths.empty()) throw DataError("load_cifar_bin: no files given");
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + kCifarPixels;
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t n = 0;
  for (const auto& p : paths) {
    files.push_back(read_bytes(p));
    if (files.back().empty() || files.back().size() % record != 0)
      throw DataError(p.string() + ": size " + std::to_string(files.back().size()) +
                      " is not a multiple of the " + std::to_string(record) + "-byte record");
    n += files.back().size() / record;
  }
  Dataset d;
  d.name = variant == CifarVariant::cifar10 ? "cifar10" : "cifar100";
  d.split = split;
  d.num_classes = variant == CifarVariant::cifar10 ? 10 : 20;
  d.images = Tensor(Shape{n, 3, 32, 32});
  d.labels.reserve(n);
  std::size_t i = 0;
  for (const auto& bytes : files) {
    for (std::size_t off = 0; off < bytes.size(); off += record, ++i) {
      const int label = bytes[off];
      if (static_cast<std::size_t>(label) >= d.num_classes)
        throw DataError(d.name + ": label " + std::to_string(label) + " out of range");
      d.labels.push_back(label);
      if (variant == CifarVariant::cifar100_coarse) d.fine_labels.push_back(bytes[off + 1]);
      std::transform(bytes.begin() + static_cast<std::ptrdiff_t>(off + label_bytes),
                     bytes.begin() + static_cast<std::ptrdiff_t>(off + record),
                     d.images.ptr() + i * kCifarPixels,
                     [](std::uint8_t v) { return static_cast<double>(v); });
    }
  }
  return d;
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& raw) {
  const auto& s = raw.images.shape();
  if (s.size() != 4 || s[1] != 1) throw ShapeError("IDX images must be N x 1 x H x W");
  std::vector<std::uint8_t> out;
  out.reserve(16 + raw.images.size());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(s[0]));
  put_be32(out, static_cast<std::uint32_t>(s[2]));
  put_be32(out, static_cast<std::uint32_t>(s[3]));
  for (double v : raw.images.data()) out.push_back(to_byte(v));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& raw) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(raw.labels.size()));
  for (int l : raw.labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

std::vector<std::uint8_t> encode_cifar_bin(const Dataset& raw, CifarVariant variant) {
  if (raw.images.shape() != Shape{raw.size(), 3, 32, 32})
    throw ShapeError("CIFAR images must be N x 3 x 32 x 32");
  const bool coarse = variant == CifarVariant::cifar100_coarse;
  if (coarse && raw.fine_labels.size() != raw.size())
    throw DataError("cifar100 encoding needs fine labels");
  std::vector<std::uint8_t> out;
  out.reserve(raw.size() * (kCifarPixels + 2));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(raw.labels[i]));
    if (coarse) out.push_back(static_cast<std::uint8_t>(raw.fine_labels[i]));
    for (std::size_t p = 0; p < kCifarPixels; ++p)
      out.push_back(to_byte(raw.images[i * kCifarPixels + p]));
  }
  return out;
}

ChannelStats channel_stats(const Dataset& raw) {
  const auto& s = raw.images.shape();
  const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  ChannelStats st{std::vector<double>(c), std::vector<double>(c)};
  const double count = static_cast<double>(n * hw);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p) sum += raw.images[(i * c + ch) * hw + p];
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < hw; ++p) {
        const double d = raw.images[(i * c + ch) * hw + p] - mean;
        ss += d * d;
      }
    st.mean[ch] = mean;
    st.std[ch] = std::sqrt(ss / count);
  }
  return st;
}

Dataset normalize_images(const Dataset& raw, Preprocessing scheme, const ChannelStats& stats) {
  if (raw.preprocessing != Preprocessing::raw)
    throw ConfigError("normalize_images expects raw pixel values");
  Dataset out = raw;
  out.preprocessing = scheme;
  if (scheme == Preprocessing::unit_range) {
    out.images.scale_(1.0 / 255.0);
  } else if (scheme == Preprocessing::standardize) {
    const auto& s = raw.images.shape();
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
    if (stats.mean.size() != c || stats.std.size() != c)
      throw ConfigError("standardisation statistics have the wrong channel count");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double sd = stats.std[ch] > 0.0 ? stats.std[ch] : 1.0;
        double* p = out.images.ptr() + (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) p[k] = (p[k] - stats.mean[ch]) / sd;
      }
  }
  return out;
}

void normalize_splits(Dataset& train, Dataset& test, Preprocessing scheme) {
  const ChannelStats stats = channel_stats(train);
  train = normalize_images(train, scheme, stats);
  test = normalize_images(test, scheme, stats);
}

Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > data.size())
    throw ConfigError("subset size " + std::to_string(n) + " not in [1, " +
                      std::to_string(data.size()) + "]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5b5e7}));
  rng.shuffle(idx);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.name = data.name;
  out.split = data.split;
  out.num_classes = data.num_classes;
  out.preprocessing = data.preprocessing;
  out.images = data.images.gather_rows(idx);
  for (auto i : idx) {
    out.labels.push_back(data.labels[i]);
    if (!data.fine_labels.empty()) out.fine_labels.push_back(data.fine_labels[i]);
  }
  return out;
}

BatchPlan::BatchPlan(std::size_t num_samples, std::size_t batch_size, std::uint64_t seed)
    : num_samples_(num_samples), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (num_samples < batch_size)
    throw ConfigError("dataset of " + std::to_string(num_samples) +
                      " samples is smaller than one batch of " + std::to_string(batch_size));
}

std::vector<std::size_t> BatchPlan::permutation(std::size_t epoch) const {
  std::vector<std::size_t> p(num_samples_);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, {0xba7c4, epoch}));
  rng.shuffle(p);
  return p;
}

std::vector<std::vector<std::size_t>> BatchPlan::batches(std::size_t epoch) const {
  const auto p = permutation(epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < batches_per_epoch(); ++b)
    out.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(b * batch_size_),
                     p.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size_));
  return out;
}

std::size_t export_embeddings(Model& model, const Dataset& data, const std::filesystem::path& path,
                              bool normalized) {
  const Prediction pred = predict(model, data.images);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  const std::size_t p = pred.features.dim(1);
  os << "index,label";
  for (std::size_t k = 1; k <= p; ++k) os << ",f" << k;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> row = pred.features.row(i);
    if (normalized) {
      const UnitFeature z = normalize(row);
      row.assign(z.values().begin(), z.values().end());
    }
    os << i << ',' << data.labels[i];
    for (double v : row) os << ',' << v;
    os << '\n';
  }
  if (!os) throw DataError("failed writing " + path.string());
  return data.size();
}

}  // namespace amc
