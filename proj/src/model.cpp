#include "amc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace amc {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'M', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::gaussian_noise: return "gaussian_noise";
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::gaussian_noise, LayerKind::conv, LayerKind::maxpool,
                 LayerKind::dropout, LayerKind::global_avg_pool, LayerKind::dense})
    if (layer_kind_name(k) == s) return k;
  throw ConfigError("unknown layer kind '" + s + "'");
}

LayerSpec noise(double sigma) { return {.kind = LayerKind::gaussian_noise, .sigma = sigma}; }
LayerSpec conv(std::size_t ch, std::size_t k, Padding pad) {
  return {.kind = LayerKind::conv, .channels = ch, .kernel = k, .padding = pad, .alpha = 0.1};
}
LayerSpec pool() { return {.kind = LayerKind::maxpool}; }
LayerSpec drop(double rate) { return {.kind = LayerKind::dropout, .rate = rate}; }
LayerSpec gap() { return {.kind = LayerKind::global_avg_pool}; }
LayerSpec fc(std::size_t out) { return {.kind = LayerKind::dense, .channels = out}; }

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint truncated");
  return v;
}

}  // namespace

Preset parse_preset(const std::string& s) {
  if (s == "cifar_net") return Preset::cifar_net;
  if (s == "mnist_net") return Preset::mnist_net;
  throw ConfigError("unknown preset '" + s + "' (expected cifar_net or mnist_net)");
}

std::string to_string(Preset p) { return p == Preset::cifar_net ? "cifar_net" : "mnist_net"; }

ArchitectureSpec make_spec(Preset preset, std::size_t embed_dim, std::size_t num_classes) {
  if (embed_dim != 2 && embed_dim != 3 && embed_dim != 128)
    throw ConfigError("embed_dim must be 2, 3 or 128, got " + std::to_string(embed_dim));
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  ArchitectureSpec s;
  s.name = to_string(preset);
  s.embed_dim = embed_dim;
  s.num_classes = num_classes;
  if (preset == Preset::cifar_net) {
    s.in_channels = 3;
    s.in_height = s.in_width = 32;
    s.layers = {noise(0.15),
                conv(128, 3, Padding::same), conv(128, 3, Padding::same), conv(128, 3, Padding::same),
                pool(), drop(0.5),
                conv(256, 3, Padding::same), conv(256, 3, Padding::same), conv(256, 3, Padding::same),
                pool(), drop(0.5),
                conv(512, 3, Padding::valid), conv(256, 1, Padding::same),
                conv(embed_dim, 1, Padding::same),
                gap(), fc(num_classes)};
  } else {
    s.in_channels = 1;
    s.in_height = s.in_width = 28;
    s.layers = {noise(0.15),
                conv(64, 3, Padding::same), pool(), drop(0.5),
                conv(64, 3, Padding::same), pool(), drop(0.5),
                conv(128, 3, Padding::valid), conv(embed_dim, 1, Padding::same),
                gap(), fc(num_classes)};
  }
  validate(s);
  return s;
}

std::vector<Shape> infer_shapes(const ArchitectureSpec& spec, std::size_t batch) {
  if (spec.in_channels == 0 || spec.in_height == 0 || spec.in_width == 0)
    throw ConfigError("architecture input dims must be positive");
  std::vector<Shape> out;
  Shape cur{batch, spec.in_channels, spec.in_height, spec.in_width};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    const bool spatial = cur.size() == 4;
    switch (l.kind) {
      case LayerKind::gaussian_noise:
      case LayerKind::dropout:
        break;
      case LayerKind::conv: {
        if (!spatial) throw ShapeError(where + ": needs NCHW input");
        if (l.kernel != 1 && l.kernel != 3) throw ConfigError(where + ": kernel must be 1 or 3");
        if (l.channels == 0) throw ConfigError(where + ": channels must be positive");
        const std::size_t shrink = l.padding == Padding::valid ? l.kernel - 1 : 0;
        if (cur[2] <= shrink || cur[3] <= shrink) throw ShapeError(where + ": input too small");
        cur = {batch, l.channels, cur[2] - shrink, cur[3] - shrink};
        break;
      }
      case LayerKind::maxpool:
        if (!spatial || cur[2] % 2 || cur[3] % 2)
          throw ShapeError(where + ": needs even spatial dims, got " + to_string(cur));
        cur = {batch, cur[1], cur[2] / 2, cur[3] / 2};
        break;
      case LayerKind::global_avg_pool:
        if (!spatial) throw ShapeError(where + ": needs NCHW input");
        cur = {batch, cur[1]};
        break;
      case LayerKind::dense:
        if (spatial) throw ShapeError(where + ": needs flat input");
        if (l.channels == 0) throw ConfigError(where + ": width must be positive");
        cur = {batch, l.channels};
        break;
    }
    out.push_back(cur);
  }
  return out;
}

void validate(const ArchitectureSpec& spec) {
  const auto shapes = infer_shapes(spec, 1);
  const auto& layers = spec.layers;
  if (layers.size() < 3 || layers.back().kind != LayerKind::dense ||
      layers[layers.size() - 2].kind != LayerKind::global_avg_pool)
    throw ConfigError("architecture must end with global_avg_pool -> dense");
  for (std::size_t i = 0; i + 2 < layers.size(); ++i)
    if (layers[i].kind == LayerKind::global_avg_pool || layers[i].kind == LayerKind::dense)
      throw ConfigError("global_avg_pool/dense may only appear at the end");
  const Shape& gap_in = shapes[layers.size() - 3];
  if (gap_in.size() != 4) throw ConfigError("global_avg_pool must follow a conv block");
  if (gap_in[1] != spec.embed_dim)
    throw ConfigError("embed_dim " + std::to_string(spec.embed_dim) +
                      " is inconsistent with the final conv width " + std::to_string(gap_in[1]));
  if (layers.back().channels != spec.num_classes)
    throw ConfigError("dense width does not match num_classes");
  const std::size_t expected_window =
      spec.name == "cifar_net" ? 6 : spec.name == "mnist_net" ? 5 : 0;
  if (expected_window && (gap_in[2] != expected_window || gap_in[3] != expected_window))
    throw ConfigError(spec.name + ": global average pool window must be " +
                      std::to_string(expected_window) + "x" + std::to_string(expected_window) +
                      ", got " + std::to_string(gap_in[2]) + "x" + std::to_string(gap_in[3]));
}

nlohmann::json to_json(const ArchitectureSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers)
    layers.push_back({{"kind", layer_kind_name(l.kind)},
                      {"channels", l.channels},
                      {"kernel", l.kernel},
                      {"padding", l.padding == Padding::same ? "same" : "valid"},
                      {"alpha", l.alpha},
                      {"rate", l.rate},
                      {"sigma", l.sigma}});
  return {{"name", spec.name},
          {"input", {spec.in_channels, spec.in_height, spec.in_width}},
          {"layers", layers},
          {"embed_dim", spec.embed_dim},
          {"num_classes", spec.num_classes}};
}

ArchitectureSpec spec_from_json(const nlohmann::json& j) {
  try {
    ArchitectureSpec s;
    s.name = j.at("name").get<std::string>();
    const auto& in = j.at("input");
    s.in_channels = in.at(0).get<std::size_t>();
    s.in_height = in.at(1).get<std::size_t>();
    s.in_width = in.at(2).get<std::size_t>();
    for (const auto& l : j.at("layers")) {
      LayerSpec ls{.kind = parse_layer_kind(l.at("kind").get<std::string>())};
      ls.channels = l.at("channels").get<std::size_t>();
      ls.kernel = l.at("kernel").get<std::size_t>();
      ls.padding = l.at("padding").get<std::string>() == "valid" ? Padding::valid : Padding::same;
      ls.alpha = l.at("alpha").get<double>();
      ls.rate = l.at("rate").get<double>();
      ls.sigma = l.at("sigma").get<double>();
      s.layers.push_back(ls);
    }
    s.embed_dim = j.at("embed_dim").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed architecture description: ") + e.what());
  }
}

Model::Model(ArchitectureSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  Rng rng(derive_seed(seed, {0x1417}));
  std::size_t channels = spec_.in_channels;
  std::size_t conv_index = 0;
  // Count parameters first so the vector never reallocates (tapes keep pointers).
  std::size_t n_params = 0;
  for (const auto& l : spec_.layers)
    n_params += l.kind == LayerKind::conv ? 3 : l.kind == LayerKind::dense ? 2 : 0;
  params_.reserve(n_params);
  auto he_normal = [&rng](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) v = std_dev * rng.normal();
    return t;
  };
  for (const auto& l : spec_.layers) {
    if (l.kind == LayerKind::conv) {
      ++conv_index;
      const std::string id = std::to_string(conv_index);
      params_.emplace_back("conv" + id + ".weight",
                           he_normal({l.channels, channels, l.kernel, l.kernel},
                                     channels * l.kernel * l.kernel));
      params_.emplace_back("bn" + id + ".gamma", Tensor(Shape{l.channels}, 1.0));
      params_.emplace_back("bn" + id + ".beta", Tensor(Shape{l.channels}, 0.0));
      bn_.emplace_back(l.channels);
      channels = l.channels;
    } else if (l.kind == LayerKind::dense) {
      params_.emplace_back("fc.weight", he_normal({channels, l.channels}, channels));
      params_.emplace_back("fc.bias", Tensor(Shape{l.channels}, 0.0));
      channels = l.channels;
    }
  }
}

Model Model::build(Preset preset, std::size_t embed_dim, std::size_t num_classes,
                   std::uint64_t seed) {
  return Model(make_spec(preset, embed_dim, num_classes), seed);
}

Parameter& Model::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named '" + name + "'");
}

std::size_t Model::num_weights() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Model::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ForwardResult forward(Model& model, Tape& tape, Var images, Mode mode, Rng& rng) {
  const ArchitectureSpec& spec = model.spec();
  const Shape& in = images.shape();
  if (in.size() != 4 || in[1] != spec.in_channels || in[2] != spec.in_height ||
      in[3] != spec.in_width)
    throw ShapeError(spec.name + ": expected images [N," + std::to_string(spec.in_channels) + "," +
                     std::to_string(spec.in_height) + "," + std::to_string(spec.in_width) +
                     "], got " + to_string(in));
  ForwardResult out;
  auto& params = model.params();
  auto& bn = model.bn_states();
  std::size_t p = 0, b = 0;
  Var h = images;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::gaussian_noise:
        h = ops::gaussian_noise(h, l.sigma, mode, rng);
        break;
      case LayerKind::conv: {
        Var w = tape.parameter(params[p]);
        Var gamma = tape.parameter(params[p + 1]);
        Var beta = tape.parameter(params[p + 2]);
        p += 3;
        h = ops::conv2d(h, w, std::nullopt, l.padding);
        h = ops::batch_norm(h, gamma, beta, bn[b++], mode);
        h = ops::leaky_relu(h, l.alpha);
        out.final_conv = h;
        break;
      }
      case LayerKind::maxpool:
        h = ops::maxpool2x2(h);
        break;
      case LayerKind::dropout:
        h = ops::dropout(h, l.rate, mode, rng);
        break;
      case LayerKind::global_avg_pool:
        h = ops::global_avg_pool(h);
        out.features = h;
        break;
      case LayerKind::dense: {
        Var w = tape.parameter(params[p]);
        Var bias = tape.parameter(params[p + 1]);
        p += 2;
        h = ops::dense(h, w, bias);
        out.logits = h;
        break;
      }
    }
    out.trace.push_back(h.shape());
  }
  return out;
}

Prediction predict(Model& model, const Tensor& images, std::size_t batch) {
  require_rank(images, 4, "predict");
  const std::size_t n = images.dim(0);
  Prediction out;
  out.features = Tensor(Shape{n, model.spec().embed_dim});
  out.logits = Tensor(Shape{n, model.spec().num_classes});
  Rng unused(0);
  for (std::size_t b0 = 0; b0 < n; b0 += batch) {
    const std::size_t b1 = std::min(n, b0 + batch);
    Tape tape;
    Var x = tape.constant(images.slice_rows(b0, b1));
    ForwardResult r = forward(model, tape, x, Mode::eval, unused);
    const Tensor& f = r.features.value();
    const Tensor& l = r.logits.value();
    std::memcpy(out.features.ptr() + b0 * f.dim(1), f.ptr(), f.size() * sizeof(double));
    std::memcpy(out.logits.ptr() + b0 * l.dim(1), l.ptr(), l.size() * sizeof(double));
  }
  return out;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata) {
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<const Tensor*> payload;
  auto add = [&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}});
    payload.push_back(&t);
  };
  for (const auto& p : model.params()) add(p.name, p.value);
  for (std::size_t i = 0; i < model.bn_states().size(); ++i) {
    const auto& s = model.bn_states()[i];
    add("bn" + std::to_string(i + 1) + ".running_mean", s.running_mean);
    add("bn" + std::to_string(i + 1) + ".running_var", s.running_var);
  }
  const nlohmann::json header = {{"format", "amc-checkpoint"},
                                 {"version", kCheckpointVersion},
                                 {"spec", to_json(model.spec())},
                                 {"tensors", tensors},
                                 {"metadata", metadata}};
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor* t : payload)
    os.write(reinterpret_cast<const char*>(t->ptr()),
             static_cast<std::streamsize>(t->size() * sizeof(double)));
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError(path.string() + " is not an AMC checkpoint");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw DataError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  Checkpoint ck{Model(spec_from_json(header.at("spec")), 0), header.value("metadata", nlohmann::json::object())};

  auto target = [&](const std::string& name) -> Tensor& {
    for (auto& p : ck.model.params())
      if (p.name == name) return p.value;
    for (std::size_t i = 0; i < ck.model.bn_states().size(); ++i) {
      auto& s = ck.model.bn_states()[i];
      const std::string prefix = "bn" + std::to_string(i + 1) + ".";
      if (name == prefix + "running_mean") return s.running_mean;
      if (name == prefix + "running_var") return s.running_var;
    }
    throw DataError("checkpoint tensor '" + name + "' does not match the architecture");
  };
  std::size_t loaded = 0;
  for (const auto& entry : header.at("tensors")) {
    Tensor& t = target(entry.at("name").get<std::string>());
    if (entry.at("shape").get<Shape>() != t.shape())
      throw DataError("checkpoint tensor '" + entry.at("name").get<std::string>() +
                      "' has the wrong shape");
    is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint truncated");
    ++loaded;
  }
  if (loaded != ck.model.params().size() + 2 * ck.model.bn_states().size())
    throw DataError("checkpoint is missing tensors");
  return ck;
}

}  // namespace amc
