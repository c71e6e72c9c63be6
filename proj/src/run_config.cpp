#include "amc/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace amc {

namespace {

const std::set<std::string> kDatasets = {"mnist", "cifar10", "cifar100"};

// Looks for `file` directly in `dir`, then in each conventional subdirectory.
std::filesystem::path locate(const std::filesystem::path& dir, const std::string& file,
                             std::initializer_list<const char*> subdirs) {
  if (std::filesystem::exists(dir / file)) return dir / file;
  for (const char* sub : subdirs)
    if (std::filesystem::exists(dir / sub / file)) return dir / sub / file;
  throw DataError("cannot find " + file + " under " + dir.string());
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"data_dir", resolved_data_dir(c).string()},
          {"preset", to_string(resolved_preset(c))},
          {"loss", to_string(c.loss)},
          {"lambda", c.lambda},
          {"margin_g", c.margin_g},
          {"margin_e", c.margin_e},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"seed", c.seed},
          {"embed_dim", c.embed_dim},
          {"rampup", c.rampup},
          {"rampdown", c.rampdown},
          {"preprocessing", to_string(c.preprocessing)},
          {"train_subset", c.train_subset},
          {"test_subset", c.test_subset},
          {"subset_seed", c.subset_seed},
          {"fp32", c.fp32},
          {"out", c.out}};
}

RunConfig merge_json(const RunConfig& base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = base;
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "dataset") c.dataset = field<std::string>(j, k);
    else if (key == "data_dir") c.data_dir = field<std::string>(j, k);
    else if (key == "preset") c.preset = field<std::string>(j, k);
    else if (key == "loss") c.loss = parse_loss_mode(field<std::string>(j, k));
    else if (key == "lambda") c.lambda = field<double>(j, k);
    else if (key == "margin_g") c.margin_g = field<double>(j, k);
    else if (key == "margin_e") c.margin_e = field<double>(j, k);
    else if (key == "epochs") c.epochs = field<int>(j, k);
    else if (key == "batch_size") c.batch_size = field<std::size_t>(j, k);
    else if (key == "lr") c.lr = field<double>(j, k);
    else if (key == "seed") c.seed = field<std::uint64_t>(j, k);
    else if (key == "embed_dim") c.embed_dim = field<std::size_t>(j, k);
    else if (key == "rampup") c.rampup = field<int>(j, k);
    else if (key == "rampdown") c.rampdown = field<int>(j, k);
    else if (key == "preprocessing") c.preprocessing = parse_preprocessing(field<std::string>(j, k));
    else if (key == "train_subset") c.train_subset = field<std::size_t>(j, k);
    else if (key == "test_subset") c.test_subset = field<std::size_t>(j, k);
    else if (key == "subset_seed") c.subset_seed = field<std::uint64_t>(j, k);
    else if (key == "fp32") c.fp32 = field<bool>(j, k);
    else if (key == "out") c.out = field<std::string>(j, k);
    else throw ConfigError("unknown config field '" + key + "'");
  }
  return c;
}

RunConfig load_config_file(const RunConfig& base, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  try {
    return merge_json(base, nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate(const RunConfig& c) {
  if (!kDatasets.count(c.dataset))
    throw ConfigError("dataset: '" + c.dataset + "' is not one of mnist, cifar10, cifar100");
  const Preset preset = resolved_preset(c);
  if ((preset == Preset::mnist_net) != (c.dataset == "mnist"))
    throw ConfigError("preset: " + to_string(preset) + " does not take " + c.dataset + " images");
  if (c.embed_dim != 2 && c.embed_dim != 3 && c.embed_dim != 128)
    throw ConfigError("embed_dim: must be 2, 3 or 128, got " + std::to_string(c.embed_dim));
  if (c.batch_size < 2) throw ConfigError("batch_size: must be at least 2");
  if (c.train_subset != 0 && c.train_subset < c.batch_size)
    throw ConfigError("train_subset: smaller than one batch");
  validate(loss_config(c));
  validate(schedule_config(c));
}

Preset resolved_preset(const RunConfig& c) {
  if (!c.preset.empty()) return parse_preset(c.preset);
  return c.dataset == "mnist" ? Preset::mnist_net : Preset::cifar_net;
}

std::filesystem::path resolved_data_dir(const RunConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return "data";
}

std::size_t num_classes_for(const std::string& dataset) {
  if (dataset == "mnist" || dataset == "cifar10") return 10;
  if (dataset == "cifar100") return 20;
  throw ConfigError("dataset: unknown '" + dataset + "'");
}

LossConfig loss_config(const RunConfig& c) {
  LossConfig l;
  l.mode = c.loss;
  l.lambda = c.lambda;
  l.margin_g = c.margin_g;
  l.margin_e = c.margin_e;
  return l;
}

ScheduleConfig schedule_config(const RunConfig& c) {
  ScheduleConfig s;
  s.total_epochs = c.epochs;
  s.rampup_len = c.rampup;
  s.rampdown_len = c.rampdown;
  s.max_lr = c.lr;
  return s;
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& c) {
  const std::filesystem::path dir = resolved_data_dir(c);
  Dataset train, test;
  if (c.dataset == "mnist") {
    auto f = [&](const char* name) { return locate(dir, name, {"mnist"}); };
    train = load_mnist_idx(f("train-images-idx3-ubyte"), f("train-labels-idx1-ubyte"), Split::train);
    test = load_mnist_idx(f("t10k-images-idx3-ubyte"), f("t10k-labels-idx1-ubyte"), Split::test);
  } else if (c.dataset == "cifar10") {
    auto f = [&](const std::string& name) {
      return locate(dir, name, {"cifar-10-batches-bin", "cifar10"});
    };
    std::vector<std::filesystem::path> batches;
    for (int i = 1; i <= 5; ++i) batches.push_back(f("data_batch_" + std::to_string(i) + ".bin"));
    train = load_cifar_bin(batches, CifarVariant::cifar10, Split::train);
    test = load_cifar_bin({f("test_batch.bin")}, CifarVariant::cifar10, Split::test);
  } else if (c.dataset == "cifar100") {
    auto f = [&](const char* name) { return locate(dir, name, {"cifar-100-binary", "cifar100"}); };
    train = load_cifar_bin({f("train.bin")}, CifarVariant::cifar100_coarse, Split::train);
    test = load_cifar_bin({f("test.bin")}, CifarVariant::cifar100_coarse, Split::test);
  } else {
    throw ConfigError("dataset: unknown '" + c.dataset + "'");
  }
  // Subsets ignore the run seed so repeated runs differ only in training randomness.
  if (c.train_subset) train = subset(train, c.train_subset, c.subset_seed);
  if (c.test_subset) test = subset(test, c.test_subset, c.subset_seed + 1);
  normalize_splits(train, test, c.preprocessing);
  return {std::move(train), std::move(test)};
}

}  // namespace amc
