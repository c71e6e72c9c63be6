#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include <json.hpp>

#include "amc/dataset.hpp"
#include "amc/losses.hpp"
#include "amc/model.hpp"
#include "amc/trainer.hpp"

namespace amc {

/// Everything needed to reproduce a run. Persisted verbatim into every artifact.
struct RunConfig {
  std::string dataset = "mnist";  // mnist | cifar10 | cifar100
  std::string data_dir;           // empty: $AMC_DATA_DIR, then ./data
  std::string preset;             // empty: mnist_net for mnist, cifar_net otherwise
  LossMode loss = LossMode::amc;
  double lambda = 0.1;
  double margin_g = 0.5;
  double margin_e = 1.0;
  int epochs = 300;
  std::size_t batch_size = 128;
  double lr = 0.003;
  std::uint64_t seed = 1;
  std::size_t embed_dim = 128;
  int rampup = 80;
  int rampdown = 50;
  Preprocessing preprocessing = Preprocessing::standardize;
  std::size_t train_subset = 0;  // 0 keeps the full split
  std::size_t test_subset = 0;
  /// Subsets are drawn independently of the run seed so every seed sees the same data.
  std::uint64_t subset_seed = 17;
  bool fp32 = false;
  std::string out = "runs/latest";
};

inline constexpr const char* kDataDirEnv = "AMC_DATA_DIR";

nlohmann::json to_json(const RunConfig& c);
/// Overlays the keys present in `j` on `base`. Unknown keys and bad values are
/// ConfigErrors naming the field.
RunConfig merge_json(const RunConfig& base, const nlohmann::json& j);
RunConfig load_config_file(const RunConfig& base, const std::filesystem::path& path);

/// Field-level validation of everything a run depends on.
void validate(const RunConfig& c);

Preset resolved_preset(const RunConfig& c);
std::filesystem::path resolved_data_dir(const RunConfig& c);
std::size_t num_classes_for(const std::string& dataset);

LossConfig loss_config(const RunConfig& c);
ScheduleConfig schedule_config(const RunConfig& c);

/// Loads, subsets and normalises the train/test splits named by the config.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& c);

}  // namespace amc
