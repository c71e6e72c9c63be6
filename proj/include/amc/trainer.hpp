#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "amc/dataset.hpp"
#include "amc/losses.hpp"
#include "amc/metrics.hpp"
#include "amc/model.hpp"

namespace amc {

struct ScheduleConfig {
  int total_epochs = 300;
  int rampup_len = 80;
  int rampdown_len = 50;
  double max_lr = 0.003;
  /// Apply the ramp-down to the auxiliary-loss weight as well as to lr and beta1.
  bool rampdown_weight = true;
};

void validate(const ScheduleConfig& cfg);

/// exp(-5 (1 - t/len)^2) for t < len, else 1.
double rampup(double t, const ScheduleConfig& cfg);
/// 1 for t <= T - len, else exp(-12.5 (1 - (T - t)/len)^2).
double rampdown(double t, const ScheduleConfig& cfg);

struct ScheduleValues {
  double weight;  // w(t)
  double lr;
  double beta1;
};

ScheduleValues schedule_values(double t, const ScheduleConfig& cfg);

/// Adam moments plus the running product of the (scheduled) beta1 values, which
/// replaces beta1^t in the first-moment bias correction.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  double beta1_product = 1.0;
  double beta2_product = 1.0;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const std::vector<Parameter>& params);

/// One bias-corrected Adam update of every trainable parameter. Throws
/// NumericError naming the parameter if a gradient is not finite.
void adam_step(std::vector<Parameter>& params, AdamState& state, double lr, double beta1);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double weight = 0.0;
  double lr = 0.0;
  double beta1 = 0.0;
  double test_accuracy = 0.0;
  double train_seconds = 0.0;
};

struct RunReport {
  std::vector<EpochRecord> epochs;
  double final_accuracy = 0.0;
  /// Clustering scores with predicted labels as cluster ids.
  double homogeneity = 0.0;
  double completeness = 0.0;
  /// Clustering scores with seeded k-means (k = class count) on the features.
  double kmeans_homogeneity = 0.0;
  double kmeans_completeness = 0.0;
  double train_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string code_version;
};

nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);
void write_report(const RunReport& r, const std::filesystem::path& path);
RunReport read_report(const std::filesystem::path& path);
/// `epoch,loss,w,lr,beta1,test_acc` rows.
void write_epoch_csv(const RunReport& r, const std::filesystem::path& path);

struct FitOptions {
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  Precision precision = Precision::fp64;
  /// Called after each epoch (progress logging).
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Loss of one mini-batch, recorded on `tape`. Shared by fit() and the gradient checks.
struct BatchLoss {
  Var loss;
  Var cross_entropy;
  PairBatch pairs;
};

BatchLoss batch_loss(Model& model, Tape& tape, const Tensor& images, std::span<const int> labels,
                     const LossConfig& cfg, double weight, Rng& layer_rng, Rng& pair_rng);

/// Mini-batch training with the scheduled Adam optimiser, evaluating test accuracy
/// after every epoch. Deterministic for a given seed.
RunReport fit(Model& model, const Dataset& train, const Dataset& test, const LossConfig& loss_cfg,
              const ScheduleConfig& schedule, const FitOptions& options);

struct Evaluation {
  double accuracy = 0.0;
  ClusterScores predicted_clusters{};  // predicted labels as cluster ids
  ClusterScores kmeans_clusters{};     // seeded k-means on the features
  std::vector<int> predicted;
  Tensor features;
};

/// Eval-mode accuracy and clustering scores on a dataset.
Evaluation evaluate(Model& model, const Dataset& data, std::uint64_t seed);

}  // namespace amc
