#include "amc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "amc/version.hpp"

namespace amc {

namespace {

constexpr std::uint64_t kLayerStream = 1;
constexpr std::uint64_t kPairStream = 2;

}  // namespace

void validate(const ScheduleConfig& cfg) {
  if (cfg.total_epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.rampup_len < 0 || cfg.rampdown_len < 0)
    throw ConfigError("ramp lengths must be non-negative");
  if (cfg.rampup_len > 0 && cfg.rampdown_len > 0 &&
      cfg.rampup_len + cfg.rampdown_len > cfg.total_epochs)
    throw ConfigError("rampup + rampdown (" + std::to_string(cfg.rampup_len + cfg.rampdown_len) +
                      ") exceeds the number of epochs (" + std::to_string(cfg.total_epochs) + ")");
  if (!(cfg.max_lr > 0.0) || !std::isfinite(cfg.max_lr))
    throw ConfigError("learning rate must be positive");
}

double rampup(double t, const ScheduleConfig& cfg) {
  const double len = cfg.rampup_len;
  if (len <= 0.0 || t >= len) return 1.0;
  const double p = 1.0 - t / len;
  return std::exp(-5.0 * p * p);
}

double rampdown(double t, const ScheduleConfig& cfg) {
  const double len = cfg.rampdown_len;
  const double total = cfg.total_epochs;
  if (len <= 0.0 || t <= total - len) return 1.0;
  const double p = 1.0 - (total - t) / len;
  return std::exp(-12.5 * p * p);
}

ScheduleValues schedule_values(double t, const ScheduleConfig& cfg) {
  const double up = rampup(t, cfg);
  const double down = rampdown(t, cfg);
  return {up * (cfg.rampdown_weight ? down : 1.0), cfg.max_lr * up * down, 0.5 + 0.4 * down};
}

AdamState make_adam_state(const std::vector<Parameter>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape(), 0.0);
    s.v.emplace_back(p.value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Parameter>& params, AdamState& state, double lr, double beta1) {
  if (state.m.size() != params.size())
    throw ConfigError("adam_step: optimiser state does not match the parameter list");
  for (const auto& p : params)
    if (p.trainable && !p.grad.all_finite())
      throw NumericError("non-finite gradient in parameter '" + p.name + "' at step " +
                         std::to_string(state.step + 1));
  ++state.step;
  state.beta1_product *= beta1;
  state.beta2_product *= state.beta2;
  const double c1 = 1.0 - state.beta1_product;
  const double c2 = 1.0 - state.beta2_product;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    if (!p.trainable) continue;
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    if (m.shape() != p.value.shape()) throw ShapeError("adam_step: moment shape mismatch");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"w", e.weight},
                      {"lr", e.lr},
                      {"beta1", e.beta1},
                      {"test_acc", e.test_accuracy},
                      {"train_seconds", e.train_seconds}});
  return {{"epochs", epochs},
          {"final",
           {{"accuracy", r.final_accuracy},
            {"homogeneity", r.homogeneity},
            {"completeness", r.completeness},
            {"kmeans_homogeneity", r.kmeans_homogeneity},
            {"kmeans_completeness", r.kmeans_completeness},
            {"train_seconds", r.train_seconds}}},
          {"seed", r.seed},
          {"config", r.config},
          {"code_version", r.code_version}};
}

RunReport report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    for (const auto& e : j.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<int>();
      rec.loss = e.at("loss").get<double>();
      rec.weight = e.at("w").get<double>();
      rec.lr = e.at("lr").get<double>();
      rec.beta1 = e.at("beta1").get<double>();
      rec.test_accuracy = e.at("test_acc").get<double>();
      rec.train_seconds = e.at("train_seconds").get<double>();
      r.epochs.push_back(rec);
    }
    const auto& f = j.at("final");
    r.final_accuracy = f.at("accuracy").get<double>();
    r.homogeneity = f.at("homogeneity").get<double>();
    r.completeness = f.at("completeness").get<double>();
    r.kmeans_homogeneity = f.at("kmeans_homogeneity").get<double>();
    r.kmeans_completeness = f.at("kmeans_completeness").get<double>();
    r.train_seconds = f.at("train_seconds").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    r.code_version = j.at("code_version").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run report: ") + e.what());
  }
}

void write_report(const RunReport& r, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << to_json(r).dump(2) << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_epoch_csv(const RunReport& r, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(17);
  os << "epoch,loss,w,lr,beta1,test_acc\n";
  for (const auto& e : r.epochs)
    os << e.epoch << ',' << e.loss << ',' << e.weight << ',' << e.lr << ',' << e.beta1 << ','
       << e.test_accuracy << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

BatchLoss batch_loss(Model& model, Tape& tape, const Tensor& images, std::span<const int> labels,
                     const LossConfig& cfg, double weight, Rng& layer_rng, Rng& pair_rng) {
  const std::size_t batch = images.dim(0);
  ForwardResult fr = forward(model, tape, tape.constant(images), Mode::train, layer_rng);
  BatchLoss out;
  out.cross_entropy = ops::cross_entropy(fr.logits, labels);
  out.loss = out.cross_entropy;
  if (cfg.mode == LossMode::ce || cfg.lambda == 0.0) return out;

  const PairSplit split = split_pairs(batch, pair_rng);
  out.pairs = similarity_from_predictions(softmax_rows(fr.logits.value()), split);
  const Var pair_sum = cfg.mode == LossMode::amc
                           ? ops::amc_pair_sum(ops::normalize_rows(fr.features), out.pairs,
                                               cfg.margin_g)
                           : ops::eucd_pair_sum(fr.features, out.pairs, cfg.margin_e);
  out.loss = ops::combined_loss(out.cross_entropy, pair_sum, weight, cfg, batch);
  return out;
}

Evaluation evaluate(Model& model, const Dataset& data, std::uint64_t seed) {
  const Prediction pred = predict(model, data.images);
  Evaluation e;
  e.predicted = predicted_labels(pred.logits);
  e.accuracy = accuracy(e.predicted, data.labels);
  e.predicted_clusters = homogeneity_completeness(data.labels, e.predicted);
  e.kmeans_clusters =
      homogeneity_completeness(data.labels, kmeans(pred.features, data.num_classes, seed));
  e.features = pred.features;
  return e;
}

RunReport fit(Model& model, const Dataset& train, const Dataset& test, const LossConfig& loss_cfg,
              const ScheduleConfig& schedule, const FitOptions& options) {
  validate(loss_cfg);
  validate(schedule);
  const ArchitectureSpec& spec = model.spec();
  for (const Dataset* d : {&train, &test}) {
    const Shape& s = d->images.shape();
    if (s.size() != 4 || s[1] != spec.in_channels || s[2] != spec.in_height ||
        s[3] != spec.in_width)
      throw ShapeError(d->name + " " + to_string(d->split) + " images " + to_string(s) +
                       " do not fit " + spec.name);
    if (d->num_classes != spec.num_classes)
      throw ShapeError(d->name + " has " + std::to_string(d->num_classes) + " classes, model has " +
                       std::to_string(spec.num_classes));
  }

  const BatchPlan plan(train.size(), options.batch_size, options.seed);
  AdamState adam = make_adam_state(model.params());
  RunReport report;
  report.seed = options.seed;
  report.code_version = kVersionString;

  using clock = std::chrono::steady_clock;
  for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
    const ScheduleValues sv = schedule_values(epoch, schedule);
    const auto t0 = clock::now();
    double loss_sum = 0.0;
    const auto batches = plan.batches(static_cast<std::size_t>(epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor images = train.images.gather_rows(batches[b]);
      std::vector<int> labels;
      labels.reserve(batches[b].size());
      for (auto i : batches[b]) labels.push_back(train.labels[i]);

      Rng layer_rng(derive_seed(options.seed, {static_cast<std::uint64_t>(epoch), b, kLayerStream}));
      Rng pair_rng(derive_seed(options.seed, {static_cast<std::uint64_t>(epoch), b, kPairStream}));
      Tape tape(options.precision);
      try {
        const BatchLoss bl =
            batch_loss(model, tape, images, labels, loss_cfg, sv.weight, layer_rng, pair_rng);
        model.zero_grad();
        tape.backward(bl.loss);
        adam_step(model.params(), adam, sv.lr, sv.beta1);
        loss_sum += bl.loss.value()[0];
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           ": " + e.what());
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(batches.size());
    rec.weight = sv.weight;
    rec.lr = sv.lr;
    rec.beta1 = sv.beta1;
    rec.train_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    const Prediction pred = predict(model, test.images);
    rec.test_accuracy = accuracy(predicted_labels(pred.logits), test.labels);
    report.train_seconds += rec.train_seconds;
    report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }

  const Evaluation ev = evaluate(model, test, options.seed);
  report.final_accuracy = ev.accuracy;
  report.homogeneity = ev.predicted_clusters.homogeneity;
  report.completeness = ev.predicted_clusters.completeness;
  report.kmeans_homogeneity = ev.kmeans_clusters.homogeneity;
  report.kmeans_completeness = ev.kmeans_clusters.completeness;
  return report;
}

}  // namespace amc
