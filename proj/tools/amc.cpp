// amc: train, evaluate, sweep and explain AMC-Loss models from the command line.

#include <CLI11.hpp>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

#include <charconv>
#include <cstdio>
#include <cstring>
#include <functional>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "amc/gradcam.hpp"
#include "amc/run_config.hpp"
#include "amc/runtime.hpp"
#include "amc/version.hpp"

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Config flags bound to locals that start at the built-in defaults (so --help
// prints them) and are only applied when given on the command line.
struct ConfigFlags {
  amc::RunConfig v;
  std::string loss = amc::to_string(v.loss);
  std::string preprocessing = amc::to_string(v.preprocessing);
  std::string config_file;
  std::map<std::string, CLI::Option*> opts;

  void add_data(CLI::App* app) {
    opts["dataset"] = app->add_option("--dataset", v.dataset, "Dataset")
                          ->check(CLI::IsMember({"mnist", "cifar10", "cifar100"}))
                          ->capture_default_str();
    opts["data_dir"] = app->add_option("--data-dir", v.data_dir,
                                       std::string("Dataset directory (default: $") +
                                           amc::kDataDirEnv + ", then ./data)");
    opts["preprocessing"] = app->add_option("--preprocessing", preprocessing, "Input scaling")
                                ->check(CLI::IsMember({"raw", "unit_range", "standardize"}))
                                ->capture_default_str();
    opts["train_subset"] = app->add_option("--train-subset", v.train_subset,
                                           "Use a fixed random subset of the train split (0 = all)")
                               ->capture_default_str();
    opts["test_subset"] = app->add_option("--test-subset", v.test_subset,
                                          "Use a fixed random subset of the test split (0 = all)")
                              ->capture_default_str();
    opts["subset_seed"] = app->add_option("--subset-seed", v.subset_seed,
                                          "Seed of the subset draw (test uses seed + 1)")
                              ->capture_default_str();
    opts["seed"] = app->add_option("--seed", v.seed, "Base seed")->capture_default_str();
    app->add_option("--config", config_file, "JSON config file (command-line flags take precedence)")
        ->check(CLI::ExistingFile);
  }

  void add_training(CLI::App* app) {
    opts["preset"] = app->add_option("--preset", v.preset,
                                     "Architecture (default: mnist_net for mnist, cifar_net otherwise)")
                         ->check(CLI::IsMember({"mnist_net", "cifar_net"}));
    opts["loss"] = app->add_option("--loss", loss, "Loss mode")
                       ->check(CLI::IsMember({"ce", "eucd", "amc"}))
                       ->capture_default_str();
    opts["lambda"] = app->add_option("--lambda", v.lambda, "Auxiliary loss weight")->capture_default_str();
    opts["margin_g"] = app->add_option("--margin-g", v.margin_g, "Angular margin (amc)")->capture_default_str();
    opts["margin_e"] = app->add_option("--margin-e", v.margin_e, "Euclidean margin (eucd)")->capture_default_str();
    opts["epochs"] = app->add_option("--epochs", v.epochs, "Training epochs")->capture_default_str();
    opts["batch_size"] = app->add_option("--batch-size", v.batch_size, "Mini-batch size")->capture_default_str();
    opts["lr"] = app->add_option("--lr", v.lr, "Maximum learning rate")->capture_default_str();
    opts["embed_dim"] = app->add_option("--embed-dim", v.embed_dim, "Feature dimension")
                            ->check(CLI::IsMember({2, 3, 128}))
                            ->capture_default_str();
    opts["rampup"] = app->add_option("--rampup", v.rampup, "Ramp-up length in epochs")->capture_default_str();
    opts["rampdown"] = app->add_option("--rampdown", v.rampdown, "Ramp-down length in epochs")->capture_default_str();
    opts["fp32"] = app->add_flag("--fp32", v.fp32, "Single-precision matrix products");
  }

  void add_out(CLI::App* app, const std::string& help) {
    opts["out"] = app->add_option("--out", v.out, help)->capture_default_str();
  }

  bool given(const std::string& key) const {
    const auto it = opts.find(key);
    return it != opts.end() && it->second->count() > 0;
  }

  // default < checkpoint metadata < --config file < command line
  amc::RunConfig resolve(const json& checkpoint_config = json()) const {
    amc::RunConfig c;
    if (checkpoint_config.is_object()) {
      json j = checkpoint_config;
      j.erase("out");
      c = amc::merge_json(c, j);
    }
    if (!config_file.empty()) c = amc::load_config_file(c, config_file);
    json cli = json::object();
    const json all = amc::to_json(v);
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      if (key == "loss") cli[key] = loss;
      else if (key == "preprocessing") cli[key] = preprocessing;
      else if (key == "preset" || key == "data_dir") cli[key] = key == "preset" ? v.preset : v.data_dir;
      else cli[key] = all.at(key);
    }
    c = amc::merge_json(c, cli);
    if (c.loss == amc::LossMode::ce)
      for (const char* k : {"lambda", "margin_g", "margin_e"})
        if (given(k)) std::cerr << "warning: --" << k << " has no effect with --loss ce\n";
    return c;
  }
};

json provenance(const amc::RunConfig& c, const std::string& artifact) {
  return {{"artifact", artifact},
          {"config", amc::to_json(c)},
          {"seed", c.seed},
          {"code_version", amc::kVersionString}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw amc::DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw amc::DataError("failed writing " + path.string());
}

// CSV and PNG files cannot carry metadata themselves, so each gets a sidecar.
void write_sidecar(const fs::path& artifact, const amc::RunConfig& c, json extra = json::object()) {
  json meta = provenance(c, artifact.filename().string());
  meta.update(extra);
  write_json(fs::path(artifact.string() + ".meta.json"), meta);
}

void log_epoch(const amc::EpochRecord& e, int total) {
  std::cerr << "epoch " << std::setw(3) << e.epoch + 1 << '/' << total << "  loss "
            << std::fixed << std::setprecision(4) << e.loss << "  test acc "
            << std::setprecision(2) << e.test_accuracy << "%  (" << std::setprecision(1)
            << e.train_seconds << "s)" << std::defaultfloat << std::setprecision(6) << '\n';
}

amc::RunReport train_one(const amc::RunConfig& c, const fs::path& out_dir, bool verbose) {
  amc::validate(c);
  fs::create_directories(out_dir);
  auto [train, test] = amc::load_datasets(c);
  amc::Model model = amc::Model::build(amc::resolved_preset(c), c.embed_dim,
                                       amc::num_classes_for(c.dataset), c.seed);
  amc::FitOptions fo;
  fo.batch_size = c.batch_size;
  fo.seed = c.seed;
  fo.precision = c.fp32 ? amc::Precision::fp32 : amc::Precision::fp64;
  if (verbose) fo.on_epoch = [&](const amc::EpochRecord& e) { log_epoch(e, c.epochs); };
  amc::RunReport report =
      amc::fit(model, train, test, amc::loss_config(c), amc::schedule_config(c), fo);
  report.config = amc::to_json(c);

  amc::save_checkpoint(model, out_dir / "checkpoint.amcc", provenance(c, "checkpoint.amcc"));
  amc::write_report(report, out_dir / "report.json");
  amc::write_epoch_csv(report, out_dir / "epochs.csv");
  write_sidecar(out_dir / "epochs.csv", c);
  write_json(out_dir / "config.json", amc::to_json(c));
  return report;
}

struct LoadedCheckpoint {
  amc::Model model;
  amc::RunConfig config;
};

LoadedCheckpoint open_checkpoint(const std::string& path, const ConfigFlags& flags) {
  amc::Checkpoint ck = amc::load_checkpoint(path);
  const json meta_config = ck.metadata.contains("config") ? ck.metadata["config"] : json();
  amc::RunConfig c = flags.resolve(meta_config);
  const amc::ArchitectureSpec& spec = ck.model.spec();
  const std::size_t classes = amc::num_classes_for(c.dataset);
  const bool mnist_shaped = spec.in_channels == 1 && spec.in_height == 28;
  if (spec.num_classes != classes || mnist_shaped != (c.dataset == "mnist"))
    throw amc::ConfigError("checkpoint " + path + " (" + spec.name + ", " +
                           std::to_string(spec.num_classes) + " classes) does not match dataset " +
                           c.dataset);
  c.embed_dim = spec.embed_dim;
  c.preset = spec.name;
  return {std::move(ck.model), c};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

int cmd_eval(const std::string& checkpoint, const ConfigFlags& flags, const std::string& out) {
  auto [model, c] = open_checkpoint(checkpoint, flags);
  auto [train, test] = amc::load_datasets(c);
  const amc::Evaluation ev = amc::evaluate(model, test, c.seed);
  json result = provenance(c, out.empty() ? "stdout" : fs::path(out).filename().string());
  result["checkpoint"] = checkpoint;
  result["accuracy"] = ev.accuracy;
  result["homogeneity"] = ev.predicted_clusters.homogeneity;
  result["completeness"] = ev.predicted_clusters.completeness;
  result["kmeans_homogeneity"] = ev.kmeans_clusters.homogeneity;
  result["kmeans_completeness"] = ev.kmeans_clusters.completeness;
  result["samples"] = test.size();
  if (out.empty()) std::cout << result.dump(2) << '\n';
  else write_json(out, result);
  return 0;
}

int cmd_export(const std::string& checkpoint, const ConfigFlags& flags, const std::string& split,
               bool normalized, const std::string& out) {
  auto [model, c] = open_checkpoint(checkpoint, flags);
  auto [train, test] = amc::load_datasets(c);
  const amc::Dataset& data = split == "train" ? train : test;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  const std::size_t rows = amc::export_embeddings(model, data, out, normalized);
  write_sidecar(out, c, {{"checkpoint", checkpoint}, {"split", split}, {"normalized", normalized}});
  std::cerr << "wrote " << rows << " embeddings to " << out << '\n';
  return 0;
}

int cmd_gradcam(const std::string& checkpoint, const ConfigFlags& flags,
                const std::vector<std::size_t>& indices, int target_class, const std::string& out) {
  auto [model, c] = open_checkpoint(checkpoint, flags);
  auto [train, test] = amc::load_datasets(c);
  fs::create_directories(out);
  const amc::Shape chw{test.images.dim(1), test.images.dim(2), test.images.dim(3)};
  json summary = provenance(c, "gradcam.json");
  summary["checkpoint"] = checkpoint;
  summary["images"] = json::array();
  for (std::size_t idx : indices) {
    if (idx >= test.size())
      throw amc::ConfigError("image index " + std::to_string(idx) + " outside the test split (" +
                             std::to_string(test.size()) + " images)");
    const amc::Tensor image = test.images.slice_rows(idx, idx + 1).reshaped(chw);
    std::optional<int> cls;
    if (target_class >= 0) cls = target_class;
    const amc::Heatmap hm = amc::gradcam(model, image, cls);
    const std::string stem = "image" + std::to_string(idx);
    const json extra = {{"image_index", idx}, {"class_index", hm.class_index},
                        {"source_layer", hm.source_layer}, {"checkpoint", checkpoint}};
    amc::export_heatmap_png(hm, out / fs::path(stem + "_heatmap.png"));
    amc::export_overlay(hm, image, out / fs::path(stem + "_overlay.png"));
    amc::export_heatmap_csv(hm, out / fs::path(stem + "_heatmap.csv"));
    for (const char* suffix : {"_heatmap.png", "_overlay.png", "_heatmap.csv"})
      write_sidecar(out / fs::path(stem + suffix), c, extra);
    summary["images"].push_back({{"index", idx},
                                 {"label", test.labels[idx]},
                                 {"class_index", hm.class_index},
                                 {"source_layer", hm.source_layer},
                                 {"top_decile_mass", amc::top_decile_mass(hm)}});
  }
  write_json(fs::path(out) / "gradcam.json", summary);
  std::cerr << "wrote " << indices.size() << " heatmap/overlay pairs to " << out << '\n';
  return 0;
}

struct Cell {
  std::string label;
  double value = 0.0;
  std::vector<double> accuracy;
};

void write_summary_csv(const fs::path& path, const std::string& axis, const Cell& baseline,
                       const std::vector<Cell>& cells) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw amc::DataError("cannot write " + path.string());
  const amc::SampleSummary base = amc::run_summary(baseline.accuracy);
  os << axis << ",mean_acc,sd_acc,n,p_value\n";
  os << baseline.label << ',' << fmt(base.mean) << ',' << fmt(base.sd) << ',' << base.n << ",\n";
  for (const Cell& cell : cells) {
    const amc::SampleSummary s = amc::run_summary(cell.accuracy);
    os << cell.label << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << s.n << ','
       << fmt(amc::two_sided_t_test(s, base)) << '\n';
  }
  if (!os) throw amc::DataError("failed writing " + path.string());
}

// Runs `amc train` for each config in its own process, at most `limit` at a time.
// Each child gets a self-contained config file and logs to train.log in its output dir.
void run_parallel(std::size_t count, int limit, const std::function<amc::RunConfig(std::size_t)>& config) {
  std::map<pid_t, std::string> running;
  std::vector<std::string> failed;
  auto reap = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid <= 0) throw amc::DataError("sweep: waitpid failed");
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(running[pid]);
    running.erase(pid);
  };
  for (std::size_t n = 0; n < count; ++n) {
    if (static_cast<int>(running.size()) >= limit) reap();
    const amc::RunConfig rc = config(n);
    const fs::path dir = rc.out;
    fs::create_directories(dir);
    write_json(dir / "request.json", amc::to_json(rc));
    const std::string self = fs::read_symlink("/proc/self/exe").string();
    const std::string request = (dir / "request.json").string(), log = (dir / "train.log").string();
    std::vector<std::string> args{self, "train", "--config", request};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&fa, 1, 2);
    pid_t pid = 0;
    const int err = posix_spawn(&pid, self.c_str(), &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    if (err != 0) throw amc::DataError("sweep: cannot start " + self + ": " + std::strerror(err));
    running[pid] = dir.string();
    std::cerr << "[started " << dir.string() << ", " << n + 1 << '/' << count << "]\n";
  }
  while (!running.empty()) reap();
  if (!failed.empty()) {
    std::string list;
    for (const auto& f : failed) list += "\n  " + f + "/train.log";
    throw amc::DataError("sweep: " + std::to_string(failed.size()) + " runs failed, see" + list);
  }
}

int cmd_sweep(const ConfigFlags& flags, const std::string& lambdas, const std::string& margins,
              int repeats, int jobs_limit) {
  amc::RunConfig c = flags.resolve();
  if (lambdas.empty() == margins.empty())
    throw amc::ConfigError("sweep: give exactly one of --lambdas or --margins-g");
  if (repeats < 2) throw amc::ConfigError("sweep: --repeats must be at least 2 for p-values");
  const std::string axis = lambdas.empty() ? "margin_g" : "lambda";
  std::vector<double> grid;
  for (const auto& s : split_list(lambdas.empty() ? margins : lambdas)) grid.push_back(std::stod(s));
  if (grid.empty()) throw amc::ConfigError("sweep: empty grid");
  c.loss = amc::LossMode::amc;
  for (double g : grid) {
    amc::RunConfig probe = c;
    (axis == "lambda" ? probe.lambda : probe.margin_g) = g;
    amc::validate(probe);
  }

  const fs::path root = c.out;
  struct Job {
    std::size_t cell;  // 0 is the ce baseline
    amc::RunConfig config;
  };
  std::vector<Cell> cells;
  std::vector<Job> jobs;
  auto add_cell = [&](amc::RunConfig rc, const std::string& label, double value) {
    cells.push_back({label, value, {}});
    for (int k = 0; k < repeats; ++k) {
      rc.seed = c.seed + static_cast<std::uint64_t>(k);
      rc.out = (root / label / ("run" + std::to_string(k))).string();
      jobs.push_back({cells.size() - 1, rc});
    }
  };
  amc::RunConfig ce = c;
  ce.loss = amc::LossMode::ce;
  add_cell(ce, "ce", 0.0);
  for (double g : grid) {
    amc::RunConfig rc = c;
    (axis == "lambda" ? rc.lambda : rc.margin_g) = g;
    add_cell(rc, axis + "=" + fmt(g), g);
  }

  if (jobs_limit <= 1) {
    for (std::size_t n = 0; n < jobs.size(); ++n) {
      const amc::RunConfig& rc = jobs[n].config;
      std::cerr << "[" << cells[jobs[n].cell].label << ", seed " << rc.seed << ", run " << n + 1 << '/'
                << jobs.size() << "]\n";
      train_one(rc, rc.out, true);
    }
  } else {
    run_parallel(jobs.size(), jobs_limit, [&](std::size_t n) { return jobs[n].config; });
  }
  for (const Job& job : jobs)
    cells[job.cell].accuracy.push_back(amc::read_report(fs::path(job.config.out) / "report.json").final_accuracy);
  const Cell baseline = cells.front();
  cells.erase(cells.begin());
  const fs::path summary = root / "summary.csv";
  write_summary_csv(summary, axis, baseline, cells);
  write_sidecar(summary, c, {{"axis", axis}, {"grid", grid}, {"repeats", repeats}});
  std::cerr << "wrote " << summary.string() << '\n';
  return 0;
}

int cmd_summarize(const std::vector<std::string>& reports, const std::string& baseline_mode,
                  const std::string& out) {
  std::map<std::string, Cell> groups;
  std::vector<std::string> order;
  for (const auto& path : reports) {
    const amc::RunReport r = amc::read_report(path);
    const std::string mode = r.config.value("loss", std::string("unknown"));
    if (!groups.count(mode)) order.push_back(mode);
    groups[mode].label = mode;
    groups[mode].accuracy.push_back(r.final_accuracy);
  }
  if (!groups.count(baseline_mode))
    throw amc::ConfigError("summarize: no reports with loss '" + baseline_mode + "'");
  const amc::SampleSummary base = amc::run_summary(groups[baseline_mode].accuracy);
  std::ostringstream os;
  os << "loss,mean_acc,sd_acc,n,p_value_vs_" << baseline_mode << '\n';
  for (const auto& mode : order) {
    const amc::SampleSummary s = amc::run_summary(groups[mode].accuracy);
    os << mode << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << s.n << ',';
    if (mode != baseline_mode) os << fmt(amc::two_sided_t_test(s, base));
    os << '\n';
  }
  if (out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!(f << os.str())) throw amc::DataError("cannot write " + out);
    json meta = {{"artifact", fs::path(out).filename().string()},
                 {"reports", reports},
                 {"baseline", baseline_mode},
                 {"code_version", amc::kVersionString}};
    write_json(out + ".meta.json", meta);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  amc::retain_freed_memory();
  CLI::App app{"AMC-Loss training and analysis toolkit"};
  app.set_version_flag("--version", amc::kVersionString);
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one model; writes checkpoint, report and epoch CSV");
  train_flags.add_data(train);
  train_flags.add_training(train);
  train_flags.add_out(train, "Output directory");

  ConfigFlags eval_flags;
  std::string eval_checkpoint, eval_out;
  auto* eval = app.add_subcommand("eval", "Accuracy and clustering scores of a checkpoint (JSON)");
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_flags.add_data(eval);
  eval->add_option("--out", eval_out, "Write JSON here instead of stdout");

  ConfigFlags sweep_flags;
  std::string lambdas, margins;
  int repeats = 3;
  int sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Sensitivity grid over lambda or the angular margin");
  sweep_flags.add_data(sweep);
  sweep_flags.add_training(sweep);
  sweep_flags.add_out(sweep, "Output directory");
  sweep->add_option("--lambdas", lambdas, "Comma-separated lambda grid (margin fixed)");
  sweep->add_option("--margins-g", margins, "Comma-separated angular margin grid (lambda fixed)");
  sweep->add_option("--repeats", repeats, "Runs per grid point (seeds base + k)")->capture_default_str();
  sweep->add_option("--jobs", sweep_jobs, "Parallel training processes")->capture_default_str();

  ConfigFlags export_flags;
  std::string export_checkpoint, export_split = "test", export_out = "embeddings.csv";
  bool normalized = false;
  auto* exp = app.add_subcommand("export-embeddings", "Write penultimate features as CSV");
  exp->add_option("--checkpoint", export_checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  export_flags.add_data(exp);
  exp->add_option("--split", export_split, "Split to export")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  exp->add_flag("--normalized", normalized, "Project rows onto the unit sphere");
  exp->add_option("--out", export_out, "CSV path")->capture_default_str();

  ConfigFlags cam_flags;
  std::string cam_checkpoint, cam_out = "gradcam";
  std::vector<std::size_t> cam_indices = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  int cam_class = -1;
  auto* cam = app.add_subcommand("gradcam", "Grad-CAM heatmaps and overlays for test images");
  cam->add_option("--checkpoint", cam_checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  cam_flags.add_data(cam);
  cam->add_option("--indices", cam_indices, "Test image indices")->delimiter(',')->capture_default_str();
  cam->add_option("--class", cam_class, "Target class (default: predicted)");
  cam->add_option("--out", cam_out, "Output directory")->capture_default_str();

  std::vector<std::string> reports;
  std::string baseline = "eucd", summary_out;
  auto* summarize = app.add_subcommand("summarize", "Mean, SD and t-test p-values over run reports");
  summarize->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);
  summarize->add_option("--baseline", baseline, "Loss mode the p-values compare against")
      ->check(CLI::IsMember({"ce", "eucd", "amc"}))
      ->capture_default_str();
  summarize->add_option("--out", summary_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const amc::RunConfig c = train_flags.resolve();
      const amc::RunReport r = train_one(c, c.out, true);
      std::cout << json({{"accuracy", r.final_accuracy},
                         {"homogeneity", r.homogeneity},
                         {"completeness", r.completeness},
                         {"train_seconds", r.train_seconds},
                         {"out", c.out}})
                       .dump(2)
                << '\n';
      return 0;
    }
    if (*eval) return cmd_eval(eval_checkpoint, eval_flags, eval_out);
    if (*sweep) return cmd_sweep(sweep_flags, lambdas, margins, repeats, sweep_jobs);
    if (*exp) return cmd_export(export_checkpoint, export_flags, export_split, normalized, export_out);
    if (*cam) return cmd_gradcam(cam_checkpoint, cam_flags, cam_indices, cam_class, cam_out);
    if (*summarize) return cmd_summarize(reports, baseline, summary_out);
  } catch (const amc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
