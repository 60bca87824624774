#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emix/oracle.hpp"
#include "emix/plot.hpp"
#include "emix/trainer.hpp"

namespace {

emix::TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  in >> j;
  return emix::config_from_json(j);
}

void apply_seed_override(emix::TrainConfig& cfg, bool seed_given, uint64_t seed) {
  if (const char* env = std::getenv("EMIX_SEED"))
    cfg.seed = std::strtoull(env, nullptr, 10);
  else if (seed_given)
    cfg.seed = seed;
}

int cmd_verify(int instances, uint64_t seed) {
  const emix::SweepResult res = emix::certification_sweep(seed, instances, 20, 3, 50);
  std::printf("%-28s %8s %8s\n", "check", "count", "failed");
  std::printf("%-28s %8d %8d\n", "bias bound (per agent)", res.bound_checks,
              res.bound_failures);
  std::printf("%-28s %8d %8d\n", "distribution-shift lemma", res.instances,
              res.lemma_failures);
  std::printf("worst bound margin (lhs-rhs): %.6g\n", res.worst_bound_margin);
  std::printf("worst lemma slack:            %.6g\n", res.worst_lemma_margin);
  const bool ok = res.bound_failures == 0 && res.lemma_failures == 0;
  std::printf("verify: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble-MIX trainer"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", ckpt_path, in_dir, axis, values_csv;
  uint64_t seed = 0;
  int episodes = 24, instances = 100;

  auto* train = app.add_subcommand("train", "Run the training loop");
  train->add_option("--config", config_path, "Config JSON")->required();
  auto* seed_opt = train->add_option("--seed", seed, "Seed override");
  train->add_option("--out", out_dir, "Output directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "checkpoint.bin path")->required();
  eval->add_option("--config", config_path,
                   "Config JSON (default: config.json beside the checkpoint)");
  eval->add_option("--episodes", episodes, "Eval episodes");
  eval->add_option("--seed", seed, "Eval seed");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation axis");
  ablate->add_option("--config", config_path, "Base config JSON")->required();
  ablate->add_option("--axis", axis, "Axis name")->required();
  ablate->add_option("--values", values_csv, "Comma-separated values")->required();
  auto* ab_seed_opt = ablate->add_option("--seed", seed, "Seed override");
  ablate->add_option("--out", out_dir, "Output directory");

  auto* plot = app.add_subcommand("plot", "Render metric plots");
  plot->add_option("--in", in_dir, "Directory scanned recursively for metrics.csv")
      ->required();
  plot->add_option("--out", out_dir, "Output directory");

  auto* verify = app.add_subcommand("verify", "Certification sweep for the bias bound");
  verify->add_option("--instances", instances, "Random instances");
  verify->add_option("--seed", seed, "Sweep seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      emix::TrainConfig cfg = load_config(config_path);
      apply_seed_override(cfg, seed_opt->count() > 0, seed);
      emix::Trainer trainer(cfg);
      const emix::TrainResult res = trainer.run(out_dir);
      std::printf("trained %ld episodes; metrics: %s\n", cfg.L, res.metrics_path.c_str());
      std::printf("final eval return %.4f, success rate %.4f\n",
                  res.final_eval.mean_return, res.final_eval.success_rate);
    } else if (eval->parsed()) {
      std::string cfg = config_path;
      if (cfg.empty()) {
        const auto slash = ckpt_path.find_last_of('/');
        cfg = (slash == std::string::npos ? std::string(".")
                                          : ckpt_path.substr(0, slash)) +
              "/config.json";
      }
      const emix::EvalResult res =
          emix::evaluate_checkpoint(ckpt_path, cfg, episodes, seed);
      std::printf("mean return %.6f over %d episodes, success rate %.4f\n",
                  res.mean_return, episodes, res.success_rate);
    } else if (ablate->parsed()) {
      emix::TrainConfig cfg = load_config(config_path);
      apply_seed_override(cfg, ab_seed_opt->count() > 0, seed);
      std::vector<std::string> values;
      std::string cur;
      for (char c : values_csv + ",") {
        if (c == ',') {
          if (!cur.empty()) values.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      const auto results = emix::run_ablation(cfg, axis, values, out_dir);
      for (size_t i = 0; i < results.size(); ++i)
        std::printf("%s=%s: final eval return %.4f, metrics %s\n", axis.c_str(),
                    values[i].c_str(), results[i].final_eval.mean_return,
                    results[i].metrics_path.c_str());
    } else if (plot->parsed()) {
      std::vector<std::string> files;
      namespace fs = std::filesystem;
      for (const auto& entry : fs::recursive_directory_iterator(in_dir))
        if (entry.is_regular_file() && entry.path().filename() == "metrics.csv")
          files.push_back(entry.path().string());
      std::sort(files.begin(), files.end());
      const auto written = emix::emit_plots(files, out_dir);
      for (const auto& f : written) std::printf("wrote %s\n", f.c_str());
    } else if (verify->parsed()) {
      return cmd_verify(instances, seed);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
