#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "emix/trainer.hpp"

using namespace emix;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.environment = "matrix_game";
  cfg.L = 12;
  cfg.T = 200;
  cfg.eval_interval_scale = 0.5;
  cfg.U = 4;
  cfg.N = 3;
  cfg.N_1 = 8;
  cfg.N_2 = 50;
  cfg.on_buffer_episodes = 8;
  cfg.off_batch_transitions = 8;
  cfg.m = 4;
  cfg.hidden = 8;
  cfg.mixer_hidden = 8;
  cfg.X = 5;
  cfg.seed = 7;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tmp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("emix_trainer_test_" + tag);
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("config JSON round-trips with the verbatim table keys") {
  TrainConfig cfg = tiny_config();
  cfg.bonus_beta = 0.25;
  cfg.v = 0.75;
  cfg.C_1 = 0.5;
  const nlohmann::json j = config_to_json(cfg);
  CHECK(j.at("T").get<long>() == cfg.T);
  CHECK(j.at("U").get<int>() == cfg.U);
  CHECK(j.at("C_1").get<double>() == cfg.C_1);
  CHECK(j.at("C_2").get<double>() == cfg.C_2);
  CHECK(j.at("beta").get<double>() == cfg.bonus_beta);
  CHECK(j.at("v").get<double>() == cfg.v);
  CHECK(j.at("N").get<int>() == cfg.N);
  CHECK(j.at("N_1").get<int>() == cfg.N_1);
  CHECK(j.at("N_2").get<int>() == cfg.N_2);

  const TrainConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  // "bonus_beta" is accepted as an alias for "beta"
  nlohmann::json alias = j;
  alias.erase("beta");
  alias["bonus_beta"] = 0.125;
  CHECK(config_from_json(alias).bonus_beta == 0.125);
}

TEST_CASE("config validation rejects bad values") {
  auto broken = [](auto mutate) {
    TrainConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS(broken([](TrainConfig& c) { c.L = -1; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.gamma = 1.0; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.c = 1.5; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.v = -0.1; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.N = 1; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.exploration = "entropy"; }).validate());
  CHECK_THROWS(broken([](TrainConfig& c) { c.actor_loss = "both"; }).validate());
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("actor_loss mode folds into the effective nu") {
  TrainConfig cfg;
  cfg.v = 0.3;
  cfg.actor_loss = "mixed";
  CHECK(cfg.effective_nu() == doctest::Approx(0.3));
  cfg.actor_loss = "on";
  CHECK(cfg.effective_nu() == 0.0);
  cfg.actor_loss = "off";
  CHECK(cfg.effective_nu() == 1.0);
}

TEST_CASE("metrics rows serialize with NaN partitioning and parse back") {
  MetricsRow train_row;
  train_row.step = 42;
  train_row.episode = 3;
  train_row.eval_return = std::nan("");
  train_row.eval_success = std::nan("");
  train_row.critic_loss = 0.5;
  train_row.bhat_term = 1.25;
  train_row.mean_k = 0.75;
  train_row.mean_gbar = -0.125;
  train_row.gate_open_frac = 0.25;
  train_row.actor_grad_norm = 1e-3;
  train_row.critic_grad_norm = 2e-3;
  train_row.wall_clock = 0.0;

  const std::string line = metrics_csv_row(train_row);
  CHECK(line.substr(0, 5) == "42,3,");
  CHECK(line.find("nan") != std::string::npos);

  const fs::path p = fs::temp_directory_path() / "emix_metrics_test.csv";
  {
    std::ofstream out(p);
    out << kMetricsHeader << "\n" << line << "\n";
  }
  const std::vector<MetricsRow> rows = parse_metrics_csv(p.string());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].step == 42);
  CHECK(rows[0].episode == 3);
  CHECK(std::isnan(rows[0].eval_return));
  CHECK(rows[0].bhat_term == 1.25);
  CHECK(rows[0].critic_grad_norm == 2e-3);
  fs::remove(p);
}

TEST_CASE("L = 0 produces a checkpoint and a header-only metrics file") {
  TrainConfig cfg = tiny_config();
  cfg.L = 0;
  const std::string dir = tmp_dir("l0");
  Trainer trainer(cfg);
  const TrainResult res = trainer.run(dir);
  CHECK(fs::exists(res.checkpoint_path));
  const std::string metrics = read_file(res.metrics_path);
  CHECK(metrics == std::string(kMetricsHeader) + "\n");
  fs::remove_all(dir);
}

TEST_CASE("duplicate runs are byte-identical") {
  const TrainConfig cfg = tiny_config();
  const std::string d1 = tmp_dir("det1");
  const std::string d2 = tmp_dir("det2");
  Trainer(cfg).run(d1);
  Trainer(cfg).run(d2);
  CHECK(read_file(d1 + "/metrics.csv") == read_file(d2 + "/metrics.csv"));
  CHECK(read_file(d1 + "/checkpoint.bin") == read_file(d2 + "/checkpoint.bin"));

  TrainConfig other = cfg;
  other.seed = 8;
  const std::string d3 = tmp_dir("det3");
  Trainer(other).run(d3);
  CHECK(read_file(d1 + "/metrics.csv") != read_file(d3 + "/metrics.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("evaluation of a uniform policy matches the payoff-table mean") {
  TrainConfig cfg = tiny_config();
  Trainer trainer(cfg);
  // zero the actor output layers: logits all equal -> exactly uniform policy
  for (auto& [name, t] : trainer.store().params()) {
    if (name.rfind("actor/", 0) == 0)
      for (double& v : trainer.store().at(name).data) v = 0.0;
  }
  const EvalResult res = trainer.evaluate(2000, 99, 0);
  // uniform play on the payoff table averages to -34/9
  CHECK(res.mean_return == doctest::Approx(-34.0 / 9.0).epsilon(0.06));
  CHECK(res.success_rate == doctest::Approx(1.0 / 9.0).epsilon(0.15));
}

TEST_CASE("checkpoint evaluation round-trips through the CLI entry point") {
  TrainConfig cfg = tiny_config();
  const std::string dir = tmp_dir("ckpt");
  Trainer trainer(cfg);
  const TrainResult res = trainer.run(dir);
  const EvalResult direct = trainer.evaluate(16, 1234, cfg.L);
  const EvalResult loaded =
      evaluate_checkpoint(res.checkpoint_path, dir + "/config.json", 16, 1234);
  CHECK(loaded.mean_return == doctest::Approx(direct.mean_return).epsilon(1e-12));
  CHECK(loaded.success_rate == doctest::Approx(direct.success_rate).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("training rows appear once per episode with eval rows interleaved") {
  TrainConfig cfg = tiny_config();
  const std::string dir = tmp_dir("rows");
  const TrainResult res = Trainer(cfg).run(dir);
  long train_rows = 0, eval_rows = 0;
  for (const MetricsRow& r : res.rows) {
    if (std::isnan(r.eval_return))
      ++train_rows;
    else
      ++eval_rows;
  }
  CHECK(train_rows == cfg.L);
  CHECK(eval_rows == static_cast<long>(res.eval_steps.size()));
  CHECK(eval_rows >= 2);  // initial eval plus the final one at minimum
  CHECK(res.critic_grad_norms.size() == static_cast<size_t>(cfg.L));
  CHECK(res.final_diversity >= 0.0);
  fs::remove_all(dir);
}

TEST_CASE("ablation runner validates its axis and produces one run per value") {
  TrainConfig cfg = tiny_config();
  cfg.L = 4;
  const std::string dir = tmp_dir("abl");
  CHECK_THROWS(run_ablation(cfg, "no_such_axis", {"1"}, dir));
  const std::vector<TrainResult> runs =
      run_ablation(cfg, "C_2", {"0.001", "0"}, dir);
  REQUIRE(runs.size() == 2);
  CHECK(fs::exists(fs::path(dir) / "C_2_0_001" / "metrics.csv"));
  CHECK(fs::exists(fs::path(dir) / "C_2_0" / "metrics.csv"));
  CHECK(read_file(runs[0].metrics_path) != read_file(runs[1].metrics_path));
  fs::remove_all(dir);
}
