#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emix/actors.hpp"
#include "emix/critics.hpp"
#include "emix/envs.hpp"
#include "emix/exploration.hpp"
#include "emix/replay.hpp"

namespace emix {

/// Full run configuration. JSON keys mirror the hyperparameter-table symbols
/// verbatim ("T", "U", "C_1", "C_2", "beta", "v", "N_1", "N_2", "N"); the rest
/// are artifact knobs.
struct TrainConfig {
  std::string environment = "matrix_game";
  nlohmann::json env_params = nlohmann::json::object();

  long L = 5000;       // total training episodes
  long T = 20000;      // eval interval, environment steps
  double eval_interval_scale = 1.0;  // desk-scale multiplier applied to T
  int U = 24;          // eval episodes per checkpoint
  double gamma = 0.99;
  double lambda = 0.8;  // eligibility trace for both target kinds
  double c = 0.5;       // on/off critic-loss mix
  double v = 0.5;       // actor mixing coefficient nu
  double C_1 = 0.01;
  double C_2 = 0.001;
  double bonus_beta = 0.001;  // the table's "beta": exploration bonus scale

  int N = 10;     // ensemble size
  int N_1 = 32;   // on-policy batch, transitions
  int N_2 = 5000;         // off-policy buffer capacity, episodes
  int on_buffer_episodes = 32;
  int off_batch_transitions = 64;  // off-policy batch, transitions of segment context
  int m = 8;                       // segment length for tree backup

  int W = 4;            // observation-window length
  int hidden = 64;      // actor/critic hidden width
  int mixer_hidden = 32;
  int X = 200;          // target-sync interval, updates

  double lr_actor = 5e-4;
  double lr_critic = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.1;  // of the nominal total env steps L * t_max

  bool weighting = true;              // uncertainty weights k_i in targets
  std::string exploration = "kurtosis";  // kurtosis | variance | none
  std::string actor_loss = "mixed";      // mixed | on | off
  bool wall_clock_real = false;  // real timings break byte-identical metrics

  uint64_t seed = 0;

  void validate() const;
  double effective_nu() const;     // actor_loss mode folded into v
  ExploreMode explore_mode() const;
};

TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);

/// One metrics record; training rows carry NaN in the eval columns and vice
/// versa.
struct MetricsRow {
  long step = 0;
  long episode = 0;
  double eval_return = 0.0;
  double eval_success = 0.0;
  double critic_loss = 0.0;
  double bhat_term = 0.0;
  double mean_k = 0.0;
  double mean_gbar = 0.0;
  double gate_open_frac = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double wall_clock = 0.0;
};

extern const char* const kMetricsHeader;
std::string metrics_csv_row(const MetricsRow& row);
std::vector<MetricsRow> parse_metrics_csv(const std::string& path);

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
};

struct TrainResult {
  std::string metrics_path;
  std::string checkpoint_path;
  std::vector<MetricsRow> rows;
  std::vector<long> eval_steps;
  std::vector<double> eval_returns;
  std::vector<double> eval_success;
  std::vector<double> critic_grad_norms;  // one per update, in order
  double final_diversity = 0.0;  // mean pairwise member Bhattacharyya at end
  EvalResult final_eval;
};

/// Sequential training loop: rollout with bonus-weighted selection, dual
/// replay, one critic and one actor update per episode, periodic target sync
/// and periodic decentralized evaluation. Deterministic in (config, seed).
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// Writes metrics.csv, config.json and checkpoint.bin under out_dir
  /// (created if missing; pass "" to keep everything in memory).
  TrainResult run(const std::string& out_dir);

  const TrainConfig& config() const { return cfg_; }
  const ParamStore& store() const { return store_; }
  ParamStore& store() { return store_; }
  const CriticBank& bank() const { return bank_; }
  const std::vector<Actor>& actors() const { return actors_; }
  const EnvSpec& env_spec() const { return env_->spec(); }

  /// U-episode decentralized evaluation (plain softmax actions, no bonus, no
  /// epsilon); isolated from the training random streams.
  EvalResult evaluate(int episodes, uint64_t eval_seed, long episode_index) const;

 private:
  Episode rollout(long episode_index);
  void critic_update(MetricsRow& row);
  void actor_update(MetricsRow& row);
  std::vector<const Episode*> on_batch_episodes() const;

  TrainConfig cfg_;
  std::unique_ptr<Env> env_;
  ParamStore store_;
  CriticBank bank_;
  std::vector<Actor> actors_;
  EpisodeBuffer on_buffer_;
  EpisodeBuffer off_buffer_;
  ExploreConfig explore_;
  Rng rollout_rng_{0};
  Rng sample_rng_{0};
  Rng env_seed_rng_{0};
  long global_step_ = 0;
  long update_count_ = 0;
};

/// Loads a checkpoint + config pair and evaluates it.
EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& config_path,
                               int episodes, uint64_t seed);

/// One train() per axis value, shared seed; returns results in value order.
/// axis in {exploration, actor_loss, C_2, N, beta, C_1, c}.
std::vector<TrainResult> run_ablation(const TrainConfig& base, const std::string& axis,
                                      const std::vector<std::string>& values,
                                      const std::string& out_dir);

}  // namespace emix
