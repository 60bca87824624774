#include "emix/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace emix {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (L < 0) throw std::invalid_argument("config: L < 0");
  if (T < 1) throw std::invalid_argument("config: T < 1");
  if (eval_interval_scale <= 0.0) throw std::invalid_argument("config: eval_interval_scale <= 0");
  if (U < 1) throw std::invalid_argument("config: U < 1");
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("config: gamma outside (0,1)");
  if (!in01(lambda)) throw std::invalid_argument("config: lambda outside [0,1]");
  if (!in01(c)) throw std::invalid_argument("config: c outside [0,1]");
  if (!in01(v)) throw std::invalid_argument("config: v outside [0,1]");
  if (C_1 <= 0.0) throw std::invalid_argument("config: C_1 <= 0");
  if (C_2 < 0.0) throw std::invalid_argument("config: C_2 < 0");
  if (bonus_beta < 0.0) throw std::invalid_argument("config: beta < 0");
  if (N < 2) throw std::invalid_argument("config: ensemble size N < 2");
  if (N_1 < 1 || N_2 < 1 || on_buffer_episodes < 1 || off_batch_transitions < 1)
    throw std::invalid_argument("config: batch/buffer sizes must be >= 1");
  if (m < 1) throw std::invalid_argument("config: m < 1");
  if (W < 1) throw std::invalid_argument("config: W < 1");
  if (hidden < 1 || mixer_hidden < 1) throw std::invalid_argument("config: hidden < 1");
  if (X < 1) throw std::invalid_argument("config: X < 1");
  if (lr_actor <= 0.0 || lr_critic <= 0.0) throw std::invalid_argument("config: lr <= 0");
  if (!in01(epsilon_start) || !in01(epsilon_end) || !in01(epsilon_decay_fraction))
    throw std::invalid_argument("config: epsilon fields outside [0,1]");
  if (exploration != "kurtosis" && exploration != "variance" && exploration != "none")
    throw std::invalid_argument("config: unknown exploration mode '" + exploration + "'");
  if (actor_loss != "mixed" && actor_loss != "on" && actor_loss != "off")
    throw std::invalid_argument("config: unknown actor_loss mode '" + actor_loss + "'");
}

double TrainConfig::effective_nu() const {
  if (actor_loss == "on") return 0.0;
  if (actor_loss == "off") return 1.0;
  return v;
}

ExploreMode TrainConfig::explore_mode() const {
  if (exploration == "kurtosis") return ExploreMode::kKurtosisGated;
  if (exploration == "variance") return ExploreMode::kVarianceAlways;
  return ExploreMode::kNone;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig d;
  TrainConfig c;
  c.environment = j.value("environment", d.environment);
  c.env_params = j.value("env_params", d.env_params);
  c.L = j.value("L", d.L);
  c.T = j.value("T", d.T);
  c.eval_interval_scale = j.value("eval_interval_scale", d.eval_interval_scale);
  c.U = j.value("U", d.U);
  c.gamma = j.value("gamma", d.gamma);
  c.lambda = j.value("lambda", d.lambda);
  c.c = j.value("c", d.c);
  c.v = j.value("v", d.v);
  c.C_1 = j.value("C_1", d.C_1);
  c.C_2 = j.value("C_2", d.C_2);
  c.bonus_beta = j.value("beta", j.value("bonus_beta", d.bonus_beta));
  c.N = j.value("N", d.N);
  c.N_1 = j.value("N_1", d.N_1);
  c.N_2 = j.value("N_2", d.N_2);
  c.on_buffer_episodes = j.value("on_buffer_episodes", d.on_buffer_episodes);
  c.off_batch_transitions = j.value("off_batch_transitions", d.off_batch_transitions);
  c.m = j.value("m", d.m);
  c.W = j.value("W", d.W);
  c.hidden = j.value("hidden", d.hidden);
  c.mixer_hidden = j.value("mixer_hidden", d.mixer_hidden);
  c.X = j.value("X", d.X);
  c.lr_actor = j.value("lr_actor", d.lr_actor);
  c.lr_critic = j.value("lr_critic", d.lr_critic);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.epsilon_start = j.value("epsilon_start", d.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", d.epsilon_end);
  c.epsilon_decay_fraction = j.value("epsilon_decay_fraction", d.epsilon_decay_fraction);
  c.weighting = j.value("weighting", d.weighting);
  c.exploration = j.value("exploration", d.exploration);
  c.actor_loss = j.value("actor_loss", d.actor_loss);
  c.wall_clock_real = j.value("wall_clock_real", d.wall_clock_real);
  c.seed = j.value("seed", d.seed);
  c.validate();
  return c;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["environment"] = c.environment;
  j["env_params"] = c.env_params;
  j["L"] = c.L;
  j["T"] = c.T;
  j["eval_interval_scale"] = c.eval_interval_scale;
  j["U"] = c.U;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["c"] = c.c;
  j["v"] = c.v;
  j["C_1"] = c.C_1;
  j["C_2"] = c.C_2;
  j["beta"] = c.bonus_beta;
  j["N"] = c.N;
  j["N_1"] = c.N_1;
  j["N_2"] = c.N_2;
  j["on_buffer_episodes"] = c.on_buffer_episodes;
  j["off_batch_transitions"] = c.off_batch_transitions;
  j["m"] = c.m;
  j["W"] = c.W;
  j["hidden"] = c.hidden;
  j["mixer_hidden"] = c.mixer_hidden;
  j["X"] = c.X;
  j["lr_actor"] = c.lr_actor;
  j["lr_critic"] = c.lr_critic;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["epsilon_start"] = c.epsilon_start;
  j["epsilon_end"] = c.epsilon_end;
  j["epsilon_decay_fraction"] = c.epsilon_decay_fraction;
  j["weighting"] = c.weighting;
  j["exploration"] = c.exploration;
  j["actor_loss"] = c.actor_loss;
  j["wall_clock_real"] = c.wall_clock_real;
  j["seed"] = c.seed;
  return j;
}

const char* const kMetricsHeader =
    "step,episode,eval_return,eval_success,critic_loss,bhat_term,mean_k,mean_gbar,"
    "gate_open_frac,actor_grad_norm,critic_grad_norm,wall_clock";

std::string metrics_csv_row(const MetricsRow& r) {
  std::string s = std::to_string(r.step) + "," + std::to_string(r.episode);
  for (double v : {r.eval_return, r.eval_success, r.critic_loss, r.bhat_term, r.mean_k,
                   r.mean_gbar, r.gate_open_frac, r.actor_grad_norm, r.critic_grad_norm,
                   r.wall_clock})
    s += "," + fmt(v);
  return s;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_metrics_csv: cannot open " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12)
      throw std::runtime_error("parse_metrics_csv: malformed row in " + path);
    MetricsRow r;
    r.step = std::stol(cells[0]);
    r.episode = std::stol(cells[1]);
    double* fields[] = {&r.eval_return, &r.eval_success, &r.critic_loss, &r.bhat_term,
                        &r.mean_k,      &r.mean_gbar,    &r.gate_open_frac,
                        &r.actor_grad_norm, &r.critic_grad_norm, &r.wall_clock};
    for (int i = 0; i < 10; ++i) *fields[i] = std::strtod(cells[i + 2].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      on_buffer_(1, 1),
      off_buffer_(1, 1) {
  cfg_.validate();
  env_ = make_env(cfg_.environment, cfg_.env_params);
  const EnvSpec& spec = env_->spec();
  on_buffer_ = EpisodeBuffer(cfg_.on_buffer_episodes, spec.t_max);
  off_buffer_ = EpisodeBuffer(cfg_.N_2, spec.t_max);

  Rng master(cfg_.seed);
  Rng init_rng = master.split(1);
  rollout_rng_ = master.split(2);
  sample_rng_ = master.split(3);
  env_seed_rng_ = master.split(4);

  const int window_dim = cfg_.W * spec.obs_dim;
  bank_ = CriticBank::create(spec.num_agents, spec.num_actions, window_dim, spec.state_dim,
                             cfg_.N, cfg_.hidden, cfg_.mixer_hidden, store_, init_rng);
  for (int i = 0; i < spec.num_agents; ++i) {
    actors_.emplace_back(i, window_dim, cfg_.hidden, spec.num_actions[i]);
    actors_.back().init(store_, init_rng);
  }

  explore_.bonus_beta = cfg_.bonus_beta;
  explore_.c1 = cfg_.C_1;
  explore_.mode = cfg_.explore_mode();
  explore_.epsilon.start = cfg_.epsilon_start;
  explore_.epsilon.end = cfg_.epsilon_end;
  explore_.epsilon.decay_steps = static_cast<long>(
      cfg_.epsilon_decay_fraction * static_cast<double>(cfg_.L) * spec.t_max);
}

Episode Trainer::rollout(long episode_index) {
  const EnvSpec& spec = env_->spec();
  env_->set_episode_index(episode_index);
  StepResult sr = env_->reset(env_seed_rng_.next_u64());
  std::vector<ObsWindow> windows(spec.num_agents, ObsWindow(cfg_.W, spec.obs_dim));
  for (int i = 0; i < spec.num_agents; ++i) windows[i].push(sr.obs[i]);

  Episode ep;
  while (true) {
    const double eps = explore_.epsilon.value(global_step_ + static_cast<long>(ep.size()));
    Transition t;
    t.state = sr.state;
    t.windows.resize(spec.num_agents);
    t.actions.resize(spec.num_agents);
    t.behavior_probs.resize(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
      t.windows[i] = windows[i].flat();
      const ActionChoice ch = select_action(actors_[i], bank_, store_, t.windows[i],
                                            explore_, eps, rollout_rng_);
      t.actions[i] = ch.action;
      t.behavior_probs[i] = ch.probability;
    }
    sr = env_->step(t.actions);
    t.reward = sr.reward;
    t.terminated = sr.terminated;
    t.next_state = sr.state;
    t.next_windows.resize(spec.num_agents);
    for (int i = 0; i < spec.num_agents; ++i) {
      windows[i].push(sr.obs[i]);
      t.next_windows[i] = windows[i].flat();
    }
    ep.push_back(std::move(t));
    if (sr.terminated || static_cast<int>(ep.size()) >= spec.t_max) break;
  }
  return ep;
}

std::vector<const Episode*> Trainer::on_batch_episodes() const {
  int count = 0;
  long transitions = 0;
  for (int i = on_buffer_.size() - 1; i >= 0 && transitions < cfg_.N_1; --i) {
    transitions += static_cast<long>(on_buffer_.episode(i).size());
    ++count;
  }
  return on_buffer_.sample_on(count);
}

void Trainer::critic_update(MetricsRow& row) {
  const PerAgentPolicy policy = [this](int agent, const std::vector<double>& w) {
    return actors_[agent].policy(store_, w);
  };

  CriticBatch batch;
  const std::vector<const Episode*> on_eps = on_batch_episodes();
  for (const Episode* ep : on_eps) {
    const std::vector<double> y = td_lambda_target(bank_, store_, *ep, cfg_.lambda,
                                                   cfg_.gamma, cfg_.C_1, cfg_.weighting);
    for (size_t t = 0; t < ep->size(); ++t) {
      batch.on.push_back(&(*ep)[t]);
      batch.y_on.push_back(y[t]);
    }
  }
  const std::vector<Segment> segs =
      off_buffer_.sample_off(cfg_.off_batch_transitions, cfg_.m, sample_rng_);
  for (const Segment& s : segs) {
    batch.off.push_back(&(*s.episode)[s.start]);
    batch.y_off.push_back(tree_backup_target(bank_, store_, s, policy, cfg_.lambda,
                                             cfg_.gamma, cfg_.C_1, cfg_.weighting));
  }

  CriticLossResult res = critic_loss(bank_, store_, batch, cfg_.c, cfg_.C_2);
  if (!std::isfinite(res.loss))
    throw std::runtime_error("train: non-finite critic loss at episode " +
                             std::to_string(row.episode));
  store_.adam_step(res.grads, cfg_.lr_critic, cfg_.adam_beta1, cfg_.adam_beta2,
                   cfg_.adam_eps);
  row.critic_loss = res.loss;
  row.bhat_term = res.bhat_term;
  row.critic_grad_norm = res.grad_norm;
}

void Trainer::actor_update(MetricsRow& row) {
  const EnvSpec& spec = env_->spec();
  const double nu = cfg_.effective_nu();
  const std::vector<const Episode*> on_eps = on_batch_episodes();

  std::vector<std::vector<OnPolicyRow>> on_rows(spec.num_agents);
  if (nu < 1.0) {
    for (const Episode* ep : on_eps)
      for (const Transition& t : *ep) {
        const std::vector<double> lam = bank_.lambdas(store_, t.state);
        for (int i = 0; i < spec.num_agents; ++i) {
          const std::vector<double> q = bank_.mean_q(store_, i, t.windows[i]);
          const std::vector<double> pi = actors_[i].policy(store_, t.windows[i]);
          on_rows[i].push_back(
              {&t.windows[i], t.actions[i], advantage(q, pi, lam[i], t.actions[i])});
        }
      }
  }

  std::vector<std::vector<OffPolicyRow>> off_rows(spec.num_agents);
  if (nu > 0.0) {
    const std::vector<Segment> segs =
        off_buffer_.sample_off(cfg_.off_batch_transitions, cfg_.m, sample_rng_);
    for (const Segment& s : segs) {
      const Transition& t = (*s.episode)[s.start];
      const std::vector<double> lam = bank_.lambdas(store_, t.state);
      const double bias = bank_.mixer_bias(store_, t.state);
      std::vector<std::vector<double>> q(spec.num_agents);
      double base = bias;
      for (int j = 0; j < spec.num_agents; ++j) {
        q[j] = bank_.mean_q(store_, j, t.windows[j]);
        base += lam[j] * q[j][t.actions[j]];
      }
      for (int i = 0; i < spec.num_agents; ++i) {
        OffPolicyRow r;
        r.window = &t.windows[i];
        r.qtot_per_action.resize(spec.num_actions[i]);
        for (int a = 0; a < spec.num_actions[i]; ++a)
          r.qtot_per_action[a] =
              base - lam[i] * q[i][t.actions[i]] + lam[i] * q[i][a];
        off_rows[i].push_back(std::move(r));
      }
    }
  }

  double norm_sum = 0.0;
  for (int i = 0; i < spec.num_agents; ++i) {
    const MixedUpdateResult res =
        mixed_update(actors_[i], store_, on_rows[i], off_rows[i], nu, cfg_.lr_actor,
                     cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
    norm_sum += res.grad_norm;
  }
  row.actor_grad_norm = norm_sum / spec.num_agents;
}

EvalResult Trainer::evaluate(int episodes, uint64_t eval_seed, long episode_index) const {
  std::unique_ptr<Env> env = make_env(cfg_.environment, cfg_.env_params);
  const EnvSpec& spec = env->spec();
  env->set_episode_index(episode_index);
  Rng rng(eval_seed);
  double ret_sum = 0.0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    StepResult sr = env->reset(rng.next_u64());
    std::vector<ObsWindow> windows(spec.num_agents, ObsWindow(cfg_.W, spec.obs_dim));
    for (int i = 0; i < spec.num_agents; ++i) windows[i].push(sr.obs[i]);
    double ret = 0.0;
    int t = 0;
    while (true) {
      std::vector<int> joint(spec.num_agents);
      for (int i = 0; i < spec.num_agents; ++i)
        joint[i] = eval_action(actors_[i], store_, windows[i].flat(), rng);
      sr = env->step(joint);
      ret += sr.reward;
      for (int i = 0; i < spec.num_agents; ++i) windows[i].push(sr.obs[i]);
      ++t;
      if (sr.terminated || t >= spec.t_max) break;
    }
    ret_sum += ret;
    if (env->success()) ++successes;
  }
  return {ret_sum / episodes, static_cast<double>(successes) / episodes};
}

TrainResult Trainer::run(const std::string& out_dir) {
  TrainResult result;
  std::ofstream metrics;
  const auto t0 = std::chrono::steady_clock::now();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    result.metrics_path = out_dir + "/metrics.csv";
    result.checkpoint_path = out_dir + "/checkpoint.bin";
    metrics.open(result.metrics_path, std::ios::binary);
    if (!metrics) throw std::runtime_error("train: cannot open " + result.metrics_path);
    metrics << kMetricsHeader << "\n";
    std::ofstream cfg_out(out_dir + "/config.json", std::ios::binary);
    cfg_out << config_to_json(cfg_).dump(2) << "\n";
  }

  auto wall = [&]() {
    if (!cfg_.wall_clock_real) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto emit = [&](const MetricsRow& r) {
    result.rows.push_back(r);
    if (metrics.is_open()) metrics << metrics_csv_row(r) << "\n";
  };
  auto run_eval = [&](long episode) {
    const uint64_t s =
        cfg_.seed * 0x9e3779b97f4a7c15ull + 0xe7037ed1a0b428dbull +
        static_cast<uint64_t>(result.eval_steps.size());
    const EvalResult ev = evaluate(cfg_.U, s, episode);
    MetricsRow r;
    r.step = global_step_;
    r.episode = episode;
    r.eval_return = ev.mean_return;
    r.eval_success = ev.success_rate;
    r.critic_loss = r.bhat_term = r.mean_k = r.mean_gbar = kNan;
    r.gate_open_frac = r.actor_grad_norm = r.critic_grad_norm = kNan;
    r.wall_clock = wall();
    emit(r);
    result.eval_steps.push_back(global_step_);
    result.eval_returns.push_back(ev.mean_return);
    result.eval_success.push_back(ev.success_rate);
    result.final_eval = ev;
  };

  const long eval_interval =
      std::max<long>(1, static_cast<long>(cfg_.T * cfg_.eval_interval_scale));
  long next_eval = 0;

  for (long e = 0; e < cfg_.L; ++e) {
    if (global_step_ >= next_eval) {
      run_eval(e);
      while (next_eval <= global_step_) next_eval += eval_interval;
    }
    Episode ep = rollout(e);
    global_step_ += static_cast<long>(ep.size());

    MetricsRow row;
    row.step = global_step_;
    row.episode = e + 1;
    row.eval_return = row.eval_success = kNan;
    row.wall_clock = 0.0;

    // Gate/weight diagnostics on the fresh episode.
    const EnvSpec& spec = env_->spec();
    double k_sum = 0.0, gbar_sum = 0.0;
    long n_stats = 0, n_open = 0;
    for (const Transition& t : ep)
      for (int i = 0; i < spec.num_agents; ++i) {
        const Tensor2 m = bank_.member_matrix(store_, i, t.windows[i]);
        const double raw = per_action_raw_kurtosis(m)[t.actions[i]];
        k_sum += cfg_.weighting ? uncertainty_weight(raw, cfg_.C_1) : 1.0;
        const double g = mean_excess_kurtosis(m);
        gbar_sum += g;
        if (g > 0.0) ++n_open;
        ++n_stats;
      }
    row.mean_k = k_sum / n_stats;
    row.mean_gbar = gbar_sum / n_stats;
    row.gate_open_frac = static_cast<double>(n_open) / n_stats;

    on_buffer_.push_episode(ep);
    off_buffer_.push_episode(std::move(ep));

    critic_update(row);
    actor_update(row);
    result.critic_grad_norms.push_back(row.critic_grad_norm);

    ++update_count_;
    if (update_count_ % cfg_.X == 0) bank_.sync_targets(store_);

    row.wall_clock = wall();
    emit(row);
  }
  if (cfg_.L > 0) run_eval(cfg_.L);

  // End-of-training ensemble diversity over recent windows.
  if (!on_buffer_.empty()) {
    const EnvSpec& spec = env_->spec();
    std::vector<std::vector<std::vector<double>>> win(spec.num_agents);
    for (const Episode* ep : on_batch_episodes())
      for (const Transition& t : *ep)
        for (int i = 0; i < spec.num_agents; ++i)
          if (static_cast<int>(win[i].size()) < 64) win[i].push_back(t.windows[i]);
    result.final_diversity = ensemble_diversity(bank_, store_, win);
  }

  if (!out_dir.empty()) {
    metrics.close();
    save_checkpoint(result.checkpoint_path, {{"", &store_}});
  }
  return result;
}

EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& config_path,
                               int episodes, uint64_t seed) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("evaluate: cannot open " + config_path);
  nlohmann::json j;
  in >> j;
  TrainConfig cfg = config_from_json(j);
  Trainer trainer(cfg);
  load_checkpoint(ckpt_path, {{"", &trainer.store()}});
  return trainer.evaluate(episodes, seed, cfg.L);
}

std::vector<TrainResult> run_ablation(const TrainConfig& base, const std::string& axis,
                                      const std::vector<std::string>& values,
                                      const std::string& out_dir) {
  std::vector<TrainResult> results;
  for (const std::string& value : values) {
    TrainConfig cfg = base;
    if (axis == "exploration")
      cfg.exploration = value;
    else if (axis == "actor_loss")
      cfg.actor_loss = value;
    else if (axis == "C_2")
      cfg.C_2 = std::stod(value);
    else if (axis == "N")
      cfg.N = std::stoi(value);
    else if (axis == "beta")
      cfg.bonus_beta = std::stod(value);
    else if (axis == "C_1")
      cfg.C_1 = std::stod(value);
    else if (axis == "c")
      cfg.c = std::stod(value);
    else
      throw std::invalid_argument("run_ablation: unknown axis '" + axis + "'");
    cfg.validate();
    std::string tag = value;
    for (char& ch : tag)
      if (ch == '.' || ch == '/' || ch == ' ') ch = '_';
    Trainer trainer(cfg);
    results.push_back(
        trainer.run(out_dir.empty() ? "" : out_dir + "/" + axis + "_" + tag));
  }
  return results;
}

}  // namespace emix
