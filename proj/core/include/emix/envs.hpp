#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emix/episode.hpp"
#include "emix/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace emix {

struct EnvSpec {
  int num_agents = 0;
  std::vector<int> num_actions;  // per agent
  int obs_dim = 0;               // per agent
  int state_dim = 0;
  int t_max = 0;
  double gamma = 0.99;
};

struct StepResult {
  std::vector<std::vector<double>> obs;  // per agent
  double reward = 0.0;
  bool terminated = false;
  std::vector<double> state;  // training-time only (CTDE)
};

/// Cooperative Dec-POMDP environment. Deterministic function of
/// (seed, action sequence); every agent receives the identical shared reward.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual StepResult reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& joint_action) = 0;
  /// Episode-schedule hook (two-corridors closure); default no-op.
  virtual void set_episode_index(long /*episode*/) {}
  /// True when the last terminating step achieved the cooperative goal.
  virtual bool success() const = 0;
};

/// One-shot cooperative matrix game with a non-monotonic payoff. The payoff
/// requires both agents to commit to action 0 for the optimum (8) while any
/// unilateral deviation from a coordinated row is heavily penalized.
class MatrixGameEnv : public Env {
 public:
  MatrixGameEnv();
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool success() const override { return success_; }
  double payoff(int a0, int a1) const { return payoff_[a0][a1]; }
  static constexpr double kOptimalPayoff = 8.0;

 private:
  EnvSpec spec_;
  double payoff_[3][3];
  bool done_ = true;
  bool success_ = false;
};

/// 7x7 grid, 3 predators, 1 random-walk prey, 5 actions (4 moves + capture).
/// Capture succeeds when >= 2 predators adjacent to the prey choose the
/// capture action simultaneously: shared +10 and termination. Step penalty
/// -0.01. Observations are local (2-cell radius) per CTDE.
class PredatorPreyEnv : public Env {
 public:
  PredatorPreyEnv();
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool success() const override { return success_; }

  static constexpr int kGrid = 7;
  static constexpr int kPredators = 3;
  static constexpr double kCaptureReward = 10.0;
  static constexpr double kStepPenalty = -0.01;

 private:
  StepResult observe() const;
  EnvSpec spec_;
  Rng rng_{0};
  int px_[kPredators], py_[kPredators];
  int prey_x_ = 0, prey_y_ = 0;
  int last_action_[kPredators];
  int t_ = 0;
  bool done_ = true;
  bool success_ = false;
};

/// 9x5 grid, 2 agents. The goal cell sits behind either a 3-cell short
/// corridor (middle row) or a 9-cell long corridor (top row). Shared +10 when
/// both agents stand on the goal; -0.01 step penalty; moving into a wall or a
/// closed-corridor cell leaves the agent in place. The short corridor closes
/// for episode indices >= closure_episode.
class TwoCorridorsEnv : public Env {
 public:
  explicit TwoCorridorsEnv(long closure_episode, int t_max = kDefaultTMax);
  const EnvSpec& spec() const override { return spec_; }
  StepResult reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  void set_episode_index(long episode) override { episode_index_ = episode; }
  bool success() const override { return success_; }

  bool short_corridor_open() const { return episode_index_ < closure_episode_; }
  long closure_episode() const { return closure_episode_; }
  bool passable(int x, int y) const;

  static constexpr int kWidth = 9;
  static constexpr int kHeight = 5;
  static constexpr int kDefaultTMax = 200;
  static constexpr double kGoalReward = 10.0;
  static constexpr double kStepPenalty = -0.01;

 private:
  StepResult observe() const;
  EnvSpec spec_;
  long closure_episode_ = 0;
  long episode_index_ = 0;
  int ax_[2], ay_[2];
  int last_action_[2];
  int t_ = 0;
  bool done_ = true;
  bool success_ = false;
};

/// Open/closed flag of the short corridor for a given episode index.
bool closure_schedule(const TwoCorridorsEnv& env, long episode_index);

std::unique_ptr<Env> make_env(const std::string& id, const nlohmann::json& params);

/// Appends one JSON-lines record per step (state, observations, actions,
/// probabilities, reward, terminated) to `out`.
void append_episode_jsonl(std::ostream& out, const Episode& episode);
Episode parse_episode_jsonl(const std::vector<std::string>& lines);

}  // namespace emix
