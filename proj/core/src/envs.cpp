#include "emix/envs.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace emix {

namespace {

// dx, dy for up/down/left/right
constexpr int kMoveDx[4] = {0, 0, -1, 1};
constexpr int kMoveDy[4] = {-1, 1, 0, 0};

void check_joint(const EnvSpec& spec, const std::vector<int>& joint, bool done) {
  if (done) throw std::logic_error("step after termination");
  if (static_cast<int>(joint.size()) != spec.num_agents)
    throw std::invalid_argument("joint action size mismatch");
  for (int i = 0; i < spec.num_agents; ++i)
    if (joint[i] < 0 || joint[i] >= spec.num_actions[i])
      throw std::out_of_range("action index out of range");
}

void push_rel(std::vector<double>& obs, int dx, int dy, int radius) {
  if (std::abs(dx) <= radius && std::abs(dy) <= radius) {
    obs.push_back(1.0);
    obs.push_back(static_cast<double>(dx) / radius);
    obs.push_back(static_cast<double>(dy) / radius);
  } else {
    obs.push_back(0.0);
    obs.push_back(0.0);
    obs.push_back(0.0);
  }
}

void push_onehot(std::vector<double>& obs, int value, int n) {
  for (int k = 0; k < n; ++k) obs.push_back(k == value ? 1.0 : 0.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix game
// ---------------------------------------------------------------------------

MatrixGameEnv::MatrixGameEnv() {
  spec_.num_agents = 2;
  spec_.num_actions = {3, 3};
  spec_.obs_dim = 1;
  spec_.state_dim = 1;
  spec_.t_max = 1;
  spec_.gamma = 0.99;
  const double p[3][3] = {{8, -12, -12}, {-12, 0, 0}, {-12, 0, 6}};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) payoff_[r][c] = p[r][c];
}

StepResult MatrixGameEnv::reset(uint64_t /*seed*/) {
  done_ = false;
  success_ = false;
  StepResult res;
  res.obs = {{1.0}, {1.0}};
  res.state = {1.0};
  return res;
}

StepResult MatrixGameEnv::step(const std::vector<int>& joint_action) {
  check_joint(spec_, joint_action, done_);
  done_ = true;
  StepResult res;
  res.obs = {{1.0}, {1.0}};
  res.state = {1.0};
  res.reward = payoff_[joint_action[0]][joint_action[1]];
  res.terminated = true;
  success_ = res.reward == kOptimalPayoff;
  return res;
}

// ---------------------------------------------------------------------------
// Predator-prey
// ---------------------------------------------------------------------------

PredatorPreyEnv::PredatorPreyEnv() {
  spec_.num_agents = kPredators;
  spec_.num_actions = {5, 5, 5};
  // own pos (2) + two other predators (3 each) + prey (3) + last action (5)
  spec_.obs_dim = 2 + 3 * (kPredators - 1) + 3 + 5;
  spec_.state_dim = 2 * (kPredators + 1);
  spec_.t_max = 40;
  spec_.gamma = 0.99;
}

StepResult PredatorPreyEnv::reset(uint64_t seed) {
  rng_ = Rng(seed);
  // distinct random cells for the predators and the prey
  std::vector<int> cells;
  while (static_cast<int>(cells.size()) < kPredators + 1) {
    const int c = rng_.uniform_int(kGrid * kGrid);
    bool dup = false;
    for (int used : cells) dup = dup || used == c;
    if (!dup) cells.push_back(c);
  }
  for (int i = 0; i < kPredators; ++i) {
    px_[i] = cells[i] % kGrid;
    py_[i] = cells[i] / kGrid;
    last_action_[i] = -1;
  }
  prey_x_ = cells[kPredators] % kGrid;
  prey_y_ = cells[kPredators] / kGrid;
  t_ = 0;
  done_ = false;
  success_ = false;
  return observe();
}

StepResult PredatorPreyEnv::step(const std::vector<int>& joint_action) {
  check_joint(spec_, joint_action, done_);
  int capturing_adjacent = 0;
  for (int i = 0; i < kPredators; ++i) {
    const bool adjacent =
        std::abs(px_[i] - prey_x_) + std::abs(py_[i] - prey_y_) == 1;
    if (joint_action[i] == 4 && adjacent) ++capturing_adjacent;
  }
  for (int i = 0; i < kPredators; ++i) last_action_[i] = joint_action[i];
  ++t_;

  if (capturing_adjacent >= 2) {
    done_ = true;
    success_ = true;
    StepResult res = observe();
    res.reward = kCaptureReward;
    res.terminated = true;
    return res;
  }

  for (int i = 0; i < kPredators; ++i) {
    const int a = joint_action[i];
    if (a < 4) {
      const int nx = px_[i] + kMoveDx[a];
      const int ny = py_[i] + kMoveDy[a];
      if (nx >= 0 && nx < kGrid && ny >= 0 && ny < kGrid) {
        px_[i] = nx;
        py_[i] = ny;
      }
    }
  }
  // prey: uniform random legal move (staying put is always legal)
  {
    std::vector<int> moves = {-1};
    for (int a = 0; a < 4; ++a) {
      const int nx = prey_x_ + kMoveDx[a];
      const int ny = prey_y_ + kMoveDy[a];
      if (nx >= 0 && nx < kGrid && ny >= 0 && ny < kGrid) moves.push_back(a);
    }
    const int pick = moves[rng_.uniform_int(static_cast<int>(moves.size()))];
    if (pick >= 0) {
      prey_x_ += kMoveDx[pick];
      prey_y_ += kMoveDy[pick];
    }
  }

  StepResult res = observe();
  res.reward = kStepPenalty;
  if (t_ >= spec_.t_max) {
    done_ = true;
    res.terminated = true;
  }
  return res;
}

StepResult PredatorPreyEnv::observe() const {
  StepResult res;
  const double d = kGrid - 1;
  for (int i = 0; i < kPredators; ++i) {
    std::vector<double> obs;
    obs.reserve(spec_.obs_dim);
    obs.push_back(px_[i] / d);
    obs.push_back(py_[i] / d);
    for (int j = 0; j < kPredators; ++j) {
      if (j == i) continue;
      push_rel(obs, px_[j] - px_[i], py_[j] - py_[i], 2);
    }
    push_rel(obs, prey_x_ - px_[i], prey_y_ - py_[i], 2);
    push_onehot(obs, last_action_[i], 5);
    res.obs.push_back(std::move(obs));
  }
  for (int i = 0; i < kPredators; ++i) {
    res.state.push_back(px_[i] / d);
    res.state.push_back(py_[i] / d);
  }
  res.state.push_back(prey_x_ / d);
  res.state.push_back(prey_y_ / d);
  return res;
}

// ---------------------------------------------------------------------------
// Two corridors
// ---------------------------------------------------------------------------

TwoCorridorsEnv::TwoCorridorsEnv(long closure_episode, int t_max)
    : closure_episode_(closure_episode) {
  if (t_max < 1) throw std::invalid_argument("two_corridors: t_max must be positive");
  spec_.num_agents = 2;
  spec_.num_actions = {5, 5};
  // own pos (2) + other agent (3) + goal (3) + neighbor passability (4) + last action (5)
  spec_.obs_dim = 2 + 3 + 3 + 4 + 5;
  spec_.state_dim = 5;
  spec_.t_max = t_max;
  spec_.gamma = 0.99;
}

bool TwoCorridorsEnv::passable(int x, int y) const {
  if (x < 0 || x >= kWidth || y < 0 || y >= kHeight) return false;
  // short corridor: middle-row cells (5,2),(6,2),(7,2)
  if (y == 2 && x >= 5 && x <= 7 && !short_corridor_open()) return false;
  if (y == 2) return true;                    // middle row (short route + open area)
  if (y == 0) return true;                    // top row (long corridor)
  if (y == 1 && (x == 0 || x == kWidth - 1)) return true;  // vertical connectors
  return false;
}

StepResult TwoCorridorsEnv::reset(uint64_t /*seed*/) {
  ax_[0] = 0;
  ay_[0] = 2;
  ax_[1] = 1;
  ay_[1] = 2;
  last_action_[0] = last_action_[1] = -1;
  t_ = 0;
  done_ = false;
  success_ = false;
  return observe();
}

StepResult TwoCorridorsEnv::step(const std::vector<int>& joint_action) {
  check_joint(spec_, joint_action, done_);
  for (int i = 0; i < 2; ++i) {
    const int a = joint_action[i];
    last_action_[i] = a;
    // the goal cell is absorbing: an agent that has reached it stays put
    const bool on_goal = ax_[i] == kWidth - 1 && ay_[i] == 2;
    if (a < 4 && !on_goal) {
      const int nx = ax_[i] + kMoveDx[a];
      const int ny = ay_[i] + kMoveDy[a];
      if (passable(nx, ny)) {
        ax_[i] = nx;
        ay_[i] = ny;
      }
    }
  }
  ++t_;
  StepResult res = observe();
  const bool both_on_goal =
      ax_[0] == kWidth - 1 && ay_[0] == 2 && ax_[1] == kWidth - 1 && ay_[1] == 2;
  if (both_on_goal) {
    res.reward = kGoalReward;
    res.terminated = true;
    done_ = true;
    success_ = true;
  } else {
    res.reward = kStepPenalty;
    if (t_ >= spec_.t_max) {
      res.terminated = true;
      done_ = true;
    }
  }
  return res;
}

StepResult TwoCorridorsEnv::observe() const {
  StepResult res;
  const int gx = kWidth - 1, gy = 2;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> obs;
    obs.reserve(spec_.obs_dim);
    obs.push_back(static_cast<double>(ax_[i]) / (kWidth - 1));
    obs.push_back(static_cast<double>(ay_[i]) / (kHeight - 1));
    const int j = 1 - i;
    push_rel(obs, ax_[j] - ax_[i], ay_[j] - ay_[i], 2);
    push_rel(obs, gx - ax_[i], gy - ay_[i], 2);
    for (int a = 0; a < 4; ++a)
      obs.push_back(passable(ax_[i] + kMoveDx[a], ay_[i] + kMoveDy[a]) ? 1.0 : 0.0);
    push_onehot(obs, last_action_[i], 5);
    res.obs.push_back(std::move(obs));
  }
  for (int i = 0; i < 2; ++i) {
    res.state.push_back(static_cast<double>(ax_[i]) / (kWidth - 1));
    res.state.push_back(static_cast<double>(ay_[i]) / (kHeight - 1));
  }
  res.state.push_back(short_corridor_open() ? 1.0 : 0.0);
  return res;
}

bool closure_schedule(const TwoCorridorsEnv& env, long episode_index) {
  if (episode_index < 0) throw std::invalid_argument("negative episode index");
  return episode_index < env.closure_episode();
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(const std::string& id, const nlohmann::json& params) {
  if (id == "matrix_game") return std::make_unique<MatrixGameEnv>();
  if (id == "predator_prey") return std::make_unique<PredatorPreyEnv>();
  if (id == "two_corridors") {
    const long closure = params.value("closure_episode", 3000L);
    const int t_max = params.value("t_max", TwoCorridorsEnv::kDefaultTMax);
    return std::make_unique<TwoCorridorsEnv>(closure, t_max);
  }
  throw std::invalid_argument("unknown environment id: " + id);
}

void append_episode_jsonl(std::ostream& out, const Episode& episode) {
  for (const Transition& tr : episode) {
    nlohmann::json rec;
    rec["state"] = tr.state;
    rec["windows"] = tr.windows;
    rec["actions"] = tr.actions;
    rec["probs"] = tr.behavior_probs;
    rec["reward"] = tr.reward;
    rec["next_state"] = tr.next_state;
    rec["next_windows"] = tr.next_windows;
    rec["terminated"] = tr.terminated;
    out << rec.dump() << "\n";
  }
}

Episode parse_episode_jsonl(const std::vector<std::string>& lines) {
  Episode ep;
  for (const std::string& line : lines) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    Transition tr;
    tr.state = rec.at("state").get<std::vector<double>>();
    tr.windows = rec.at("windows").get<std::vector<std::vector<double>>>();
    tr.actions = rec.at("actions").get<std::vector<int>>();
    tr.behavior_probs = rec.at("probs").get<std::vector<double>>();
    tr.reward = rec.at("reward").get<double>();
    tr.next_state = rec.at("next_state").get<std::vector<double>>();
    tr.next_windows = rec.at("next_windows").get<std::vector<std::vector<double>>>();
    tr.terminated = rec.at("terminated").get<bool>();
    ep.push_back(std::move(tr));
  }
  return ep;
}

}  // namespace emix
