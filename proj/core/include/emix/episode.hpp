#pragma once

#include <algorithm>
#include <vector>

namespace emix {

/// One environment step as stored in the replay buffers. Windows are the
/// fixed-length observation histories fed to actors and critics.
struct Transition {
  std::vector<double> state;
  std::vector<std::vector<double>> windows;       // per agent, W * obs_dim
  std::vector<int> actions;                       // K indices
  std::vector<double> behavior_probs;             // per agent, in (0,1]
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<std::vector<double>> next_windows;  // per agent
  bool terminated = false;
};

using Episode = std::vector<Transition>;

/// Fixed-length observation history: the last W observations concatenated,
/// zero-padded at episode start.
class ObsWindow {
 public:
  ObsWindow() = default;
  ObsWindow(int window_len, int obs_dim)
      : w_(window_len), obs_dim_(obs_dim), buf_(static_cast<size_t>(window_len) * obs_dim, 0.0) {}

  void reset() { std::fill(buf_.begin(), buf_.end(), 0.0); }

  void push(const std::vector<double>& obs) {
    // shift left by one observation slot, newest at the end
    std::copy(buf_.begin() + obs_dim_, buf_.end(), buf_.begin());
    std::copy(obs.begin(), obs.end(), buf_.end() - obs_dim_);
  }

  const std::vector<double>& flat() const { return buf_; }
  int dim() const { return w_ * obs_dim_; }

 private:
  int w_ = 0;
  int obs_dim_ = 0;
  std::vector<double> buf_;
};

}  // namespace emix
