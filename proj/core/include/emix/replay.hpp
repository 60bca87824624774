#pragma once

#include <deque>

#include "emix/episode.hpp"
#include "emix/rng.hpp"

namespace emix {

/// A contiguous slice of a stored episode; never crosses episode boundaries.
struct Segment {
  const Episode* episode = nullptr;
  int start = 0;
  int length = 0;
};

/// Ring of complete episodes. Episodes are stored whole because both target
/// computations need contiguous multi-step context.
class EpisodeBuffer {
 public:
  EpisodeBuffer(int capacity_episodes, int t_max)
      : capacity_(capacity_episodes), t_max_(t_max) {}

  /// Episode must be complete: terminated or t_max steps long.
  void push_episode(Episode episode);

  /// The n1 most recent episodes (on-policy semantics: recency).
  std::vector<const Episode*> sample_on(int n1) const;

  /// Uniformly random (episode, start) segments of length <= m, truncated at
  /// episode end, totaling at least n_transitions (or the whole buffer).
  std::vector<Segment> sample_off(int n_transitions, int segment_len, Rng& rng) const;

  int size() const { return static_cast<int>(episodes_.size()); }
  bool empty() const { return episodes_.empty(); }
  long total_transitions() const { return total_transitions_; }
  long pushed_count() const { return pushed_; }
  const Episode& episode(int i) const { return episodes_[i]; }

 private:
  int capacity_;
  int t_max_;
  std::deque<Episode> episodes_;
  long total_transitions_ = 0;
  long pushed_ = 0;
};

}  // namespace emix
