#include "emix/replay.hpp"

#include <stdexcept>

namespace emix {

void EpisodeBuffer::push_episode(Episode episode) {
  if (episode.empty()) throw std::invalid_argument("push_episode: empty episode");
  const bool complete =
      episode.back().terminated || static_cast<int>(episode.size()) >= t_max_;
  if (!complete) throw std::invalid_argument("push_episode: incomplete episode");
  total_transitions_ += static_cast<long>(episode.size());
  episodes_.push_back(std::move(episode));
  ++pushed_;
  while (static_cast<int>(episodes_.size()) > capacity_) {
    total_transitions_ -= static_cast<long>(episodes_.front().size());
    episodes_.pop_front();
  }
}

std::vector<const Episode*> EpisodeBuffer::sample_on(int n1) const {
  if (episodes_.empty()) throw std::logic_error("sample_on: empty buffer");
  std::vector<const Episode*> out;
  const int n = std::min<int>(n1, static_cast<int>(episodes_.size()));
  for (int i = static_cast<int>(episodes_.size()) - n;
       i < static_cast<int>(episodes_.size()); ++i)
    out.push_back(&episodes_[i]);
  return out;
}

std::vector<Segment> EpisodeBuffer::sample_off(int n_transitions, int segment_len,
                                               Rng& rng) const {
  if (episodes_.empty()) throw std::logic_error("sample_off: empty buffer");
  if (segment_len < 1) throw std::invalid_argument("sample_off: segment_len < 1");
  std::vector<Segment> out;
  int total = 0;
  const int want = std::min<long>(n_transitions, total_transitions_);
  while (total < want) {
    const int e = rng.uniform_int(static_cast<int>(episodes_.size()));
    const Episode& ep = episodes_[e];
    const int start = rng.uniform_int(static_cast<int>(ep.size()));
    const int len = std::min<int>(segment_len, static_cast<int>(ep.size()) - start);
    out.push_back({&ep, start, len});
    total += len;
  }
  return out;
}

}  // namespace emix
