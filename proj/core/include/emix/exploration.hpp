#pragma once

#include "emix/actors.hpp"
#include "emix/critics.hpp"

namespace emix {

enum class ExploreMode { kKurtosisGated, kVarianceAlways, kNone };

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long decay_steps = 0;  // linear decay over this many steps, then constant

  double value(long step) const {
    if (decay_steps <= 0 || step >= decay_steps) return end;
    const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + f * (end - start);
  }
};

struct ExploreConfig {
  double bonus_beta = 0.001;  // the paper's exploration-bonus scale
  double c1 = 0.01;
  EpsilonSchedule epsilon;
  ExploreMode mode = ExploreMode::kKurtosisGated;
};

/// Mean excess kurtosis over the M_i actions of agent i's ensemble: the
/// exploration gate statistic g-bar.
double mean_excess_kurtosis(const Tensor2& member_matrix);

/// Gated logit bonus: z~_j = z_j + beta*kappa_j if gbar > 0, else z_j.
std::vector<double> weighted_logits(const std::vector<double>& logits,
                                    const std::vector<double>& excess_kurt, double gbar,
                                    double beta);

/// Ablation arm: z~_j = z_j + beta*var_j unconditionally.
std::vector<double> variance_bonus_logits(const std::vector<double>& logits,
                                          const std::vector<double>& variances,
                                          double beta);

struct ActionChoice {
  int action = 0;
  double probability = 0.0;  // exact epsilon-mixture probability of `action`
  double gbar = 0.0;
  bool gate_open = false;
};

/// Training-time action selection: with probability epsilon a uniform random
/// action, otherwise a sample from softmax of the (possibly bonus-weighted)
/// logits. Returns the exact mixture probability of the chosen action.
ActionChoice select_action(const Actor& actor, const CriticBank& bank,
                           const ParamStore& store, const std::vector<double>& window,
                           const ExploreConfig& cfg, double epsilon, Rng& rng);

/// Decentralized-execution selection: plain softmax of the raw logits, no
/// bonus and no epsilon; independent of the critics entirely.
int eval_action(const Actor& actor, const ParamStore& store,
                const std::vector<double>& window, Rng& rng);

}  // namespace emix
