#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "emix/episode.hpp"
#include "emix/mlp.hpp"
#include "emix/replay.hpp"
#include "emix/stats.hpp"

namespace emix {

/// Per-agent policy lookup used when targets need current-policy
/// probabilities: returns the softmax distribution over agent `i`'s actions
/// for an observation window.
using PerAgentPolicy =
    std::function<std::vector<double>(int agent, const std::vector<double>& window)>;

/// Decomposition of Q_tot at one (state, joint action) point.
struct QtotEval {
  std::vector<double> chosen_q;   // per-agent mean Q at the taken action
  std::vector<double> raw_kurt;   // per-agent ensemble raw kurtosis at the taken action
  std::vector<double> k;          // uncertainty weights, (0.5, 1]; all 1 when disabled
  std::vector<double> lambda;     // mixer coefficients, > 0
  double bias = 0.0;
  double total = 0.0;
};

/// Per-agent critic ensembles plus the state-conditioned mixer, live and
/// target copies. Parameters live in one ParamStore under the prefixes
/// "critic/", "mixer/", "target/critic/", "target/mixer/".
class CriticBank {
 public:
  CriticBank() = default;
  static CriticBank create(int num_agents, std::vector<int> num_actions, int window_dim,
                           int state_dim, int n_members, int hidden, int mixer_hidden,
                           ParamStore& store, Rng& rng);

  int num_agents() const { return num_agents_; }
  int n_members() const { return n_members_; }
  const std::vector<int>& num_actions() const { return num_actions_; }

  const Mlp& member(int agent, int j, bool target = false) const;
  const Mlp& lambda_net(bool target = false) const;
  const Mlp& bias_net(bool target = false) const;

  /// Forward of one ensemble member: M_i action values.
  std::vector<double> member_q(const ParamStore& store, int agent, int j,
                               const std::vector<double>& window, bool target = false) const;

  /// All members at once: N x M_i.
  Tensor2 member_matrix(const ParamStore& store, int agent,
                        const std::vector<double>& window, bool target = false) const;

  /// Arithmetic mean over members, per action.
  std::vector<double> mean_q(const ParamStore& store, int agent,
                             const std::vector<double>& window, bool target = false) const;

  /// Mixer coefficients lambda_i(state) > 0 and bias b(state).
  std::vector<double> lambdas(const ParamStore& store, const std::vector<double>& state,
                              bool target = false) const;
  double mixer_bias(const ParamStore& store, const std::vector<double>& state,
                    bool target = false) const;

  /// Q_tot = sum_i k_i * lambda_i * Q_i + b from already-computed pieces.
  /// k_i = uncertainty_weight(raw kurtosis, C1) when weighting is enabled,
  /// else exactly 1.
  QtotEval mix(const ParamStore& store, const std::vector<double>& state,
               const std::vector<double>& chosen_q, const std::vector<double>& raw_kurt,
               bool weighting_enabled, double c1, bool target = false) const;

  /// Target-network Q'_tot at the stored (windows, actions) of a transition.
  /// Weighting applies only when `weighted` (next-state evaluations).
  double qtot_taken(const ParamStore& store, const std::vector<double>& state,
                    const std::vector<std::vector<double>>& windows,
                    const std::vector<int>& actions, bool weighted, double c1) const;

  /// Exact per-agent expectation E_{a~pi}[Q'_tot(tau, .)] over the additive
  /// decomposition, with next-state weighting.
  double expected_qtot(const ParamStore& store, const std::vector<double>& state,
                       const std::vector<std::vector<double>>& windows,
                       const PerAgentPolicy& policy, bool weighted, double c1) const;

  /// Bit-copies live parameters onto the target copies.
  void sync_targets(ParamStore& store) const;

  static constexpr double kLambdaFloor = 1e-8;

 private:
  int num_agents_ = 0;
  int n_members_ = 0;
  std::vector<int> num_actions_;
  int window_dim_ = 0;
  int state_dim_ = 0;
  std::vector<std::vector<Mlp>> members_;
  std::vector<std::vector<Mlp>> target_members_;
  Mlp lambda_net_, bias_net_, target_lambda_net_, target_bias_net_;
};

/// Per-action raw/excess kurtosis across ensemble members (matrix N x M).
std::vector<double> per_action_raw_kurtosis(const Tensor2& member_matrix);
std::vector<double> per_action_excess_kurtosis(const Tensor2& member_matrix);
std::vector<double> per_action_variance(const Tensor2& member_matrix);

/// TD(lambda) targets y_on for every step of a complete on-policy episode,
/// by backward recursion over the finite episode. Next-state evaluations are
/// uncertainty-weighted; current-step Q'_tot are not. Terminal bootstrap 0.
std::vector<double> td_lambda_target(const CriticBank& bank, const ParamStore& store,
                                     const Episode& episode, double trace_lambda,
                                     double gamma, double c1, bool weighting);

/// Tree-backup target y_off for an off-policy segment, with current-policy
/// probabilities recomputed via `policy`.
double tree_backup_target(const CriticBank& bank, const ParamStore& store,
                          const Segment& segment, const PerAgentPolicy& policy,
                          double trace_lambda, double gamma, double c1, bool weighting);

/// Rows entering the critic loss. `reg_extra` rows contribute only to the
/// Bhattacharyya regularizer.
struct CriticBatch {
  std::vector<const Transition*> on;
  std::vector<double> y_on;
  std::vector<const Transition*> off;
  std::vector<double> y_off;
  std::vector<const Transition*> reg_extra;
};

struct CriticLossResult {
  double loss = 0.0;
  double on_mse = 0.0;
  double off_mse = 0.0;
  double bhat_term = 0.0;  // average sum_i delta_B_total per row
  std::map<std::string, Tensor2> grads;
  double grad_norm = 0.0;
};

/// L = c*mean[(y_on - Q_tot)^2] + (1-c)*mean[(y_off - Q_tot)^2]
///     - C2 * mean_rows[sum_i delta_B_total^{Q_i}].
/// Gradients flow into every ensemble member and the mixer.
CriticLossResult critic_loss(const CriticBank& bank, ParamStore& store,
                             const CriticBatch& batch, double c, double c2);

/// Mean pairwise Bhattacharyya distance between member action distributions,
/// averaged over agents and the supplied windows (per agent).
double ensemble_diversity(const CriticBank& bank, const ParamStore& store,
                          const std::vector<std::vector<std::vector<double>>>& windows_per_agent);

}  // namespace emix
