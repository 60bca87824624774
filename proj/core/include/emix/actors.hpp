#pragma once

#include "emix/critics.hpp"
#include "emix/mlp.hpp"

namespace emix {

/// Per-agent softmax policy over a fixed observation window.
class Actor {
 public:
  Actor() = default;
  Actor(int agent, int window_dim, int hidden, int num_actions);

  void init(ParamStore& store, Rng& rng) const { net_.init(store, rng); }

  /// Raw logits for one window.
  std::vector<double> logits(const ParamStore& store, const std::vector<double>& window) const;

  /// softmax(logits): strictly positive distribution.
  std::vector<double> policy(const ParamStore& store, const std::vector<double>& window) const;

  int agent() const { return agent_; }
  int num_actions() const { return num_actions_; }
  const Mlp& net() const { return net_; }

 private:
  int agent_ = 0;
  int num_actions_ = 0;
  Mlp net_;
};

/// U_i = lambda_i * (Q_i(tau_i, a_i) - sum_x pi_i(x|tau_i) Q_i(tau_i, x)).
double advantage(const std::vector<double>& mean_q, const std::vector<double>& pi,
                 double lambda_i, int action);

/// One actor-batch row for the on-policy arm: advantage treated as constant.
struct OnPolicyRow {
  const std::vector<double>* window = nullptr;
  int action = 0;
  double advantage = 0.0;
};

/// One row for the off-policy arm: Q_tot values over agent i's own actions,
/// with the co-players' stored actions fixed; treated as constants.
struct OffPolicyRow {
  const std::vector<double>* window = nullptr;
  std::vector<double> qtot_per_action;
};

/// Batch mean of grad log pi(a|tau) * U, as an ascent direction on the
/// policy objective.
std::map<std::string, Tensor2> on_policy_grad(const Actor& actor, ParamStore& store,
                                              const std::vector<OnPolicyRow>& batch);

/// Batch mean of grad sum_a pi(a|tau) * Q_tot(tau, (a, a_-i)); exact
/// enumeration over agent i's actions, ascent direction.
std::map<std::string, Tensor2> off_policy_grad(const Actor& actor, ParamStore& store,
                                               const std::vector<OffPolicyRow>& batch);

struct MixedUpdateResult {
  double grad_norm = 0.0;
};

/// Applies one Adam step along (1-nu)*on + nu*off (gradient ascent).
MixedUpdateResult mixed_update(const Actor& actor, ParamStore& store,
                               const std::vector<OnPolicyRow>& on_batch,
                               const std::vector<OffPolicyRow>& off_batch, double nu,
                               double lr, double beta1 = 0.9, double beta2 = 0.999,
                               double eps = 1e-8);

}  // namespace emix
