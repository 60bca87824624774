#pragma once

#include "emix/actors.hpp"
#include "emix/critics.hpp"

namespace emix {

/// Fully observable tabular Dec-MDP with enumerable joint states/actions,
/// used for exact policy evaluation and the bias-bound certification.
struct TabularDecMDP {
  int num_states = 0;
  std::vector<int> num_actions;   // per agent
  std::vector<double> transition;  // [s][joint_a][s'], rows sum to 1
  std::vector<double> reward;      // [s][joint_a]
  std::vector<double> rho0;        // initial state distribution
  double gamma = 0.9;

  int num_agents() const { return static_cast<int>(num_actions.size()); }
  int num_joint() const;
  int joint_index(const std::vector<int>& a) const;
  std::vector<int> decode_joint(int ja) const;
  double p(int s, int ja, int s2) const {
    return transition[(static_cast<size_t>(s) * num_joint() + ja) * num_states + s2];
  }
  double r(int s, int ja) const {
    return reward[static_cast<size_t>(s) * num_joint() + ja];
  }
  void validate() const;

  static TabularDecMDP random(Rng& rng, int max_states, int num_agents, int max_actions,
                              double gamma);
};

/// pi[s][a] for one agent; strictly positive rows summing to 1.
using PolicyTable = std::vector<std::vector<double>>;
using JointPolicy = std::vector<PolicyTable>;  // per agent

/// joint[s][ja] = prod_i pi_i(a_i|s).
std::vector<double> joint_policy_table(const TabularDecMDP& mdp, const JointPolicy& pi);

/// Exact Q^pi_tot by direct linear solve of the Bellman evaluation system.
std::vector<double> exact_q_tot(const TabularDecMDP& mdp, const JointPolicy& pi);

/// V^pi(s) = sum_ja joint(ja|s) Q(s,ja).
std::vector<double> exact_v(const TabularDecMDP& mdp, const JointPolicy& pi,
                            const std::vector<double>& q_tot);

/// Q^pi_i(s, a_i) = sum_{a_-i} pi_-i(a_-i|s) Q^pi_tot(s, (a_i, a_-i)).
std::vector<std::vector<double>> exact_q_i(const TabularDecMDP& mdp, const JointPolicy& pi,
                                           const std::vector<double>& q_tot, int agent);

/// Unnormalized discounted state distribution rho(s) = sum_t gamma^t rho_t(s);
/// total mass 1/(1-gamma).
std::vector<double> discounted_distribution(const TabularDecMDP& mdp,
                                            const JointPolicy& pi);

/// max over states of KL(pi(.|s) || beta(.|s)) of the joint product
/// distributions; +inf when beta has a zero where pi is positive.
double max_kl(const TabularDecMDP& mdp, const JointPolicy& pi, const JointPolicy& beta);

/// Per-state joint KL via exact joint-action enumeration (cross-check path).
double max_kl_joint_enumeration(const TabularDecMDP& mdp, const JointPolicy& pi,
                                const JointPolicy& beta);

/// max over t <= t_max of ||rho_t^pi - rho_t^beta||_1 - 2 t sqrt(D_max^KL);
/// the lemma holds when the result is <= ~0.
double lemma1_check(const TabularDecMDP& mdp, const JointPolicy& pi,
                    const JointPolicy& beta, int t_max);

/// Gradient vectors of log pi_i(a|s) with respect to the flattened actor
/// parameters, evaluated on one-hot state encodings.
struct ScoreTable {
  std::vector<std::string> names;  // parameter order of the flattening
  int dim = 0;
  std::vector<std::vector<std::vector<double>>> score;  // [s][a][dim]
};

std::vector<double> onehot_state(const TabularDecMDP& mdp, int s);
PolicyTable policy_table_from_actor(const TabularDecMDP& mdp, const Actor& actor,
                                    const ParamStore& store);
ScoreTable score_table_from_actor(const TabularDecMDP& mdp, const Actor& actor,
                                  ParamStore& store);

/// Critic quantities per enumerated state: ensemble-mean Q tables, mixer
/// coefficients and bias.
struct CriticTables {
  std::vector<std::vector<std::vector<double>>> q_mean;  // [agent][s][a]
  std::vector<std::vector<double>> lambda;               // [s][agent]
  std::vector<double> bias;                              // [s]
};

CriticTables critic_tables_from_bank(const TabularDecMDP& mdp, const CriticBank& bank,
                                     const ParamStore& store);

/// Exact gradient of the true objective for agent i:
/// sum_s rho^pi(s) sum_{a_i} pi_i grad log pi_i * Q^pi_i(s, a_i).
std::vector<double> exact_true_grad(const TabularDecMDP& mdp, const JointPolicy& pi,
                                    int agent, const ScoreTable& scores,
                                    const std::vector<std::vector<double>>& q_i,
                                    const std::vector<double>& rho_pi);

/// Exact mixed gradient D^beta_nu with exact expectations instead of samples.
std::vector<double> exact_mixed_grad(const TabularDecMDP& mdp, const JointPolicy& pi,
                                     const JointPolicy& beta, int agent,
                                     const ScoreTable& scores, const CriticTables& critic,
                                     double nu, const std::vector<double>& rho_pi,
                                     const std::vector<double>& rho_beta);

struct BoundReport {
  double omega1 = 0.0;          // appendix maximand (used in the RHS)
  double omega1_printed = 0.0;  // as-printed maximand with the extra lambda factor
  double omega2 = 0.0;
  double d_max_kl = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool kl_infinite = false;  // bound vacuous
  bool holds = false;        // lhs <= rhs + 1e-9
};

/// Numerical certification of the per-agent bias bound.
BoundReport certify_bound(const TabularDecMDP& mdp, const JointPolicy& pi,
                          const JointPolicy& beta, int agent, const ScoreTable& scores,
                          const CriticTables& critic, double nu);

constexpr double kBoundTol = 1e-9;

struct SweepResult {
  int instances = 0;
  int bound_checks = 0;
  int bound_failures = 0;
  int lemma_failures = 0;
  double worst_bound_margin = 0.0;  // max over checks of lhs - rhs
  double worst_lemma_margin = 0.0;  // max over instances of the lemma slack
  std::vector<BoundReport> reports;
};

/// Randomized certification sweep: random tabular instances with random
/// network actors/critics, the bias bound checked per agent and the
/// distribution-shift lemma checked up to t_max_lemma steps.
SweepResult certification_sweep(uint64_t seed, int instances, int max_states,
                                int max_actions, int t_max_lemma);

}  // namespace emix
