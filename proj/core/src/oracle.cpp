#include "emix/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace emix {

int TabularDecMDP::num_joint() const {
  int n = 1;
  for (int m : num_actions) n *= m;
  return n;
}

int TabularDecMDP::joint_index(const std::vector<int>& a) const {
  if (static_cast<int>(a.size()) != num_agents())
    throw std::invalid_argument("joint_index: wrong arity");
  int idx = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= num_actions[i])
      throw std::out_of_range("joint_index: action out of range");
    idx = idx * num_actions[i] + a[i];
  }
  return idx;
}

std::vector<int> TabularDecMDP::decode_joint(int ja) const {
  std::vector<int> a(num_agents());
  for (int i = num_agents() - 1; i >= 0; --i) {
    a[i] = ja % num_actions[i];
    ja /= num_actions[i];
  }
  return a;
}

void TabularDecMDP::validate() const {
  if (num_states < 1) throw std::invalid_argument("TabularDecMDP: no states");
  if (num_actions.empty()) throw std::invalid_argument("TabularDecMDP: no agents");
  const int ja_n = num_joint();
  if (static_cast<int>(transition.size()) != num_states * ja_n * num_states ||
      static_cast<int>(reward.size()) != num_states * ja_n ||
      static_cast<int>(rho0.size()) != num_states)
    throw std::invalid_argument("TabularDecMDP: table size mismatch");
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("TabularDecMDP: gamma outside (0,1)");
  for (int s = 0; s < num_states; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      double row = 0.0;
      for (int s2 = 0; s2 < num_states; ++s2) {
        const double v = p(s, ja, s2);
        if (v < 0.0) throw std::invalid_argument("TabularDecMDP: negative probability");
        row += v;
      }
      if (std::abs(row - 1.0) > 1e-9)
        throw std::invalid_argument("TabularDecMDP: transition row does not sum to 1");
    }
  double mass = 0.0;
  for (double v : rho0) {
    if (v < 0.0) throw std::invalid_argument("TabularDecMDP: negative rho0");
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-9)
    throw std::invalid_argument("TabularDecMDP: rho0 does not sum to 1");
}

TabularDecMDP TabularDecMDP::random(Rng& rng, int max_states, int num_agents,
                                    int max_actions, double gamma) {
  TabularDecMDP mdp;
  mdp.gamma = gamma;
  mdp.num_states = 2 + rng.uniform_int(std::max(1, max_states - 1));
  for (int i = 0; i < num_agents; ++i)
    mdp.num_actions.push_back(2 + rng.uniform_int(std::max(1, max_actions - 1)));
  const int ja_n = mdp.num_joint();
  mdp.transition.resize(static_cast<size_t>(mdp.num_states) * ja_n * mdp.num_states);
  mdp.reward.resize(static_cast<size_t>(mdp.num_states) * ja_n);
  mdp.rho0.resize(mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      double row = 0.0;
      const size_t base = (static_cast<size_t>(s) * ja_n + ja) * mdp.num_states;
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        const double w = 0.05 + rng.uniform();  // keep rows bounded away from degenerate
        mdp.transition[base + s2] = w;
        row += w;
      }
      for (int s2 = 0; s2 < mdp.num_states; ++s2) mdp.transition[base + s2] /= row;
      mdp.reward[static_cast<size_t>(s) * ja_n + ja] = rng.uniform(-1.0, 1.0);
    }
  double mass = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    mdp.rho0[s] = 0.05 + rng.uniform();
    mass += mdp.rho0[s];
  }
  for (double& v : mdp.rho0) v /= mass;
  mdp.validate();
  return mdp;
}

std::vector<double> joint_policy_table(const TabularDecMDP& mdp, const JointPolicy& pi) {
  if (static_cast<int>(pi.size()) != mdp.num_agents())
    throw std::invalid_argument("joint_policy_table: agent count mismatch");
  const int ja_n = mdp.num_joint();
  std::vector<double> joint(static_cast<size_t>(mdp.num_states) * ja_n);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      const std::vector<int> a = mdp.decode_joint(ja);
      double prod = 1.0;
      for (int i = 0; i < mdp.num_agents(); ++i) prod *= pi[i][s][a[i]];
      joint[static_cast<size_t>(s) * ja_n + ja] = prod;
    }
  return joint;
}

namespace {

// Induced state chain P_pi(s, s') and expected reward R_pi(s).
void induced_chain(const TabularDecMDP& mdp, const std::vector<double>& joint,
                   Eigen::MatrixXd& p_pi, Eigen::VectorXd& r_pi) {
  const int s_n = mdp.num_states;
  const int ja_n = mdp.num_joint();
  p_pi.setZero(s_n, s_n);
  r_pi.setZero(s_n);
  for (int s = 0; s < s_n; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      const double w = joint[static_cast<size_t>(s) * ja_n + ja];
      if (w == 0.0) continue;
      r_pi(s) += w * mdp.r(s, ja);
      for (int s2 = 0; s2 < s_n; ++s2) p_pi(s, s2) += w * mdp.p(s, ja, s2);
    }
}

}  // namespace

std::vector<double> exact_q_tot(const TabularDecMDP& mdp, const JointPolicy& pi) {
  const std::vector<double> joint = joint_policy_table(mdp, pi);
  const int s_n = mdp.num_states;
  const int ja_n = mdp.num_joint();
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd r_pi;
  induced_chain(mdp, joint, p_pi, r_pi);
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(s_n, s_n) - mdp.gamma * p_pi;
  const Eigen::VectorXd v = a.partialPivLu().solve(r_pi);
  std::vector<double> q(static_cast<size_t>(s_n) * ja_n);
  for (int s = 0; s < s_n; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      double x = mdp.r(s, ja);
      for (int s2 = 0; s2 < s_n; ++s2) x += mdp.gamma * mdp.p(s, ja, s2) * v(s2);
      q[static_cast<size_t>(s) * ja_n + ja] = x;
    }
  return q;
}

std::vector<double> exact_v(const TabularDecMDP& mdp, const JointPolicy& pi,
                            const std::vector<double>& q_tot) {
  const std::vector<double> joint = joint_policy_table(mdp, pi);
  const int ja_n = mdp.num_joint();
  std::vector<double> v(mdp.num_states, 0.0);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int ja = 0; ja < ja_n; ++ja)
      v[s] += joint[static_cast<size_t>(s) * ja_n + ja] *
              q_tot[static_cast<size_t>(s) * ja_n + ja];
  return v;
}

std::vector<std::vector<double>> exact_q_i(const TabularDecMDP& mdp, const JointPolicy& pi,
                                           const std::vector<double>& q_tot, int agent) {
  const int ja_n = mdp.num_joint();
  std::vector<std::vector<double>> q(
      mdp.num_states, std::vector<double>(mdp.num_actions[agent], 0.0));
  for (int s = 0; s < mdp.num_states; ++s)
    for (int ja = 0; ja < ja_n; ++ja) {
      const std::vector<int> a = mdp.decode_joint(ja);
      double w = 1.0;
      for (int j = 0; j < mdp.num_agents(); ++j)
        if (j != agent) w *= pi[j][s][a[j]];
      q[s][a[agent]] += w * q_tot[static_cast<size_t>(s) * ja_n + ja];
    }
  return q;
}

std::vector<double> discounted_distribution(const TabularDecMDP& mdp,
                                            const JointPolicy& pi) {
  const std::vector<double> joint = joint_policy_table(mdp, pi);
  const int s_n = mdp.num_states;
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd r_pi;
  induced_chain(mdp, joint, p_pi, r_pi);
  Eigen::VectorXd rho0(s_n);
  for (int s = 0; s < s_n; ++s) rho0(s) = mdp.rho0[s];
  // rho = rho0 + gamma P^T rho  =>  (I - gamma P^T) rho = rho0
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::Identity(s_n, s_n) - mdp.gamma * p_pi.transpose();
  const Eigen::VectorXd rho = a.partialPivLu().solve(rho0);
  return std::vector<double>(rho.data(), rho.data() + s_n);
}

double max_kl(const TabularDecMDP& mdp, const JointPolicy& pi, const JointPolicy& beta) {
  double best = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double kl = 0.0;
    for (int i = 0; i < mdp.num_agents(); ++i)
      for (int a = 0; a < mdp.num_actions[i]; ++a) {
        const double p = pi[i][s][a];
        if (p <= 0.0) continue;
        const double q = beta[i][s][a];
        if (q <= 0.0) return std::numeric_limits<double>::infinity();
        kl += p * std::log(p / q);
      }
    best = std::max(best, kl);
  }
  return best;
}

double max_kl_joint_enumeration(const TabularDecMDP& mdp, const JointPolicy& pi,
                                const JointPolicy& beta) {
  const std::vector<double> jp = joint_policy_table(mdp, pi);
  const std::vector<double> jb = joint_policy_table(mdp, beta);
  const int ja_n = mdp.num_joint();
  double best = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    double kl = 0.0;
    for (int ja = 0; ja < ja_n; ++ja) {
      const double p = jp[static_cast<size_t>(s) * ja_n + ja];
      if (p <= 0.0) continue;
      const double q = jb[static_cast<size_t>(s) * ja_n + ja];
      if (q <= 0.0) return std::numeric_limits<double>::infinity();
      kl += p * std::log(p / q);
    }
    best = std::max(best, kl);
  }
  return best;
}

double lemma1_check(const TabularDecMDP& mdp, const JointPolicy& pi,
                    const JointPolicy& beta, int t_max) {
  const double kl = max_kl(mdp, pi, beta);
  if (!std::isfinite(kl)) return -std::numeric_limits<double>::infinity();
  const double root = std::sqrt(kl);
  const int s_n = mdp.num_states;
  Eigen::MatrixXd p_pi, p_beta;
  Eigen::VectorXd r_unused;
  induced_chain(mdp, joint_policy_table(mdp, pi), p_pi, r_unused);
  induced_chain(mdp, joint_policy_table(mdp, beta), p_beta, r_unused);
  Eigen::VectorXd rho_pi(s_n), rho_beta(s_n);
  for (int s = 0; s < s_n; ++s) rho_pi(s) = rho_beta(s) = mdp.rho0[s];
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t <= t_max; ++t) {
    const double gap = (rho_pi - rho_beta).lpNorm<1>();
    worst = std::max(worst, gap - 2.0 * t * root);
    rho_pi = p_pi.transpose() * rho_pi;
    rho_beta = p_beta.transpose() * rho_beta;
  }
  return worst;
}

std::vector<double> onehot_state(const TabularDecMDP& mdp, int s) {
  std::vector<double> x(mdp.num_states, 0.0);
  x[s] = 1.0;
  return x;
}

PolicyTable policy_table_from_actor(const TabularDecMDP& mdp, const Actor& actor,
                                    const ParamStore& store) {
  PolicyTable pi(mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s)
    pi[s] = actor.policy(store, onehot_state(mdp, s));
  return pi;
}

ScoreTable score_table_from_actor(const TabularDecMDP& mdp, const Actor& actor,
                                  ParamStore& store) {
  ScoreTable t;
  t.names = actor.net().param_names();
  std::vector<int> offsets;
  for (const auto& name : t.names) {
    offsets.push_back(t.dim);
    t.dim += static_cast<int>(store.at(name).size());
  }
  t.score.assign(mdp.num_states, {});
  for (int s = 0; s < mdp.num_states; ++s) {
    t.score[s].assign(actor.num_actions(), std::vector<double>(t.dim, 0.0));
    for (int a = 0; a < actor.num_actions(); ++a) {
      Tape tape;
      auto x = tape.constant(Tensor2::row(onehot_state(mdp, s)));
      auto logits = actor.net().forward(tape, store, x);
      auto logp = tape.gather_cols(tape.log(tape.softmax_rows(logits)), {a});
      const auto grads = tape.backward(logp);
      for (size_t n = 0; n < t.names.size(); ++n) {
        auto it = grads.find(t.names[n]);
        if (it == grads.end()) continue;
        std::copy(it->second.data.begin(), it->second.data.end(),
                  t.score[s][a].begin() + offsets[n]);
      }
    }
  }
  return t;
}

CriticTables critic_tables_from_bank(const TabularDecMDP& mdp, const CriticBank& bank,
                                     const ParamStore& store) {
  CriticTables t;
  t.q_mean.resize(bank.num_agents());
  t.lambda.resize(mdp.num_states);
  t.bias.resize(mdp.num_states);
  for (int i = 0; i < bank.num_agents(); ++i) t.q_mean[i].resize(mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    const std::vector<double> x = onehot_state(mdp, s);
    for (int i = 0; i < bank.num_agents(); ++i) t.q_mean[i][s] = bank.mean_q(store, i, x);
    t.lambda[s] = bank.lambdas(store, x);
    t.bias[s] = bank.mixer_bias(store, x);
  }
  return t;
}

std::vector<double> exact_true_grad(const TabularDecMDP& mdp, const JointPolicy& pi,
                                    int agent, const ScoreTable& scores,
                                    const std::vector<std::vector<double>>& q_i,
                                    const std::vector<double>& rho_pi) {
  std::vector<double> g(scores.dim, 0.0);
  for (int s = 0; s < mdp.num_states; ++s)
    for (int a = 0; a < mdp.num_actions[agent]; ++a) {
      const double w = rho_pi[s] * pi[agent][s][a] * q_i[s][a];
      const std::vector<double>& sc = scores.score[s][a];
      for (int k = 0; k < scores.dim; ++k) g[k] += w * sc[k];
    }
  return g;
}

std::vector<double> exact_mixed_grad(const TabularDecMDP& mdp, const JointPolicy& pi,
                                     const JointPolicy& beta, int agent,
                                     const ScoreTable& scores, const CriticTables& critic,
                                     double nu, const std::vector<double>& rho_pi,
                                     const std::vector<double>& rho_beta) {
  const int m_i = mdp.num_actions[agent];
  const int ja_n = mdp.num_joint();
  std::vector<double> g(scores.dim, 0.0);
  for (int s = 0; s < mdp.num_states; ++s) {
    // On-policy arm: score times the centered, lambda-scaled advantage.
    if (nu < 1.0) {
      double baseline = 0.0;
      for (int a = 0; a < m_i; ++a)
        baseline += pi[agent][s][a] * critic.q_mean[agent][s][a];
      for (int a = 0; a < m_i; ++a) {
        const double u = critic.lambda[s][agent] * (critic.q_mean[agent][s][a] - baseline);
        const double w = (1.0 - nu) * rho_pi[s] * pi[agent][s][a] * u;
        const std::vector<double>& sc = scores.score[s][a];
        for (int k = 0; k < scores.dim; ++k) g[k] += w * sc[k];
      }
    }
    // Off-policy arm: gradient of sum_{a_i} pi_i(a_i) Q_tot under the behavior
    // distribution of states and co-player actions.
    if (nu > 0.0) {
      for (int ja = 0; ja < ja_n; ++ja) {
        const std::vector<int> a = mdp.decode_joint(ja);
        double w_other = 1.0;
        for (int j = 0; j < mdp.num_agents(); ++j)
          if (j != agent) w_other *= beta[j][s][a[j]];
        if (w_other == 0.0) continue;
        // This enumeration revisits each a_{-i} once per a_i; divide by M_i so
        // every co-player profile is counted once.
        double q_tot = critic.bias[s];
        for (int j = 0; j < mdp.num_agents(); ++j)
          q_tot += critic.lambda[s][j] * critic.q_mean[j][s][a[j]];
        const double base = nu * rho_beta[s] * w_other / static_cast<double>(m_i);
        for (int ai = 0; ai < m_i; ++ai) {
          double q = q_tot - critic.lambda[s][agent] * critic.q_mean[agent][s][a[agent]] +
                     critic.lambda[s][agent] * critic.q_mean[agent][s][ai];
          const double w = base * pi[agent][s][ai] * q;
          const std::vector<double>& sc = scores.score[s][ai];
          for (int k = 0; k < scores.dim; ++k) g[k] += w * sc[k];
        }
      }
    }
  }
  return g;
}

namespace {

double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

BoundReport certify_bound(const TabularDecMDP& mdp, const JointPolicy& pi,
                          const JointPolicy& beta, int agent, const ScoreTable& scores,
                          const CriticTables& critic, double nu) {
  BoundReport rep;
  const std::vector<double> q_tot = exact_q_tot(mdp, pi);
  const std::vector<std::vector<double>> q_i = exact_q_i(mdp, pi, q_tot, agent);
  const std::vector<double> rho_pi = discounted_distribution(mdp, pi);
  const std::vector<double> rho_beta = discounted_distribution(mdp, beta);

  const std::vector<double> g_true = exact_true_grad(mdp, pi, agent, scores, q_i, rho_pi);
  const std::vector<double> g_mixed =
      exact_mixed_grad(mdp, pi, beta, agent, scores, critic, nu, rho_pi, rho_beta);
  std::vector<double> diff(scores.dim);
  for (int k = 0; k < scores.dim; ++k) diff[k] = g_true[k] - g_mixed[k];
  rep.lhs = l1(diff);

  const int m_i = mdp.num_actions[agent];
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < m_i; ++a) {
      const double gap = q_i[s][a] - critic.lambda[s][agent] * critic.q_mean[agent][s][a];
      const double sc = l1(scores.score[s][a]);
      rep.omega1 = std::max(rep.omega1, sc * std::abs(gap));
      rep.omega1_printed =
          std::max(rep.omega1_printed, sc * std::abs(critic.lambda[s][agent] * gap));
    }
    std::vector<double> h(scores.dim, 0.0);
    for (int a = 0; a < m_i; ++a) {
      const double w = pi[agent][s][a] * critic.q_mean[agent][s][a];
      for (int k = 0; k < scores.dim; ++k) h[k] += w * scores.score[s][a][k];
    }
    rep.omega2 = std::max(rep.omega2, critic.lambda[s][agent] * l1(h));
  }

  rep.d_max_kl = max_kl(mdp, pi, beta);
  rep.kl_infinite = !std::isfinite(rep.d_max_kl);
  const double g = mdp.gamma;
  rep.rhs = rep.omega1 / (1.0 - g);
  if (rep.kl_infinite) {
    rep.rhs = std::numeric_limits<double>::infinity();
  } else {
    rep.rhs += 2.0 * rep.omega2 * nu * g / ((1.0 - g) * (1.0 - g)) * std::sqrt(rep.d_max_kl);
  }
  rep.holds = rep.lhs <= rep.rhs + kBoundTol;
  return rep;
}

SweepResult certification_sweep(uint64_t seed, int instances, int max_states,
                                int max_actions, int t_max_lemma) {
  SweepResult sweep;
  sweep.worst_bound_margin = -std::numeric_limits<double>::infinity();
  sweep.worst_lemma_margin = -std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (int inst = 0; inst < instances; ++inst) {
    const double gamma = rng.uniform(0.5, 0.95);
    const TabularDecMDP mdp = TabularDecMDP::random(rng, max_states, 2, max_actions, gamma);
    const int s_n = mdp.num_states;

    ParamStore store;
    Rng init = rng.split(17);
    CriticBank bank = CriticBank::create(mdp.num_agents(), mdp.num_actions, s_n, s_n, 3,
                                         8, 8, store, init);
    std::vector<Actor> actors;
    for (int i = 0; i < mdp.num_agents(); ++i) {
      actors.emplace_back(i, s_n, 8, mdp.num_actions[i]);
      actors.back().init(store, init);
    }

    JointPolicy pi, beta;
    for (int i = 0; i < mdp.num_agents(); ++i) {
      pi.push_back(policy_table_from_actor(mdp, actors[i], store));
      PolicyTable b(s_n);
      for (int s = 0; s < s_n; ++s) {
        double mass = 0.0;
        b[s].resize(mdp.num_actions[i]);
        for (double& x : b[s]) {
          x = 0.05 + rng.uniform();
          mass += x;
        }
        for (double& x : b[s]) x /= mass;
      }
      beta.push_back(std::move(b));
    }
    const CriticTables tables = critic_tables_from_bank(mdp, bank, store);
    const double nu = rng.uniform();

    for (int i = 0; i < mdp.num_agents(); ++i) {
      const ScoreTable scores = score_table_from_actor(mdp, actors[i], store);
      BoundReport rep = certify_bound(mdp, pi, beta, i, scores, tables, nu);
      ++sweep.bound_checks;
      if (!rep.holds) ++sweep.bound_failures;
      if (!rep.kl_infinite)
        sweep.worst_bound_margin = std::max(sweep.worst_bound_margin, rep.lhs - rep.rhs);
      sweep.reports.push_back(std::move(rep));
    }
    const double slack = lemma1_check(mdp, pi, beta, t_max_lemma);
    sweep.worst_lemma_margin = std::max(sweep.worst_lemma_margin, slack);
    if (slack > kBoundTol) ++sweep.lemma_failures;
    ++sweep.instances;
  }
  return sweep;
}

}  // namespace emix
