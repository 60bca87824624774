#include "emix/critics.hpp"

#include <cmath>
#include <stdexcept>

namespace emix {

CriticBank CriticBank::create(int num_agents, std::vector<int> num_actions, int window_dim,
                              int state_dim, int n_members, int hidden, int mixer_hidden,
                              ParamStore& store, Rng& rng) {
  if (num_agents < 2) throw std::invalid_argument("CriticBank: K >= 2 required");
  if (n_members < 2) throw std::invalid_argument("CriticBank: N >= 2 required");
  CriticBank bank;
  bank.num_agents_ = num_agents;
  bank.n_members_ = n_members;
  bank.num_actions_ = std::move(num_actions);
  bank.window_dim_ = window_dim;
  bank.state_dim_ = state_dim;
  bank.members_.resize(num_agents);
  bank.target_members_.resize(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    for (int j = 0; j < n_members; ++j) {
      const std::string base =
          "critic/a" + std::to_string(i) + "/m" + std::to_string(j);
      Mlp live(base, window_dim, hidden, 2, bank.num_actions_[i], Activation::kTanh);
      live.init(store, rng);
      bank.members_[i].push_back(live);
      bank.target_members_[i].push_back(live.with_prefix("target/" + base));
    }
  }
  bank.lambda_net_ = Mlp("mixer/lambda", state_dim, mixer_hidden, 1, num_agents,
                         Activation::kRelu);
  bank.bias_net_ = Mlp("mixer/bias", state_dim, mixer_hidden, 1, 1, Activation::kRelu);
  bank.lambda_net_.init(store, rng);
  bank.bias_net_.init(store, rng);
  bank.target_lambda_net_ = bank.lambda_net_.with_prefix("target/mixer/lambda");
  bank.target_bias_net_ = bank.bias_net_.with_prefix("target/mixer/bias");

  // target copies start as bit-copies of the live parameters
  for (int i = 0; i < num_agents; ++i)
    for (int j = 0; j < n_members; ++j)
      for (const std::string& name : bank.members_[i][j].param_names())
        store.add("target/" + name, store.at(name));
  for (const std::string& name : bank.lambda_net_.param_names())
    store.add("target/" + name, store.at(name));
  for (const std::string& name : bank.bias_net_.param_names())
    store.add("target/" + name, store.at(name));
  return bank;
}

const Mlp& CriticBank::member(int agent, int j, bool target) const {
  if (agent < 0 || agent >= num_agents_ || j < 0 || j >= n_members_)
    throw std::out_of_range("CriticBank::member index");
  return target ? target_members_[agent][j] : members_[agent][j];
}

const Mlp& CriticBank::lambda_net(bool target) const {
  return target ? target_lambda_net_ : lambda_net_;
}

const Mlp& CriticBank::bias_net(bool target) const {
  return target ? target_bias_net_ : bias_net_;
}

std::vector<double> CriticBank::member_q(const ParamStore& store, int agent, int j,
                                         const std::vector<double>& window,
                                         bool target) const {
  const Tensor2 out = member(agent, j, target).eval(store, Tensor2::row(window));
  return out.data;
}

Tensor2 CriticBank::member_matrix(const ParamStore& store, int agent,
                                  const std::vector<double>& window, bool target) const {
  Tensor2 out(n_members_, num_actions_[agent]);
  const Tensor2 x = Tensor2::row(window);
  for (int j = 0; j < n_members_; ++j) {
    const Tensor2 q = member(agent, j, target).eval(store, x);
    std::copy(q.data.begin(), q.data.end(),
              out.data.begin() + static_cast<size_t>(j) * out.cols);
  }
  return out;
}

std::vector<double> CriticBank::mean_q(const ParamStore& store, int agent,
                                       const std::vector<double>& window,
                                       bool target) const {
  const Tensor2 m = member_matrix(store, agent, window, target);
  std::vector<double> mean(m.cols, 0.0);
  for (int j = 0; j < m.rows; ++j)
    for (int c = 0; c < m.cols; ++c) mean[c] += m.at(j, c);
  for (double& v : mean) v /= n_members_;
  return mean;
}

std::vector<double> CriticBank::lambdas(const ParamStore& store,
                                        const std::vector<double>& state,
                                        bool target) const {
  const Tensor2 out = lambda_net(target).eval(store, Tensor2::row(state));
  std::vector<double> lam(out.data);
  for (double& v : lam) v = std::fabs(v) + kLambdaFloor;
  return lam;
}

double CriticBank::mixer_bias(const ParamStore& store, const std::vector<double>& state,
                              bool target) const {
  return bias_net(target).eval(store, Tensor2::row(state)).data[0];
}

QtotEval CriticBank::mix(const ParamStore& store, const std::vector<double>& state,
                         const std::vector<double>& chosen_q,
                         const std::vector<double>& raw_kurt, bool weighting_enabled,
                         double c1, bool target) const {
  if (static_cast<int>(chosen_q.size()) != num_agents_)
    throw std::invalid_argument("mix: K agent values required");
  QtotEval ev;
  ev.chosen_q = chosen_q;
  ev.raw_kurt = raw_kurt;
  ev.lambda = lambdas(store, state, target);
  ev.bias = mixer_bias(store, state, target);
  ev.k.resize(num_agents_, 1.0);
  double total = ev.bias;
  for (int i = 0; i < num_agents_; ++i) {
    if (ev.lambda[i] <= 0.0) throw std::logic_error("mix: non-positive lambda");
    if (weighting_enabled) ev.k[i] = uncertainty_weight(raw_kurt[i], c1);
    total += ev.k[i] * ev.lambda[i] * chosen_q[i];
  }
  ev.total = total;
  return ev;
}

double CriticBank::qtot_taken(const ParamStore& store, const std::vector<double>& state,
                              const std::vector<std::vector<double>>& windows,
                              const std::vector<int>& actions, bool weighted,
                              double c1) const {
  const std::vector<double> lam = lambdas(store, state, /*target=*/true);
  double total = mixer_bias(store, state, /*target=*/true);
  for (int i = 0; i < num_agents_; ++i) {
    const Tensor2 m = member_matrix(store, i, windows[i], /*target=*/true);
    const int a = actions[i];
    std::vector<double> vals(n_members_);
    double mean = 0.0;
    for (int j = 0; j < n_members_; ++j) {
      vals[j] = m.at(j, a);
      mean += vals[j];
    }
    mean /= n_members_;
    double k = 1.0;
    if (weighted) k = uncertainty_weight(raw_kurtosis(vals), c1);
    total += k * lam[i] * mean;
  }
  return total;
}

double CriticBank::expected_qtot(const ParamStore& store, const std::vector<double>& state,
                                 const std::vector<std::vector<double>>& windows,
                                 const PerAgentPolicy& policy, bool weighted,
                                 double c1) const {
  const std::vector<double> lam = lambdas(store, state, /*target=*/true);
  double total = mixer_bias(store, state, /*target=*/true);
  for (int i = 0; i < num_agents_; ++i) {
    const Tensor2 m = member_matrix(store, i, windows[i], /*target=*/true);
    const std::vector<double> pi = policy(i, windows[i]);
    const std::vector<double> kurt = per_action_raw_kurtosis(m);
    for (int a = 0; a < num_actions_[i]; ++a) {
      double mean = 0.0;
      for (int j = 0; j < n_members_; ++j) mean += m.at(j, a);
      mean /= n_members_;
      const double k = weighted ? uncertainty_weight(kurt[a], c1) : 1.0;
      total += pi[a] * k * lam[i] * mean;
    }
  }
  return total;
}

void CriticBank::sync_targets(ParamStore& store) const {
  store.copy_section("critic/", "target/critic/");
  store.copy_section("mixer/", "target/mixer/");
}

std::vector<double> per_action_raw_kurtosis(const Tensor2& member_matrix) {
  std::vector<double> out(member_matrix.cols);
  std::vector<double> col(member_matrix.rows);
  for (int c = 0; c < member_matrix.cols; ++c) {
    for (int j = 0; j < member_matrix.rows; ++j) col[j] = member_matrix.at(j, c);
    out[c] = raw_kurtosis(col);
  }
  return out;
}

std::vector<double> per_action_excess_kurtosis(const Tensor2& member_matrix) {
  std::vector<double> out(member_matrix.cols);
  std::vector<double> col(member_matrix.rows);
  for (int c = 0; c < member_matrix.cols; ++c) {
    for (int j = 0; j < member_matrix.rows; ++j) col[j] = member_matrix.at(j, c);
    out[c] = excess_kurtosis(col);
  }
  return out;
}

std::vector<double> per_action_variance(const Tensor2& member_matrix) {
  std::vector<double> out(member_matrix.cols);
  std::vector<double> col(member_matrix.rows);
  for (int c = 0; c < member_matrix.cols; ++c) {
    for (int j = 0; j < member_matrix.rows; ++j) col[j] = member_matrix.at(j, c);
    out[c] = sample_variance(col);
  }
  return out;
}

std::vector<double> td_lambda_target(const CriticBank& bank, const ParamStore& store,
                                     const Episode& episode, double trace_lambda,
                                     double gamma, double c1, bool weighting) {
  if (episode.empty()) throw std::invalid_argument("td_lambda_target: empty episode");
  const int len = static_cast<int>(episode.size());
  std::vector<double> q_curr(len), delta(len);
  for (int t = 0; t < len; ++t) {
    const Transition& tr = episode[t];
    q_curr[t] = bank.qtot_taken(store, tr.state, tr.windows, tr.actions,
                                /*weighted=*/false, c1);
    double next_v = 0.0;
    if (!tr.terminated) {
      // Q'_tot at the next taken action; weighting applies to next-state
      // evaluations only.
      const Transition& nx = episode[t + 1];
      next_v = bank.qtot_taken(store, nx.state, nx.windows, nx.actions, weighting, c1);
    }
    delta[t] = tr.reward + gamma * next_v - q_curr[t];
  }
  std::vector<double> y(len);
  double trace = 0.0;
  for (int t = len - 1; t >= 0; --t) {
    trace = delta[t] + gamma * trace_lambda * trace;
    y[t] = q_curr[t] + trace;
  }
  return y;
}

double tree_backup_target(const CriticBank& bank, const ParamStore& store,
                          const Segment& segment, const PerAgentPolicy& policy,
                          double trace_lambda, double gamma, double c1, bool weighting) {
  if (segment.length < 1) throw std::invalid_argument("tree_backup_target: m < 1");
  const Episode& ep = *segment.episode;
  const Transition& head = ep[segment.start];
  double y = bank.qtot_taken(store, head.state, head.windows, head.actions,
                             /*weighted=*/false, c1);
  double coef = 1.0;
  for (int t = 0; t < segment.length; ++t) {
    const Transition& tr = ep[segment.start + t];
    double joint_pi = 1.0;
    for (int i = 0; i < bank.num_agents(); ++i) {
      const std::vector<double> pi = policy(i, tr.windows[i]);
      const double p = pi[tr.actions[i]];
      if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("tree_backup_target: probability outside (0,1]");
      joint_pi *= p;
    }
    coef *= trace_lambda * joint_pi;
    if (coef == 0.0) break;
    const double q_t = bank.qtot_taken(store, tr.state, tr.windows, tr.actions,
                                       /*weighted=*/false, c1);
    double exp_next = 0.0;
    if (!tr.terminated)
      exp_next = bank.expected_qtot(store, tr.next_state, tr.next_windows, policy,
                                    weighting, c1);
    y += coef * (tr.reward + gamma * exp_next - q_t);
  }
  return y;
}

CriticLossResult critic_loss(const CriticBank& bank, ParamStore& store,
                             const CriticBatch& batch, double c, double c2) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("critic_loss: c outside [0,1]");
  const int n_on = static_cast<int>(batch.on.size());
  const int n_off = static_cast<int>(batch.off.size());
  if (c > 0.0 && n_on == 0) throw std::invalid_argument("critic_loss: empty on-batch");
  if (c < 1.0 && n_off == 0) throw std::invalid_argument("critic_loss: empty off-batch");
  const int n_pred = n_on + n_off;
  const int n_rows = n_pred + static_cast<int>(batch.reg_extra.size());

  std::vector<const Transition*> rows;
  rows.reserve(n_rows);
  rows.insert(rows.end(), batch.on.begin(), batch.on.end());
  rows.insert(rows.end(), batch.off.begin(), batch.off.end());
  rows.insert(rows.end(), batch.reg_extra.begin(), batch.reg_extra.end());

  Tape tape;

  // mixer forward on the prediction rows
  Tensor2 states(n_pred, static_cast<int>(rows[0]->state.size()));
  for (int r = 0; r < n_pred; ++r)
    std::copy(rows[r]->state.begin(), rows[r]->state.end(),
              states.data.begin() + static_cast<size_t>(r) * states.cols);
  auto x_state = tape.constant(std::move(states));
  auto lam_raw = bank.lambda_net().forward(tape, store, x_state);
  auto lam_all = tape.add(tape.abs(lam_raw),
                          tape.constant([&] {
                            Tensor2 f(n_pred, bank.num_agents());
                            for (double& v : f.data) v = CriticBank::kLambdaFloor;
                            return f;
                          }()));
  auto bias_col = bank.bias_net().forward(tape, store, x_state);

  Tape::NodeId qtot = bias_col;
  Tape::NodeId reg_sum = tape.constant(Tensor2::scalar(0.0));
  const bool want_reg = c2 != 0.0;

  for (int i = 0; i < bank.num_agents(); ++i) {
    Tensor2 xs(n_rows, static_cast<int>(rows[0]->windows[i].size()));
    for (int r = 0; r < n_rows; ++r)
      std::copy(rows[r]->windows[i].begin(), rows[r]->windows[i].end(),
                xs.data.begin() + static_cast<size_t>(r) * xs.cols);
    auto x = tape.constant(std::move(xs));

    std::vector<Tape::NodeId> member_out(bank.n_members());
    Tape::NodeId acc = -1;
    for (int j = 0; j < bank.n_members(); ++j) {
      member_out[j] = bank.member(i, j).forward(tape, store, x);
      acc = j == 0 ? member_out[j] : tape.add(acc, member_out[j]);
    }
    auto mean = tape.scale(acc, 1.0 / bank.n_members());

    std::vector<int> act(n_pred);
    for (int r = 0; r < n_pred; ++r) act[r] = rows[r]->actions[i];
    auto chosen = tape.gather_cols(tape.slice_rows(mean, 0, n_pred), std::move(act));
    qtot = tape.add(qtot, tape.mul(tape.col(lam_all, i), chosen));

    if (want_reg) {
      auto p_mean = tape.softmax_rows(mean);
      for (int j = 0; j < bank.n_members(); ++j) {
        auto bc = tape.row_sum(tape.sqrt(tape.mul(p_mean, tape.softmax_rows(member_out[j]))));
        auto dist = tape.scale(tape.log(tape.clamp(bc, kBhatEps, 1.0)), -1.0);
        reg_sum = tape.add(reg_sum, tape.sum(dist));
      }
    }
  }

  Tensor2 targets(n_pred, 1);
  for (int r = 0; r < n_on; ++r) targets.at(r, 0) = batch.y_on[r];
  for (int r = 0; r < n_off; ++r) targets.at(n_on + r, 0) = batch.y_off[r];
  auto diff = tape.sub(qtot, tape.constant(std::move(targets)));
  auto sq = tape.mul(diff, diff);

  CriticLossResult res;
  Tape::NodeId loss = tape.constant(Tensor2::scalar(0.0));
  if (n_on > 0) {
    auto on_mse = tape.mean(tape.slice_rows(sq, 0, n_on));
    res.on_mse = tape.value(on_mse).data[0];
    loss = tape.add(loss, tape.scale(on_mse, c));
  }
  if (n_off > 0) {
    auto off_mse = tape.mean(tape.slice_rows(sq, n_on, n_pred));
    res.off_mse = tape.value(off_mse).data[0];
    loss = tape.add(loss, tape.scale(off_mse, 1.0 - c));
  }
  if (want_reg) {
    auto reg_mean = tape.scale(reg_sum, 1.0 / n_rows);
    res.bhat_term = tape.value(reg_mean).data[0];
    loss = tape.add(loss, tape.scale(reg_mean, -c2));
  }
  res.loss = tape.value(loss).data[0];
  res.grads = tape.backward(loss);
  res.grad_norm = grad_l2_norm(res.grads);
  return res;
}

double ensemble_diversity(const CriticBank& bank, const ParamStore& store,
                          const std::vector<std::vector<std::vector<double>>>& windows_per_agent) {
  double total = 0.0;
  long count = 0;
  for (int i = 0; i < bank.num_agents(); ++i) {
    for (const auto& window : windows_per_agent[i]) {
      const Tensor2 m = bank.member_matrix(store, i, window);
      std::vector<std::vector<double>> dists(bank.n_members());
      for (int j = 0; j < bank.n_members(); ++j) {
        std::vector<double> q(m.cols);
        for (int a = 0; a < m.cols; ++a) q[a] = m.at(j, a);
        dists[j] = softmax(q);
      }
      for (int j = 0; j < bank.n_members(); ++j)
        for (int l = j + 1; l < bank.n_members(); ++l) {
          total += bhattacharyya(dists[j], dists[l]);
          ++count;
        }
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace emix
