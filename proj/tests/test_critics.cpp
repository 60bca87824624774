#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "emix/critics.hpp"
#include "test_util.hpp"

using namespace emix;
using emix::test::fd_max_rel_error;
using emix::test::random_vec;

namespace {

struct Fixture {
  ParamStore store;
  CriticBank bank;
  Rng rng{123};
  static constexpr int kAgents = 2;
  static constexpr int kWindowDim = 4;
  static constexpr int kStateDim = 3;
  static constexpr int kMembers = 3;

  Fixture() {
    Rng init(77);
    bank = CriticBank::create(kAgents, {3, 2}, kWindowDim, kStateDim, kMembers, 6, 5,
                              store, init);
  }

  Transition random_transition(bool terminated) {
    Transition tr;
    tr.state = random_vec(rng, kStateDim);
    tr.next_state = random_vec(rng, kStateDim);
    for (int i = 0; i < kAgents; ++i) {
      tr.windows.push_back(random_vec(rng, kWindowDim));
      tr.next_windows.push_back(random_vec(rng, kWindowDim));
      const int m = bank.num_actions()[i];
      tr.actions.push_back(rng.uniform_int(m));
      tr.behavior_probs.push_back(0.5);
    }
    tr.reward = rng.normal();
    tr.terminated = terminated;
    return tr;
  }

  Episode random_episode(int len) {
    Episode ep;
    for (int t = 0; t < len; ++t) ep.push_back(random_transition(t == len - 1));
    // chain the stored next-state/windows for consistency
    for (int t = 0; t + 1 < len; ++t) {
      ep[t].next_state = ep[t + 1].state;
      ep[t].next_windows = ep[t + 1].windows;
    }
    return ep;
  }

  // Independent re-composition of the target-network Q'_tot from primitives.
  double qtot_manual(const std::vector<double>& state,
                     const std::vector<std::vector<double>>& windows,
                     const std::vector<int>& actions, bool weighted, double c1) {
    const std::vector<double> lam = bank.lambdas(store, state, true);
    double total = bank.mixer_bias(store, state, true);
    for (int i = 0; i < kAgents; ++i) {
      const Tensor2 m = bank.member_matrix(store, i, windows[i], true);
      std::vector<double> vals(kMembers);
      for (int j = 0; j < kMembers; ++j) vals[j] = m.at(j, actions[i]);
      const double mean = sample_mean(vals);
      const double k = weighted ? uncertainty_weight(raw_kurtosis(vals), c1) : 1.0;
      total += k * lam[i] * mean;
    }
    return total;
  }
};

}  // namespace

TEST_CASE("mix composes Q_tot with positive coefficients and optional weights") {
  Fixture f;
  const std::vector<double> state = random_vec(f.rng, Fixture::kStateDim);
  const std::vector<double> chosen = {1.5, -0.5};
  const std::vector<double> kurt = {2.0, 5.0};

  const QtotEval unweighted = f.bank.mix(f.store, state, chosen, kurt, false, 0.01);
  double expect = unweighted.bias;
  for (int i = 0; i < 2; ++i) {
    CHECK(unweighted.lambda[i] > 0.0);
    CHECK(unweighted.k[i] == 1.0);
    expect += unweighted.lambda[i] * chosen[i];
  }
  CHECK(unweighted.total == doctest::Approx(expect).epsilon(1e-12));

  const QtotEval weighted = f.bank.mix(f.store, state, chosen, kurt, true, 0.01);
  for (int i = 0; i < 2; ++i) {
    CHECK(weighted.k[i] == doctest::Approx(uncertainty_weight(kurt[i], 0.01)));
    CHECK(weighted.k[i] > 0.5);
    CHECK(weighted.k[i] <= 1.0);
  }
  CHECK(weighted.k[1] < weighted.k[0]);  // higher kurtosis, smaller weight
}

TEST_CASE("additive argmax: joint maximizer decomposes per agent") {
  // brute-force IGM on a small random bank (the full sweep lives in the
  // acceptance suite)
  for (int rep = 0; rep < 25; ++rep) {
    ParamStore store;
    Rng init(1000 + rep);
    CriticBank bank = CriticBank::create(2, {3, 3}, 2, 1, 4, 5, 4, store, init);
    Rng rng(rep);
    const std::vector<double> state = random_vec(rng, 1);
    const std::vector<std::vector<double>> wins = {random_vec(rng, 2), random_vec(rng, 2)};

    for (bool weighted : {false, true}) {
      // per-agent additive contribution for each own action
      std::vector<std::vector<double>> contrib(2);
      const std::vector<double> lam = bank.lambdas(store, state, true);
      for (int i = 0; i < 2; ++i) {
        const Tensor2 m = bank.member_matrix(store, i, wins[i], true);
        const std::vector<double> kurt = per_action_raw_kurtosis(m);
        for (int a = 0; a < 3; ++a) {
          std::vector<double> vals(4);
          for (int j = 0; j < 4; ++j) vals[j] = m.at(j, a);
          const double k = weighted ? uncertainty_weight(kurt[a], 0.01) : 1.0;
          contrib[i].push_back(k * lam[i] * sample_mean(vals));
        }
      }
      int best_joint = -1;
      double best = -1e300;
      for (int a0 = 0; a0 < 3; ++a0)
        for (int a1 = 0; a1 < 3; ++a1) {
          const double q =
              bank.qtot_taken(store, state, wins, {a0, a1}, weighted, 0.01);
          if (q > best) {
            best = q;
            best_joint = a0 * 3 + a1;
          }
        }
      const int g0 = static_cast<int>(std::max_element(contrib[0].begin(),
                                                       contrib[0].end()) -
                                      contrib[0].begin());
      const int g1 = static_cast<int>(std::max_element(contrib[1].begin(),
                                                       contrib[1].end()) -
                                      contrib[1].begin());
      CHECK(best_joint == g0 * 3 + g1);
    }
  }
}

TEST_CASE("td_lambda_target equals the explicit discounted-delta expansion") {
  Fixture f;
  const Episode ep = f.random_episode(3);
  const double gamma = 0.9, lam = 0.8, c1 = 0.01;

  for (bool weighting : {true, false}) {
    const std::vector<double> y =
        td_lambda_target(f.bank, f.store, ep, lam, gamma, c1, weighting);

    // deltas with unweighted current values and weighted next values
    std::vector<double> qu(3), delta(3);
    for (int t = 0; t < 3; ++t)
      qu[t] = f.qtot_manual(ep[t].state, ep[t].windows, ep[t].actions, false, c1);
    for (int t = 0; t < 3; ++t) {
      double next = 0.0;
      if (!ep[t].terminated)
        next = f.qtot_manual(ep[t + 1].state, ep[t + 1].windows, ep[t + 1].actions,
                             weighting, c1);
      delta[t] = ep[t].reward + gamma * next - qu[t];
    }
    // y_t = Q_t + sum_{j>=t} (gamma*lam)^{j-t} delta_j, written out per step
    const double g = gamma * lam;
    const double y2 = qu[2] + delta[2];
    const double y1 = qu[1] + delta[1] + g * delta[2];
    const double y0 = qu[0] + delta[0] + g * delta[1] + g * g * delta[2];
    CHECK(y[2] == doctest::Approx(y2).epsilon(1e-10));
    CHECK(y[1] == doctest::Approx(y1).epsilon(1e-10));
    CHECK(y[0] == doctest::Approx(y0).epsilon(1e-10));
  }
}

TEST_CASE("td_lambda boundary cases") {
  Fixture f;
  const Episode ep = f.random_episode(3);
  // lambda = 0 reduces to one-step TD targets
  const auto y0 = td_lambda_target(f.bank, f.store, ep, 0.0, 0.95, 0.01, true);
  for (int t = 0; t < 3; ++t) {
    double next = 0.0;
    if (!ep[t].terminated)
      next = f.qtot_manual(ep[t + 1].state, ep[t + 1].windows, ep[t + 1].actions, true,
                           0.01);
    CHECK(y0[t] == doctest::Approx(ep[t].reward + 0.95 * next).epsilon(1e-10));
  }
  CHECK_THROWS(td_lambda_target(f.bank, f.store, Episode{}, 0.5, 0.9, 0.01, true));
}

TEST_CASE("tree_backup_target equals the explicit product expansion") {
  Fixture f;
  const Episode ep = f.random_episode(3);
  const double gamma = 0.9, lam = 0.7, c1 = 0.01;

  // an arbitrary fixed policy, independent of any actor
  const PerAgentPolicy policy = [&](int agent, const std::vector<double>& w) {
    std::vector<double> z(f.bank.num_actions()[agent]);
    for (size_t i = 0; i < z.size(); ++i)
      z[i] = 0.3 * w[i % w.size()] + 0.1 * agent + 0.05 * static_cast<double>(i);
    return softmax(z);
  };

  const Segment seg{&ep, 0, 3};
  const double y = tree_backup_target(f.bank, f.store, seg, policy, lam, gamma, c1, true);

  auto joint_pi = [&](const Transition& tr) {
    double p = 1.0;
    for (int i = 0; i < Fixture::kAgents; ++i) p *= policy(i, tr.windows[i])[tr.actions[i]];
    return p;
  };
  auto expected_w = [&](const Transition& tr) {
    if (tr.terminated) return 0.0;
    const std::vector<double> lamv = f.bank.lambdas(f.store, tr.next_state, true);
    double total = f.bank.mixer_bias(f.store, tr.next_state, true);
    for (int i = 0; i < Fixture::kAgents; ++i) {
      const Tensor2 m = f.bank.member_matrix(f.store, i, tr.next_windows[i], true);
      const std::vector<double> pi = policy(i, tr.next_windows[i]);
      const std::vector<double> kurt = per_action_raw_kurtosis(m);
      for (int a = 0; a < f.bank.num_actions()[i]; ++a) {
        std::vector<double> vals(Fixture::kMembers);
        for (int j = 0; j < Fixture::kMembers; ++j) vals[j] = m.at(j, a);
        total += pi[a] * uncertainty_weight(kurt[a], c1) * lamv[i] * sample_mean(vals);
      }
    }
    return total;
  };

  std::vector<double> qu(3), corr(3);
  for (int t = 0; t < 3; ++t) {
    qu[t] = f.qtot_manual(ep[t].state, ep[t].windows, ep[t].actions, false, c1);
    corr[t] = ep[t].reward + gamma * expected_w(ep[t]) - qu[t];
  }
  const double c0 = lam * joint_pi(ep[0]);
  const double c1c = c0 * lam * joint_pi(ep[1]);
  const double c2c = c1c * lam * joint_pi(ep[2]);
  const double expect = qu[0] + c0 * corr[0] + c1c * corr[1] + c2c * corr[2];
  CHECK(y == doctest::Approx(expect).epsilon(1e-10));

  // single-step segment keeps only the first correction
  const Segment one{&ep, 1, 1};
  const double y1 = tree_backup_target(f.bank, f.store, one, policy, lam, gamma, c1, true);
  const double e1 = qu[1] + lam * joint_pi(ep[1]) * corr[1];
  CHECK(y1 == doctest::Approx(e1).epsilon(1e-10));
}

TEST_CASE("tree_backup rejects invalid probabilities") {
  Fixture f;
  const Episode ep = f.random_episode(2);
  const Segment seg{&ep, 0, 2};
  const PerAgentPolicy bad = [&](int agent, const std::vector<double>&) {
    std::vector<double> p(f.bank.num_actions()[agent], 0.0);
    p[0] = 1.5;
    return p;
  };
  CHECK_THROWS(tree_backup_target(f.bank, f.store, seg, bad, 0.5, 0.9, 0.01, true));
}

TEST_CASE("critic_loss value decomposes into its three terms") {
  Fixture f;
  std::vector<Transition> storage;
  for (int r = 0; r < 6; ++r) storage.push_back(f.random_transition(r % 2 == 0));

  CriticBatch batch;
  batch.on = {&storage[0], &storage[1]};
  batch.y_on = {0.7, -0.3};
  batch.off = {&storage[2], &storage[3], &storage[4]};
  batch.y_off = {0.1, 0.2, -0.6};
  batch.reg_extra = {&storage[5]};

  const double c = 0.4, c2 = 0.002;
  const CriticLossResult res = critic_loss(f.bank, f.store, batch, c, c2);

  // independent recomputation from primitives (live nets, unweighted)
  auto pred = [&](const Transition& tr) {
    const std::vector<double> lam = f.bank.lambdas(f.store, tr.state);
    double total = f.bank.mixer_bias(f.store, tr.state);
    for (int i = 0; i < Fixture::kAgents; ++i)
      total += lam[i] * f.bank.mean_q(f.store, i, tr.windows[i])[tr.actions[i]];
    return total;
  };
  double on_mse = 0.0, off_mse = 0.0;
  for (int r = 0; r < 2; ++r) {
    const double d = batch.y_on[r] - pred(*batch.on[r]);
    on_mse += d * d / 2.0;
  }
  for (int r = 0; r < 3; ++r) {
    const double d = batch.y_off[r] - pred(*batch.off[r]);
    off_mse += d * d / 3.0;
  }
  double bhat = 0.0;
  std::vector<const Transition*> rows = {&storage[0], &storage[1], &storage[2],
                                         &storage[3], &storage[4], &storage[5]};
  for (const Transition* tr : rows)
    for (int i = 0; i < Fixture::kAgents; ++i) {
      const Tensor2 m = f.bank.member_matrix(f.store, i, tr->windows[i]);
      std::vector<std::vector<double>> members;
      for (int j = 0; j < Fixture::kMembers; ++j) {
        std::vector<double> q(m.cols);
        for (int a = 0; a < m.cols; ++a) q[a] = m.at(j, a);
        members.push_back(q);
      }
      bhat += bhattacharyya_total(f.bank.mean_q(f.store, i, tr->windows[i]), members);
    }
  bhat /= static_cast<double>(rows.size());

  CHECK(res.on_mse == doctest::Approx(on_mse).epsilon(1e-10));
  CHECK(res.off_mse == doctest::Approx(off_mse).epsilon(1e-10));
  CHECK(res.bhat_term == doctest::Approx(bhat).epsilon(1e-10));
  CHECK(res.loss ==
        doctest::Approx(c * on_mse + (1.0 - c) * off_mse - c2 * bhat).epsilon(1e-10));

  // C2 = 0: regularizer absent, loss is exactly the weighted MSE sum
  const CriticLossResult noreg = critic_loss(f.bank, f.store, batch, c, 0.0);
  CHECK(noreg.bhat_term == 0.0);
  CHECK(noreg.loss == doctest::Approx(c * on_mse + (1.0 - c) * off_mse).epsilon(1e-10));
}

TEST_CASE("critic_loss gradient matches finite differences") {
  Fixture f;
  std::vector<Transition> storage;
  for (int r = 0; r < 5; ++r) storage.push_back(f.random_transition(true));
  CriticBatch batch;
  batch.on = {&storage[0], &storage[1]};
  batch.y_on = {0.5, -0.25};
  batch.off = {&storage[2], &storage[3]};
  batch.y_off = {0.0, 0.75};
  batch.reg_extra = {&storage[4]};

  const CriticLossResult res = critic_loss(f.bank, f.store, batch, 0.5, 0.001);
  auto loss_fn = [&]() { return critic_loss(f.bank, f.store, batch, 0.5, 0.001).loss; };
  Rng probe(31);
  CHECK(fd_max_rel_error(f.store, res.grads, loss_fn, probe, 60) < 1e-4);
  CHECK(res.grad_norm > 0.0);

  // gradients reach every member and the mixer
  CHECK(res.grads.count("critic/a0/m0/W0") == 1);
  CHECK(res.grads.count("critic/a1/m2/W0") == 1);
  CHECK(res.grads.count("mixer/lambda/W0") == 1);
  CHECK(res.grads.count("mixer/bias/W0") == 1);
  // target copies receive no gradient
  for (const auto& [name, _] : res.grads) CHECK(name.rfind("target/", 0) != 0);
}

TEST_CASE("critic_loss gate validation") {
  Fixture f;
  Transition tr = f.random_transition(true);
  CriticBatch batch;
  CHECK_THROWS(critic_loss(f.bank, f.store, batch, 0.5, 0.0));  // both empty
  batch.on = {&tr};
  batch.y_on = {0.0};
  CHECK_THROWS(critic_loss(f.bank, f.store, batch, 0.5, 0.0));  // off empty, c<1
  const CriticLossResult ok = critic_loss(f.bank, f.store, batch, 1.0, 0.0);
  CHECK(std::isfinite(ok.loss));
}

TEST_CASE("ensemble_diversity is nonnegative and zero for identical members") {
  Fixture f;
  std::vector<std::vector<std::vector<double>>> wins(2);
  for (int i = 0; i < 2; ++i)
    for (int r = 0; r < 3; ++r) wins[i].push_back(random_vec(f.rng, Fixture::kWindowDim));
  CHECK(ensemble_diversity(f.bank, f.store, wins) > 0.0);

  // collapse all members of each agent onto member 0
  for (int i = 0; i < 2; ++i)
    for (int j = 1; j < Fixture::kMembers; ++j)
      for (const std::string& name : f.bank.member(i, 0).param_names()) {
        std::string dst = name;
        const std::string from = "/m0/", to = "/m" + std::to_string(j) + "/";
        dst.replace(dst.find(from), from.size(), to);
        f.store.at(dst) = f.store.at(name);
      }
  CHECK(ensemble_diversity(f.bank, f.store, wins) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sync_targets bit-copies live parameters") {
  Fixture f;
  f.store.at("critic/a0/m0/W0").data[0] += 1.0;
  f.store.at("mixer/lambda/b0").data[0] += 0.5;
  CHECK(f.store.at("target/critic/a0/m0/W0").data[0] !=
        f.store.at("critic/a0/m0/W0").data[0]);
  f.bank.sync_targets(f.store);
  CHECK(f.store.at("target/critic/a0/m0/W0").data[0] ==
        f.store.at("critic/a0/m0/W0").data[0]);
  CHECK(f.store.at("target/mixer/lambda/b0").data[0] ==
        f.store.at("mixer/lambda/b0").data[0]);
}
