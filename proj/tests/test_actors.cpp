#include <doctest.h>

#include <cmath>

#include "emix/actors.hpp"
#include "test_util.hpp"

using namespace emix;
using emix::test::fd_max_rel_error;
using emix::test::random_vec;

TEST_CASE("policy is a strictly positive softmax of the logits") {
  Rng rng(9);
  ParamStore store;
  Actor actor(0, 6, 8, 4);
  actor.init(store, rng);
  const std::vector<double> w = random_vec(rng, 6);
  const std::vector<double> z = actor.logits(store, w);
  const std::vector<double> p = actor.policy(store, w);
  REQUIRE(p.size() == 4);
  double sum = 0.0;
  for (double x : p) {
    CHECK(x > 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> ref = softmax(z);
  for (int a = 0; a < 4; ++a) CHECK(p[a] == doctest::Approx(ref[a]).epsilon(1e-12));
}

TEST_CASE("advantage subtracts the exact policy baseline") {
  const std::vector<double> q = {1.0, 2.0, 4.0};
  const std::vector<double> pi = {0.2, 0.3, 0.5};
  const double baseline = 0.2 * 1.0 + 0.3 * 2.0 + 0.5 * 4.0;
  CHECK(advantage(q, pi, 2.0, 1) == doctest::Approx(2.0 * (2.0 - baseline)));
  // expected advantage under the policy is exactly zero
  double expect = 0.0;
  for (int a = 0; a < 3; ++a) expect += pi[a] * advantage(q, pi, 2.0, a);
  CHECK(expect == doctest::Approx(0.0).epsilon(1e-12));
  // uniform Q has zero advantage everywhere
  CHECK(advantage({3.0, 3.0, 3.0}, pi, 5.0, 2) == doctest::Approx(0.0));
}

namespace {

struct ActorFixture {
  ParamStore store;
  Actor actor{0, 5, 8, 3};
  Rng rng{17};
  std::vector<std::vector<double>> windows;

  ActorFixture() {
    Rng init(55);
    actor.init(store, init);
    for (int r = 0; r < 6; ++r) windows.push_back(random_vec(rng, 5));
  }

  std::vector<OnPolicyRow> on_batch() {
    std::vector<OnPolicyRow> rows;
    Rng r(5);
    for (size_t i = 0; i < windows.size(); ++i)
      rows.push_back({&windows[i], r.uniform_int(3), r.normal()});
    return rows;
  }

  std::vector<OffPolicyRow> off_batch() {
    std::vector<OffPolicyRow> rows;
    Rng r(6);
    for (size_t i = 0; i < windows.size(); ++i)
      rows.push_back({&windows[i], random_vec(r, 3)});
    return rows;
  }
};

double on_objective(const ActorFixture& f, ParamStore& store,
                    const std::vector<OnPolicyRow>& rows) {
  double obj = 0.0;
  for (const OnPolicyRow& r : rows)
    obj += std::log(f.actor.policy(store, *r.window)[r.action]) * r.advantage;
  return obj / static_cast<double>(rows.size());
}

double off_objective(const ActorFixture& f, ParamStore& store,
                     const std::vector<OffPolicyRow>& rows) {
  double obj = 0.0;
  for (const OffPolicyRow& r : rows) {
    const std::vector<double> pi = f.actor.policy(store, *r.window);
    for (int a = 0; a < 3; ++a) obj += pi[a] * r.qtot_per_action[a];
  }
  return obj / static_cast<double>(rows.size());
}

}  // namespace

TEST_CASE("on-policy gradient matches finite differences of its objective") {
  ActorFixture f;
  const auto rows = f.on_batch();
  const auto grads = on_policy_grad(f.actor, f.store, rows);
  auto loss_fn = [&]() { return on_objective(f, f.store, rows); };
  Rng probe(3);
  CHECK(fd_max_rel_error(f.store, grads, loss_fn, probe, 50) < 1e-4);
  CHECK_THROWS(on_policy_grad(f.actor, f.store, {}));
}

TEST_CASE("off-policy gradient matches finite differences of its objective") {
  ActorFixture f;
  const auto rows = f.off_batch();
  const auto grads = off_policy_grad(f.actor, f.store, rows);
  auto loss_fn = [&]() { return off_objective(f, f.store, rows); };
  Rng probe(4);
  CHECK(fd_max_rel_error(f.store, grads, loss_fn, probe, 50) < 1e-4);
  CHECK_THROWS(off_policy_grad(f.actor, f.store, {}));
}

TEST_CASE("off-policy objective is invariant to constant Q_tot shifts in expectation") {
  // adding a constant to every action's Q_tot leaves the gradient unchanged:
  // sum_a grad pi(a) * const = const * grad sum_a pi(a) = 0
  ActorFixture f;
  auto rows = f.off_batch();
  const auto g1 = off_policy_grad(f.actor, f.store, rows);
  for (auto& r : rows)
    for (double& q : r.qtot_per_action) q += 123.456;
  const auto g2 = off_policy_grad(f.actor, f.store, rows);
  for (const auto& [name, t] : g1)
    for (size_t k = 0; k < t.size(); ++k)
      CHECK(t.data[k] == doctest::Approx(g2.at(name).data[k]).epsilon(1e-7));
}

TEST_CASE("nu = 0.5 mixed step equals the average of both arms") {
  ActorFixture f;
  const auto on = f.on_batch();
  const auto off = f.off_batch();

  const auto g_on = on_policy_grad(f.actor, f.store, on);
  const auto g_off = off_policy_grad(f.actor, f.store, off);

  // replicate the update on a copy: Adam over -(0.5 g_on + 0.5 g_off)
  ParamStore manual;
  for (const auto& [name, t] : f.store.params()) manual.add(name, t);
  std::map<std::string, Tensor2> mixed;
  for (const auto& [name, t] : g_on) {
    Tensor2 m(t.rows, t.cols);
    for (size_t k = 0; k < t.size(); ++k)
      m.data[k] = -(0.5 * t.data[k] + 0.5 * g_off.at(name).data[k]);
    mixed[name] = std::move(m);
  }
  manual.adam_step(mixed, 1e-3);

  mixed_update(f.actor, f.store, on, off, 0.5, 1e-3);
  for (const auto& [name, t] : manual.params())
    for (size_t k = 0; k < t.size(); ++k)
      CHECK(f.store.at(name).data[k] == doctest::Approx(t.data[k]).epsilon(1e-12));
}

TEST_CASE("nu gates select the arms") {
  ActorFixture f;
  const auto on = f.on_batch();
  // nu = 0 never touches the off-policy arm (empty batch is fine)
  const auto res = mixed_update(f.actor, f.store, on, {}, 0.0, 1e-3);
  CHECK(res.grad_norm > 0.0);
  // nu = 1 never touches the on-policy arm
  const auto off = f.off_batch();
  const auto res2 = mixed_update(f.actor, f.store, {}, off, 1.0, 1e-3);
  CHECK(res2.grad_norm > 0.0);
  CHECK_THROWS(mixed_update(f.actor, f.store, on, off, 1.5, 1e-3));
}
