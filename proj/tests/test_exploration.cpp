#include <doctest.h>

#include <cmath>

#include "emix/exploration.hpp"
#include "test_util.hpp"

using namespace emix;
using emix::test::random_vec;

TEST_CASE("epsilon schedule decays linearly then clamps") {
  EpsilonSchedule s{1.0, 0.05, 1000};
  CHECK(s.value(0) == doctest::Approx(1.0));
  CHECK(s.value(500) == doctest::Approx(0.525));
  CHECK(s.value(1000) == doctest::Approx(0.05));
  CHECK(s.value(100000) == doctest::Approx(0.05));
  EpsilonSchedule flat{1.0, 0.2, 0};
  CHECK(flat.value(0) == doctest::Approx(0.2));
}

TEST_CASE("mean excess kurtosis averages the per-action statistics") {
  // two actions: one column {1,2,3,4} (excess -1.36), one degenerate (0)
  Tensor2 m(4, 2);
  for (int j = 0; j < 4; ++j) {
    m.at(j, 0) = 1.0 + j;
    m.at(j, 1) = 5.0;
  }
  CHECK(mean_excess_kurtosis(m) == doctest::Approx(-0.68).epsilon(1e-12));
}

TEST_CASE("gated bonus applies only when gbar is positive") {
  const std::vector<double> z = {0.1, -0.2, 0.3};
  const std::vector<double> kurt = {1.0, 2.0, -0.5};
  const auto open = weighted_logits(z, kurt, 0.7, 0.01);
  CHECK(open[0] == doctest::Approx(0.11));
  CHECK(open[1] == doctest::Approx(-0.18));
  CHECK(open[2] == doctest::Approx(0.295));
  CHECK(weighted_logits(z, kurt, 0.0, 0.01) == z);
  CHECK(weighted_logits(z, kurt, -0.3, 0.01) == z);
  CHECK_THROWS(weighted_logits(z, {1.0}, 0.5, 0.01));
}

TEST_CASE("variance bonus is unconditional") {
  const std::vector<double> z = {0.0, 1.0};
  const auto out = variance_bonus_logits(z, {2.0, 0.5}, 0.1);
  CHECK(out[0] == doctest::Approx(0.2));
  CHECK(out[1] == doctest::Approx(1.05));
  CHECK_THROWS(variance_bonus_logits(z, {1.0, 2.0, 3.0}, 0.1));
}

namespace {

struct SelectFixture {
  ParamStore store;
  CriticBank bank;
  Actor actor{0, 6, 8, 4};
  std::vector<double> window;

  SelectFixture() {
    Rng init(123);
    bank = CriticBank::create(2, {4, 4}, 6, 3, 4, 8, 8, store, init);
    actor.init(store, init);
    Rng w(5);
    window = random_vec(w, 6);
  }
};

}  // namespace

TEST_CASE("select_action matches the exact epsilon-mixture probabilities") {
  SelectFixture f;
  ExploreConfig cfg;
  cfg.mode = ExploreMode::kKurtosisGated;
  cfg.bonus_beta = 0.5;

  // reference distribution: the same bonus-weighted softmax
  const Tensor2 m = f.bank.member_matrix(f.store, 0, f.window);
  const double gbar = mean_excess_kurtosis(m);
  const std::vector<double> p = softmax(weighted_logits(
      f.actor.logits(f.store, f.window), per_action_excess_kurtosis(m), gbar,
      cfg.bonus_beta));

  const double eps = 0.3;
  Rng rng(77);
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const ActionChoice ch = select_action(f.actor, f.bank, f.store, f.window, cfg, eps, rng);
    CHECK(ch.gbar == doctest::Approx(gbar));
    CHECK(ch.gate_open == (gbar > 0.0));
    const double expect = eps / 4.0 + (1.0 - eps) * p[ch.action];
    CHECK(ch.probability == doctest::Approx(expect).epsilon(1e-12));
    ++counts[ch.action];
  }
  for (int a = 0; a < 4; ++a) {
    const double expect = eps / 4.0 + (1.0 - eps) * p[a];
    const double freq = static_cast<double>(counts[a]) / n;
    CHECK(freq == doctest::Approx(expect).epsilon(0.08));
  }
}

TEST_CASE("exploration mode none ignores the critics") {
  SelectFixture f;
  ExploreConfig cfg;
  cfg.mode = ExploreMode::kNone;
  cfg.bonus_beta = 100.0;  // would distort heavily if applied
  const std::vector<double> p = f.actor.policy(f.store, f.window);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const ActionChoice ch = select_action(f.actor, f.bank, f.store, f.window, cfg, 0.0, rng);
    CHECK(ch.probability == doctest::Approx(p[ch.action]).epsilon(1e-12));
    CHECK(!ch.gate_open);
  }
}

TEST_CASE("eval_action samples the plain policy") {
  SelectFixture f;
  const std::vector<double> p = f.actor.policy(f.store, f.window);
  Rng rng(11);
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[eval_action(f.actor, f.store, f.window, rng)];
  for (int a = 0; a < 4; ++a)
    CHECK(static_cast<double>(counts[a]) / n == doctest::Approx(p[a]).epsilon(0.08));
}
