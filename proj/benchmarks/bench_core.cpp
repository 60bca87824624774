#include <benchmark/benchmark.h>

#include "emix/critics.hpp"
#include "emix/mlp.hpp"
#include "emix/oracle.hpp"
#include "emix/trainer.hpp"

namespace {

using namespace emix;

struct BankFixture {
  ParamStore store;
  CriticBank bank;
  std::vector<Actor> actors;
  Episode episode;

  BankFixture(int n_members, int hidden, int steps) {
    Rng rng(42);
    const int k = 3, actions = 5, window_dim = 16, state_dim = 8;
    bank = CriticBank::create(k, {actions, actions, actions}, window_dim, state_dim,
                              n_members, hidden, hidden, store, rng);
    for (int i = 0; i < k; ++i) {
      actors.emplace_back(i, window_dim, hidden, actions);
      actors.back().init(store, rng);
    }
    for (int t = 0; t < steps; ++t) {
      Transition tr;
      for (int d = 0; d < state_dim; ++d) tr.state.push_back(rng.uniform());
      for (int i = 0; i < k; ++i) {
        std::vector<double> w;
        for (int d = 0; d < window_dim; ++d) w.push_back(rng.uniform());
        tr.windows.push_back(w);
        tr.actions.push_back(rng.uniform_int(actions));
        tr.behavior_probs.push_back(0.2);
      }
      tr.next_state = tr.state;
      tr.next_windows = tr.windows;
      tr.reward = rng.normal();
      tr.terminated = t == steps - 1;
      episode.push_back(tr);
    }
  }
};

void BM_MlpEval(benchmark::State& state) {
  ParamStore store;
  Rng rng(1);
  const int width = static_cast<int>(state.range(0));
  Mlp net("bench", width, width, 2, width, Activation::kRelu);
  net.init(store, rng);
  Tensor2 x(1, width);
  for (double& v : x.data) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(net.eval(store, x));
}
BENCHMARK(BM_MlpEval)->Arg(32)->Arg(64)->Arg(128);

void BM_MlpForwardBackward(benchmark::State& state) {
  ParamStore store;
  Rng rng(1);
  const int width = static_cast<int>(state.range(0));
  Mlp net("bench", width, width, 2, 1, Activation::kRelu);
  net.init(store, rng);
  Tensor2 x(8, width);
  for (double& v : x.data) v = rng.normal();
  for (auto _ : state) {
    Tape tape;
    auto out = tape.mean(net.forward(tape, store, tape.constant(x)));
    benchmark::DoNotOptimize(tape.backward(out));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(32)->Arg(64);

void BM_TdLambdaTarget(benchmark::State& state) {
  BankFixture f(static_cast<int>(state.range(0)), 32, 40);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        td_lambda_target(f.bank, f.store, f.episode, 0.8, 0.99, 0.01, true));
}
BENCHMARK(BM_TdLambdaTarget)->Arg(5)->Arg(10);

void BM_CriticLoss(benchmark::State& state) {
  BankFixture f(static_cast<int>(state.range(0)), 32, 40);
  const std::vector<double> y =
      td_lambda_target(f.bank, f.store, f.episode, 0.8, 0.99, 0.01, true);
  CriticBatch batch;
  for (size_t t = 0; t < f.episode.size(); ++t) {
    batch.on.push_back(&f.episode[t]);
    batch.y_on.push_back(y[t]);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(critic_loss(f.bank, f.store, batch, 1.0, 0.001));
}
BENCHMARK(BM_CriticLoss)->Arg(5)->Arg(10);

void BM_OracleSolve(benchmark::State& state) {
  Rng rng(7);
  const TabularDecMDP mdp =
      TabularDecMDP::random(rng, static_cast<int>(state.range(0)), 2, 3, 0.9);
  JointPolicy pi(2);
  for (int i = 0; i < 2; ++i) {
    pi[i].resize(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
      pi[i][s].assign(mdp.num_actions[i], 1.0 / mdp.num_actions[i]);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(exact_q_tot(mdp, pi));
}
BENCHMARK(BM_OracleSolve)->Arg(10)->Arg(20);

void BM_TrainEpisode(benchmark::State& state) {
  TrainConfig cfg;
  cfg.environment = "matrix_game";
  cfg.L = 1;
  cfg.N = 5;
  cfg.hidden = 32;
  cfg.mixer_hidden = 16;
  cfg.seed = 3;
  for (auto _ : state) {
    Trainer trainer(cfg);
    benchmark::DoNotOptimize(trainer.run(""));
  }
}
BENCHMARK(BM_TrainEpisode);

}  // namespace

BENCHMARK_MAIN();
