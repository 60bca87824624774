#include "emix/actors.hpp"

#include <stdexcept>

namespace emix {

Actor::Actor(int agent, int window_dim, int hidden, int num_actions)
    : agent_(agent),
      num_actions_(num_actions),
      net_("actor/a" + std::to_string(agent), window_dim, hidden, 2, num_actions,
           Activation::kTanh) {}

std::vector<double> Actor::logits(const ParamStore& store,
                                  const std::vector<double>& window) const {
  return net_.eval(store, Tensor2::row(window)).data;
}

std::vector<double> Actor::policy(const ParamStore& store,
                                  const std::vector<double>& window) const {
  return softmax(logits(store, window));
}

double advantage(const std::vector<double>& mean_q, const std::vector<double>& pi,
                 double lambda_i, int action) {
  double baseline = 0.0;
  for (size_t a = 0; a < mean_q.size(); ++a) baseline += pi[a] * mean_q[a];
  return lambda_i * (mean_q[action] - baseline);
}

namespace {

Tensor2 window_matrix(const std::vector<const std::vector<double>*>& windows) {
  Tensor2 x(static_cast<int>(windows.size()), static_cast<int>(windows[0]->size()));
  for (size_t r = 0; r < windows.size(); ++r)
    std::copy(windows[r]->begin(), windows[r]->end(),
              x.data.begin() + r * windows[0]->size());
  return x;
}

}  // namespace

std::map<std::string, Tensor2> on_policy_grad(const Actor& actor, ParamStore& store,
                                              const std::vector<OnPolicyRow>& batch) {
  if (batch.empty()) throw std::invalid_argument("on_policy_grad: empty batch");
  std::vector<const std::vector<double>*> windows;
  std::vector<int> actions;
  Tensor2 adv(static_cast<int>(batch.size()), 1);
  for (size_t r = 0; r < batch.size(); ++r) {
    windows.push_back(batch[r].window);
    actions.push_back(batch[r].action);
    adv.at(static_cast<int>(r), 0) = batch[r].advantage;
  }
  Tape tape;
  auto x = tape.constant(window_matrix(windows));
  auto logits = actor.net().forward(tape, store, x);
  auto logp = tape.gather_cols(tape.log(tape.softmax_rows(logits)), std::move(actions));
  auto obj = tape.mean(tape.mul(logp, tape.constant(std::move(adv))));
  return tape.backward(obj);
}

std::map<std::string, Tensor2> off_policy_grad(const Actor& actor, ParamStore& store,
                                               const std::vector<OffPolicyRow>& batch) {
  if (batch.empty()) throw std::invalid_argument("off_policy_grad: empty batch");
  std::vector<const std::vector<double>*> windows;
  Tensor2 q(static_cast<int>(batch.size()), actor.num_actions());
  for (size_t r = 0; r < batch.size(); ++r) {
    windows.push_back(batch[r].window);
    for (int a = 0; a < actor.num_actions(); ++a)
      q.at(static_cast<int>(r), a) = batch[r].qtot_per_action[a];
  }
  Tape tape;
  auto x = tape.constant(window_matrix(windows));
  auto pi = tape.softmax_rows(actor.net().forward(tape, store, x));
  auto obj = tape.mean(tape.row_sum(tape.mul(pi, tape.constant(std::move(q)))));
  return tape.backward(obj);
}

MixedUpdateResult mixed_update(const Actor& actor, ParamStore& store,
                               const std::vector<OnPolicyRow>& on_batch,
                               const std::vector<OffPolicyRow>& off_batch, double nu,
                               double lr, double beta1, double beta2, double eps) {
  if (nu < 0.0 || nu > 1.0) throw std::invalid_argument("mixed_update: nu outside [0,1]");
  std::map<std::string, Tensor2> mixed;
  auto accumulate = [&](const std::map<std::string, Tensor2>& g, double w) {
    for (const auto& [name, t] : g) {
      auto it = mixed.find(name);
      if (it == mixed.end()) {
        Tensor2 acc(t.rows, t.cols);
        for (size_t k = 0; k < t.size(); ++k) acc.data[k] = w * t.data[k];
        mixed[name] = std::move(acc);
      } else {
        for (size_t k = 0; k < t.size(); ++k) it->second.data[k] += w * t.data[k];
      }
    }
  };
  if (nu < 1.0) accumulate(on_policy_grad(actor, store, on_batch), 1.0 - nu);
  if (nu > 0.0) accumulate(off_policy_grad(actor, store, off_batch), nu);

  MixedUpdateResult res;
  res.grad_norm = grad_l2_norm(mixed);
  // Adam minimizes; negate the ascent direction.
  for (auto& [_, g] : mixed)
    for (double& v : g.data) v = -v;
  store.adam_step(mixed, lr, beta1, beta2, eps);
  return res;
}

}  // namespace emix
