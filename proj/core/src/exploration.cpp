#include "emix/exploration.hpp"

#include <stdexcept>

namespace emix {

double mean_excess_kurtosis(const Tensor2& member_matrix) {
  const std::vector<double> kurt = per_action_excess_kurtosis(member_matrix);
  double s = 0.0;
  for (double v : kurt) s += v;
  return s / static_cast<double>(kurt.size());
}

std::vector<double> weighted_logits(const std::vector<double>& logits,
                                    const std::vector<double>& excess_kurt, double gbar,
                                    double beta) {
  if (logits.size() != excess_kurt.size())
    throw std::invalid_argument("weighted_logits: length mismatch");
  std::vector<double> out = logits;
  if (gbar > 0.0)
    for (size_t j = 0; j < out.size(); ++j) out[j] += beta * excess_kurt[j];
  return out;
}

std::vector<double> variance_bonus_logits(const std::vector<double>& logits,
                                          const std::vector<double>& variances,
                                          double beta) {
  if (logits.size() != variances.size())
    throw std::invalid_argument("variance_bonus_logits: length mismatch");
  std::vector<double> out = logits;
  for (size_t j = 0; j < out.size(); ++j) out[j] += beta * variances[j];
  return out;
}

ActionChoice select_action(const Actor& actor, const CriticBank& bank,
                           const ParamStore& store, const std::vector<double>& window,
                           const ExploreConfig& cfg, double epsilon, Rng& rng) {
  const std::vector<double> z = actor.logits(store, window);
  std::vector<double> z_tilde;
  ActionChoice choice;
  switch (cfg.mode) {
    case ExploreMode::kKurtosisGated: {
      const Tensor2 m = bank.member_matrix(store, actor.agent(), window);
      choice.gbar = mean_excess_kurtosis(m);
      choice.gate_open = choice.gbar > 0.0;
      z_tilde = weighted_logits(z, per_action_excess_kurtosis(m), choice.gbar,
                                cfg.bonus_beta);
      break;
    }
    case ExploreMode::kVarianceAlways: {
      const Tensor2 m = bank.member_matrix(store, actor.agent(), window);
      choice.gate_open = true;
      z_tilde = variance_bonus_logits(z, per_action_variance(m), cfg.bonus_beta);
      break;
    }
    case ExploreMode::kNone:
      z_tilde = z;
      break;
  }
  const std::vector<double> p = softmax(z_tilde);
  const int m_i = static_cast<int>(p.size());
  if (rng.uniform() < epsilon)
    choice.action = rng.uniform_int(m_i);
  else
    choice.action = rng.sample_discrete(p);
  choice.probability = epsilon / m_i + (1.0 - epsilon) * p[choice.action];
  return choice;
}

int eval_action(const Actor& actor, const ParamStore& store,
                const std::vector<double>& window, Rng& rng) {
  return rng.sample_discrete(actor.policy(store, window));
}

}  // namespace emix
