#include "emix/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emix {

double sample_mean(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  const double mu = sample_mean(values);
  double s = 0.0;
  for (double v : values) s += (v - mu) * (v - mu);
  return s / static_cast<double>(values.size());
}

double raw_kurtosis(std::span<const double> values, double var_eps) {
  if (values.size() < 2) throw std::invalid_argument("kurtosis needs >= 2 values");
  const double n = static_cast<double>(values.size());
  const double mu = sample_mean(values);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mu;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  if (m2 < var_eps) return 0.0;
  return m4 / (m2 * m2);
}

double excess_kurtosis(std::span<const double> values, double var_eps) {
  if (values.size() < 2) throw std::invalid_argument("kurtosis needs >= 2 values");
  const double n = static_cast<double>(values.size());
  const double mu = sample_mean(values);
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mu;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  if (m2 < var_eps) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

double uncertainty_weight(double kappa_raw, double c1) {
  if (kappa_raw < 0.0) throw std::invalid_argument("uncertainty_weight: raw kurtosis < 0");
  if (c1 <= 0.0) throw std::invalid_argument("uncertainty_weight: C1 must be > 0");
  return 0.5 + 1.0 / (1.0 + std::exp(c1 * kappa_raw));
}

double bhattacharyya(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("bhattacharyya: length mismatch");
  double bc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
  bc = std::clamp(bc, kBhatEps, 1.0);
  return -std::log(bc);
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double s = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

double bhattacharyya_total(std::span<const double> mean_q,
                           const std::vector<std::vector<double>>& member_qs) {
  if (member_qs.size() < 2) throw std::invalid_argument("bhattacharyya_total: < 2 members");
  const std::vector<double> pm = softmax(mean_q);
  double total = 0.0;
  for (const auto& mq : member_qs) total += bhattacharyya(pm, softmax(mq));
  return total;
}

}  // namespace emix
