#pragma once

#include <span>
#include <vector>

namespace emix {

constexpr double kVarEps = 1e-12;
constexpr double kBhatEps = 1e-12;

/// Fourth standardized moment m4/m2^2 with population (1/N) moments.
/// Degenerate samples (variance < var_eps) return 0: zero ensemble
/// disagreement is treated as zero uncertainty. Requires N >= 2.
double raw_kurtosis(std::span<const double> values, double var_eps = kVarEps);

/// raw_kurtosis - 3 on the non-degenerate branch, 0 on the degenerate one.
double excess_kurtosis(std::span<const double> values, double var_eps = kVarEps);

/// k = 0.5 + sigmoid(-C1 * kappa_raw), in (0.5, 1]. kappa_raw is the RAW
/// kurtosis (no subtraction of 3) and must be >= 0.
double uncertainty_weight(double kappa_raw, double c1);

/// Bhattacharyya distance -ln(sum_a sqrt(p_a q_a)) between discrete
/// distributions of equal length. The coefficient is clamped to
/// [kBhatEps, 1] before the log.
double bhattacharyya(std::span<const double> p, std::span<const double> q);

/// Row-wise softmax of a value vector.
std::vector<double> softmax(std::span<const double> z);

/// Sum over members of bhattacharyya(softmax(mean_q), softmax(member_q_j)).
/// Requires >= 2 members, all vectors of equal length.
double bhattacharyya_total(std::span<const double> mean_q,
                           const std::vector<std::vector<double>>& member_qs);

double sample_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);  // population, 1/N

}  // namespace emix
