#include <doctest.h>

#include <cmath>

#include "emix/rng.hpp"
#include "emix/stats.hpp"

using namespace emix;

TEST_CASE("raw and excess kurtosis on known samples") {
  // {1,2,3,4}: m2 = 1.25, m4 = 2.5625 -> raw = 1.64, excess = -1.36
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(raw_kurtosis(v) == doctest::Approx(1.64).epsilon(1e-13));
  CHECK(excess_kurtosis(v) == doctest::Approx(-1.36).epsilon(1e-13));

  // two-point symmetric sample has minimal kurtosis 1
  const std::vector<double> two = {-1, 1};
  CHECK(raw_kurtosis(two) == doctest::Approx(1.0));
  CHECK(excess_kurtosis(two) == doctest::Approx(-2.0));
}

TEST_CASE("kurtosis degenerate and error branches") {
  const std::vector<double> flat = {2.5, 2.5, 2.5};
  CHECK(raw_kurtosis(flat) == 0.0);
  CHECK(excess_kurtosis(flat) == 0.0);
  const std::vector<double> one = {1.0};
  CHECK_THROWS(raw_kurtosis(one));
}

TEST_CASE("kurtosis shift and scale invariance") {
  Rng rng(11);
  std::vector<double> v(64), w(64);
  for (double& x : v) x = rng.normal();
  for (size_t i = 0; i < v.size(); ++i) w[i] = 3.0 * v[i] - 7.0;
  CHECK(raw_kurtosis(w) == doctest::Approx(raw_kurtosis(v)).epsilon(1e-10));
}

TEST_CASE("normal sample excess kurtosis is near zero") {
  Rng rng(3);
  std::vector<double> v(200000);
  for (double& x : v) x = rng.normal();
  CHECK(std::fabs(excess_kurtosis(v)) < 0.05);
  CHECK(raw_kurtosis(v) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("uncertainty weight") {
  CHECK(uncertainty_weight(0.0, 0.01) == 1.0);
  // kappa = 3, C1 = 0.01: 0.5 + sigmoid(-0.03)
  const double expect = 0.5 + 1.0 / (1.0 + std::exp(0.03));
  CHECK(uncertainty_weight(3.0, 0.01) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(uncertainty_weight(3.0, 0.01) == doctest::Approx(0.99250).epsilon(1e-4));
  // monotone decreasing in kappa, bounded in (0.5, 1]
  double prev = 2.0;
  for (double kappa : {0.0, 1.0, 10.0, 100.0, 1e3}) {
    const double k = uncertainty_weight(kappa, 0.01);
    CHECK(k <= 1.0);
    CHECK(k > 0.5);
    CHECK(k < prev + 1e-15);
    prev = k;
  }
  // extreme kurtosis saturates at the lower bound in floating point
  CHECK(uncertainty_weight(1e9, 0.01) >= 0.5);
  CHECK_THROWS(uncertainty_weight(-1.0, 0.01));
  CHECK_THROWS(uncertainty_weight(1.0, 0.0));
}

TEST_CASE("bhattacharyya distance") {
  const std::vector<double> p = {0.5, 0.5}, q = {0.9, 0.1};
  CHECK(bhattacharyya(p, q) == doctest::Approx(0.111572).epsilon(1e-5));
  CHECK(bhattacharyya(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  // symmetry
  CHECK(bhattacharyya(p, q) == doctest::Approx(bhattacharyya(q, p)).epsilon(1e-12));
  // disjoint supports hit the clamp: -log(kBhatEps)
  const std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0};
  CHECK(bhattacharyya(a, b) == doctest::Approx(-std::log(kBhatEps)).epsilon(1e-12));
}

TEST_CASE("softmax") {
  const std::vector<double> z = {1.0, 2.0, 3.0};
  const std::vector<double> p = softmax(z);
  double sum = 0.0;
  for (double x : p) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[2] > p[1]);
  CHECK(p[1] > p[0]);
  // shift invariance
  const std::vector<double> zs = {1001.0, 1002.0, 1003.0};
  const std::vector<double> ps = softmax(zs);
  for (int i = 0; i < 3; ++i) CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("bhattacharyya_total over members") {
  const std::vector<double> mean_q = {0.0, 1.0};
  const std::vector<std::vector<double>> members = {{0.0, 1.0}, {1.0, 0.0}};
  const double d0 = bhattacharyya(softmax(mean_q), softmax(members[0]));
  const double d1 = bhattacharyya(softmax(mean_q), softmax(members[1]));
  CHECK(bhattacharyya_total(mean_q, members) == doctest::Approx(d0 + d1).epsilon(1e-12));
}

TEST_CASE("sample mean and population variance") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(sample_mean(v) == doctest::Approx(2.5));
  CHECK(sample_variance(v) == doctest::Approx(1.25));
}
