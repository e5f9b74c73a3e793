#include <doctest.h>

#include <cmath>
#include <vector>

#include "veriflow/alloc.hpp"
#include "veriflow/rng.hpp"

using namespace veriflow;

namespace {

AllocConfig fixed_cfg(int k_base, double beta, double sigma_bar) {
  AllocConfig c;
  c.k_base = k_base;
  c.beta = beta;
  c.sigma_bar_mode = SigmaBarMode::fixed;
  c.sigma_bar = sigma_bar;
  return c;
}

double two_pass_variance(const std::vector<double>& xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("score variance") {
  std::vector<double> a{1, 1, 1}, b{0, 2};
  CHECK(score_variance(a) == 0.0);
  CHECK(score_variance(b) == 1.0);
  CHECK_THROWS_AS(score_variance(std::vector<double>{}), std::invalid_argument);
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> xs(1 + rng.below(12));
    for (double& x : xs) x = rng.normal() * 3.0;
    CHECK(score_variance(xs) == doctest::Approx(two_pass_variance(xs)).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("k_of_w examples") {
  AllocState st;
  CHECK(k_of_w(fixed_cfg(4, 0.5, 1.5), st, 1.5) == 4);
  CHECK(k_of_w(fixed_cfg(4, 0.5, 1.5), st, 0.0) == 2);
  CHECK(k_of_w(fixed_cfg(4, 0.5, 1.5), st, 4.5) == 8);
  for (double s : {0.0, 0.1, 1.5, 30.0}) CHECK(k_of_w(fixed_cfg(4, 0.0, 1.5), st, s) == 4);
  CHECK_THROWS_AS(k_of_w(fixed_cfg(4, 0.5, 1.0), st, -1.0), std::invalid_argument);
}

TEST_CASE("k_of_w rounds half up before clipping") {
  // 3 * (1 + 0.5 * (2 - 1)) = 4.5
  CHECK(k_of_w(fixed_cfg(3, 0.5, 1.0), AllocState{}, 2.0) == 5);
  // 3 * (1 - 0.5) = 1.5
  CHECK(k_of_w(fixed_cfg(3, 0.5, 1.0), AllocState{}, 0.0) == 2);
}

TEST_CASE("k_of_w stays within bounds and is monotone in sigma") {
  Rng rng(9);
  for (int i = 0; i < 100000; ++i) {
    AllocConfig c;
    c.k_min = 1 + static_cast<int>(rng.below(3));
    c.k_max = c.k_min + static_cast<int>(rng.below(10));
    c.k_base = 1 + static_cast<int>(rng.below(12));
    c.beta = rng.uniform() * 3.0;
    c.sigma_bar_mode = rng.bernoulli(0.5) ? SigmaBarMode::fixed : SigmaBarMode::ema;
    c.sigma_bar = rng.uniform() * 5.0 + 1e-9;
    AllocState st;
    st.sigma_bar = rng.bernoulli(0.2) ? 0.0 : rng.uniform() * 5.0;
    double s1 = rng.bernoulli(0.1) ? 0.0 : std::exp(rng.normal() * 3.0);
    double s2 = s1 + rng.uniform() * 10.0;
    int k1 = k_of_w(c, st, s1);
    int k2 = k_of_w(c, st, s2);
    CHECK(k1 >= c.k_min);
    CHECK(k1 <= c.k_max);
    if (st.sigma_bar > 0 || c.sigma_bar_mode == SigmaBarMode::fixed) CHECK(k1 <= k2);
  }
}

TEST_CASE("sigma bar EMA") {
  AllocConfig c;
  AllocState st = update_sigma_bar(AllocState{}, 2.0, c);
  CHECK(st.sigma_bar == 2.0);
  st = update_sigma_bar(st, 1.0, c);
  CHECK(st.sigma_bar == doctest::Approx(0.9 * 2.0 + 0.1 * 1.0));

  AllocConfig frozen;
  frozen.ema_decay = 1.0;
  AllocState f = update_sigma_bar(AllocState{}, 3.0, frozen);
  for (double s : {0.5, 9.0, 0.0, 4.0}) f = update_sigma_bar(f, s, frozen);
  CHECK(f.sigma_bar == 3.0);

  AllocState g = update_sigma_bar(AllocState{}, 5.0, c);
  double prev = std::abs(g.sigma_bar - 1.0);
  for (int i = 0; i < 200; ++i) {
    g = update_sigma_bar(g, 1.0, c);
    double gap = std::abs(g.sigma_bar - 1.0);
    CHECK(gap <= prev);
    prev = gap;
  }
  CHECK(prev < 1e-6);

  AllocState z = update_sigma_bar(AllocState{}, 0.0, c);
  CHECK_FALSE(z.warmed_up());
}

TEST_CASE("alloc config validation") {
  AllocConfig c;
  CHECK_NOTHROW(c.validate());
  c.k_min = 5;
  c.k_max = 2;
  CHECK_THROWS(c.validate());
}
