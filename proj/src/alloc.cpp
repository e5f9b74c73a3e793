#include "veriflow/alloc.hpp"

#include <algorithm>
#include <cmath>

namespace veriflow {

void AllocConfig::validate() const {
  if (!(1 <= k_min && k_min <= k_base && k_base <= k_max))
    throw std::invalid_argument("alloc: need 1 <= k_min <= k_base <= k_max");
  if (beta < 0) throw std::invalid_argument("alloc: beta must be >= 0");
  if (!(ema_decay > 0 && ema_decay <= 1)) throw std::invalid_argument("alloc: ema_decay must be in (0,1]");
  if (sigma_bar_mode == SigmaBarMode::fixed && !(sigma_bar > 0))
    throw std::invalid_argument("alloc: fixed sigma_bar must be positive");
}

double score_variance(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("score_variance of an empty list");
  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : scores) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  return std::max(0.0, m2 / static_cast<double>(n));
}

int k_of_w(const AllocConfig& cfg, const AllocState& st, double sigma) {
  if (sigma < 0 || std::isnan(sigma)) throw std::invalid_argument("k_of_w: sigma must be >= 0");
  double bar = cfg.sigma_bar_mode == SigmaBarMode::fixed ? cfg.sigma_bar : st.sigma_bar;
  double ratio = 1.0;
  if (sigma == 0.0)
    ratio = 0.0;
  else if (bar > 0.0)
    ratio = sigma / bar;
  double inner = static_cast<double>(cfg.k_base) * (1.0 + cfg.beta * (ratio - 1.0));
  double rounded = std::floor(inner + 0.5);
  rounded = std::clamp(rounded, static_cast<double>(cfg.k_min), static_cast<double>(cfg.k_max));
  return static_cast<int>(rounded);
}

AllocState update_sigma_bar(AllocState st, double sigma, const AllocConfig& cfg) {
  if (sigma < 0) throw std::invalid_argument("update_sigma_bar: sigma must be >= 0");
  ++st.observations;
  if (cfg.sigma_bar_mode == SigmaBarMode::fixed) {
    st.sigma_bar = cfg.sigma_bar;
    return st;
  }
  if (!st.warmed_up()) {
    if (sigma > 0) st.sigma_bar = sigma;
    return st;
  }
  st.sigma_bar = cfg.ema_decay * st.sigma_bar + (1.0 - cfg.ema_decay) * sigma;
  return st;
}

}  // namespace veriflow
