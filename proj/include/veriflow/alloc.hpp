#pragma once

// State-conditional verification budget:
//   k(w) = clip(k_min, k_max, k_base * (1 + beta * (sigma(w)/sigma_bar - 1)))
// where sigma(w) is the standard deviation of the hybrid scores of the gated
// candidates at w and sigma_bar is a running normalizer.

#include <span>
#include <stdexcept>

namespace veriflow {

enum class SigmaBarMode { ema, fixed };

struct AllocConfig {
  int k_min = 1;
  int k_base = 3;
  int k_max = 8;
  double beta = 0.5;
  SigmaBarMode sigma_bar_mode = SigmaBarMode::ema;
  double sigma_bar = 1.0;  // used in fixed mode
  double ema_decay = 0.9;

  void validate() const;
};

struct AllocState {
  double sigma_bar = 0.0;  // 0 until the first positive observation (ema mode)
  long observations = 0;

  bool warmed_up() const { return sigma_bar > 0.0; }
};

// Population variance. Throws std::invalid_argument for an empty list.
double score_variance(std::span<const double> scores);

// Rounds the inner expression half-up, then clips. sigma == 0 gives
// clip(k_base * (1 - beta)) regardless of sigma_bar.
int k_of_w(const AllocConfig& cfg, const AllocState& st, double sigma);

AllocState update_sigma_bar(AllocState st, double sigma, const AllocConfig& cfg);

}  // namespace veriflow
