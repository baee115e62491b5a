#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlsp/rng.hpp"

namespace mtlsp {

enum class Strategy {
  Uniform,
  Proportional,
  LogProportional,
  SquareRoot,
  Power,
  Annealed,
  Inverse,
  Loss,
};

Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy s);
const std::vector<Strategy>& all_strategies();

struct SamplerState {
  Strategy strategy = Strategy::Proportional;
  std::vector<int64_t> sizes;      // D_t, one per task, all >= 1
  std::vector<double> dev_losses;  // L_t; required before any Loss draw
  int epoch = 1;
  double alpha = 1.0;       // annealed exponent, updated per epoch
  double alpha_min = 0.1;
  int anneal_epochs = 20;   // epochs from alpha=1 to the floor
  uint64_t seed = 0;        // owner seeds its Rng from this
};

// Analytic p_t per task; strictly positive, sums to 1.
//   uniform        1/N
//   proportional   D_t / sum(D)
//   logprop        log(max(D_t, 2)) normalized
//   squareroot     sqrt(D_t) normalized
//   power          D_t^0.75 normalized
//   annealed       D_t^alpha normalized
//   inverse        (1/D_t) normalized
//   loss           max(L_t, 1e-6) normalized
std::vector<double> probabilities(const SamplerState& state);

size_t draw_task(const SamplerState& state, Rng& rng);

// Advances the epoch, applies the annealing schedule
// alpha = max(alpha_min, 1 - (epoch-1)/anneal_epochs), and replaces the
// stored dev losses when fresh ones are supplied.
void on_epoch_end(SamplerState& state, const std::vector<double>& new_dev_losses);

}  // namespace mtlsp
