#include "mtlsp/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "mtlsp/errors.hpp"

namespace mtlsp {

Strategy strategy_from_name(const std::string& name) {
  if (name == "uniform") return Strategy::Uniform;
  if (name == "proportional") return Strategy::Proportional;
  if (name == "logprop") return Strategy::LogProportional;
  if (name == "squareroot") return Strategy::SquareRoot;
  if (name == "power") return Strategy::Power;
  if (name == "annealed") return Strategy::Annealed;
  if (name == "inverse") return Strategy::Inverse;
  if (name == "loss") return Strategy::Loss;
  throw UsageError("unknown sampling strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Uniform: return "uniform";
    case Strategy::Proportional: return "proportional";
    case Strategy::LogProportional: return "logprop";
    case Strategy::SquareRoot: return "squareroot";
    case Strategy::Power: return "power";
    case Strategy::Annealed: return "annealed";
    case Strategy::Inverse: return "inverse";
    default: return "loss";
  }
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = {
      Strategy::Uniform,  Strategy::Proportional, Strategy::LogProportional,
      Strategy::SquareRoot, Strategy::Power,      Strategy::Annealed,
      Strategy::Inverse,  Strategy::Loss,
  };
  return all;
}

std::vector<double> probabilities(const SamplerState& state) {
  const size_t n = state.sizes.size();
  if (n == 0) throw DataError("sampler: zero tasks");
  for (int64_t d : state.sizes) {
    if (d < 1) throw DataError("sampler: task size must be >= 1");
  }
  std::vector<double> w(n);
  switch (state.strategy) {
    case Strategy::Uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case Strategy::Proportional:
      for (size_t i = 0; i < n; ++i) w[i] = static_cast<double>(state.sizes[i]);
      break;
    case Strategy::LogProportional:
      // clamp keeps log(1) from zeroing a task out
      for (size_t i = 0; i < n; ++i) {
        w[i] = std::log(static_cast<double>(std::max<int64_t>(state.sizes[i], 2)));
      }
      break;
    case Strategy::SquareRoot:
      for (size_t i = 0; i < n; ++i) w[i] = std::sqrt(static_cast<double>(state.sizes[i]));
      break;
    case Strategy::Power:
      for (size_t i = 0; i < n; ++i) w[i] = std::pow(static_cast<double>(state.sizes[i]), 0.75);
      break;
    case Strategy::Annealed:
      for (size_t i = 0; i < n; ++i) w[i] = std::pow(static_cast<double>(state.sizes[i]), state.alpha);
      break;
    case Strategy::Inverse:
      for (size_t i = 0; i < n; ++i) w[i] = 1.0 / static_cast<double>(state.sizes[i]);
      break;
    case Strategy::Loss:
      if (state.dev_losses.size() != n) {
        throw DataError("loss sampling requires one dev loss per task");
      }
      for (size_t i = 0; i < n; ++i) {
        if (state.dev_losses[i] < 0.0) {
          throw DataError("loss sampling requires nonnegative dev losses");
        }
        w[i] = std::max(state.dev_losses[i], 1e-6);
      }
      break;
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return w;
}

size_t draw_task(const SamplerState& state, Rng& rng) {
  const std::vector<double> p = probabilities(state);
  const double u = rng.uniform();
  double c = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    c += p[i];
    if (u < c) return i;
  }
  return p.size() - 1;
}

void on_epoch_end(SamplerState& state, const std::vector<double>& new_dev_losses) {
  state.epoch += 1;
  state.alpha = std::max(
      state.alpha_min,
      1.0 - static_cast<double>(state.epoch - 1) / static_cast<double>(state.anneal_epochs));
  if (!new_dev_losses.empty()) {
    if (new_dev_losses.size() != state.sizes.size()) {
      throw DataError("dev loss count does not match task count");
    }
    state.dev_losses = new_dev_losses;
  }
}

}  // namespace mtlsp
