#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "letfsim/matching_engine.hpp"
#include "letfsim/rng.hpp"

namespace letfsim {

/// Upper bounds for the three strategy weights.
struct WeightCaps {
  double fundamental = 1.0;
  double technical = 5.0;
  double noise = 1.0;
};

/// Mixing weights of the fundamental, technical (trend-following) and noise
/// terms. `noise` is fixed for the agent's lifetime.
struct StrategyWeights {
  double fundamental = 0.0;
  double technical = 0.0;
  double noise = 0.0;

  double total() const noexcept { return fundamental + technical + noise; }
  bool operator==(const StrategyWeights&) const = default;
};

struct NormalAgent {
  AgentId id = 0;
  StrategyWeights weights;
  std::int64_t lookback = 1;  // technical horizon in steps, fixed

  bool operator==(const NormalAgent&) const = default;
};

/// A quantity-one limit order decided by a normal agent.
struct OrderIntent {
  Side side = Side::buy;
  Price price = 0;
  Quantity quantity = 1;

  bool operator==(const OrderIntent&) const = default;
};

namespace detail {
inline void require_positive(double value, const char* what) {
  if (!(value > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}
}  // namespace detail

/// Return expected by a fundamentalist: log distance to the fundamental price.
inline double fundamental_return(double fundamental_price, double prev_price) {
  detail::require_positive(fundamental_price, "fundamental price");
  detail::require_positive(prev_price, "previous price");
  return std::log(fundamental_price / prev_price);
}

/// Return expected by a trend follower over its lookback.
inline double technical_return(double prev_price, double lagged_price) {
  detail::require_positive(prev_price, "previous price");
  detail::require_positive(lagged_price, "lagged price");
  return std::log(prev_price / lagged_price);
}

/// Weighted average of the three strategy returns.
inline double expected_return(const StrategyWeights& w, double fundamental, double technical, double noise) {
  const double total = w.total();
  if (!(total > 0.0)) throw std::logic_error("strategy weights sum to zero");
  return (w.fundamental * fundamental + w.technical * technical + w.noise * noise) / total;
}

inline double expected_price(double prev_price, double expected_ret) {
  detail::require_positive(prev_price, "previous price");
  return prev_price * std::exp(expected_ret);
}

/// Round to the nearest tick (ties up) with a floor of one tick.
inline Price round_to_tick(double raw_price, Price tick) {
  const double ticks = std::floor(raw_price / static_cast<double>(tick) + 0.5);
  return std::max<Price>(tick, static_cast<Price>(ticks) * tick);
}

/// Turns a drawn order price into an order. Buy below the expected price,
/// sell above it, nothing on an exact tie.
inline std::optional<OrderIntent> order_from_draw(double expected, double drawn_price, Price tick) {
  if (expected == drawn_price) return std::nullopt;
  const Side side = expected > drawn_price ? Side::buy : Side::sell;
  return OrderIntent{side, round_to_tick(drawn_price, tick), 1};
}

/// Draws the order price uniformly within +-spread of the expected price.
template <class Rng>
std::optional<OrderIntent> draw_order(double expected, double spread, Price tick, Rng& rng) {
  return order_from_draw(expected, uniform_real(rng, expected - spread, expected + spread), tick);
}

/// One weight's learning step. `factor` is gain * |learning return| * q and is
/// saturated at 1 so the weight stays within [0, cap].
inline double learning_update(double weight, double cap, double strategy_return, double learning_return,
                              double factor) {
  if (strategy_return == 0.0 || learning_return == 0.0) return weight;
  const double step = std::min(1.0, factor);
  const bool agree = (strategy_return > 0.0) == (learning_return > 0.0);
  const double updated = agree ? weight + step * (cap - weight) : weight - step * weight;
  return std::clamp(updated, 0.0, cap);
}

/// Reinforces the fundamental and technical weights whose strategy return
/// agrees in sign with the realised learning-horizon return.
template <class Rng>
void learn(StrategyWeights& w, double fundamental, double technical, double learning_return, double gain,
           const WeightCaps& caps, Rng& rng) {
  const double scale = gain * std::abs(learning_return);
  const double q1 = uniform01(rng);
  const double q2 = uniform01(rng);
  w.fundamental = learning_update(w.fundamental, caps.fundamental, fundamental, learning_return, scale * q1);
  w.technical = learning_update(w.technical, caps.technical, technical, learning_return, scale * q2);
}

/// Independently redraws each learnable weight with probability `p`.
template <class Rng>
void maybe_reset_weights(StrategyWeights& w, double p, const WeightCaps& caps, Rng& rng) {
  if (bernoulli(rng, p)) w.fundamental = uniform_real(rng, 0.0, caps.fundamental);
  if (bernoulli(rng, p)) w.technical = uniform_real(rng, 0.0, caps.technical);
}

template <class Rng>
NormalAgent make_agent(AgentId id, const WeightCaps& caps, std::int64_t max_lookback, Rng& rng) {
  NormalAgent agent{id, {}, 1};
  do {
    agent.weights.fundamental = uniform_real(rng, 0.0, caps.fundamental);
    agent.weights.technical = uniform_real(rng, 0.0, caps.technical);
    agent.weights.noise = uniform_real(rng, 0.0, caps.noise);
  } while (!(agent.weights.total() > 0.0));
  agent.lookback = uniform_int(rng, 1, max_lookback);
  return agent;
}

}  // namespace letfsim
