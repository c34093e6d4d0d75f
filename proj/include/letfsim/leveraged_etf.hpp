#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>

#include "letfsim/matching_engine.hpp"

namespace letfsim {

/// Agent id used by the leveraged ETF in fills and journals.
inline constexpr AgentId kLetfAgentId = -1;

/// How a fractional rebalance amount becomes a share count.
enum class QuantityRounding : std::uint8_t {
  floor,    // truncate |dS|
  nearest,  // round |dS| half away from zero
};

struct LetfParams {
  double target_leverage = 2.0;
  std::int64_t cash_multiplier = 10;  // initial cash in units of 1,000,000
  Quantity threshold = 1;             // minimum rebalance order size

  double initial_cash() const noexcept { return 1'000'000.0 * static_cast<double>(cash_multiplier); }
  double normalized_threshold() const noexcept {
    return static_cast<double>(threshold) / static_cast<double>(cash_multiplier);
  }

  /// Threshold in shares for a cash multiplier and a threshold per unit of it.
  static Quantity threshold_for(std::int64_t cash_multiplier, double normalized_threshold) {
    return std::llround(normalized_threshold * static_cast<double>(cash_multiplier));
  }
};

struct LetfState {
  Quantity shares = 0;
  double cash = 0.0;  // negative when borrowing

  bool operator==(const LetfState&) const = default;
};

/// Buys target_leverage * initial cash worth of the asset at `price`, funded by
/// the initial cash plus borrowing.
inline LetfState init_state(const LetfParams& params, Price price) {
  if (price <= 0) throw std::invalid_argument("initial price must be positive");
  const double p = static_cast<double>(price);
  const auto shares = static_cast<Quantity>(std::llround(params.target_leverage * params.initial_cash() / p));
  return LetfState{shares, params.initial_cash() - p * static_cast<double>(shares)};
}

inline double nav(const LetfState& state, double price) noexcept {
  return price * static_cast<double>(state.shares) + state.cash;
}

class DegenerateLetf : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exposure over net asset value. Throws DegenerateLetf when NAV <= 0.
inline double actual_leverage(const LetfState& state, double price) {
  const double value = nav(state, price);
  if (!(value > 0.0)) throw DegenerateLetf("net asset value is not positive");
  return price * static_cast<double>(state.shares) / value;
}

/// Shares to trade so that exposure returns to target_leverage * NAV.
/// Positive means buy.
inline double rebalance_quantity(const LetfState& state, double target_leverage, double price) {
  return (target_leverage * nav(state, price) - price * static_cast<double>(state.shares)) / price;
}

struct RebalanceOrder {
  Side side = Side::buy;
  Quantity quantity = 0;

  bool operator==(const RebalanceOrder&) const = default;
};

inline Quantity round_quantity(double magnitude, QuantityRounding mode) noexcept {
  return mode == QuantityRounding::floor ? static_cast<Quantity>(std::floor(magnitude))
                                         : static_cast<Quantity>(std::llround(magnitude));
}

/// A market order when the rounded amount reaches the threshold.
inline std::optional<RebalanceOrder> desired_order(double delta_shares, Quantity threshold,
                                                   QuantityRounding mode = QuantityRounding::floor) {
  const Quantity qty = round_quantity(std::abs(delta_shares), mode);
  if (qty < 1 || qty < threshold) return std::nullopt;
  return RebalanceOrder{delta_shares > 0.0 ? Side::buy : Side::sell, qty};
}

/// Position and cash bookkeeping for executions of the agent's own order.
inline void apply_fills(LetfState& state, Side side, std::span<const Fill> fills) noexcept {
  for (const Fill& f : fills) {
    const double notional = static_cast<double>(f.quantity) * static_cast<double>(f.price);
    if (side == Side::buy) {
      state.shares += f.quantity;
      state.cash -= notional;
    } else {
      state.shares -= f.quantity;
      state.cash += notional;
    }
  }
}

/// Smallest whole-tick move away from `price` that makes the agent trade,
/// searched up to `max_move` ticks. `direction` is +1 (rise) or -1 (fall).
inline std::optional<Price> smallest_trigger_move(const LetfState& state, const LetfParams& params, Price price,
                                                  int direction, QuantityRounding mode, Price tick = 1,
                                                  Price max_move = 1'000'000) {
  for (Price move = tick; move <= max_move; move += tick) {
    const Price moved = price + direction * move;
    if (moved <= 0) break;
    const double ds = rebalance_quantity(state, params.target_leverage, static_cast<double>(moved));
    if (desired_order(ds, params.threshold, mode)) return move;
  }
  return std::nullopt;
}

struct RebalanceEvent {
  Time time = 0;
  Side side = Side::buy;
  Quantity requested = 0;
  Quantity filled = 0;
  double avg_price = 0.0;  // 0 when nothing filled
  double leverage_before = 0.0;
  double leverage_after = 0.0;  // NaN once NAV is gone

  // Leverage is undefined at zero NAV, so NaN compares equal to NaN here.
  bool operator==(const RebalanceEvent& o) const noexcept {
    const auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return time == o.time && side == o.side && requested == o.requested && filled == o.filled &&
           same(avg_price, o.avg_price) && same(leverage_before, o.leverage_before) &&
           same(leverage_after, o.leverage_after);
  }
};

}  // namespace letfsim
