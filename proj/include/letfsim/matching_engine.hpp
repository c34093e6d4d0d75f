#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace letfsim {

using Price = std::int64_t;
using Quantity = std::int64_t;
using OrderId = std::uint64_t;
using AgentId = std::int64_t;
using Time = std::int64_t;

enum class Side : std::uint8_t { buy, sell };

constexpr Side opposite(Side s) noexcept { return s == Side::buy ? Side::sell : Side::buy; }
constexpr const char* to_string(Side s) noexcept { return s == Side::buy ? "buy" : "sell"; }

struct Order {
  OrderId id = 0;
  AgentId owner = 0;
  Side side = Side::buy;
  Price price = 0;
  Quantity quantity = 0;
  Time placed_at = 0;

  bool operator==(const Order&) const = default;
};

/// One execution. `price` is always the resting (maker) order's limit price.
struct Fill {
  Price price = 0;
  Quantity quantity = 0;
  AgentId maker = 0;
  AgentId taker = 0;
  OrderId maker_order = 0;
  Time time = 0;

  bool operator==(const Fill&) const = default;
};

class InvalidOrder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Continuous double auction book for a single asset.
///
/// Bids are kept in (price desc, placed_at asc, id asc) order, asks in
/// (price asc, placed_at asc, id asc). Incoming orders trade against the
/// contra side one maker at a time at the maker's price. Market orders are
/// immediate-or-cancel. The book never stores a crossed state.
class OrderBook {
 public:
  explicit OrderBook(Price tick_size = 1) : tick_(tick_size) {
    if (tick_size <= 0) throw std::invalid_argument("tick_size must be positive");
  }

  Price tick_size() const noexcept { return tick_; }

  /// Next id from the per-book monotone counter.
  OrderId next_order_id() noexcept { return next_id_++; }

  /// Attach an event journal; pass nullptr to detach.
  void set_journal(std::ostream* journal) noexcept { journal_ = journal; }

  /// Matches `order` against the contra side and rests any remainder.
  /// Fills are appended to `fills` in execution order.
  void submit_limit(const Order& order, Time now, std::vector<Fill>& fills) {
    validate(order);
    if (order.id >= next_id_) next_id_ = order.id + 1;
    journal_event(now, "place", order.id, order.side, order.price, order.quantity);

    Quantity remaining = order.quantity;
    if (order.side == Side::buy) {
      remaining = match(asks_, order.owner, remaining, now, fills,
                        [&](Price ask) { return ask <= order.price; });
    } else {
      remaining = match(bids_, order.owner, remaining, now, fills,
                        [&](Price bid) { return bid >= order.price; });
    }
    if (remaining > 0) {
      Resting rest{order.owner, remaining};
      if (order.side == Side::buy) {
        bids_.emplace(BidKey{{order.price, order.placed_at, order.id}}, rest);
      } else {
        asks_.emplace(AskKey{{order.price, order.placed_at, order.id}}, rest);
      }
      by_age_.emplace(AgeKey{order.placed_at, order.id}, std::pair{order.side, order.price});
    }
  }

  std::vector<Fill> submit_limit(const Order& order, Time now) {
    std::vector<Fill> fills;
    submit_limit(order, now, fills);
    return fills;
  }

  /// Walks the contra side until `quantity` is exhausted or the side is
  /// empty. Any unfilled remainder is discarded.
  void submit_market(Side side, Quantity quantity, AgentId taker, Time now, std::vector<Fill>& fills) {
    if (quantity < 1) throw InvalidOrder("market order quantity must be >= 1");
    const OrderId id = next_order_id();
    journal_event(now, "place", id, side, std::nullopt, quantity);
    const auto any = [](Price) { return true; };
    if (side == Side::buy) {
      match(asks_, taker, quantity, now, fills, any);
    } else {
      match(bids_, taker, quantity, now, fills, any);
    }
  }

  std::vector<Fill> submit_market(Side side, Quantity quantity, AgentId taker, Time now) {
    std::vector<Fill> fills;
    submit_market(side, quantity, taker, now, fills);
    return fills;
  }

  /// Removes every resting order with now - placed_at >= lifetime.
  std::size_t expire_orders(Time now, Time lifetime) {
    std::size_t removed = 0;
    while (!by_age_.empty()) {
      const auto it = by_age_.begin();
      const auto [placed_at, id] = it->first;
      if (now - placed_at < lifetime) break;
      const auto [side, price] = it->second;
      const Quantity qty = side == Side::buy ? bids_.extract(BidKey{{price, placed_at, id}}).mapped().quantity
                                             : asks_.extract(AskKey{{price, placed_at, id}}).mapped().quantity;
      journal_event(now, "expire", id, side, price, qty);
      by_age_.erase(it);
      ++removed;
    }
    return removed;
  }

  std::optional<Price> best_bid() const noexcept {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first.price;
  }

  std::optional<Price> best_ask() const noexcept {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first.price;
  }

  std::optional<Price> last_trade_price() const noexcept { return last_trade_; }

  std::size_t bid_count() const noexcept { return bids_.size(); }
  std::size_t ask_count() const noexcept { return asks_.size(); }
  std::size_t size() const noexcept { return bids_.size() + asks_.size(); }
  bool empty() const noexcept { return size() == 0; }

  /// Resting orders of one side, in priority order.
  std::vector<Order> resting(Side side) const {
    std::vector<Order> out;
    const auto push = [&](const auto& book) {
      out.reserve(book.size());
      for (const auto& [key, rest] : book) {
        out.push_back(Order{key.id, rest.owner, side, key.price, rest.quantity, key.placed_at});
      }
    };
    if (side == Side::buy) {
      push(bids_);
    } else {
      push(asks_);
    }
    return out;
  }

  /// Oldest placement time among resting orders.
  std::optional<Time> oldest_placement() const noexcept {
    if (by_age_.empty()) return std::nullopt;
    return by_age_.begin()->first.first;
  }

 private:
  struct Key {
    Price price;
    Time placed_at;
    OrderId id;
  };
  struct BidKey : Key {};
  struct AskKey : Key {};

  struct BidOrder {
    bool operator()(const BidKey& a, const BidKey& b) const noexcept {
      if (a.price != b.price) return a.price > b.price;
      if (a.placed_at != b.placed_at) return a.placed_at < b.placed_at;
      return a.id < b.id;
    }
  };
  struct AskOrder {
    bool operator()(const AskKey& a, const AskKey& b) const noexcept {
      if (a.price != b.price) return a.price < b.price;
      if (a.placed_at != b.placed_at) return a.placed_at < b.placed_at;
      return a.id < b.id;
    }
  };

  struct Resting {
    AgentId owner;
    Quantity quantity;
  };

  using AgeKey = std::pair<Time, OrderId>;

  void validate(const Order& order) const {
    if (order.price <= 0) {
      throw InvalidOrder("limit price must be positive, got " + std::to_string(order.price));
    }
    if (order.price % tick_ != 0) {
      throw InvalidOrder("limit price " + std::to_string(order.price) + " is not a multiple of tick " +
                         std::to_string(tick_));
    }
    if (order.quantity < 1) {
      throw InvalidOrder("order quantity must be >= 1, got " + std::to_string(order.quantity));
    }
  }

  template <class Book, class Crosses>
  Quantity match(Book& contra, AgentId taker, Quantity remaining, Time now, std::vector<Fill>& fills,
                 Crosses crosses) {
    while (remaining > 0 && !contra.empty()) {
      auto it = contra.begin();
      const Key& key = it->first;
      if (!crosses(key.price)) break;
      Resting& maker = it->second;
      const Quantity qty = std::min(remaining, maker.quantity);
      fills.push_back(Fill{key.price, qty, maker.owner, taker, key.id, now});
      last_trade_ = key.price;
      remaining -= qty;
      maker.quantity -= qty;
      if (journal_) {
        const Side maker_side = std::is_same_v<Book, BidBook> ? Side::buy : Side::sell;
        journal_event(now, "fill", key.id, maker_side, key.price, qty);
      }
      if (maker.quantity == 0) {
        by_age_.erase(AgeKey{key.placed_at, key.id});
        contra.erase(it);
      }
    }
    return remaining;
  }

  void journal_event(Time now, const char* event, OrderId id, Side side, std::optional<Price> price,
                     Quantity qty) {
    if (!journal_) return;
    *journal_ << "{\"time\":" << now << ",\"event\":\"" << event << "\",\"order_id\":" << id
              << ",\"side\":\"" << to_string(side) << "\",\"price\":";
    if (price) {
      *journal_ << *price;
    } else {
      *journal_ << "null";
    }
    *journal_ << ",\"quantity\":" << qty << "}\n";
  }

  using BidBook = std::map<BidKey, Resting, BidOrder>;
  using AskBook = std::map<AskKey, Resting, AskOrder>;

  Price tick_;
  OrderId next_id_ = 1;
  BidBook bids_;
  AskBook asks_;
  std::map<AgeKey, std::pair<Side, Price>> by_age_;
  std::optional<Price> last_trade_;
  std::ostream* journal_ = nullptr;
};

}  // namespace letfsim
