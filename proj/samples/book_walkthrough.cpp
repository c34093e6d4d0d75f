// Walks through the order book and the ETF rebalancing rule by hand.

#include <iostream>
#include <vector>

#include "letfsim/leveraged_etf.hpp"
#include "letfsim/matching_engine.hpp"

using namespace letfsim;

namespace {

void print_fills(const char* what, const std::vector<Fill>& fills) {
  std::cout << what << ':';
  if (fills.empty()) std::cout << " no fills";
  for (const auto& f : fills) std::cout << " " << f.quantity << "@" << f.price;
  std::cout << '\n';
}

}  // namespace

int main() {
  OrderBook book;
  book.submit_limit(Order{book.next_order_id(), 1, Side::sell, 10000, 1, 3}, 3);
  book.submit_limit(Order{book.next_order_id(), 2, Side::sell, 10000, 1, 7}, 7);
  book.submit_limit(Order{book.next_order_id(), 3, Side::sell, 10003, 1, 8}, 8);
  book.submit_limit(Order{book.next_order_id(), 4, Side::buy, 9995, 2, 8}, 8);
  std::cout << "best bid " << *book.best_bid() << ", best ask " << *book.best_ask() << '\n';

  print_fills("buy limit 10000 x1", book.submit_limit(Order{book.next_order_id(), 5, Side::buy, 10000, 1, 9}, 9));
  print_fills("market buy x5", book.submit_market(Side::buy, 5, kLetfAgentId, 10));
  std::cout << "asks left " << book.ask_count() << ", last trade " << *book.last_trade_price() << '\n';
  std::cout << "expired at t=10008 with lifetime 10000: " << book.expire_orders(10008, 10000) << '\n';

  const LetfParams params{2.0, 10, LetfParams::threshold_for(10, 0.1)};
  LetfState etf = init_state(params, 10000);
  std::cout << "\nETF at 10000: S=" << etf.shares << " C=" << etf.cash << " NAV=" << nav(etf, 10000) << '\n';
  for (Price p : {10005, 10006, 10009, 9991}) {
    const double ds = rebalance_quantity(etf, params.target_leverage, p);
    const auto order = desired_order(ds, params.threshold);
    std::cout << "price " << p << ": leverage " << actual_leverage(etf, p) << ", dS " << ds << " -> ";
    if (order) {
      std::cout << to_string(order->side) << ' ' << order->quantity << '\n';
    } else {
      std::cout << "no trade\n";
    }
  }
  const auto up = smallest_trigger_move(etf, params, 10000, +1, QuantityRounding::floor);
  std::cout << "smallest triggering rise: " << *up << " ticks\n";
  return 0;
}
