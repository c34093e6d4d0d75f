#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "letfsim/matching_engine.hpp"
#include "letfsim/rng.hpp"
#include "support/naive_book.hpp"

using namespace letfsim;

namespace {

Order limit(OrderId id, Side side, Price price, Quantity qty, Time at, AgentId owner = 0) {
  return Order{id, owner, side, price, qty, at};
}

std::vector<std::pair<Price, Quantity>> pq(const std::vector<Fill>& fills) {
  std::vector<std::pair<Price, Quantity>> out;
  for (const auto& f : fills) out.emplace_back(f.price, f.quantity);
  return out;
}

using PQ = std::vector<std::pair<Price, Quantity>>;

}  // namespace

TEST(SubmitLimit, EmptyBookRests) {
  OrderBook book;
  EXPECT_TRUE(book.submit_limit(limit(1, Side::buy, 10000, 1, 0), 0).empty());
  EXPECT_EQ(book.best_bid(), 10000);
  EXPECT_FALSE(book.best_ask());
  EXPECT_FALSE(book.last_trade_price());
}

TEST(SubmitLimit, WalksPriceLevelsAtMakerPrice) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10000, 1, 5), 5);
  book.submit_limit(limit(2, Side::sell, 10001, 1, 6), 6);
  const auto fills = book.submit_limit(limit(3, Side::buy, 10002, 2, 8), 8);
  EXPECT_EQ(pq(fills), (PQ{{10000, 1}, {10001, 1}}));
  EXPECT_TRUE(book.empty());
  EXPECT_EQ(book.last_trade_price(), 10001);
}

TEST(SubmitLimit, TimePriorityAtEqualPrice) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10000, 1, 7), 7);
  book.submit_limit(limit(2, Side::sell, 10000, 1, 3), 7);
  const auto fills = book.submit_limit(limit(3, Side::buy, 10000, 1, 9), 9);
  ASSERT_EQ(fills.size(), 1u);
  EXPECT_EQ(fills[0].maker_order, 2u);
  ASSERT_EQ(book.ask_count(), 1u);
  EXPECT_EQ(book.resting(Side::sell)[0].placed_at, 7);
}

TEST(SubmitLimit, OrderIdBreaksFullTies) {
  OrderBook book;
  book.submit_limit(limit(9, Side::buy, 9990, 1, 4), 4);
  book.submit_limit(limit(4, Side::buy, 9990, 1, 4), 4);
  const auto fills = book.submit_limit(limit(10, Side::sell, 9990, 1, 5), 5);
  ASSERT_EQ(fills.size(), 1u);
  EXPECT_EQ(fills[0].maker_order, 4u);
}

TEST(SubmitLimit, PartialFillRestsRemainder) {
  OrderBook book;
  book.submit_limit(limit(1, Side::buy, 9995, 2, 0), 0);
  const auto fills = book.submit_limit(limit(2, Side::sell, 9990, 5, 1), 1);
  EXPECT_EQ(pq(fills), (PQ{{9995, 2}}));
  EXPECT_EQ(book.best_ask(), 9990);
  EXPECT_EQ(book.resting(Side::sell)[0].quantity, 3);
  EXPECT_FALSE(book.best_bid());
}

TEST(SubmitLimit, RejectsInvalidWithoutTouchingBook) {
  OrderBook book(5);
  book.submit_limit(limit(1, Side::sell, 10000, 1, 0), 0);
  EXPECT_THROW(book.submit_limit(limit(2, Side::buy, 0, 1, 1), 1), InvalidOrder);
  EXPECT_THROW(book.submit_limit(limit(3, Side::buy, -5, 1, 1), 1), InvalidOrder);
  EXPECT_THROW(book.submit_limit(limit(4, Side::buy, 10002, 1, 1), 1), InvalidOrder);
  EXPECT_THROW(book.submit_limit(limit(5, Side::buy, 10000, 0, 1), 1), InvalidOrder);
  EXPECT_EQ(book.size(), 1u);
  EXPECT_FALSE(book.last_trade_price());
}

TEST(SubmitLimit, SelfMatchIsAllowed) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10000, 1, 0, 42), 0);
  const auto fills = book.submit_limit(limit(2, Side::buy, 10000, 1, 1, 42), 1);
  ASSERT_EQ(fills.size(), 1u);
  EXPECT_EQ(fills[0].maker, 42);
  EXPECT_EQ(fills[0].taker, 42);
}

TEST(SubmitMarket, EmptyContraSideIsUnsuccessful) {
  OrderBook book;
  book.submit_limit(limit(1, Side::buy, 9000, 1, 0), 0);
  EXPECT_TRUE(book.submit_market(Side::buy, 3, -1, 1).empty());
  EXPECT_EQ(book.size(), 1u);
}

TEST(SubmitMarket, WalksBook) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10000, 1, 0), 0);
  book.submit_limit(limit(2, Side::sell, 10003, 1, 0), 0);
  book.submit_limit(limit(3, Side::sell, 10010, 1, 0), 0);
  EXPECT_EQ(pq(book.submit_market(Side::buy, 2, -1, 1)), (PQ{{10000, 1}, {10003, 1}}));
  EXPECT_EQ(book.best_ask(), 10010);
}

TEST(SubmitMarket, RemainderIsDiscarded) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10000, 1, 0), 0);
  EXPECT_EQ(pq(book.submit_market(Side::buy, 5, -1, 1)), (PQ{{10000, 1}}));
  EXPECT_TRUE(book.empty());
}

TEST(SubmitMarket, RejectsNonPositiveQuantity) {
  OrderBook book;
  EXPECT_THROW(book.submit_market(Side::sell, 0, -1, 0), InvalidOrder);
}

TEST(SubmitMarket, UsesFreshIdsAboveSubmittedOnes) {
  OrderBook book;
  book.submit_limit(limit(41, Side::sell, 10000, 1, 0), 0);
  EXPECT_EQ(book.next_order_id(), 42u);
}

TEST(Expire, BoundaryIsInclusive) {
  OrderBook book;
  book.submit_limit(limit(1, Side::buy, 9000, 1, 0), 0);
  EXPECT_EQ(book.expire_orders(10000, 10000), 1u);
  EXPECT_TRUE(book.empty());

  book.submit_limit(limit(2, Side::buy, 9000, 1, 1), 1);
  EXPECT_EQ(book.expire_orders(10000, 10000), 0u);
  EXPECT_EQ(book.size(), 1u);
}

TEST(Expire, RemovesOnlyAgedOrdersAndKeepsPriority) {
  OrderBook book;
  book.submit_limit(limit(1, Side::sell, 10005, 1, 0), 0);
  book.submit_limit(limit(2, Side::sell, 10005, 1, 4999), 4999);
  book.submit_limit(limit(3, Side::sell, 10001, 1, 9999), 9999);
  EXPECT_EQ(book.expire_orders(10000, 10000), 1u);
  const auto rest = book.resting(Side::sell);
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest[0].id, 3u);
  EXPECT_EQ(rest[1].id, 2u);
  EXPECT_EQ(book.expire_orders(10000, 10000), 0u);
  EXPECT_EQ(book.oldest_placement(), 4999);
}

TEST(BestQuotes, MaxBidMinAsk) {
  OrderBook book;
  EXPECT_FALSE(book.best_bid());
  EXPECT_FALSE(book.best_ask());
  book.submit_limit(limit(1, Side::buy, 9990, 1, 0), 0);
  book.submit_limit(limit(2, Side::buy, 9995, 1, 0), 0);
  book.submit_limit(limit(3, Side::sell, 10005, 1, 0), 0);
  book.submit_limit(limit(4, Side::sell, 10002, 1, 0), 0);
  EXPECT_EQ(book.best_bid(), 9995);
  EXPECT_EQ(book.best_ask(), 10002);
}

TEST(Journal, RecordsPlaceFillExpire) {
  std::ostringstream out;
  OrderBook book;
  book.set_journal(&out);
  book.submit_limit(limit(1, Side::sell, 10000, 2, 0), 0);
  book.submit_market(Side::buy, 1, -1, 1);
  book.expire_orders(10, 5);
  EXPECT_EQ(out.str(),
            "{\"time\":0,\"event\":\"place\",\"order_id\":1,\"side\":\"sell\",\"price\":10000,\"quantity\":2}\n"
            "{\"time\":1,\"event\":\"place\",\"order_id\":2,\"side\":\"buy\",\"price\":null,\"quantity\":1}\n"
            "{\"time\":1,\"event\":\"fill\",\"order_id\":1,\"side\":\"sell\",\"price\":10000,\"quantity\":1}\n"
            "{\"time\":10,\"event\":\"expire\",\"order_id\":1,\"side\":\"sell\",\"price\":10000,\"quantity\":1}\n");
}

namespace {

Quantity total(const std::vector<Fill>& fills) {
  Quantity q = 0;
  for (const auto& f : fills) q += f.quantity;
  return q;
}

Quantity resting_total(const OrderBook& book) {
  Quantity q = 0;
  for (const auto s : {Side::buy, Side::sell}) {
    for (const auto& o : book.resting(s)) q += o.quantity;
  }
  return q;
}

}  // namespace

TEST(MatchingProperty, AgreesWithNaiveMatcherOnRandomSequences) {
  RunRng rng(20240611);
  for (int trial = 0; trial < 10000; ++trial) {
    OrderBook book;
    testing_support::NaiveBook naive;
    const auto n = uniform_int(rng, 1, 20);
    Time now = 0;
    for (std::int64_t k = 0; k < n; ++k) {
      now += uniform_int(rng, 0, 3);
      const Side side = bernoulli(rng, 0.5) ? Side::buy : Side::sell;
      const Quantity qty = uniform_int(rng, 1, 4);
      const auto kind = uniform_int(rng, 0, 9);
      std::vector<Fill> got, want;
      Quantity before = resting_total(book);
      if (kind < 7) {
        // Placement times may lag `now` so that equal-price orders can share
        // a timestamp or arrive out of time order.
        const Order o = limit(book.next_order_id(), side, uniform_int(rng, 95, 105), qty,
                              now - uniform_int(rng, 0, 2), uniform_int(rng, 0, 3));
        got = book.submit_limit(o, now);
        want = naive.limit(o, now);
        ASSERT_LE(total(got), qty);
        ASSERT_EQ(resting_total(book), before - total(got) + (qty - total(got)));
      } else if (kind < 9) {
        got = book.submit_market(side, qty, -1, now);
        want = naive.market(side, qty, -1, now);
        ASSERT_LE(total(got), qty);
        ASSERT_EQ(resting_total(book), before - total(got));
      } else {
        const Time lifetime = uniform_int(rng, 1, 6);
        ASSERT_EQ(book.expire_orders(now, lifetime), naive.expire(now, lifetime));
        ASSERT_EQ(book.expire_orders(now, lifetime), 0u);
      }
      ASSERT_EQ(got, want) << "trial " << trial << " op " << k;
      ASSERT_EQ(book.resting(Side::buy), naive.side(Side::buy));
      ASSERT_EQ(book.resting(Side::sell), naive.side(Side::sell));
      if (book.best_bid() && book.best_ask()) {
        ASSERT_LT(*book.best_bid(), *book.best_ask());
      }
      if (!got.empty()) {
        ASSERT_EQ(book.last_trade_price(), got.back().price);
      }
    }
  }
}
