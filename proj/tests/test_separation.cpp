#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sdflow/error.hpp"
#include "sdflow/rng.hpp"
#include "sdflow/separation.hpp"

using namespace sdflow;

namespace {

FlowRecord flow_of(std::vector<PacketRecord> packets) {
  FlowRecord f;
  f.meta = {"id", "app", "cat", "loc", "wired", 2};
  f.packets = std::move(packets);
  return f;
}

constexpr auto L = Direction::ToLan;
constexpr auto W = Direction::ToWan;

}  // namespace

TEST(ExtractLanDelays, SingleTransition) {
  const auto s = extract_lan_delays(flow_of({{0, L}, {10, L}, {14, W}}));
  EXPECT_EQ(s.delays(), (std::vector<Micros>{4}));
}

TEST(ExtractLanDelays, AllToWanIsEmpty) {
  EXPECT_TRUE(extract_lan_delays(flow_of({{0, W}, {3, W}, {9, W}})).empty());
}

TEST(ExtractLanDelays, TwoTransitions) {
  const auto s = extract_lan_delays(flow_of({{0, L}, {7, W}, {20, L}, {26, W}}));
  EXPECT_EQ(s.delays(), (std::vector<Micros>{7, 6}));
  EXPECT_EQ(s.jitters(), (std::vector<Micros>{1}));
}

TEST(ExtractLanDelays, LaterToWanPacketsIgnored) {
  const auto s = extract_lan_delays(flow_of({{0, L}, {5, W}, {50, W}, {60, W}, {70, L}, {72, W}}));
  EXPECT_EQ(s.delays(), (std::vector<Micros>{5, 2}));
}

TEST(ExtractLanDelays, TrailingInboundEmitsNothing) {
  const auto s = extract_lan_delays(flow_of({{0, L}, {5, W}, {9, L}, {12, L}}));
  EXPECT_EQ(s.delays(), (std::vector<Micros>{5}));
}

// Adding earlier ToLan packets inside a burst changes WAN gaps but not the
// burst-final timestamp, so delays stay put.
TEST(ExtractLanDelays, InsensitiveToWanSidePiats) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PacketRecord> base;
    std::vector<PacketRecord> padded;
    Micros t = 1000;
    const std::size_t bursts = 1 + rng.below(10);
    for (std::size_t b = 0; b < bursts; ++b) {
      const std::size_t extra = rng.below(4);
      const Micros last = t + 500;
      for (std::size_t e = 0; e < extra; ++e) padded.push_back({t + static_cast<Micros>(e * 100), L});
      base.push_back({last, L});
      padded.push_back({last, L});
      const Micros resp = last + 1 + static_cast<Micros>(rng.below(20000));
      base.push_back({resp, W});
      padded.push_back({resp, W});
      t = resp + 1000 + static_cast<Micros>(rng.below(5000));
    }
    EXPECT_EQ(extract_lan_delays(flow_of(base)).delays(), extract_lan_delays(flow_of(padded)).delays());
  }
}

TEST(SplitHorizontal, Examples) {
  auto packets = [](std::size_t n) {
    std::vector<PacketRecord> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({static_cast<Micros>(i), i % 2 ? W : L});
    return flow_of(p);
  };
  auto s = split_horizontal_packets(packets(12), 10);
  EXPECT_EQ(s.observable.size(), 10u);
  EXPECT_EQ(s.non_observable.size(), 2u);
  s = split_horizontal_packets(packets(10), 10);
  EXPECT_EQ(s.observable.size(), 10u);
  EXPECT_EQ(s.non_observable.size(), 0u);
  s = split_horizontal_packets(packets(1), 10);
  EXPECT_EQ(s.observable.size(), 1u);
  EXPECT_EQ(s.non_observable.size(), 0u);
}

TEST(SeparationConfig, RejectsZero) {
  EXPECT_THROW((SeparationConfig{0, 10}.validate()), Error);
  EXPECT_THROW((SeparationConfig{10, 0}.validate()), Error);
  EXPECT_NO_THROW((SeparationConfig{1, 1}.validate()));
}

TEST(SplitRefined, Examples) {
  std::vector<Micros> d12(12, 5);
  auto s = split_refined(LanDelaySeries(d12), 10);
  EXPECT_EQ(s.observable.size(), 10u);
  EXPECT_EQ(s.non_observable.size(), 2u);
  EXPECT_FALSE(s.fully_observable);

  s = split_refined(LanDelaySeries(std::vector<Micros>(7, 5)), 10);
  EXPECT_EQ(s.observable.size(), 7u);
  EXPECT_EQ(s.non_observable.size(), 0u);
  EXPECT_TRUE(s.fully_observable);
  EXPECT_FALSE(s.boundary_jitter.has_value());

  s = split_refined(LanDelaySeries(), 3);
  EXPECT_TRUE(s.observable.empty());
  EXPECT_TRUE(s.non_observable.empty());
  EXPECT_TRUE(s.fully_observable);
}

TEST(SplitRefined, BoundaryJitterBelongsToNeitherSide) {
  const auto s = split_refined(LanDelaySeries({1, 4, 10, 30, 31}), 3);
  EXPECT_EQ(s.observable.jitters(), (std::vector<Micros>{3, 6}));
  EXPECT_EQ(s.non_observable.jitters(), (std::vector<Micros>{1}));
  ASSERT_TRUE(s.boundary_jitter.has_value());
  EXPECT_EQ(*s.boundary_jitter, 20);
}

TEST(SplitRefined, LosslessAndMonotone) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Micros> d(rng.below(50));
    for (auto& v : d) v = static_cast<Micros>(rng.below(1000));
    const LanDelaySeries series(d);
    std::size_t prev = 0;
    for (std::uint32_t m = 1; m <= 60; ++m) {
      const auto s = split_refined(series, m);
      std::vector<Micros> joined = s.observable.delays();
      joined.insert(joined.end(), s.non_observable.delays().begin(), s.non_observable.delays().end());
      ASSERT_EQ(joined, d);
      EXPECT_EQ(s.fully_observable, s.non_observable.empty());
      EXPECT_EQ(s.fully_observable, d.size() <= m);
      EXPECT_GE(s.observable.size(), prev);
      prev = s.observable.size();
    }
  }
}
