#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sdflow/flow_model.hpp"

namespace sdflow {

struct SeparationConfig {
  std::uint32_t theta = 10;  // packets handled in software before offload
  std::uint32_t m = 10;      // LAN delay samples treated as observable

  // Throws Error(kInvalidConfig) if either threshold is zero.
  void validate() const;
};

struct PacketSplit {
  std::vector<PacketRecord> observable;
  std::vector<PacketRecord> non_observable;
};

struct SplitSeries {
  LanDelaySeries observable;      // d_1..d_k, k = min(m, n)
  LanDelaySeries non_observable;  // d_{k+1}..d_n
  bool fully_observable = true;
  // |d_{k+1} - d_k| when both sides are non-empty. Belongs to neither side.
  std::optional<Micros> boundary_jitter;
};

// One sample per inbound burst: the gap between the burst's last ToLan packet
// and the first ToWan packet that follows it. Later ToWan packets before the
// next ToLan packet are ignored.
LanDelaySeries extract_lan_delays(const FlowRecord& flow);

// Packet-count offload rule: the first theta packets are observable.
PacketSplit split_horizontal_packets(const FlowRecord& flow, std::uint32_t theta);

// Delay-count observability rule. Jitters are recomputed per side.
SplitSeries split_refined(const LanDelaySeries& series, std::uint32_t m);

}  // namespace sdflow
