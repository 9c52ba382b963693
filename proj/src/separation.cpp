#include "sdflow/separation.hpp"

#include <algorithm>
#include <cstdlib>

#include "sdflow/error.hpp"

namespace sdflow {

void SeparationConfig::validate() const {
  if (theta < 1) throw Error(ErrorCode::kInvalidConfig, "theta must be >= 1");
  if (m < 1) throw Error(ErrorCode::kInvalidConfig, "m must be >= 1");
}

LanDelaySeries extract_lan_delays(const FlowRecord& flow) {
  std::vector<Micros> delays;
  const auto& packets = flow.packets;
  for (std::size_t i = 1; i < packets.size(); ++i) {
    if (packets[i - 1].direction == Direction::ToLan &&
        packets[i].direction == Direction::ToWan) {
      delays.push_back(packets[i].timestamp_us - packets[i - 1].timestamp_us);
    }
  }
  return LanDelaySeries(std::move(delays), flow.meta.flow_id);
}

PacketSplit split_horizontal_packets(const FlowRecord& flow, std::uint32_t theta) {
  if (theta < 1) throw Error(ErrorCode::kInvalidConfig, "theta must be >= 1");
  PacketSplit split;
  const std::size_t cut = std::min<std::size_t>(theta, flow.packets.size());
  split.observable.assign(flow.packets.begin(), flow.packets.begin() + cut);
  split.non_observable.assign(flow.packets.begin() + cut, flow.packets.end());
  return split;
}

SplitSeries split_refined(const LanDelaySeries& series, std::uint32_t m) {
  if (m < 1) throw Error(ErrorCode::kInvalidConfig, "m must be >= 1");
  const auto& d = series.delays();
  const std::size_t k = std::min<std::size_t>(m, d.size());

  SplitSeries split;
  split.observable = LanDelaySeries({d.begin(), d.begin() + k}, series.source_flow());
  split.non_observable = LanDelaySeries({d.begin() + k, d.end()}, series.source_flow());
  split.fully_observable = k == d.size();
  if (k >= 1 && k < d.size()) split.boundary_jitter = std::llabs(d[k] - d[k - 1]);
  return split;
}

}  // namespace sdflow
