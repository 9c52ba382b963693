#include "sdflow/flow_model.hpp"

#include <cstdlib>
#include <utility>

#include "sdflow/error.hpp"

namespace sdflow {

const char* to_string(Direction d) {
  return d == Direction::ToLan ? "to_lan" : "to_wan";
}

bool parse_direction(const std::string& text, Direction& out) {
  if (text == "to_lan") {
    out = Direction::ToLan;
    return true;
  }
  if (text == "to_wan") {
    out = Direction::ToWan;
    return true;
  }
  return false;
}

ValidationResult validate_flow(const FlowRecord& flow, std::size_t packet_capture_cap) {
  ValidationResult result;
  const auto& meta = flow.meta;
  if (meta.msl < 1) result.violations.emplace_back("msl < 1");
  if (meta.flow_id.empty()) result.violations.emplace_back("empty flow_id");
  if (meta.application.empty()) result.violations.emplace_back("empty application");
  if (meta.category.empty()) result.violations.emplace_back("empty category");
  if (meta.location.empty()) result.violations.emplace_back("empty location");
  if (meta.connection_type.empty()) result.violations.emplace_back("empty connection_type");

  if (flow.packets.empty()) {
    result.violations.emplace_back("empty packet list");
    return result;
  }
  if (flow.packets.size() > packet_capture_cap) {
    result.violations.emplace_back("packet count exceeds capture cap");
  }
  if (flow.packets.front().timestamp_us < 0) {
    result.violations.emplace_back("negative timestamp");
  }
  for (std::size_t i = 1; i < flow.packets.size(); ++i) {
    if (flow.packets[i].timestamp_us < flow.packets[i - 1].timestamp_us) {
      result.violations.emplace_back("timestamps not non-decreasing");
      break;
    }
  }
  return result;
}

LanDelaySeries::LanDelaySeries(std::vector<Micros> delays, std::string source_flow)
    : delays_(std::move(delays)), source_flow_(std::move(source_flow)) {
  for (Micros d : delays_) {
    if (d < 0) throw Error(ErrorCode::kDataError, "negative LAN delay in flow " + source_flow_);
  }
  if (delays_.size() > 1) {
    jitters_.reserve(delays_.size() - 1);
    for (std::size_t i = 0; i + 1 < delays_.size(); ++i) {
      jitters_.push_back(std::llabs(delays_[i + 1] - delays_[i]));
    }
  }
}

}  // namespace sdflow
