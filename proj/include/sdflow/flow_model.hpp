#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sdflow {

// Microsecond durations and timestamps.
using Micros = std::int64_t;

inline constexpr std::size_t kDefaultPacketCaptureCap = 255;

enum class Direction : std::uint8_t {
  ToLan,  // toward the LAN endpoint
  ToWan,  // leaving the LAN endpoint
};

const char* to_string(Direction d);
// Parses "to_lan" / "to_wan". Returns false on anything else.
bool parse_direction(const std::string& text, Direction& out);

struct PacketRecord {
  Micros timestamp_us = 0;  // relative to flow start
  Direction direction = Direction::ToLan;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct FlowMeta {
  std::string flow_id;
  std::string application;
  std::string category;
  std::string location;
  std::string connection_type;
  std::uint32_t msl = 1;  // minimum sequence length for an SD event

  friend bool operator==(const FlowMeta&, const FlowMeta&) = default;
};

struct FlowRecord {
  FlowMeta meta;
  std::vector<PacketRecord> packets;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Reports every structural problem with a flow. Violations are returned as
// data; nothing throws.
ValidationResult validate_flow(const FlowRecord& flow,
                               std::size_t packet_capture_cap = kDefaultPacketCaptureCap);

// LAN-side delay samples and the absolute differences between neighbours.
class LanDelaySeries {
 public:
  LanDelaySeries() = default;
  // Throws Error(kDataError) if any delay is negative.
  explicit LanDelaySeries(std::vector<Micros> delays, std::string source_flow = {});

  const std::vector<Micros>& delays() const { return delays_; }
  const std::vector<Micros>& jitters() const { return jitters_; }
  const std::string& source_flow() const { return source_flow_; }
  std::size_t size() const { return delays_.size(); }
  bool empty() const { return delays_.empty(); }

  friend bool operator==(const LanDelaySeries&, const LanDelaySeries&) = default;

 private:
  std::vector<Micros> delays_;
  std::vector<Micros> jitters_;
  std::string source_flow_;
};

}  // namespace sdflow
