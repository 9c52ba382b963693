#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdflow/flow_model.hpp"
#include "sdflow/separation.hpp"

namespace sdflow {

struct ExtremeThresholds {
  Micros delay_threshold = 1;
  Micros jitter_threshold = 1;

  void validate() const;
};

// A maximal run of delays above delay_threshold whose entering jitter is
// also above jitter_threshold. A run starting at index 0 has no entering
// jitter and needs only the delay exceedance.
struct SdEvent {
  std::size_t start_index = 0;
  std::size_t length = 0;
  bool qualifies = false;  // length >= msl
  Micros max_delay = 0;
  double mean_delay = 0.0;

  std::size_t end_index() const { return start_index + length; }  // exclusive

  friend bool operator==(const SdEvent&, const SdEvent&) = default;
};

enum class BoundaryScenario { FullyObservable, FullyNonObservable, Split };

const char* to_string(BoundaryScenario s);

struct SplitOutcome {
  BoundaryScenario scenario = BoundaryScenario::FullyObservable;
  std::size_t partial_length_in_o = 0;
  // partial_length_in_o / msl for events whose observable part reaches the
  // last observable delay (real splits and potential splits alike), else 0.
  double split_sd_ratio = 0.0;
  bool touches_boundary = false;
};

struct ClassifiedEvent {
  SdEvent event;
  SplitOutcome outcome;
  std::optional<SdEvent> o_partial;   // set for Split
  std::optional<SdEvent> no_partial;  // set for Split
};

struct FlowLabel {
  bool has_sd_in_no = false;

  friend bool operator==(const FlowLabel&, const FlowLabel&) = default;
};

std::vector<SdEvent> detect_events(const LanDelaySeries& series,
                                   const ExtremeThresholds& thresholds,
                                   std::uint32_t msl);

// Tags each event against an observable prefix of length `boundary`.
// Events are expected to come from detect_events over the full `series`.
std::vector<ClassifiedEvent> classify_against_boundary(const std::vector<SdEvent>& events,
                                                       std::size_t boundary,
                                                       std::uint32_t msl,
                                                       const LanDelaySeries& series);

// Flow-level outcome: the boundary-touching event if any, else a zero
// outcome. At most one event can touch the boundary.
SplitOutcome flow_split_outcome(const std::vector<ClassifiedEvent>& classified);

double split_sd_ratio(std::size_t partial_length_in_o, std::uint32_t msl);

FlowLabel label_flow(const LanDelaySeries& series,
                     const SplitSeries& split,
                     const ExtremeThresholds& thresholds,
                     std::uint32_t msl);

struct ThresholdEntry {
  ExtremeThresholds thresholds;
  std::uint32_t msl = 1;
};

// application -> thresholds, with a mandatory "default" entry.
class ThresholdTable {
 public:
  ThresholdTable() = default;
  explicit ThresholdTable(ThresholdEntry fallback) : default_(fallback) {}

  void set(const std::string& application, ThresholdEntry entry);
  const ThresholdEntry& lookup(const std::string& application) const;
  const ThresholdEntry& fallback() const { return default_; }
  const std::map<std::string, ThresholdEntry>& entries() const { return entries_; }

  static ThresholdTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ThresholdTable load(const std::string& path);

 private:
  ThresholdEntry default_;
  std::map<std::string, ThresholdEntry> entries_;
};

}  // namespace sdflow
