#include "sdflow/sd_detect.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sdflow/error.hpp"

namespace sdflow {

void ExtremeThresholds::validate() const {
  if (delay_threshold <= 0 || jitter_threshold <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "extreme thresholds must be > 0");
  }
}

const char* to_string(BoundaryScenario s) {
  switch (s) {
    case BoundaryScenario::FullyObservable: return "fully_observable";
    case BoundaryScenario::FullyNonObservable: return "fully_non_observable";
    case BoundaryScenario::Split: return "split";
  }
  return "unknown";
}

namespace {

SdEvent make_event(const std::vector<Micros>& d, std::size_t start, std::size_t length,
                   bool qualifies) {
  SdEvent e;
  e.start_index = start;
  e.length = length;
  e.qualifies = qualifies;
  Micros sum = 0;
  for (std::size_t i = start; i < start + length; ++i) {
    e.max_delay = std::max(e.max_delay, d[i]);
    sum += d[i];
  }
  e.mean_delay = length ? static_cast<double>(sum) / static_cast<double>(length) : 0.0;
  return e;
}

}  // namespace

std::vector<SdEvent> detect_events(const LanDelaySeries& series,
                                   const ExtremeThresholds& thresholds,
                                   std::uint32_t msl) {
  if (msl < 1) throw Error(ErrorCode::kInvalidConfig, "msl must be >= 1");
  const auto& d = series.delays();
  const auto& j = series.jitters();
  std::vector<SdEvent> events;

  std::size_t i = 0;
  while (i < d.size()) {
    if (d[i] <= thresholds.delay_threshold) {
      ++i;
      continue;
    }
    std::size_t run_end = i + 1;
    while (run_end < d.size() && d[run_end] > thresholds.delay_threshold) ++run_end;
    // j[i - 1] is the jitter entering d[i].
    const bool onset = i == 0 || j[i - 1] > thresholds.jitter_threshold;
    if (onset) {
      const std::size_t length = run_end - i;
      events.push_back(make_event(d, i, length, length >= msl));
    }
    i = run_end;
  }
  return events;
}

std::vector<ClassifiedEvent> classify_against_boundary(const std::vector<SdEvent>& events,
                                                       std::size_t boundary,
                                                       std::uint32_t msl,
                                                       const LanDelaySeries& series) {
  if (msl < 1) throw Error(ErrorCode::kInvalidConfig, "msl must be >= 1");
  const auto& d = series.delays();
  std::vector<ClassifiedEvent> out;
  out.reserve(events.size());

  for (const auto& e : events) {
    ClassifiedEvent c;
    c.event = e;
    if (e.start_index >= boundary) {
      c.outcome.scenario = BoundaryScenario::FullyNonObservable;
      c.outcome.partial_length_in_o = 0;
    } else if (e.end_index() <= boundary) {
      c.outcome.scenario = BoundaryScenario::FullyObservable;
      c.outcome.partial_length_in_o = e.length;
      // Ending on the last observable delay is indistinguishable, from the
      // observable side, from a run that continues past the cut.
      c.outcome.touches_boundary = e.end_index() == boundary;
    } else {
      c.outcome.scenario = BoundaryScenario::Split;
      c.outcome.partial_length_in_o = boundary - e.start_index;
      c.outcome.touches_boundary = true;
      c.o_partial = make_event(d, e.start_index, c.outcome.partial_length_in_o, e.qualifies);
      c.no_partial = make_event(d, boundary, e.end_index() - boundary, e.qualifies);
    }
    if (c.outcome.touches_boundary) {
      c.outcome.split_sd_ratio = split_sd_ratio(c.outcome.partial_length_in_o, msl);
    }
    out.push_back(std::move(c));
  }
  return out;
}

SplitOutcome flow_split_outcome(const std::vector<ClassifiedEvent>& classified) {
  for (const auto& c : classified) {
    if (c.outcome.touches_boundary) return c.outcome;
  }
  return {};
}

double split_sd_ratio(std::size_t partial_length_in_o, std::uint32_t msl) {
  if (msl < 1) throw Error(ErrorCode::kInvalidConfig, "msl must be >= 1");
  return static_cast<double>(partial_length_in_o) / static_cast<double>(msl);
}

FlowLabel label_flow(const LanDelaySeries& series,
                     const SplitSeries& split,
                     const ExtremeThresholds& thresholds,
                     std::uint32_t msl) {
  const std::size_t k = split.observable.size();
  FlowLabel label;
  for (const auto& e : detect_events(series, thresholds, msl)) {
    if (e.qualifies && e.end_index() > k) {
      label.has_sd_in_no = true;
      break;
    }
  }
  return label;
}

void ThresholdTable::set(const std::string& application, ThresholdEntry entry) {
  entries_[application] = entry;
}

const ThresholdEntry& ThresholdTable::lookup(const std::string& application) const {
  auto it = entries_.find(application);
  return it == entries_.end() ? default_ : it->second;
}

namespace {

ThresholdEntry entry_from_json(const nlohmann::json& j, const std::string& key) {
  try {
    ThresholdEntry e;
    e.thresholds.delay_threshold = j.at("delay_threshold_us").get<Micros>();
    e.thresholds.jitter_threshold = j.at("jitter_threshold_us").get<Micros>();
    e.msl = j.at("msl").get<std::uint32_t>();
    e.thresholds.validate();
    if (e.msl < 1) throw Error(ErrorCode::kInvalidConfig, "msl must be >= 1");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig,
                "threshold table entry '" + key + "': " + ex.what());
  }
}

}  // namespace

ThresholdTable ThresholdTable::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("default")) {
    throw Error(ErrorCode::kInvalidConfig, "threshold table needs a 'default' entry");
  }
  ThresholdTable table(entry_from_json(j.at("default"), "default"));
  for (const auto& [key, value] : j.items()) {
    if (key != "default") table.set(key, entry_from_json(value, key));
  }
  return table;
}

nlohmann::json ThresholdTable::to_json() const {
  auto entry = [](const ThresholdEntry& e) {
    return nlohmann::json{{"delay_threshold_us", e.thresholds.delay_threshold},
                          {"jitter_threshold_us", e.thresholds.jitter_threshold},
                          {"msl", e.msl}};
  };
  nlohmann::json j = nlohmann::json::object();
  j["default"] = entry(default_);
  for (const auto& [app, e] : entries_) j[app] = entry(e);
  return j;
}

ThresholdTable ThresholdTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "threshold table not found: " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorCode::kInvalidConfig, "threshold table " + path + ": " + ex.what());
  }
}

}  // namespace sdflow
