#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdflow/flow_model.hpp"
#include "sdflow/sd_detect.hpp"

namespace sdflow {

enum class CorpusOrigin { DatasetFile, Synthetic };

struct Corpus {
  std::vector<FlowRecord> flows;
  CorpusOrigin origin = CorpusOrigin::DatasetFile;
  std::string day_tag;
};

enum class SchemaVersion { V1 };

// flow_id,application,category,location,connection_type,msl,pkt_index,timestamp_us,direction
const std::string& schema_header(SchemaVersion schema);

struct RowError {
  std::size_t line = 0;  // 1-based line of the first offending row
  std::string flow_id;
  std::string message;
};

struct LoadResult {
  Corpus corpus;
  std::vector<RowError> row_errors;
};

// Throws Error(kFileNotFound) or Error(kSchemaMismatch). Malformed rows and
// flows that fail validate_flow are reported in row_errors; the remaining
// flows are returned in first-appearance order.
LoadResult load_corpus(const std::string& path, SchemaVersion schema,
                       const std::string& day_tag = {},
                       std::size_t packet_capture_cap = kDefaultPacketCaptureCap);
LoadResult read_corpus(std::istream& in, SchemaVersion schema,
                       const std::string& day_tag = {},
                       std::size_t packet_capture_cap = kDefaultPacketCaptureCap);

void write_corpus(const Corpus& corpus, std::ostream& out);
// Writes through a temporary file and renames into place.
void write_corpus(const Corpus& corpus, const std::string& path);

Corpus filter_by_location(const Corpus& corpus, const std::string& location);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct LogNormalParams {
  double log_mean = 0.0;
  double log_sigma = 1.0;
};

struct AppProfile {
  std::string application;
  std::string category;
  std::uint32_t msl = 2;
  ExtremeThresholds thresholds{10000, 4000};
  double weight = 1.0;  // relative share of flows

  LogNormalParams base_delay{7.6, 0.5};
  // Per-position probability that a qualifying burst starts here.
  double sd_burst_rate = 0.0;
  // Bursts last msl + Geometric(mean) delays.
  double burst_extra_length_mean = 1.0;
  // How far burst delays sit above delay + jitter thresholds.
  LogNormalParams burst_excess{8.0, 0.7};
  // Sub-MSL runs (events that never qualify). Ignored when msl == 1.
  double near_miss_rate = 0.0;
  // Elevated burst rate applied to the first onset_delays positions.
  std::uint32_t onset_delays = 0;
  double onset_burst_rate = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_flows = 1000;
  std::string day_tag = "mon";
  std::vector<AppProfile> app_profiles;
  std::vector<std::string> location_pool{"loc1"};
  std::vector<std::string> connection_types{"wired", "wireless"};

  LogNormalParams packets_per_flow{4.0, 0.6};
  std::size_t min_packets = 2;
  std::size_t packet_capture_cap = kDefaultPacketCaptureCap;
  double inbound_burst_extra_mean = 0.6;   // extra ToLan packets per burst
  LogNormalParams wan_gap{8.5, 1.0};       // gap before each inbound packet

  // Share of flows on a persistently congested path. Congested flows see
  // base delays scaled by degraded_delay_scale and burst rates multiplied by
  // degraded_rate_multiplier. Share is looked up per connection type, with
  // degraded_fraction as the fallback.
  double degraded_fraction = 0.0;
  std::map<std::string, double> degraded_fraction_by_connection;
  double degraded_delay_scale = 1.0;
  double degraded_rate_multiplier = 1.0;

  // Throws Error(kInvalidConfig).
  void validate() const;

  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct PlantedBurst {
  std::size_t start_delay_index = 0;
  std::size_t length = 0;

  friend bool operator==(const PlantedBurst&, const PlantedBurst&) = default;
};

struct FlowTruth {
  std::string flow_id;
  std::vector<PlantedBurst> bursts;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<FlowTruth> truth;  // same order as corpus.flows
};

SyntheticCorpus generate_synthetic(const SynthConfig& config);

// Sidecar JSON: {flow_id: [{start_delay_index, length}, ...]} in flow order.
nlohmann::ordered_json truth_to_json(const std::vector<FlowTruth>& truth);
std::vector<FlowTruth> truth_from_json(const nlohmann::ordered_json& j);

// Threshold table mirroring the profiles (first profile is the default).
ThresholdTable thresholds_for(const SynthConfig& config);

}  // namespace sdflow
