#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdflow/evalx.hpp"
#include "sdflow/features.hpp"
#include "sdflow/ingest.hpp"
#include "sdflow/models.hpp"

namespace sdflow {

struct DatasetInput {
  std::string path;
  std::string day_tag;
};

struct PredictorSpec {
  std::string name;
  PredictorKind kind = PredictorKind::Null;
  // Either an object of value lists (cartesian product, keys in sorted
  // order) or an array of explicit parameter objects.
  nlohmann::json grid = nlohmann::json::object();
};

// Candidate list for a spec. Seeds not given in the grid come from `seed`.
std::vector<PredictorParams> expand_grid(const PredictorSpec& spec, std::uint64_t seed);

struct PipelineConfig {
  // Exactly one input source: a synthetic template generated once per day,
  // or a list of dataset files tagged with their day.
  std::optional<SynthConfig> synthetic;
  std::vector<std::string> synthetic_days{"mon", "tue", "wed", "thu", "fri"};
  std::vector<DatasetInput> dataset_files;

  std::optional<std::string> location_filter;
  std::vector<std::uint32_t> split_thresholds{5, 10, 15, 20};
  // Empty: use the table written by `generate` in output_dir.
  std::string threshold_table_path;
  std::vector<std::string> train_days{"mon", "tue", "wed"};
  std::vector<std::string> test_days{"thu", "fri"};
  std::vector<PredictorSpec> predictors;
  std::string selection_metric = "f1";
  std::size_t cv_folds = 5;
  std::uint64_t seed = 42;
  std::string output_dir = "sdflow_out";
  unsigned threads = 1;
  std::size_t packet_capture_cap = kDefaultPacketCaptureCap;
  // Per split threshold, optional fixed vocabularies for the encoder.
  std::map<std::uint32_t, ForcedVocabularies> forced_vocabularies;

  // Throws Error(kInvalidConfig).
  void validate() const;

  static PipelineConfig defaults();
  // Missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  nlohmann::json to_json() const;

  std::string corpus_path(const std::string& day) const;
  std::string truth_path(const std::string& day) const;
  std::string generated_thresholds_path() const;
  std::string prepared_dir(std::uint32_t m) const;
  std::string models_dir(std::uint32_t m) const;
  std::string reports_dir() const;
};

std::vector<PredictorSpec> default_predictors();

struct GenerateSummary {
  std::map<std::string, std::size_t> flows_per_day;
};

struct PreparedSizes {
  std::uint32_t m = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t train_positives = 0;
  std::size_t test_positives = 0;
  std::size_t numeric_columns = 0;
  std::array<std::size_t, kCategoricalFieldCount> one_hot_columns{};
  std::size_t total_columns = 0;
  std::size_t row_errors = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static PreparedSizes from_json(const nlohmann::json& j);
};

struct TrainCell {
  std::uint32_t m = 0;
  std::string predictor;
  bool ok = false;
  std::string failure_reason;
  nlohmann::json best_params;
};

struct TrainSummary {
  std::vector<TrainCell> cells;
  bool any_degenerate() const;
};

GenerateSummary cmd_generate(const PipelineConfig& config);
std::vector<PreparedSizes> cmd_prepare(const PipelineConfig& config);
TrainSummary cmd_train(const PipelineConfig& config);
EvalReport cmd_evaluate(const PipelineConfig& config);
// Human-readable table of the persisted report.
std::string cmd_report(const PipelineConfig& config);

// Loads every corpus the config refers to, filtered by location.
struct LoadedCorpora {
  std::vector<Corpus> corpora;
  std::size_t row_errors = 0;
};
LoadedCorpora load_inputs(const PipelineConfig& config);

// Full per-flow chain for one split threshold: LAN delays, refined split,
// full-series detection and labelling, observable-side detection, features.
// Returns nullopt for fully observable flows.
std::optional<FeatureVector> featurize_flow(const FlowRecord& flow, const ThresholdTable& table,
                                            std::uint32_t m);

}  // namespace sdflow
