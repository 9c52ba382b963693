#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sdflow/flow_model.hpp"
#include "sdflow/sd_detect.hpp"
#include "sdflow/separation.hpp"

namespace sdflow {

// Categorical fields in one-hot block order.
inline constexpr std::size_t kCategoricalFieldCount = 4;
inline constexpr std::array<const char*, kCategoricalFieldCount> kCategoricalFields = {
    "category", "application", "location", "connection_type"};

using CategoricalValues = std::array<std::string, kCategoricalFieldCount>;

CategoricalValues categorical_values(const FlowMeta& meta);

// Numeric layout for observable width m:
//   delay_1..delay_m, jitter_1..jitter_{m-1},
//   delay_{min,max,median,mean,std}, jitter_{min,max,median,mean,std},
//   sd_event_count_o, longest_event_length, longest_event_max_delay,
//   split_sd_ratio
std::size_t numeric_width(std::uint32_t m);
std::vector<std::string> numeric_feature_names(std::uint32_t m);

inline constexpr const char* kSdEventCountColumn = "sd_event_count_o";
inline constexpr const char* kSplitSdRatioColumn = "split_sd_ratio";

struct FeatureVector {
  std::string flow_id;
  std::vector<double> numeric;
  CategoricalValues categorical;
  FlowLabel label;
};

// min, max, median, mean, population std; all zero for an empty input.
std::array<double, 5> summary_stats(std::span<const Micros> values);

// Throws Error(kFullyObservable) when the split has no non-observable part.
// events_in_o come from detect_events over split.observable.
FeatureVector extract_features(const SplitSeries& split,
                               const std::vector<SdEvent>& events_in_o,
                               const SplitOutcome& split_outcome,
                               const FlowMeta& meta,
                               std::uint32_t m,
                               FlowLabel label = {});

struct EncoderState {
  std::uint32_t m = 0;
  std::array<std::vector<std::string>, kCategoricalFieldCount> vocabularies;
  std::vector<double> numeric_means;
  std::vector<double> numeric_stds;

  std::size_t one_hot_width() const;
  std::size_t total_width() const { return numeric_means.size() + one_hot_width(); }
  std::vector<std::string> column_names() const;

  nlohmann::json to_json() const;
  static EncoderState from_json(const nlohmann::json& j);
  // Stable fingerprint of to_json(), used to tie models to their encoder.
  std::string hash() const;

  friend bool operator==(const EncoderState&, const EncoderState&) = default;
};

using ForcedVocabularies = std::array<std::optional<std::vector<std::string>>, kCategoricalFieldCount>;

// Sorted unique training values per categorical field (or the forced list,
// also sorted and deduplicated); per-column mean and population std over
// training rows, with std = 1 for constant columns.
EncoderState fit_encoder(const std::vector<FeatureVector>& train, std::uint32_t m,
                         const ForcedVocabularies& forced = {});

struct ColumnScale {
  double mean = 0.0;
  double std = 1.0;
};

struct DatasetMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> X;  // row-major
  std::vector<int> y;
  std::vector<std::string> column_names;
  std::vector<std::string> flow_ids;
  // Standardization applied to each column; identity for one-hot columns.
  std::vector<ColumnScale> scaling;

  std::span<const double> row(std::size_t r) const { return {X.data() + r * cols, cols}; }
  double at(std::size_t r, std::size_t c) const { return X[r * cols + c]; }
  // Index of a named column. Throws Error(kShapeMismatch) if absent.
  std::size_t column_index(const std::string& name) const;
  // Column values with standardization undone.
  std::vector<double> raw_column(const std::string& name) const;
  std::size_t positives() const;
  DatasetMatrix subset(std::span<const std::size_t> row_indices) const;
};

DatasetMatrix transform(const EncoderState& encoder, const std::vector<FeatureVector>& vectors);

// CSV with header column_names + "label". Scaling is restored from the
// encoder on read.
void write_matrix_csv(const DatasetMatrix& matrix, const std::string& path);
DatasetMatrix read_matrix_csv(const std::string& path, const EncoderState& encoder);

}  // namespace sdflow
