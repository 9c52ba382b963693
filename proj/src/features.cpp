#include "sdflow/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "sdflow/error.hpp"
#include "sdflow/io_util.hpp"
#include "sdflow/rng.hpp"

namespace sdflow {

CategoricalValues categorical_values(const FlowMeta& meta) {
  return {meta.category, meta.application, meta.location, meta.connection_type};
}

std::size_t numeric_width(std::uint32_t m) { return 2 * static_cast<std::size_t>(m) + 13; }

std::vector<std::string> numeric_feature_names(std::uint32_t m) {
  std::vector<std::string> names;
  names.reserve(numeric_width(m));
  for (std::uint32_t i = 1; i <= m; ++i) names.push_back("delay_" + std::to_string(i));
  for (std::uint32_t i = 1; i < m; ++i) names.push_back("jitter_" + std::to_string(i));
  for (const char* series : {"delay", "jitter"}) {
    for (const char* stat : {"min", "max", "median", "mean", "std"}) {
      names.push_back(std::string(series) + "_" + stat);
    }
  }
  names.emplace_back(kSdEventCountColumn);
  names.emplace_back("longest_event_length");
  names.emplace_back("longest_event_max_delay");
  names.emplace_back(kSplitSdRatioColumn);
  return names;
}

std::array<double, 5> summary_stats(std::span<const Micros> values) {
  if (values.empty()) return {0, 0, 0, 0, 0};
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {v.front(), v.back(), median, mean, std::sqrt(ss / static_cast<double>(n))};
}

FeatureVector extract_features(const SplitSeries& split,
                               const std::vector<SdEvent>& events_in_o,
                               const SplitOutcome& split_outcome,
                               const FlowMeta& meta,
                               std::uint32_t m,
                               FlowLabel label) {
  if (split.fully_observable || split.non_observable.empty()) {
    throw Error(ErrorCode::kFullyObservable, "flow " + meta.flow_id + " has no non-observable part");
  }
  FeatureVector fv;
  fv.flow_id = meta.flow_id;
  fv.categorical = categorical_values(meta);
  fv.label = label;

  const auto& d = split.observable.delays();
  const auto& j = split.observable.jitters();
  auto& out = fv.numeric;
  out.reserve(numeric_width(m));
  for (std::uint32_t i = 0; i < m; ++i) out.push_back(i < d.size() ? static_cast<double>(d[i]) : 0.0);
  for (std::uint32_t i = 0; i + 1 < m; ++i) out.push_back(i < j.size() ? static_cast<double>(j[i]) : 0.0);
  for (double s : summary_stats(d)) out.push_back(s);
  for (double s : summary_stats(j)) out.push_back(s);

  std::size_t qualifying = 0;
  const SdEvent* longest = nullptr;
  for (const auto& e : events_in_o) {
    if (e.qualifies) ++qualifying;
    if (!longest || e.length > longest->length) longest = &e;
  }
  out.push_back(static_cast<double>(qualifying));
  out.push_back(longest ? static_cast<double>(longest->length) : 0.0);
  out.push_back(longest ? static_cast<double>(longest->max_delay) : 0.0);
  out.push_back(split_outcome.split_sd_ratio);
  return fv;
}

std::size_t EncoderState::one_hot_width() const {
  std::size_t w = 0;
  for (const auto& v : vocabularies) w += v.size();
  return w;
}

std::vector<std::string> EncoderState::column_names() const {
  auto names = numeric_feature_names(m);
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
    for (const auto& value : vocabularies[f]) names.push_back(std::string(kCategoricalFields[f]) + "=" + value);
  }
  return names;
}

nlohmann::json EncoderState::to_json() const {
  nlohmann::json vocab = nlohmann::json::object();
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) vocab[kCategoricalFields[f]] = vocabularies[f];
  return {{"format_version", 1},
          {"m", m},
          {"vocabularies", vocab},
          {"numeric_means", numeric_means},
          {"numeric_stds", numeric_stds}};
}

EncoderState EncoderState::from_json(const nlohmann::json& j) {
  try {
    EncoderState e;
    e.m = j.at("m").get<std::uint32_t>();
    for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
      e.vocabularies[f] = j.at("vocabularies").at(kCategoricalFields[f]).get<std::vector<std::string>>();
    }
    e.numeric_means = j.at("numeric_means").get<std::vector<double>>();
    e.numeric_stds = j.at("numeric_stds").get<std::vector<double>>();
    if (e.numeric_means.size() != numeric_width(e.m) || e.numeric_stds.size() != numeric_width(e.m)) {
      throw Error(ErrorCode::kShapeMismatch, "encoder statistics do not match m");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kDataError, std::string("encoder state: ") + ex.what());
  }
}

std::string EncoderState::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Rng::hash_string(to_json().dump())));
  return buf;
}

EncoderState fit_encoder(const std::vector<FeatureVector>& train, std::uint32_t m,
                         const ForcedVocabularies& forced) {
  if (train.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "cannot fit encoder on an empty training set");
  const std::size_t width = numeric_width(m);

  EncoderState e;
  e.m = m;
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
    std::set<std::string> values;
    if (forced[f]) {
      values.insert(forced[f]->begin(), forced[f]->end());
    } else {
      for (const auto& fv : train) values.insert(fv.categorical[f]);
    }
    e.vocabularies[f].assign(values.begin(), values.end());
  }

  e.numeric_means.assign(width, 0.0);
  e.numeric_stds.assign(width, 0.0);
  for (const auto& fv : train) {
    if (fv.numeric.size() != width) throw Error(ErrorCode::kShapeMismatch, "feature vector width != 2m+13");
    for (std::size_t c = 0; c < width; ++c) e.numeric_means[c] += fv.numeric[c];
  }
  const auto n = static_cast<double>(train.size());
  for (double& mean : e.numeric_means) mean /= n;
  for (const auto& fv : train) {
    for (std::size_t c = 0; c < width; ++c) {
      const double diff = fv.numeric[c] - e.numeric_means[c];
      e.numeric_stds[c] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    const double sd = std::sqrt(e.numeric_stds[c] / n);
    // Relative guard: a column that only differs by rounding is constant.
    e.numeric_stds[c] = sd > 1e-12 * std::max(1.0, std::abs(e.numeric_means[c])) ? sd : 1.0;
  }
  return e;
}

std::size_t DatasetMatrix::column_index(const std::string& name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw Error(ErrorCode::kShapeMismatch, "no column named " + name);
  return static_cast<std::size_t>(it - column_names.begin());
}

std::vector<double> DatasetMatrix::raw_column(const std::string& name) const {
  const std::size_t c = column_index(name);
  const ColumnScale s = c < scaling.size() ? scaling[c] : ColumnScale{};
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c) * s.std + s.mean;
  return out;
}

std::size_t DatasetMatrix::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

DatasetMatrix DatasetMatrix::subset(std::span<const std::size_t> row_indices) const {
  DatasetMatrix out;
  out.rows = row_indices.size();
  out.cols = cols;
  out.column_names = column_names;
  out.scaling = scaling;
  out.X.reserve(out.rows * cols);
  out.y.reserve(out.rows);
  for (std::size_t r : row_indices) {
    auto src = row(r);
    out.X.insert(out.X.end(), src.begin(), src.end());
    out.y.push_back(y[r]);
    if (r < flow_ids.size()) out.flow_ids.push_back(flow_ids[r]);
  }
  return out;
}

namespace {

std::vector<ColumnScale> scaling_for(const EncoderState& encoder) {
  std::vector<ColumnScale> scaling(encoder.total_width());
  for (std::size_t c = 0; c < encoder.numeric_means.size(); ++c) {
    scaling[c] = {encoder.numeric_means[c], encoder.numeric_stds[c]};
  }
  return scaling;
}

}  // namespace

DatasetMatrix transform(const EncoderState& encoder, const std::vector<FeatureVector>& vectors) {
  const std::size_t width = encoder.numeric_means.size();
  DatasetMatrix out;
  out.rows = vectors.size();
  out.cols = encoder.total_width();
  out.column_names = encoder.column_names();
  out.scaling = scaling_for(encoder);
  out.X.assign(out.rows * out.cols, 0.0);
  out.y.reserve(out.rows);
  out.flow_ids.reserve(out.rows);

  std::array<std::size_t, kCategoricalFieldCount> block_offset{};
  std::size_t offset = width;
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
    block_offset[f] = offset;
    offset += encoder.vocabularies[f].size();
  }

  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const auto& fv = vectors[r];
    if (fv.numeric.size() != width) throw Error(ErrorCode::kShapeMismatch, "feature vector width mismatch");
    double* row = out.X.data() + r * out.cols;
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = (fv.numeric[c] - encoder.numeric_means[c]) / encoder.numeric_stds[c];
    }
    for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
      const auto& vocab = encoder.vocabularies[f];
      auto it = std::lower_bound(vocab.begin(), vocab.end(), fv.categorical[f]);
      if (it != vocab.end() && *it == fv.categorical[f]) {
        row[block_offset[f] + static_cast<std::size_t>(it - vocab.begin())] = 1.0;
      }
    }
    out.y.push_back(fv.label.has_sd_in_no ? 1 : 0);
    out.flow_ids.push_back(fv.flow_id);
  }
  return out;
}

void write_matrix_csv(const DatasetMatrix& matrix, const std::string& path) {
  AtomicFile file(path);
  auto& out = file.stream();
  for (const auto& name : matrix.column_names) out << name << ',';
  out << "label\n";
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    for (std::size_t c = 0; c < matrix.cols; ++c) out << format_double(matrix.at(r, c)) << ',';
    out << matrix.y[r] << '\n';
  }
  file.commit();
}

DatasetMatrix read_matrix_csv(const std::string& path, const EncoderState& encoder) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kPreparationMissing, "prepared matrix not found: " + path);

  DatasetMatrix out;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kDataError, "empty matrix file: " + path);
  for (auto field : split_csv_line(line)) out.column_names.emplace_back(field);
  if (out.column_names.empty() || out.column_names.back() != "label") {
    throw Error(ErrorCode::kDataError, "matrix file lacks a label column: " + path);
  }
  out.column_names.pop_back();
  out.cols = out.column_names.size();
  if (out.column_names != encoder.column_names()) {
    throw Error(ErrorCode::kShapeMismatch, "matrix columns do not match encoder: " + path);
  }
  out.scaling = scaling_for(encoder);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != out.cols + 1) throw Error(ErrorCode::kDataError, "ragged matrix row in " + path);
    for (std::size_t c = 0; c < out.cols; ++c) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(fields[c].data(), fields[c].data() + fields[c].size(), v);
      if (ec != std::errc()) throw Error(ErrorCode::kDataError, "bad number in " + path);
      out.X.push_back(v);
    }
    out.y.push_back(fields.back() == "1" ? 1 : 0);
    ++out.rows;
  }
  return out;
}

}  // namespace sdflow
