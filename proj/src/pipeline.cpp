#include "sdflow/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sdflow/error.hpp"
#include "sdflow/io_util.hpp"
#include "sdflow/parallel.hpp"
#include "sdflow/separation.hpp"

namespace sdflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::kInvalidConfig, "config: " + message);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json read_json_file(const std::string& path, ErrorCode missing) {
  std::ifstream in(path);
  if (!in) throw Error(missing, "missing file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::kDataError, path + ": " + ex.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

bool is_seeded(PredictorKind kind) {
  return kind == PredictorKind::Random || is_trained(kind);
}

}  // namespace

std::vector<PredictorParams> expand_grid(const PredictorSpec& spec, std::uint64_t seed) {
  std::vector<json> candidates;
  if (spec.grid.is_array()) {
    for (const auto& c : spec.grid) candidates.push_back(c);
  } else if (spec.grid.is_object()) {
    candidates.push_back(json::object());
    for (const auto& [key, values] : spec.grid.items()) {
      // A list of scalars for hidden_layer_sizes is one fixed value.
      const bool fixed = !values.is_array() ||
                         (key == "hidden_layer_sizes" && !values.empty() && values.front().is_number());
      std::vector<json> next;
      for (const auto& base : candidates) {
        if (fixed) {
          json c = base;
          c[key] = values;
          next.push_back(std::move(c));
        } else {
          for (const auto& v : values) {
            json c = base;
            c[key] = v;
            next.push_back(std::move(c));
          }
        }
      }
      candidates = std::move(next);
    }
  } else {
    config_error("grid for " + spec.name + " must be an object or an array");
  }
  if (candidates.empty()) candidates.push_back(json::object());

  std::vector<PredictorParams> out;
  for (auto c : candidates) {
    if (is_seeded(spec.kind) && !c.contains("seed")) c["seed"] = seed;
    auto params = params_from_json(spec.kind, c);
    validate(params);
    out.push_back(std::move(params));
  }
  return out;
}

std::vector<PredictorSpec> default_predictors() {
  return {
      {"null", PredictorKind::Null, json::object()},
      {"all_true", PredictorKind::AllTrue, json::object()},
      {"random", PredictorKind::Random, json::object()},
      {"sd_based", PredictorKind::SdBased, json::object()},
      {"split_sd_metric", PredictorKind::SplitSdMetric, {{"threshold", json::array({0.0})}}},
      {"logistic_regression", PredictorKind::LogisticRegression,
       {{"l2_penalty", {0.0, 1e-3, 1e-1}}, {"learning_rate", {1e-2, 1e-1}}}},
      {"gbt", PredictorKind::GradientBoostedTrees,
       {{"n_trees", {50, 200}}, {"max_depth", {3, 6}}, {"learning_rate", {0.1, 0.3}}}},
      {"mlp", PredictorKind::Mlp,
       {{"hidden_layer_sizes", json::array({json::array({32}), json::array({64, 32})})},
        {"learning_rate", {1e-3, 1e-2}}}},
  };
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.predictors = default_predictors();
  return c;
}

void PipelineConfig::validate() const {
  if (synthetic.has_value() == !dataset_files.empty()) {
    config_error("exactly one of input.synthetic and input.files must be given");
  }
  if (synthetic) {
    SynthConfig probe = *synthetic;
    probe.seed = seed;
    probe.validate();
    if (synthetic_days.empty()) config_error("input.synthetic.days must be non-empty");
  }
  if (split_thresholds.empty()) config_error("split_thresholds must be non-empty");
  for (auto m : split_thresholds) {
    if (m < 1) config_error("split thresholds must be >= 1");
  }
  if (train_days.empty() || test_days.empty()) config_error("train_days and test_days must be non-empty");
  for (const auto& d : train_days) {
    if (std::find(test_days.begin(), test_days.end(), d) != test_days.end()) {
      config_error("day '" + d + "' is in both train_days and test_days");
    }
  }
  if (cv_folds < 2) config_error("cv_folds must be >= 2");
  metric_by_name(MetricBundle{}, selection_metric);
  if (output_dir.empty()) config_error("output_dir must be non-empty");
  if (packet_capture_cap < 1) config_error("packet_capture_cap must be >= 1");
  std::set<std::string> names;
  for (const auto& p : predictors) {
    if (p.name.empty() || !names.insert(p.name).second) {
      config_error("predictor names must be unique and non-empty");
    }
    expand_grid(p, seed);
  }
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c = defaults();
  try {
    if (j.contains("input")) {
      const auto& in = j.at("input");
      if (in.contains("synthetic")) {
        c.synthetic = SynthConfig::from_json(in.at("synthetic"));
        read_opt(in.at("synthetic"), "days", c.synthetic_days);
      }
      if (in.contains("files")) {
        for (const auto& f : in.at("files")) {
          c.dataset_files.push_back({f.at("path").get<std::string>(), f.at("day_tag").get<std::string>()});
        }
      }
    }
    if (j.contains("location_filter") && !j.at("location_filter").is_null()) {
      c.location_filter = j.at("location_filter").get<std::string>();
    }
    read_opt(j, "split_thresholds", c.split_thresholds);
    read_opt(j, "threshold_table_path", c.threshold_table_path);
    read_opt(j, "train_days", c.train_days);
    read_opt(j, "test_days", c.test_days);
    read_opt(j, "selection_metric", c.selection_metric);
    read_opt(j, "cv_folds", c.cv_folds);
    read_opt(j, "seed", c.seed);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "threads", c.threads);
    read_opt(j, "packet_capture_cap", c.packet_capture_cap);
    if (j.contains("predictors")) {
      c.predictors.clear();
      for (const auto& p : j.at("predictors")) {
        PredictorSpec spec;
        spec.kind = parse_predictor_kind(p.at("kind").get<std::string>());
        spec.name = p.value("name", std::string(to_string(spec.kind)));
        spec.grid = p.value("grid", json::object());
        c.predictors.push_back(std::move(spec));
      }
    }
    if (j.contains("forced_vocabularies")) {
      for (const auto& [m_text, fields] : j.at("forced_vocabularies").items()) {
        ForcedVocabularies forced;
        for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
          if (fields.contains(kCategoricalFields[f])) {
            forced[f] = fields.at(kCategoricalFields[f]).get<std::vector<std::string>>();
          }
        }
        c.forced_vocabularies[static_cast<std::uint32_t>(std::stoul(m_text))] = std::move(forced);
      }
    }
  } catch (const json::exception& ex) {
    config_error(ex.what());
  } catch (const std::invalid_argument&) {
    config_error("forced_vocabularies keys must be split thresholds");
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "config file not found: " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    config_error(path + ": " + ex.what());
  }
}

json PipelineConfig::to_json() const {
  json input = json::object();
  if (synthetic) {
    json s = synthetic->to_json();
    s.erase("seed");
    s.erase("day_tag");
    s["days"] = synthetic_days;
    input["synthetic"] = s;
  }
  if (!dataset_files.empty()) {
    json files = json::array();
    for (const auto& f : dataset_files) files.push_back({{"path", f.path}, {"day_tag", f.day_tag}});
    input["files"] = files;
  }
  json preds = json::array();
  for (const auto& p : predictors) preds.push_back({{"name", p.name}, {"kind", to_string(p.kind)}, {"grid", p.grid}});
  json forced = json::object();
  for (const auto& [m, fields] : forced_vocabularies) {
    json fj = json::object();
    for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
      if (fields[f]) fj[kCategoricalFields[f]] = *fields[f];
    }
    forced[std::to_string(m)] = fj;
  }
  return {{"input", input},
          {"location_filter", location_filter ? json(*location_filter) : json(nullptr)},
          {"split_thresholds", split_thresholds},
          {"threshold_table_path", threshold_table_path},
          {"train_days", train_days},
          {"test_days", test_days},
          {"predictors", preds},
          {"selection_metric", selection_metric},
          {"cv_folds", cv_folds},
          {"seed", seed},
          {"output_dir", output_dir},
          {"threads", threads},
          {"packet_capture_cap", packet_capture_cap},
          {"forced_vocabularies", forced}};
}

std::string PipelineConfig::corpus_path(const std::string& day) const {
  return (fs::path(output_dir) / "corpus" / (day + ".csv")).string();
}
std::string PipelineConfig::truth_path(const std::string& day) const {
  return (fs::path(output_dir) / "corpus" / (day + ".truth.json")).string();
}
std::string PipelineConfig::generated_thresholds_path() const {
  return (fs::path(output_dir) / "thresholds.json").string();
}
std::string PipelineConfig::prepared_dir(std::uint32_t m) const {
  return (fs::path(output_dir) / "prepared" / ("m" + std::to_string(m))).string();
}
std::string PipelineConfig::models_dir(std::uint32_t m) const {
  return (fs::path(output_dir) / "models" / ("m" + std::to_string(m))).string();
}
std::string PipelineConfig::reports_dir() const { return (fs::path(output_dir) / "reports").string(); }

json PreparedSizes::to_json() const {
  json one_hot = json::object();
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) one_hot[kCategoricalFields[f]] = one_hot_columns[f];
  return {{"m", m},
          {"train_rows", train_rows},
          {"test_rows", test_rows},
          {"train_positives", train_positives},
          {"test_positives", test_positives},
          {"numeric_columns", numeric_columns},
          {"one_hot_columns", one_hot},
          {"total_columns", total_columns},
          {"row_errors", row_errors},
          {"warnings", warnings}};
}

PreparedSizes PreparedSizes::from_json(const json& j) {
  PreparedSizes s;
  s.m = j.at("m").get<std::uint32_t>();
  s.train_rows = j.at("train_rows").get<std::size_t>();
  s.test_rows = j.at("test_rows").get<std::size_t>();
  s.train_positives = j.at("train_positives").get<std::size_t>();
  s.test_positives = j.at("test_positives").get<std::size_t>();
  s.numeric_columns = j.at("numeric_columns").get<std::size_t>();
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
    s.one_hot_columns[f] = j.at("one_hot_columns").at(kCategoricalFields[f]).get<std::size_t>();
  }
  s.total_columns = j.at("total_columns").get<std::size_t>();
  s.row_errors = j.value("row_errors", std::size_t{0});
  s.warnings = j.value("warnings", std::vector<std::string>{});
  return s;
}

bool TrainSummary::any_degenerate() const {
  return std::any_of(cells.begin(), cells.end(), [](const TrainCell& c) { return !c.ok; });
}

// ---------------------------------------------------------------------------

GenerateSummary cmd_generate(const PipelineConfig& config) {
  config.validate();
  if (!config.synthetic) config_error("generate needs input.synthetic");
  GenerateSummary summary;
  for (const auto& day : config.synthetic_days) {
    SynthConfig sc = *config.synthetic;
    sc.seed = config.seed;
    sc.day_tag = day;
    const auto generated = generate_synthetic(sc);
    write_corpus(generated.corpus, config.corpus_path(day));
    write_file_atomic(config.truth_path(day), truth_to_json(generated.truth).dump() + "\n");
    summary.flows_per_day[day] = generated.corpus.flows.size();
  }
  SynthConfig sc = *config.synthetic;
  write_json_file(config.generated_thresholds_path(), thresholds_for(sc).to_json());
  return summary;
}

LoadedCorpora load_inputs(const PipelineConfig& config) {
  std::vector<std::pair<std::string, std::string>> sources;  // path, day
  if (config.synthetic) {
    for (const auto& day : config.synthetic_days) sources.emplace_back(config.corpus_path(day), day);
  } else {
    for (const auto& f : config.dataset_files) sources.emplace_back(f.path, f.day_tag);
  }

  LoadedCorpora out;
  for (const auto& [path, day] : sources) {
    const bool wanted = std::count(config.train_days.begin(), config.train_days.end(), day) ||
                        std::count(config.test_days.begin(), config.test_days.end(), day);
    if (!wanted) continue;
    if (config.synthetic && !fs::exists(path)) {
      throw Error(ErrorCode::kPreparationMissing, "corpus " + path + " is missing; run `generate` first");
    }
    auto loaded = load_corpus(path, SchemaVersion::V1, day, config.packet_capture_cap);
    out.row_errors += loaded.row_errors.size();
    Corpus corpus = config.location_filter ? filter_by_location(loaded.corpus, *config.location_filter)
                                           : std::move(loaded.corpus);
    if (config.synthetic) corpus.origin = CorpusOrigin::Synthetic;
    out.corpora.push_back(std::move(corpus));
  }
  return out;
}

std::optional<FeatureVector> featurize_flow(const FlowRecord& flow, const ThresholdTable& table,
                                            std::uint32_t m) {
  const LanDelaySeries series = extract_lan_delays(flow);
  const SplitSeries split = split_refined(series, m);
  if (split.fully_observable) return std::nullopt;

  const auto& thresholds = table.lookup(flow.meta.application).thresholds;
  const std::uint32_t msl = flow.meta.msl;
  const auto events = detect_events(series, thresholds, msl);
  const auto classified = classify_against_boundary(events, split.observable.size(), msl, series);
  const auto outcome = flow_split_outcome(classified);
  const auto events_in_o = detect_events(split.observable, thresholds, msl);
  const auto label = label_flow(series, split, thresholds, msl);
  return extract_features(split, events_in_o, outcome, flow.meta, m, label);
}

namespace {

ThresholdTable load_thresholds(const PipelineConfig& config) {
  const std::string path =
      config.threshold_table_path.empty() ? config.generated_thresholds_path() : config.threshold_table_path;
  if (config.threshold_table_path.empty() && !fs::exists(path)) {
    throw Error(ErrorCode::kPreparationMissing, "threshold table " + path + " is missing; run `generate` first");
  }
  return ThresholdTable::load(path);
}

void write_ids(const std::string& path, const std::vector<std::string>& ids) {
  std::string text;
  for (const auto& id : ids) text += id + '\n';
  write_file_atomic(path, text);
}

}  // namespace

std::vector<PreparedSizes> cmd_prepare(const PipelineConfig& config) {
  config.validate();
  const ThresholdTable table = load_thresholds(config);
  const LoadedCorpora inputs = load_inputs(config);

  std::vector<const FlowRecord*> flows;
  std::vector<bool> is_train;
  for (const auto& corpus : inputs.corpora) {
    const bool train = std::count(config.train_days.begin(), config.train_days.end(), corpus.day_tag) > 0;
    for (const auto& f : corpus.flows) {
      flows.push_back(&f);
      is_train.push_back(train);
    }
  }

  std::vector<PreparedSizes> all_sizes;
  for (const std::uint32_t m : config.split_thresholds) {
    std::vector<std::optional<FeatureVector>> featurized(flows.size());
    parallel_for(flows.size(), config.threads,
                 [&](std::size_t i) { featurized[i] = featurize_flow(*flows[i], table, m); });

    std::vector<FeatureVector> train;
    std::vector<FeatureVector> test;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      if (featurized[i]) (is_train[i] ? train : test).push_back(std::move(*featurized[i]));
    }

    PreparedSizes sizes;
    sizes.m = m;
    sizes.row_errors = inputs.row_errors;
    ForcedVocabularies forced;
    if (auto it = config.forced_vocabularies.find(m); it != config.forced_vocabularies.end()) forced = it->second;

    EncoderState encoder;
    if (train.empty()) {
      sizes.warnings.push_back(fmt::format(
          "m={}: no training flow has more than {} LAN delays; matrices are empty", m, m));
      encoder.m = m;
      encoder.numeric_means.assign(numeric_width(m), 0.0);
      encoder.numeric_stds.assign(numeric_width(m), 1.0);
      for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
        if (forced[f]) {
          std::set<std::string> values(forced[f]->begin(), forced[f]->end());
          encoder.vocabularies[f].assign(values.begin(), values.end());
        }
      }
    } else {
      encoder = fit_encoder(train, m, forced);
    }
    if (test.empty()) sizes.warnings.push_back(fmt::format("m={}: test set is empty", m));

    const DatasetMatrix train_matrix = transform(encoder, train);
    const DatasetMatrix test_matrix = transform(encoder, test);
    const std::string dir = config.prepared_dir(m);
    write_json_file(dir + "/encoder.json", encoder.to_json());
    write_matrix_csv(train_matrix, dir + "/train.csv");
    write_matrix_csv(test_matrix, dir + "/test.csv");
    write_ids(dir + "/train_ids.txt", train_matrix.flow_ids);
    write_ids(dir + "/test_ids.txt", test_matrix.flow_ids);

    sizes.train_rows = train_matrix.rows;
    sizes.test_rows = test_matrix.rows;
    sizes.train_positives = train_matrix.positives();
    sizes.test_positives = test_matrix.positives();
    sizes.numeric_columns = encoder.numeric_means.size();
    for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) sizes.one_hot_columns[f] = encoder.vocabularies[f].size();
    sizes.total_columns = encoder.total_width();
    write_json_file(dir + "/sizes.json", sizes.to_json());
    all_sizes.push_back(std::move(sizes));
  }
  return all_sizes;
}

namespace {

struct PreparedSplit {
  EncoderState encoder;
  PreparedSizes sizes;
};

PreparedSplit load_prepared(const PipelineConfig& config, std::uint32_t m) {
  const std::string dir = config.prepared_dir(m);
  PreparedSplit p;
  p.encoder = EncoderState::from_json(read_json_file(dir + "/encoder.json", ErrorCode::kPreparationMissing));
  p.sizes = PreparedSizes::from_json(read_json_file(dir + "/sizes.json", ErrorCode::kPreparationMissing));
  return p;
}

std::string model_path(const PipelineConfig& config, std::uint32_t m, const std::string& name) {
  return config.models_dir(m) + "/" + name + ".json";
}

std::string model_error_path(const PipelineConfig& config, std::uint32_t m, const std::string& name) {
  return config.models_dir(m) + "/" + name + ".error.json";
}

}  // namespace

TrainSummary cmd_train(const PipelineConfig& config) {
  config.validate();
  TrainSummary summary;
  for (const std::uint32_t m : config.split_thresholds) {
    const PreparedSplit prepared = load_prepared(config, m);
    const DatasetMatrix train = read_matrix_csv(config.prepared_dir(m) + "/train.csv", prepared.encoder);
    const std::string encoder_hash = prepared.encoder.hash();

    for (const auto& spec : config.predictors) {
      if (!is_trained(spec.kind)) continue;
      TrainCell cell{m, spec.name, false, {}, nullptr};
      const auto grid = expand_grid(spec, config.seed);
      std::error_code ec;
      fs::remove(model_error_path(config, m, spec.name), ec);
      try {
        const auto search = grid_search_cv(grid, train, config.cv_folds, config.selection_metric,
                                           config.seed, config.threads);
        const auto model = fit(search.best_params, train);
        write_json_file(config.models_dir(m) + "/" + spec.name + ".cv.json", search.to_json(grid));
        write_json_file(model_path(config, m, spec.name),
                        predictor_to_json(*model, search.best_params, encoder_hash));
        cell.ok = true;
        cell.best_params = params_to_json(search.best_params);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateLabels) throw;
        cell.failure_reason = std::string(to_string(e.code())) + ": " + e.what();
        fs::remove(model_path(config, m, spec.name), ec);
        write_json_file(model_error_path(config, m, spec.name),
                        {{"error", to_string(e.code())}, {"message", e.what()}});
      }
      summary.cells.push_back(std::move(cell));
    }
  }
  return summary;
}

EvalReport cmd_evaluate(const PipelineConfig& config) {
  config.validate();
  EvalReport report;
  for (const std::uint32_t m : config.split_thresholds) {
    const PreparedSplit prepared = load_prepared(config, m);
    const DatasetMatrix test = read_matrix_csv(config.prepared_dir(m) + "/test.csv", prepared.encoder);
    const std::string encoder_hash = prepared.encoder.hash();

    for (const auto& spec : config.predictors) {
      EvalCell cell;
      cell.m = m;
      cell.predictor = spec.name;
      cell.train_rows = prepared.sizes.train_rows;
      cell.test_rows = test.rows;
      cell.test_positives = test.positives();
      try {
        std::unique_ptr<Predictor> predictor;
        if (is_trained(spec.kind)) {
          const auto err = model_error_path(config, m, spec.name);
          if (fs::exists(err)) {
            const json ej = read_json_file(err, ErrorCode::kDataError);
            throw Error(ErrorCode::kDegenerateLabels, ej.value("message", std::string("training failed")));
          }
          const json mj = read_json_file(model_path(config, m, spec.name), ErrorCode::kPreparationMissing);
          if (mj.value("encoder_hash", std::string()) != encoder_hash) {
            throw Error(ErrorCode::kShapeMismatch, "model was trained against a different encoder");
          }
          predictor = predictor_from_json(mj);
        } else {
          predictor = fit(expand_grid(spec, config.seed).front(), DatasetMatrix{});
        }
        if (test.rows == 0) throw Error(ErrorCode::kDataError, "empty test set");

        const auto scores = predictor->predict_proba(test);
        const auto predicted = predictor->predict(test);
        cell.counts = confusion(test.y, predicted);
        cell.metrics = metrics(cell.counts);
        if (cell.test_positives > 0 && cell.test_positives < test.rows) {
          cell.roc = roc(test.y, scores);
          write_file_atomic(config.reports_dir() + "/roc/m" + std::to_string(m) + "_" + spec.name + ".csv",
                            roc_to_csv(*cell.roc));
        }
        cell.ok = true;
      } catch (const Error& e) {
        cell.ok = false;
        cell.failure_reason = std::string(to_string(e.code())) + ": " + e.what();
      }
      report.cells.push_back(std::move(cell));
    }
  }
  write_json_file(config.reports_dir() + "/report.json", report.to_json());
  write_file_atomic(config.reports_dir() + "/report.csv", report.to_csv());
  return report;
}

std::string cmd_report(const PipelineConfig& config) {
  const json j = read_json_file(config.reports_dir() + "/report.json", ErrorCode::kPreparationMissing);
  const EvalReport report = EvalReport::from_json(j);

  std::ostringstream out;
  out << fmt::format("{:>4}  {:<20} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "m", "predictor",
                     "precision", "recall", "f1", "spec", "npv", "acc", "bal_acc", "auroc");
  for (const auto& c : report.cells) {
    if (!c.ok) {
      out << fmt::format("{:>4}  {:<20} FAILED: {}\n", c.m, c.predictor, c.failure_reason);
      continue;
    }
    const auto& b = c.metrics;
    out << fmt::format("{:>4}  {:<20} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n", c.m, c.predictor,
                       format_metric(b.precision), format_metric(b.recall), format_metric(b.f1),
                       format_metric(b.specificity), format_metric(b.npv), format_metric(b.accuracy),
                       format_metric(b.balanced_accuracy),
                       c.roc ? format_metric(c.roc->auroc) : std::string("n/a"));
  }
  return out.str();
}

}  // namespace sdflow
