#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include "sdflow/error.hpp"
#include "sdflow/io_util.hpp"
#include "sdflow/pipeline.hpp"

using namespace sdflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

AppProfile profile(std::string app, std::string cat, std::uint32_t msl) {
  AppProfile p;
  p.application = std::move(app);
  p.category = std::move(cat);
  p.msl = msl;
  p.sd_burst_rate = 0.0008;
  p.burst_extra_length_mean = 3;
  p.near_miss_rate = 0.01;
  p.onset_delays = 8;
  p.onset_burst_rate = 0.03;
  return p;
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sdflow_pipeline_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    config_ = PipelineConfig::defaults();
    SynthConfig s;
    s.n_flows = 600;
    s.location_pool = {"L1", "L2"};
    s.degraded_fraction = 0.08;
    s.degraded_delay_scale = 2.2;
    s.degraded_rate_multiplier = 60;
    s.app_profiles = {profile("voip", "voice", 2), profile("video", "conferencing", 3)};
    config_.synthetic = s;
    config_.split_thresholds = {10};
    config_.output_dir = dir_.string();
    config_.seed = 5;
    config_.predictors = {
        {"null", PredictorKind::Null, json::object()},
        {"random", PredictorKind::Random, json::object()},
        {"sd_based", PredictorKind::SdBased, json::object()},
        {"split_sd_metric", PredictorKind::SplitSdMetric, json::object()},
        {"logistic_regression", PredictorKind::LogisticRegression, {{"learning_rate", {0.1}}}},
        {"gbt", PredictorKind::GradientBoostedTrees, {{"n_trees", {60}}, {"max_depth", {3}}}},
    };
  }
  void TearDown() override {
    if (!::testing::Test::HasFailure()) fs::remove_all(dir_);
  }

  void run_all() {
    cmd_generate(config_);
    cmd_prepare(config_);
    cmd_train(config_);
    cmd_evaluate(config_);
  }

  fs::path dir_;
  PipelineConfig config_;
};

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(PipelineConfigTest, Validation) {
  auto c = PipelineConfig::defaults();
  c.synthetic = SynthConfig{};
  c.synthetic->app_profiles = {profile("a", "b", 2)};
  EXPECT_NO_THROW(c.validate());

  auto bad = c;
  bad.test_days.push_back("mon");
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.split_thresholds = {5, 0};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.split_thresholds.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.synthetic->n_flows = 0;
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    EXPECT_EQ(exit_code_for(e.code()), 2);
  }
  bad = c;
  bad.dataset_files.push_back({"x.csv", "mon"});
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.selection_metric = "roc";
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PipelineConfigTest, JsonRoundTrip) {
  auto c = PipelineConfig::defaults();
  c.synthetic = SynthConfig{};
  c.synthetic->app_profiles = {profile("a", "b", 2)};
  ForcedVocabularies forced;
  forced[0] = std::vector<std::string>{"x", "y"};
  c.forced_vocabularies[10] = forced;
  c.location_filter = "L2";
  const auto j = c.to_json();
  EXPECT_EQ(PipelineConfig::from_json(j).to_json(), j);
  EXPECT_EQ(PipelineConfig::from_json(json::object()).split_thresholds, (std::vector<std::uint32_t>{5, 10, 15, 20}));
}

TEST(ExpandGrid, CartesianProductAndSeeds) {
  const auto defaults = default_predictors();
  const auto find = [&](PredictorKind k) {
    return *std::find_if(defaults.begin(), defaults.end(), [&](const PredictorSpec& s) { return s.kind == k; });
  };
  EXPECT_EQ(expand_grid(find(PredictorKind::LogisticRegression), 1).size(), 6u);
  EXPECT_EQ(expand_grid(find(PredictorKind::GradientBoostedTrees), 1).size(), 8u);
  const auto mlp = expand_grid(find(PredictorKind::Mlp), 77);
  ASSERT_EQ(mlp.size(), 4u);
  for (const auto& p : mlp) EXPECT_EQ(std::get<MlpParams>(p).seed, 77u);
  std::set<std::vector<std::uint32_t>> sizes;
  for (const auto& p : mlp) sizes.insert(std::get<MlpParams>(p).hidden_layer_sizes);
  EXPECT_EQ(sizes.size(), 2u);

  PredictorSpec fixed{"m", PredictorKind::Mlp, {{"hidden_layer_sizes", {16, 8}}, {"seed", 3}}};
  const auto one = expand_grid(fixed, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(std::get<MlpParams>(one[0]).hidden_layer_sizes, (std::vector<std::uint32_t>{16, 8}));
  EXPECT_EQ(std::get<MlpParams>(one[0]).seed, 3u);

  PredictorSpec explicit_list{"lr", PredictorKind::LogisticRegression,
                              json::array({{{"learning_rate", 0.5}}, {{"l2_penalty", 0.2}}})};
  EXPECT_EQ(expand_grid(explicit_list, 1).size(), 2u);
}

TEST_F(PipelineTest, GenerateIsDeterministic) {
  cmd_generate(config_);
  const auto first = read_file(config_.corpus_path("mon"));
  const auto truth = read_file(config_.truth_path("mon"));
  fs::remove_all(dir_);
  cmd_generate(config_);
  EXPECT_EQ(read_file(config_.corpus_path("mon")), first);
  EXPECT_EQ(read_file(config_.truth_path("mon")), truth);
  EXPECT_NE(read_file(config_.corpus_path("tue")), first);
}

TEST_F(PipelineTest, PrepareAfterGenerate) {
  cmd_generate(config_);
  const auto sizes = cmd_prepare(config_);
  ASSERT_EQ(sizes.size(), 1u);
  EXPECT_EQ(sizes[0].row_errors, 0u);
  EXPECT_GT(sizes[0].train_rows, 0u);
  EXPECT_EQ(sizes[0].numeric_columns, 33u);

  const auto train_ids = lines_of(config_.prepared_dir(10) + "/train_ids.txt");
  const auto test_ids = lines_of(config_.prepared_dir(10) + "/test_ids.txt");
  EXPECT_EQ(train_ids.size(), sizes[0].train_rows);
  for (const auto& id : train_ids) {
    const auto day = id.substr(0, id.find('-'));
    EXPECT_TRUE(day == "mon" || day == "tue" || day == "wed") << id;
  }
  for (const auto& id : test_ids) {
    const auto day = id.substr(0, id.find('-'));
    EXPECT_TRUE(day == "thu" || day == "fri") << id;
  }
}

TEST_F(PipelineTest, ForcedVocabulariesGiveTableWidth) {
  ForcedVocabularies forced;
  const std::size_t counts[] = {6, 90, 9, 2};
  for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < counts[f]; ++i) v.push_back("v" + std::to_string(i));
    forced[f] = v;
  }
  config_.forced_vocabularies[10] = forced;
  cmd_generate(config_);
  const auto sizes = cmd_prepare(config_);
  EXPECT_EQ(sizes[0].total_columns, 140u);
  const auto j = json::parse(read_file(config_.prepared_dir(10) + "/sizes.json"));
  EXPECT_EQ(j.at("total_columns"), 140);
}

TEST_F(PipelineTest, AllFullyObservableGivesEmptyMatricesAndWarning) {
  config_.split_thresholds = {400};
  cmd_generate(config_);
  const auto sizes = cmd_prepare(config_);
  EXPECT_EQ(sizes[0].train_rows, 0u);
  EXPECT_EQ(sizes[0].test_rows, 0u);
  ASSERT_FALSE(sizes[0].warnings.empty());
  EXPECT_EQ(lines_of(config_.prepared_dir(400) + "/train.csv").size(), 1u);  // header only
}

TEST_F(PipelineTest, EncoderIgnoresTestDays) {
  cmd_generate(config_);
  cmd_prepare(config_);
  const auto encoder = read_file(config_.prepared_dir(10) + "/encoder.json");
  // Replace the test days with a differently seeded corpus.
  auto other = *config_.synthetic;
  for (const auto& day : config_.test_days) {
    other.seed = 1234;
    other.day_tag = day;
    write_corpus(generate_synthetic(other).corpus, config_.corpus_path(day));
  }
  cmd_prepare(config_);
  EXPECT_EQ(read_file(config_.prepared_dir(10) + "/encoder.json"), encoder);
}

TEST_F(PipelineTest, TrainNeedsPreparedData) {
  try {
    cmd_train(config_);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPreparationMissing);
    EXPECT_EQ(exit_code_for(e.code()), 3);
  }
}

TEST_F(PipelineTest, SingleCandidateEchoedAndDeterministic) {
  cmd_generate(config_);
  cmd_prepare(config_);
  const auto summary = cmd_train(config_);
  ASSERT_EQ(summary.cells.size(), 2u);
  for (const auto& c : summary.cells) EXPECT_TRUE(c.ok) << c.failure_reason;
  EXPECT_EQ(summary.cells[0].best_params.at("learning_rate"), 0.1);
  EXPECT_EQ(summary.cells[0].best_params.at("seed"), 5);
  const auto model = read_file(config_.models_dir(10) + "/gbt.json");
  const auto cv = read_file(config_.models_dir(10) + "/gbt.cv.json");
  cmd_train(config_);
  EXPECT_EQ(read_file(config_.models_dir(10) + "/gbt.json"), model);
  EXPECT_EQ(read_file(config_.models_dir(10) + "/gbt.cv.json"), cv);
}

TEST_F(PipelineTest, EvaluateReportIsCompleteAndReproducible) {
  run_all();
  const auto report_json = read_file(config_.reports_dir() + "/report.json");
  const auto report = EvalReport::from_json(json::parse(report_json));
  ASSERT_EQ(report.cells.size(), config_.predictors.size());
  for (const auto& spec : config_.predictors) {
    const auto* cell = report.find(10, spec.name);
    ASSERT_NE(cell, nullptr) << spec.name;
    EXPECT_TRUE(cell->ok) << cell->failure_reason;
  }
  const auto* null_cell = report.find(10, "null");
  const double negative_prevalence =
      static_cast<double>(null_cell->test_rows - null_cell->test_positives) / static_cast<double>(null_cell->test_rows);
  EXPECT_EQ(*null_cell->metrics.accuracy, negative_prevalence);
  EXPECT_EQ(*null_cell->metrics.balanced_accuracy, 0.5);
  EXPECT_TRUE(fs::exists(config_.reports_dir() + "/roc/m10_gbt.csv"));
  EXPECT_TRUE(fs::exists(config_.reports_dir() + "/report.csv"));
  EXPECT_GE(report.find(10, "gbt")->roc->auroc, report.find(10, "random")->roc->auroc + 0.3);

  const auto table = cmd_report(config_);
  EXPECT_NE(table.find("logistic_regression"), std::string::npos);

  // Stages are re-entrant and byte-identical on rerun.
  cmd_prepare(config_);
  cmd_train(config_);
  cmd_evaluate(config_);
  EXPECT_EQ(read_file(config_.reports_dir() + "/report.json"), report_json);
}

TEST_F(PipelineTest, DegenerateTrainingSurfacesPerCell) {
  for (auto& p : config_.synthetic->app_profiles) {
    p.sd_burst_rate = 0;
    p.onset_burst_rate = 0;
  }
  cmd_generate(config_);
  cmd_prepare(config_);
  const auto summary = cmd_train(config_);
  EXPECT_TRUE(summary.any_degenerate());
  for (const auto& c : summary.cells) EXPECT_NE(c.failure_reason.find("DegenerateLabels"), std::string::npos);
  EXPECT_TRUE(fs::exists(config_.models_dir(10) + "/gbt.error.json"));

  const auto report = cmd_evaluate(config_);
  EXPECT_EQ(report.cells.size(), config_.predictors.size());
  EXPECT_FALSE(report.find(10, "gbt")->ok);
  EXPECT_FALSE(report.find(10, "gbt")->failure_reason.empty());
  EXPECT_TRUE(report.find(10, "null")->ok);
}

TEST_F(PipelineTest, DatasetFileInput) {
  cmd_generate(config_);
  auto files = config_;
  files.synthetic.reset();
  for (const auto& day : config_.synthetic_days) files.dataset_files.push_back({config_.corpus_path(day), day});
  files.threshold_table_path = config_.generated_thresholds_path();
  files.output_dir = (dir_ / "files").string();
  files.location_filter = "L1";
  const auto sizes = cmd_prepare(files);
  const auto all = cmd_prepare(config_);
  EXPECT_GT(sizes[0].train_rows, 0u);
  EXPECT_LT(sizes[0].train_rows, all[0].train_rows);
}
