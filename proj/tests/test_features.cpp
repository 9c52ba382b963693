#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include "sdflow/error.hpp"
#include "sdflow/features.hpp"
#include "sdflow/rng.hpp"

using namespace sdflow;

namespace {

FlowMeta meta(std::string app = "a", std::string loc = "L1") {
  return {"id", std::move(app), "cat", std::move(loc), "wired", 2};
}

FeatureVector row(std::vector<double> numeric, std::string app, int label = 0) {
  FeatureVector fv;
  fv.flow_id = "r" + std::to_string(numeric.empty() ? 0 : numeric[0]);
  // Pad to the m = 1 layout so small hand-written rows are valid.
  if (numeric.size() < numeric_width(1)) numeric.resize(numeric_width(1), 0.0);
  fv.numeric = std::move(numeric);
  fv.categorical = {"cat", std::move(app), "L1", "wired"};
  fv.label.has_sd_in_no = label == 1;
  return fv;
}

std::vector<std::string> names(std::size_t n, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Reference statistics, computed directly.
double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

TEST(NumericLayout, WidthIsTwoMPlusThirteen) {
  for (std::uint32_t m : {1u, 5u, 10u, 15u, 20u}) {
    EXPECT_EQ(numeric_width(m), 2 * m + 13);
    EXPECT_EQ(numeric_feature_names(m).size(), 2 * m + 13);
  }
  const auto n = numeric_feature_names(10);
  EXPECT_EQ(n.front(), "delay_1");
  EXPECT_EQ(n[10], "jitter_1");
  EXPECT_EQ(n.back(), "split_sd_ratio");
  EXPECT_EQ(n[n.size() - 4], "sd_event_count_o");
}

TEST(TableWidths, ForcedVocabulariesReproduceTableOne) {
  // (m, category, application, location, connection) -> total
  struct Case {
    std::uint32_t m;
    std::size_t sizes[4];
    std::size_t total;
  };
  for (const Case& c : {Case{5, {6, 101, 9, 2}, 141}, Case{10, {6, 90, 9, 2}, 140},
                        Case{15, {6, 84, 9, 2}, 144}, Case{20, {6, 82, 9, 2}, 152}}) {
    const std::vector<double> numeric(numeric_width(c.m), 1.0);
    ForcedVocabularies forced;
    for (std::size_t f = 0; f < kCategoricalFieldCount; ++f) forced[f] = names(c.sizes[f], "v");
    const auto enc = fit_encoder({row(numeric, "v0")}, c.m, forced);
    EXPECT_EQ(enc.numeric_means.size(), 2 * c.m + 13);
    EXPECT_EQ(enc.total_width(), c.total) << "m=" << c.m;
    EXPECT_EQ(transform(enc, {row(numeric, "v0")}).cols, c.total);
  }
}

TEST(SummaryStats, MatchesDirectComputation) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Micros> v(1 + rng.below(20));
    for (auto& x : v) x = static_cast<Micros>(rng.below(10000));
    std::vector<double> d(v.begin(), v.end());
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
    double ss = 0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const auto s = summary_stats(v);
    EXPECT_EQ(s[0], *std::min_element(d.begin(), d.end()));
    EXPECT_EQ(s[1], *std::max_element(d.begin(), d.end()));
    EXPECT_DOUBLE_EQ(s[2], median_of(d));
    EXPECT_NEAR(s[3], mean, 1e-9);
    EXPECT_NEAR(s[4], std::sqrt(ss / d.size()), 1e-9);
  }
  const auto empty = summary_stats({});
  for (double x : empty) EXPECT_EQ(x, 0.0);
}

TEST(ExtractFeatures, LayoutAndPadding) {
  const LanDelaySeries s({10, 40, 20, 900, 5});
  const auto split = split_refined(s, 3);
  std::vector<SdEvent> events{{1, 1, false, 40, 40.0}};
  SplitOutcome outcome;
  outcome.split_sd_ratio = 0.5;
  const auto fv = extract_features(split, events, outcome, meta(), 5);
  ASSERT_EQ(fv.numeric.size(), 23u);
  // delays padded to m=5, jitters padded to 4
  EXPECT_EQ((std::vector<double>(fv.numeric.begin(), fv.numeric.begin() + 5)),
            (std::vector<double>{10, 40, 20, 0, 0}));
  EXPECT_EQ((std::vector<double>(fv.numeric.begin() + 5, fv.numeric.begin() + 9)),
            (std::vector<double>{30, 20, 0, 0}));
  // stats use the observed delays only
  EXPECT_EQ(fv.numeric[9], 10);
  EXPECT_EQ(fv.numeric[10], 40);
  EXPECT_EQ(fv.numeric[11], 20);
  EXPECT_NEAR(fv.numeric[12], 70.0 / 3, 1e-12);
  EXPECT_EQ(fv.numeric[14], 20);  // jitter min
  EXPECT_EQ(fv.numeric[19], 0);   // qualifying count
  EXPECT_EQ(fv.numeric[20], 1);   // longest length
  EXPECT_EQ(fv.numeric[21], 40);  // longest max delay
  EXPECT_EQ(fv.numeric[22], 0.5);
}

TEST(ExtractFeatures, NoEventsGivesZeros) {
  const LanDelaySeries s({10, 11, 12, 13});
  const auto fv = extract_features(split_refined(s, 2), {}, {}, meta(), 2);
  const std::size_t w = fv.numeric.size();
  EXPECT_EQ(fv.numeric[w - 4], 0);
  EXPECT_EQ(fv.numeric[w - 3], 0);
  EXPECT_EQ(fv.numeric[w - 2], 0);
  EXPECT_EQ(fv.numeric[w - 1], 0);
}

TEST(ExtractFeatures, RejectsFullyObservable) {
  const LanDelaySeries s({10, 11});
  try {
    extract_features(split_refined(s, 5), {}, {}, meta(), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFullyObservable);
  }
}

TEST(FitEncoder, SortedUniqueVocabulary) {
  const auto enc = fit_encoder({row({1}, "b"), row({2}, "a"), row({3}, "a")}, 1);
  EXPECT_EQ(enc.vocabularies[1], (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(enc.one_hot_width(), 5u);  // cat, a, b, L1, wired
}

TEST(FitEncoder, ConstantColumnStdIsOne) {
  const auto enc = fit_encoder({row({4, 1}, "a"), row({4, 3}, "a")}, 1);
  EXPECT_EQ(enc.numeric_stds[0], 1.0);
  const auto m = transform(enc, {row({4, 1}, "a"), row({4, 3}, "a")});
  EXPECT_EQ(m.at(0, 0), 0.0);
  EXPECT_EQ(m.at(1, 0), 0.0);
}

TEST(FitEncoder, HandComputedZScores) {
  const auto enc = fit_encoder({row({0}, "a"), row({2}, "a")}, 1);
  EXPECT_EQ(enc.numeric_means[0], 1.0);
  EXPECT_EQ(enc.numeric_stds[0], 1.0);
  const auto m = transform(enc, {row({0}, "a"), row({2}, "a")});
  EXPECT_EQ(m.at(0, 0), -1.0);
  EXPECT_EQ(m.at(1, 0), 1.0);
}

TEST(FitEncoder, EmptyTrainingSet) {
  try {
    fit_encoder({}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrainingSet);
  }
}

TEST(Transform, FittedColumnsHaveZeroMean) {
  Rng rng(8);
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(5);
    for (auto& x : v) x = rng.normal() * 1000 + 37;
    rows.push_back(row(v, rng.bernoulli(0.5) ? "x" : "y"));
  }
  const auto enc = fit_encoder(rows, 1);
  const auto m = transform(enc, rows);
  for (std::size_t c = 0; c < 5; ++c) {
    double sum = 0;
    double sq = 0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      sum += m.at(r, c);
      sq += m.at(r, c) * m.at(r, c);
    }
    EXPECT_LT(std::abs(sum / m.rows), 1e-9);
    EXPECT_NEAR(sq / m.rows, 1.0, 1e-9);
  }
  EXPECT_EQ(transform(enc, rows).X, m.X);
}

TEST(Transform, UnseenValueIsAllZero) {
  const auto enc = fit_encoder({row({1}, "a"), row({2}, "b")}, 1);
  const auto m = transform(enc, {row({1}, "zzz")});
  const auto a = m.column_index("application=a");
  const auto b = m.column_index("application=b");
  EXPECT_EQ(m.at(0, a), 0.0);
  EXPECT_EQ(m.at(0, b), 0.0);
  const auto seen = transform(enc, {row({1}, "b")});
  EXPECT_EQ(seen.at(0, b), 1.0);
}

TEST(Transform, RawColumnUndoesScaling) {
  const auto enc = fit_encoder({row({3, 10}, "a"), row({5, 30}, "a"), row({10, 20}, "a")}, 1);
  const auto m = transform(enc, {row({7, 25}, "a")});
  EXPECT_NEAR(m.raw_column(m.column_names[0])[0], 7, 1e-12);
  EXPECT_NEAR(m.raw_column(m.column_names[1])[0], 25, 1e-12);
  EXPECT_THROW(m.column_index("missing"), Error);
}

TEST(Encoder, JsonRoundTripAndHash) {
  const auto enc = fit_encoder({row({3, 10}, "a"), row({5, 30}, "b")}, 1);
  const auto back = EncoderState::from_json(enc.to_json());
  EXPECT_EQ(back, enc);
  EXPECT_EQ(back.hash(), enc.hash());
  auto other = enc;
  other.numeric_means[0] += 1;
  EXPECT_NE(other.hash(), enc.hash());
}

TEST(MatrixCsv, RoundTrip) {
  Rng rng(12);
  std::vector<FeatureVector> rows;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(numeric_width(2));
    for (auto& x : v) x = rng.normal() * 1e4;
    auto fv = row(v, rng.bernoulli(0.5) ? "x" : "y", rng.bernoulli(0.3));
    fv.flow_id = "flow" + std::to_string(i);
    rows.push_back(fv);
  }
  const auto enc = fit_encoder(rows, 2);
  const auto m = transform(enc, rows);
  const auto path = (std::filesystem::temp_directory_path() / "sdflow_matrix.csv").string();
  write_matrix_csv(m, path);
  const auto back = read_matrix_csv(path, enc);
  EXPECT_EQ(back.X, m.X);
  EXPECT_EQ(back.y, m.y);
  EXPECT_EQ(back.column_names, m.column_names);
  try {
    read_matrix_csv(path + ".missing", enc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPreparationMissing);
  }
}

TEST(DatasetMatrix, Subset) {
  const auto enc = fit_encoder({row({1}, "a", 1), row({2}, "a", 0), row({3}, "a", 1)}, 1);
  const auto m = transform(enc, {row({1}, "a", 1), row({2}, "a", 0), row({3}, "a", 1)});
  const std::vector<std::size_t> idx{2, 0};
  const auto s = m.subset(idx);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.y, (std::vector<int>{1, 1}));
  EXPECT_EQ(s.at(0, 0), m.at(2, 0));
  EXPECT_EQ(m.positives(), 2u);
}
