#include "dq/predictors.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dq/checkpoint.hpp"
#include "test_support.hpp"

namespace dq {
namespace {

using testing::small_dataset;
using testing::small_record;
using testing::small_schema;

Dataset dataset_of(const std::vector<double>& durations, const std::vector<double>& watch) {
  Dataset ds;
  ds.schema = small_schema();
  for (std::size_t i = 0; i < durations.size(); ++i) ds.records.push_back(small_record(0, 0, durations[i], watch[i]));
  return ds;
}

ModelConfig tiny_model(std::uint64_t seed = 3) {
  ModelConfig c;
  c.dense_embed_dim = 2;
  c.id_embed_total_dim = 4;
  c.duration_embed_dim = 2;
  c.projection_out_dim = 4;
  c.mlp_dims = {4, 2};
  c.epochs = 2;
  c.batch_size = 16;
  c.seed = seed;
  return c;
}

// --- labels --------------------------------------------------------------------

TEST(D2qLabels, SingleGroupMidRanks) {
  const Dataset ds = dataset_of({5, 5, 5, 5}, {10, 20, 30, 40});
  const auto g = fit_duration_groups(ds.durations(), 1);
  const auto labels = make_d2q_labels(ds, g, fit_group_cdfs(ds, g, 1));
  EXPECT_EQ(labels, (std::vector<double>{0.125, 0.375, 0.625, 0.875}));
}

TEST(D2qLabels, PerGroupMidRanks) {
  const Dataset ds = dataset_of({1, 1, 9, 9}, {5, 15, 50, 100});
  const auto g = fit_duration_groups(ds.durations(), 2);
  const auto labels = make_d2q_labels(ds, g, fit_group_cdfs(ds, g, 1));
  EXPECT_EQ(labels, (std::vector<double>{0.25, 0.75, 0.25, 0.75}));
}

TEST(D2qLabels, TiesShareALabel) {
  const Dataset ds = dataset_of({3, 3, 3}, {7, 7, 9});
  const auto g = fit_duration_groups(ds.durations(), 1);
  const auto labels = make_d2q_labels(ds, g, fit_group_cdfs(ds, g, 1));
  EXPECT_EQ(labels[0], labels[1]);
  EXPECT_LT(labels[0], labels[2]);
}

TEST(WlrLabels, RankArithmeticOnOneToTen) {
  std::vector<double> w;
  for (int i = 1; i <= 10; ++i) w.push_back(i);
  const auto wl = make_wlr_labels(dataset_of(std::vector<double>(10, 50.0), w));
  EXPECT_DOUBLE_EQ(wl.threshold, 6.5);
  EXPECT_EQ(wl.labels, (std::vector<double>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(wl.weights, (std::vector<double>{1, 1, 1, 1, 1, 1, 7, 8, 9, 10}));
}

TEST(WlrLabels, AllEqualWatchTimesArePositive) {
  const auto wl = make_wlr_labels(dataset_of({4, 4, 4}, {2.5, 2.5, 2.5}));
  EXPECT_EQ(wl.labels, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(wl.weights, (std::vector<double>{2.5, 2.5, 2.5}));
}

TEST(WlrLabels, PositiveFractionAndWeightsOnContinuousSample) {
  const Dataset ds = small_dataset(100'000, 17);
  const auto wl = make_wlr_labels(ds);
  double positives = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (wl.labels[i] == 1.0) {
      positives += 1;
      EXPECT_GE(wl.weights[i], wl.threshold);
    }
  }
  EXPECT_NEAR(positives / 1e5, 0.4, 0.02);
  EXPECT_GE(wl.threshold, 0.0);
}

TEST(WlrLabels, EmptyDatasetThrows) {
  Dataset ds;
  ds.schema = small_schema();
  EXPECT_THROW(make_wlr_labels(ds), std::invalid_argument);
}

// --- decoding ------------------------------------------------------------------

TEST(WlrDecode, AdaptedSpotValue) { EXPECT_DOUBLE_EQ(wlr_expected_watch_time(0.5, 0.4), 0.6); }

TEST(WlrDecode, ClassicOddsSpotValue) { EXPECT_DOUBLE_EQ(wlr_classic_odds(0.5), 1.0); }

TEST(WlrDecode, SaturatedProbabilityStaysFinite) {
  EXPECT_TRUE(std::isfinite(wlr_classic_odds(1.0)));
  EXPECT_GT(wlr_classic_odds(1.0), 1e6);
}

TEST(D2qDecode, KnotHit) {
  const Dataset ds = dataset_of({5, 5, 5, 5}, {10, 20, 30, 40});
  Predictor p;
  p.kind = Method::kD2q;
  p.groups = fit_duration_groups(ds.durations(), 1);
  p.group_cdfs = fit_group_cdfs(ds, p.groups, 1);
  const double head = 0.375;
  EXPECT_DOUBLE_EQ(decode(p, std::span<const double>(&head, 1), 5.0), 20.0);
}

TEST(D2qDecode, RejectsNonPositiveDuration) {
  Predictor p;
  p.kind = Method::kVr;
  const double head = 1.0;
  EXPECT_THROW(decode(p, std::span<const double>(&head, 1), 0.0), std::invalid_argument);
}

// --- training ------------------------------------------------------------------

TEST(TrainPredictor, GroupedMethodsOnlyForD2q) {
  const Dataset ds = small_dataset(200);
  try {
    train_predictor(Method::kWlr, ds, 10, tiny_model());
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "m>1 invalid for wlr");
  }
  EXPECT_THROW(train_predictor(Method::kVr, ds, 2, tiny_model()), std::invalid_argument);
  EXPECT_THROW(train_predictor(Method::kD2q, ds, 0, tiny_model()), std::invalid_argument);
}

TEST(TrainPredictor, ResD2qWithoutTowerEqualsD2q) {
  const Dataset ds = small_dataset(400, 5);
  PredictorOptions no_tower;
  no_tower.tower_dims = {};
  const auto d2q = train_predictor(Method::kD2q, ds, 4, tiny_model(), no_tower);
  const auto res = train_predictor(Method::kResD2q, ds, 4, tiny_model(), no_tower);
  EXPECT_EQ(predict_all(d2q, ds), predict_all(res, ds));
}

TEST(TrainPredictor, SameSeedSameBytes) {
  const Dataset ds = small_dataset(300, 9);
  for (auto method : {Method::kVr, Method::kWlr, Method::kD2q, Method::kResD2q}) {
    const std::size_t m = uses_duration_groups(method) ? 4 : 1;
    ModelConfig c = tiny_model();
    if (method == Method::kVr) c.learning_rate = 1e-4;
    const auto a = train_predictor(method, ds, m, c);
    const auto b = train_predictor(method, ds, m, c);
    EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b)) << to_string(method);
  }
}

TEST(TrainPredictor, PredictionsAreFiniteAndNonNegative) {
  const Dataset ds = small_dataset(300, 11);
  for (auto method : {Method::kVr, Method::kWlr, Method::kD2q, Method::kResD2q}) {
    const std::size_t m = uses_duration_groups(method) ? 3 : 1;
    ModelConfig c = tiny_model();
    if (method == Method::kVr) c.learning_rate = 1e-4;
    for (double w : predict_all(train_predictor(method, ds, m, c), ds)) {
      EXPECT_TRUE(std::isfinite(w)) << to_string(method);
      EXPECT_GE(w, 0.0) << to_string(method);
    }
  }
}

TEST(TrainPredictor, D2qPredictionsStayInsideGroupRange) {
  const Dataset ds = small_dataset(500, 13);
  const auto p = train_predictor(Method::kD2q, ds, 4, tiny_model());
  const auto preds = predict_all(p, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& cdf = p.group_cdfs[assign_group(p.groups, ds.records[i].duration)];
    EXPECT_GE(preds[i], cdf.min());
    EXPECT_LE(preds[i], cdf.max());
  }
}

TEST(TrainPredictor, SmallGroupsAreRejected) {
  EXPECT_THROW(train_predictor(Method::kD2q, small_dataset(50), 10, tiny_model()), GroupSizeError);
}

TEST(TrainPredictor, UntrainedPredictorCannotPredict) {
  Predictor p;
  EXPECT_THROW(predict(p, small_record(0, 0, 1.0, 1.0)), std::logic_error);
}

TEST(MethodNames, RoundTrip) {
  for (auto m : {Method::kVr, Method::kWlr, Method::kD2q, Method::kResD2q}) EXPECT_EQ(parse_method(to_string(m)), m);
  for (auto m : {WlrMode::kAdapted, WlrMode::kClassic}) EXPECT_EQ(parse_wlr_mode(to_string(m)), m);
  EXPECT_THROW(parse_method("gbdt"), std::invalid_argument);
}

// --- backdoor adjustment ---------------------------------------------------------

ToyWorldTables toy_tables() {
  ToyWorldTables t;
  t.n_users = 3;
  t.n_videos = 3;
  t.durations = {10, 60, 200};
  t.duration_probs = {0.5, 0.3, 0.2};
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t v = 0; v < 3; ++v) {
      for (std::size_t k = 0; k < 3; ++k) {
        t.expected_watch.push_back(t.durations[k] * (0.2 + 0.1 * static_cast<double>(u) + 0.15 * static_cast<double>(v)));
      }
    }
  }
  // Long durations favour video 2.
  t.exposure = {{0.6, 0.3, 0.1}, {0.3, 0.4, 0.3}, {0.1, 0.2, 0.7}};
  return t;
}

TEST(Backdoor, SingleDurationIsTheConditional) {
  ToyWorldTables t;
  t.n_users = 1;
  t.n_videos = 1;
  t.durations = {42};
  t.duration_probs = {1.0};
  t.expected_watch = {17.5};
  EXPECT_DOUBLE_EQ(backdoor_estimate(make_toy_world(t), 0, 0), 17.5);
}

TEST(Backdoor, UniformTwoPointAverage) {
  ToyWorldTables t;
  t.n_users = 1;
  t.n_videos = 1;
  t.durations = {1, 2};
  t.duration_probs = {0.5, 0.5};
  t.expected_watch = {2, 4};
  EXPECT_DOUBLE_EQ(backdoor_estimate(make_toy_world(t), 0, 0), 3.0);
}

// Enumerates the logged joint P(u, d, v) and marginalizes it for P(d), rather
// than reading P(D) off the tables.
TEST(Backdoor, MatchesJointEnumeration) {
  const auto world = make_toy_world(toy_tables());
  const auto& t = world.tables();
  double joint[3][3][3];
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t v = 0; v < 3; ++v) joint[u][k][v] = (1.0 / 3.0) * t.duration_probs[k] * t.exposure[k][v];
    }
  }
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t v = 0; v < 3; ++v) {
      double expect = 0.0, naive_num = 0.0, naive_den = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        double pd = 0.0;
        for (std::size_t uu = 0; uu < 3; ++uu) {
          for (std::size_t vv = 0; vv < 3; ++vv) pd += joint[uu][k][vv];
        }
        const double e = t.expected_watch[(u * 3 + v) * 3 + k];
        expect += pd * e;
        naive_num += joint[u][k][v] * e;
        naive_den += joint[u][k][v];
      }
      EXPECT_NEAR(backdoor_estimate(world, u, v), expect, 1e-12);
      // The confounded conditional differs wherever exposure depends on d.
      EXPECT_GT(std::abs(naive_num / naive_den - expect), 1e-3);
    }
  }
}

TEST(Backdoor, ToyWorldValidation) {
  ToyWorldTables t = toy_tables();
  t.duration_probs = {0.5, 0.5, 0.5};
  EXPECT_THROW(make_toy_world(t), std::invalid_argument);
  t = toy_tables();
  t.expected_watch.pop_back();
  EXPECT_THROW(make_toy_world(t), std::invalid_argument);
}

TEST(Backdoor, ToySamplesFollowTheLoggingPolicy) {
  const auto world = make_toy_world(toy_tables());
  const Dataset ds = sample_toy_interactions(world, 60'000, 4);
  double long_video2 = 0, long_total = 0;
  for (const auto& r : ds.records) {
    if (r.duration == 200) {
      long_total += 1;
      long_video2 += r.video_id == 2 ? 1 : 0;
    }
  }
  EXPECT_NEAR(long_total / 60'000, 0.2, 0.01);
  EXPECT_NEAR(long_video2 / long_total, 0.7, 0.02);
}

}  // namespace
}  // namespace dq
