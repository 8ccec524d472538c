#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "vfss/error.hpp"
#include "vfss/metrics.hpp"

namespace vfss {
namespace {

SegmentationMap row_map(std::vector<std::uint16_t> labels) {
  SegmentationMap m(1, static_cast<std::uint32_t>(labels.size()));
  m.labels = std::move(labels);
  return m;
}

AssignmentMap assignment(std::vector<std::pair<std::string, std::optional<std::string>>> pairs) {
  AssignmentMap a;
  for (auto& [p, g] : pairs) {
    AssignmentEntry e{p, std::nullopt};
    if (g) e.match = Match{*g, 0, 1.0};
    a.entries.push_back(std::move(e));
  }
  return a;
}

TEST(Confusion, IdenticalMapsAreDiagonal) {
  SegmentationMap gt(4, 4, 0);
  for (std::size_t i = 8; i < 16; ++i) gt.labels[i] = 1;
  ConfusionMatrix conf(2);
  conf.accumulate(gt, gt);
  EXPECT_EQ(conf.at(0, 0), 8U);
  EXPECT_EQ(conf.at(1, 1), 8U);
  EXPECT_EQ(conf.at(0, 1) + conf.at(1, 0) + conf.at(0, 2) + conf.at(1, 2), 0U);
  EXPECT_EQ(miou(conf).miou, 1.0);
}

TEST(Confusion, AllIgnoreGtCountsNothing) {
  ConfusionMatrix conf(3);
  conf.accumulate(SegmentationMap(3, 3), SegmentationMap(3, 3, 1));
  EXPECT_EQ(conf.total(), 0U);
  EXPECT_THROW(miou(conf), Error);
}

TEST(Confusion, Seed3MatchesPerPixelTally) {
  SplitMix64 rng(3);
  const std::size_t n = 5;
  const auto gt = test::random_segmap(rng, 16, 16, n, kIgnoreLabel, 7);
  const auto pred = test::random_segmap(rng, 16, 16, n, kUnmatchedLabel, 7);
  std::vector<std::uint64_t> tally(n * (n + 1), 0);
  std::uint64_t scored = 0;
  for (std::size_t i = 0; i < 256; ++i) {
    if (gt.labels[i] == kIgnoreLabel) continue;
    const std::size_t col = pred.labels[i] == kUnmatchedLabel ? n : pred.labels[i];
    ++tally[gt.labels[i] * (n + 1) + col];
    ++scored;
  }
  const auto conf = accumulate(ConfusionMatrix(n), gt, pred);
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t p = 0; p <= n; ++p) EXPECT_EQ(conf.at(g, p), tally[g * (n + 1) + p]);
  }
  EXPECT_EQ(conf.total(), scored);
}

TEST(Confusion, Errors) {
  ConfusionMatrix conf(2);
  EXPECT_THROW(conf.accumulate(SegmentationMap(2, 2, 0), SegmentationMap(2, 3, 0)), Error);
  EXPECT_THROW(conf.accumulate(row_map({0, 2}), row_map({0, 0})), Error);
  EXPECT_THROW(conf.accumulate(row_map({0, 1}), row_map({0, 2})), Error);
  EXPECT_THROW(conf.accumulate(row_map({0, 1}), row_map({0, kIgnoreLabel})), Error);
  ConfusionMatrix other(3);
  EXPECT_THROW(conf += other, Error);
}

TEST(Miou, HandExampleSevenTwelfths) {
  const auto r = miou(accumulate(ConfusionMatrix(2), row_map({0, 0, 1, 1}), row_map({0, 1, 1, 1})));
  EXPECT_EQ(r.per_class[0], 0.5);
  EXPECT_EQ(r.per_class[1], 2.0 / 3.0);
  EXPECT_EQ(r.miou, 7.0 / 12.0);
  EXPECT_EQ(r.scored_classes, 2U);
}

TEST(Miou, AllSentinelIsZero) {
  const auto r = miou(accumulate(ConfusionMatrix(3), row_map({0, 1, 2, 2}), row_map(std::vector<std::uint16_t>(4, kUnmatchedLabel))));
  EXPECT_EQ(r.miou, 0.0);
}

TEST(Miou, SentinelCountsAsFalseNegativeOnly) {
  // gt=[0,0,1], pred=[0,U,1]: class 0 has TP 1, FN 1; class 1 untouched.
  const auto r = miou(accumulate(ConfusionMatrix(2), row_map({0, 0, 1}), row_map({0, kUnmatchedLabel, 1})));
  EXPECT_EQ(r.per_class[0], 0.5);
  EXPECT_EQ(r.per_class[1], 1.0);
}

TEST(Miou, ZeroUnionClassesExcluded) {
  const auto r = miou(accumulate(ConfusionMatrix(4), row_map({0, 0, 1}), row_map({0, 0, 1})));
  EXPECT_FALSE(r.per_class[2].has_value());
  EXPECT_FALSE(r.per_class[3].has_value());
  EXPECT_EQ(r.scored_classes, 2U);
  EXPECT_EQ(r.miou, 1.0);
}

TEST(Miou, EqualsSetOracleExactly) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    SplitMix64 rng(seed);
    const std::size_t n = 1 + rng.next_below(8);
    const auto gt = test::random_segmap(rng, 16, 16, n, kIgnoreLabel, 1 + rng.next_below(10));
    const auto pred = test::random_segmap(rng, 16, 16, n, kUnmatchedLabel, 1 + rng.next_below(10));
    const auto sets = test::oracle_set_iou(gt, pred, n);
    ConfusionMatrix conf(n);
    conf.accumulate(gt, pred);
    if (conf.total() == 0) continue;
    const auto r = miou(conf);
    for (std::size_t c = 0; c < n; ++c) {
      if (sets[c].uni == 0) {
        ASSERT_FALSE(r.per_class[c].has_value());
      } else {
        ASSERT_EQ(*r.per_class[c], static_cast<double>(sets[c].intersection) / static_cast<double>(sets[c].uni));
      }
    }
    ASSERT_EQ(r.miou, test::oracle_miou(sets)) << "seed " << seed;
  }
}

TEST(Miou, RangeAndPerfectIff) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitMix64 rng(1000 + seed);
    const std::size_t n = 1 + rng.next_below(4);
    const auto gt = test::random_segmap(rng, 4, 4, n, kIgnoreLabel, 6);
    auto pred = gt;
    for (auto& l : pred.labels) {
      if (l == kIgnoreLabel || rng.next_below(8) == 0) l = static_cast<std::uint16_t>(rng.next_below(n));
    }
    ConfusionMatrix conf(n);
    conf.accumulate(gt, pred);
    if (conf.total() == 0) continue;
    const double m = miou(conf).miou;
    ASSERT_GE(m, 0.0);
    ASSERT_LE(m, 1.0);
    bool clean = true;
    for (std::size_t g = 0; g < n; ++g) {
      for (std::size_t p = 0; p <= n; ++p) clean = clean && (g == p || conf.at(g, p) == 0);
    }
    ASSERT_EQ(m == 1.0, clean);
  }
}

TEST(Miou, AccumulationOrderIndependent) {
  SplitMix64 rng(77);
  const std::size_t n = 6;
  std::vector<std::pair<SegmentationMap, SegmentationMap>> pairs;
  for (int k = 0; k < 12; ++k) {
    pairs.emplace_back(test::random_segmap(rng, 8, 8, n, kIgnoreLabel, 5),
                       test::random_segmap(rng, 8, 8, n, kUnmatchedLabel, 5));
  }
  ConfusionMatrix forward(n);
  for (const auto& [g, p] : pairs) forward.accumulate(g, p);
  for (int t = 0; t < 10; ++t) {
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
    ConfusionMatrix shuffled(n);
    for (auto k : order) {
      ConfusionMatrix part(n);
      part.accumulate(pairs[k].first, pairs[k].second);
      shuffled += part;
    }
    ASSERT_EQ(shuffled, forward);
  }
}

TEST(Tagging, PerfectPredictions) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a", "b"}}, {"i2", {"c"}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", assignment({{"a", "a"}, {"b", "b"}})},
                                                {"i2", assignment({{"c", "c"}})}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_EQ(s.acc, 100.0);
  EXPECT_EQ(s.fp_mean, 0.0);
  EXPECT_EQ(s.fn_mean, 0.0);
}

TEST(Tagging, HalfFoundOneFalsePositive) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a", "b"}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", assignment({{"a", "a"}, {"z", std::nullopt}})}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_EQ(s.acc, 50.0);
  EXPECT_EQ(s.fp_mean, 1.0);
  EXPECT_EQ(s.fn_mean, 1.0);
  ASSERT_EQ(s.images.size(), 1U);
  EXPECT_EQ(s.images[0].matched + s.images[0].missed, s.images[0].gt_classes);
}

TEST(Tagging, EmptyPredictions) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a", "b"}}, {"i2", {"c"}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", AssignmentMap{}}, {"i2", AssignmentMap{}}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_EQ(s.acc, 0.0);
  EXPECT_EQ(s.fp_mean, 0.0);
  EXPECT_EQ(s.fn_mean, 1.5);
}

TEST(Tagging, AssignedToAbsentClassIsFalsePositive) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a"}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", assignment({{"a", "a"}, {"x", "b"}, {"y", "a"}})}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_EQ(s.acc, 100.0);
  EXPECT_EQ(s.fp_mean, 1.0);
  EXPECT_EQ(s.images[0].matched, 1U);
}

TEST(Tagging, MacroDiffersFromMicro) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a"}}, {"i2", {"a", "b", "c"}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", assignment({{"a", "a"}})}, {"i2", AssignmentMap{}}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_EQ(s.acc, 25.0);
  EXPECT_EQ(s.acc_macro, 50.0);
  EXPECT_TRUE(s.to_json(true).contains("acc_macro"));
  EXPECT_FALSE(s.to_json(false).contains("acc_macro"));
}

TEST(Tagging, NoGtClassesGivesNullAcc) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {}}};
  std::map<std::string, AssignmentMap> assigned{{"i1", assignment({{"a", std::nullopt}})}};
  const auto s = tagging_stats(gt, assigned);
  EXPECT_FALSE(s.acc.has_value());
  EXPECT_TRUE(s.to_json()["acc"].is_null());
  EXPECT_EQ(s.fp_mean, 1.0);
}

TEST(Tagging, Misaligned) {
  std::map<std::string, std::vector<std::string>> gt{{"i1", {"a"}}};
  std::map<std::string, AssignmentMap> assigned{{"i2", AssignmentMap{}}};
  EXPECT_THROW(tagging_stats(gt, assigned), Error);
  assigned["i1"] = AssignmentMap{};
  EXPECT_THROW(tagging_stats(gt, assigned), Error);
}

TEST(PerClassCsv, HeaderAndEmptyField) {
  const auto r = miou(accumulate(ConfusionMatrix(3), row_map({0, 0, 1, 1}), row_map({0, 1, 1, 1})));
  const std::vector<std::string> names{"cat", "dog", "cow"};
  EXPECT_EQ(per_class_csv(names, r), "class,iou\ncat,0.500000\ndog,0.666667\ncow,\n");
  EXPECT_THROW(per_class_csv(std::vector<std::string>{"cat"}, r), Error);
}

TEST(PerClassCsv, QuotesAwkwardNames) {
  const auto r = miou(accumulate(ConfusionMatrix(2), row_map({0, 1}), row_map({0, 1})));
  const std::vector<std::string> names{"table, dining", "say \"hi\""};
  EXPECT_EQ(per_class_csv(names, r), "class,iou\n\"table, dining\",1.000000\n\"say \"\"hi\"\"\",1.000000\n");
}

}  // namespace
}  // namespace vfss
