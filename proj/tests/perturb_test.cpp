#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vfss/error.hpp"
#include "vfss/perturb.hpp"

namespace vfss {
namespace {

const std::vector<std::string> kVocab{"sky", "tree", "road", "car", "person", "building", "grass", "water", "dog", "cat"};

PerturbationConfig config(double drop, std::size_t fp, std::uint64_t seed = 0) {
  PerturbationConfig c;
  c.drop_rate = drop;
  c.fp_count = fp;
  c.master_seed = seed;
  c.vocabulary = kVocab;
  return c;
}

TEST(PerturbTags, IdentityConfig) {
  const std::vector<std::string> gt{"road", "sky", "car"};
  const auto p = perturb_tags(gt, config(0.0, 0, 123), "x");
  EXPECT_EQ(p.tags(), gt);
  EXPECT_TRUE(p.dropped.empty());
  EXPECT_TRUE(p.injected.empty());
}

TEST(PerturbTags, DropEverything) {
  const std::vector<std::string> gt{"road", "sky", "car"};
  const auto p = perturb_tags(gt, config(1.0, 0, 5), "x");
  EXPECT_TRUE(p.tags().empty());
  EXPECT_EQ(p.dropped, gt);
}

TEST(PerturbTags, GoldenSeed9) {
  const auto doc = nlohmann::json::parse(read_text_file(test::data_dir() / "golden" / "perturb_seed9_img_001.json"));
  auto cfg = config(doc["drop_rate"].get<double>(), doc["fp_count"].get<std::size_t>(),
                    doc["master_seed"].get<std::uint64_t>());
  cfg.vocabulary = doc["vocabulary"].get<std::vector<std::string>>();
  const auto gt = doc["gt_classes"].get<std::vector<std::string>>();
  const auto p = perturb_tags(gt, cfg, doc["image_id"].get<std::string>());
  EXPECT_EQ(p.seed, doc["stream_seed"].get<std::uint64_t>());
  EXPECT_EQ(p.surviving, doc["surviving"].get<std::vector<std::string>>());
  EXPECT_EQ(p.dropped, doc["dropped"].get<std::vector<std::string>>());
  EXPECT_EQ(p.injected, doc["injected"].get<std::vector<std::string>>());
  EXPECT_EQ(p.injected.size(), 2U);
}

// Recomputes the documented draw order with the bare generator.
TEST(PerturbTags, FollowsDocumentedStream) {
  const std::vector<std::string> gt{"sky", "road", "car", "person"};
  const auto p = perturb_tags(gt, config(0.5, 2, 9), "img_001");
  const std::uint64_t seed = SplitMix64::mix(9 ^ SplitMix64::mix(fnv1a64("img_001")));
  EXPECT_EQ(p.seed, seed);
  SplitMix64 rng(seed);
  std::vector<std::string> surviving;
  for (const auto& g : gt) {
    if (!(rng.next_double() < 0.5)) surviving.push_back(g);
  }
  std::vector<std::string> pool;
  for (const auto& v : kVocab) {
    if (std::find(gt.begin(), gt.end(), v) == gt.end()) pool.push_back(v);
  }
  std::vector<std::string> injected;
  for (std::size_t k = 0; k < 2; ++k) {
    std::swap(pool[k], pool[k + rng.next_below(pool.size() - k)]);
    injected.push_back(pool[k]);
  }
  EXPECT_EQ(p.surviving, surviving);
  EXPECT_EQ(p.injected, injected);
}

TEST(PerturbTags, RepeatableAndImageDependent) {
  const std::vector<std::string> gt{"sky", "road", "car", "person", "tree"};
  const auto a = perturb_tags(gt, config(0.5, 3, 9), "img_001");
  const auto b = perturb_tags(gt, config(0.5, 3, 9), "img_001");
  EXPECT_EQ(a.tags(), b.tags());
  bool any_diff = false;
  for (int k = 0; k < 20 && !any_diff; ++k) {
    any_diff = perturb_tags(gt, config(0.5, 3, 9), "img_" + std::to_string(k)).tags() != a.tags();
  }
  EXPECT_TRUE(any_diff);
}

TEST(PerturbTags, InjectedNeverCollideAndStayInVocabulary) {
  SplitMix64 rng(4);
  for (int t = 0; t < 500; ++t) {
    std::vector<std::string> gt;
    for (const auto& v : kVocab) {
      if (rng.next_below(3) == 0) gt.push_back(v);
    }
    const std::size_t fp = rng.next_below(kVocab.size() - gt.size() + 1);
    const auto p = perturb_tags(gt, config(rng.next_double(), fp, t), "i" + std::to_string(t));
    ASSERT_EQ(p.injected.size(), fp);
    const std::set<std::string> uniq(p.injected.begin(), p.injected.end());
    ASSERT_EQ(uniq.size(), fp);
    for (const auto& inj : p.injected) {
      ASSERT_EQ(std::find(gt.begin(), gt.end(), inj), gt.end());
      ASSERT_NE(std::find(kVocab.begin(), kVocab.end(), inj), kVocab.end());
    }
    ASSERT_EQ(p.surviving.size() + p.dropped.size(), gt.size());
  }
}

TEST(PerturbTags, SurvivorCountWithinThreeSigma) {
  const std::vector<std::string> gt{"sky", "tree", "road", "car", "person", "building"};
  const double rate = 0.3;
  const int images = 2000;
  std::size_t survivors = 0;
  for (int k = 0; k < images; ++k) {
    survivors += perturb_tags(gt, config(rate, 0, 77), "image_" + std::to_string(k)).surviving.size();
  }
  const double n = static_cast<double>(images) * gt.size();
  const double mean = n * (1.0 - rate);
  const double sigma = std::sqrt(n * rate * (1.0 - rate));
  EXPECT_LE(std::abs(static_cast<double>(survivors) - mean), 3.0 * sigma);
}

TEST(PerturbTags, FixedCountDropsExactly) {
  const std::vector<std::string> gt{"sky", "tree", "road"};
  auto cfg = config(1.0 / 3.0, 0, 9);
  cfg.drop_mode = DropMode::kFixedCount;
  for (int k = 0; k < 50; ++k) {
    const auto p = perturb_tags(gt, cfg, "i" + std::to_string(k));
    ASSERT_EQ(p.dropped.size(), 1U);
    ASSERT_EQ(p.surviving.size(), 2U);
  }
}

TEST(PerturbTags, TooManyFalsePositives) {
  const std::vector<std::string> gt(kVocab.begin(), kVocab.begin() + 8);
  EXPECT_NO_THROW(perturb_tags(gt, config(0.0, 2), "x"));
  try {
    perturb_tags(gt, config(0.0, 3), "x");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfRange);
  }
}

TEST(PerturbTags, InvalidConfig) {
  const std::vector<std::string> gt{"sky"};
  EXPECT_THROW(perturb_tags(gt, config(1.5, 0), "x"), Error);
  auto c = config(0.0, 1);
  c.vocabulary.clear();
  EXPECT_THROW(perturb_tags(gt, c, "x"), Error);
}

class SweepTest : public ::testing::Test {
 protected:
  Dataset blobs = Dataset::load(load_manifest(test::data_dir() / "blobs" / "manifest.json"));
  PerturbationConfig base() const {
    PerturbationConfig c;
    c.master_seed = 9;
    c.vocabulary = blobs.vocabulary();
    return c;
  }
};

TEST_F(SweepTest, ZeroPointEqualsUnperturbedEvaluation) {
  const auto w = AggregationWeights::initialize(3, 2, blobs.text_bank().dim(), 8);
  const std::vector<GridPoint> grid{{0.0, 0}};
  const auto rows = sweep_perturbation(blobs, grid, base(), w, 0.5, 1);
  std::vector<std::vector<std::string>> oracle;
  for (const auto& im : blobs.images()) oracle.push_back(oracle_tags(im.gt, blobs.vocabulary()));
  const auto eval = evaluate_predictions(blobs, segment_dataset(blobs, oracle, w, 1), 0.5, 1);
  ASSERT_EQ(rows.size(), 1U);
  EXPECT_EQ(rows[0].soft_miou, eval.soft.miou);
  EXPECT_EQ(rows[0].hard_miou, eval.hard.miou);
  EXPECT_EQ(rows[0].acc, eval.soft_tagging.acc);
}

TEST_F(SweepTest, DroppingHurtsMoreThanInjecting) {
  auto cfg = base();
  cfg.drop_mode = DropMode::kFixedCount;
  const std::vector<GridPoint> grid{{1.0 / 3.0, 0}, {0.0, 1}};
  const auto rows = sweep_perturbation(blobs, grid, cfg, AggregationWeights::none(), 0.5, 1);
  EXPECT_LT(rows[0].soft_miou, rows[1].soft_miou);
}

TEST_F(SweepTest, RepeatedRunsAreIdentical) {
  const auto w = AggregationWeights::initialize(1, 1, blobs.text_bank().dim(), 4);
  const std::vector<GridPoint> grid{{0.0, 0}, {0.5, 1}, {0.9, 2}};
  const auto a = sweep_csv(sweep_perturbation(blobs, grid, base(), w, 0.5, 1), 9);
  const auto b = sweep_csv(sweep_perturbation(blobs, grid, base(), w, 0.5, 3), 9);
  EXPECT_EQ(a, b);
}

TEST(SweepCsv, HeaderAndSeedComment) {
  const std::vector<SweepRow> rows{{0.5, 2, 0.25, 0.125, 50.0, 1.0, 0.5}, {1.0, 0, 0.0, 0.0, std::nullopt, 0.0, 3.0}};
  EXPECT_EQ(sweep_csv(rows, 42),
            "# master_seed=42\n"
            "drop_rate,fp_count,soft_miou,hard_miou,acc,fp_mean,fn_mean\n"
            "0.5000,2,0.250000,0.125000,50.0000,1.0000,0.5000\n"
            "1.0000,0,0.000000,0.000000,,0.0000,3.0000\n");
}

}  // namespace
}  // namespace vfss
