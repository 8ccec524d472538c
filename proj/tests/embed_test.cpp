#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "vfss/embed.hpp"
#include "vfss/error.hpp"

namespace vfss {
namespace {

using V = std::vector<float>;

TEST(Cosine, IdenticalVectors) {
  EXPECT_NEAR(cosine(V{0.6f, 0.8f}, V{0.6f, 0.8f}), 1.0, 1e-12);
  EXPECT_EQ(cosine(V{3, 4}, V{3, 4}), 1.0);
}

TEST(Cosine, Orthogonal) { EXPECT_EQ(cosine(V{1, 0}, V{0, 1}), 0.0); }

TEST(Cosine, HandArithmeticEightNinths) {
  EXPECT_NEAR(cosine(V{1, 2, 2}, V{2, 1, 2}), 8.0 / 9.0, 1e-12);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(V{0, 0}, V{1, 0}), Error);
  try {
    cosine(V{1, 0}, V{0, 0});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateVector);
  }
  try {
    cosine(V{1, 0}, V{1, 0, 0});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
  }
}

TEST(Cosine, ClampedToUnitInterval) {
  SplitMix64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const V u = test::random_rows(rng, 1, 9);
    EXPECT_LE(cosine(u, u), 1.0);
    V neg = u;
    for (auto& x : neg) x = -x;
    EXPECT_GE(cosine(u, neg), -1.0);
  }
}

TEST(Cosine, SymmetricExactly) {
  SplitMix64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.next_below(32);
    const V u = test::random_rows(rng, 1, d);
    const V v = test::random_rows(rng, 1, d);
    ASSERT_EQ(cosine(u, v), cosine(v, u));
  }
}

TEST(Cosine, ScaleInvariant) {
  SplitMix64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.next_below(32);
    const V u = test::random_rows(rng, 1, d);
    const V v = test::random_rows(rng, 1, d);
    const float a = rng.next_float(0.01f, 100.0f);
    const float b = rng.next_float(0.01f, 100.0f);
    V au = u;
    V bv = v;
    for (auto& x : au) x *= a;
    for (auto& x : bv) x *= b;
    ASSERT_NEAR(cosine(au, bv), cosine(u, v), 1e-6);
  }
}

TEST(Cosine, MatchesScalarOracle) {
  SplitMix64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.next_below(64);
    const V u = test::random_rows(rng, 1, d);
    const V v = test::random_rows(rng, 1, d);
    ASSERT_NEAR(cosine(u, v), test::oracle_cosine(u.data(), v.data(), d), 1e-12);
  }
}

TEST(L2Normalize, ThreeFourFive) {
  Matrix m(1, 2);
  m.data = {3, 4};
  const auto n = l2_normalize_rows(m);
  EXPECT_NEAR(n(0, 0), 0.6f, 1e-7);
  EXPECT_NEAR(n(0, 1), 0.8f, 1e-7);
}

TEST(L2Normalize, IdempotentOnUnitRows) {
  SplitMix64 rng(4);
  Matrix m(8, 16);
  m.data = test::random_rows(rng, 8, 16);
  const auto once = l2_normalize_rows(m);
  const auto twice = l2_normalize_rows(once);
  for (std::size_t k = 0; k < once.data.size(); ++k) EXPECT_NEAR(once.data[k], twice.data[k], 1e-7);
}

TEST(L2Normalize, RandomRowsHaveUnitNorm) {
  SplitMix64 rng(8);
  Matrix m(8, 16);
  m.data = test::random_rows(rng, 8, 16);
  const auto n = l2_normalize_rows(m);
  for (std::size_t r = 0; r < 8; ++r) EXPECT_NEAR(l2_norm(n.row(r)), 1.0, 1e-6);
}

TEST(L2Normalize, CosineEqualsDotOfNormalized) {
  SplitMix64 rng(9);
  Matrix m(2, 12);
  for (int t = 0; t < 200; ++t) {
    m.data = test::random_rows(rng, 2, 12);
    const auto n = l2_normalize_rows(m);
    ASSERT_NEAR(cosine(m.row(0), m.row(1)), dot(n.row(0), n.row(1)), 1e-6);
  }
}

TEST(L2Normalize, ZeroRowIsError) {
  Matrix m(2, 2);
  m.data = {1, 0, 0, 0};
  EXPECT_THROW(l2_normalize_rows(m), Error);
}

TEST(DenseImage, RejectsZeroPixelAndBadSize) {
  EXPECT_THROW(DenseImageEmbedding(1, 2, 2, V{1, 0, 0, 0}), Error);
  EXPECT_THROW(DenseImageEmbedding(1, 2, 2, V{1, 0, 0}), Error);
  const DenseImageEmbedding ok(1, 2, 2, V{1, 0, 0, 1});
  EXPECT_EQ(ok.pixels(), 2U);
  EXPECT_EQ(ok.pixel(1)[1], 1.0f);
}

TEST(DenseImage, FromContainerNeedsRankThree) {
  EmbeddingContainer c;
  c.dims = {2, 2};
  c.data = {1, 0, 0, 1};
  EXPECT_THROW(DenseImageEmbedding::from_container(c), Error);
  c.dims = {1, 2, 2};
  const auto img = DenseImageEmbedding::from_container(c);
  EXPECT_EQ(img.height(), 1U);
  EXPECT_EQ(img.width(), 2U);
  EXPECT_EQ(img.dim(), 2U);
}

TEST(TextSet, SelectFindConcat) {
  Matrix m(3, 2);
  m.data = {1, 0, 0, 1, 1, 1};
  const TextEmbeddingSet set({"a", "b", "c"}, m);
  EXPECT_EQ(set.find("b"), 1U);
  EXPECT_FALSE(set.find("z").has_value());
  const std::vector<std::string> pick{"c", "a"};
  const auto sel = set.select(pick);
  EXPECT_EQ(sel.names(), pick);
  EXPECT_EQ(sel.row(0)[1], 1.0f);
  EXPECT_EQ(sel.row(1)[1], 0.0f);
  const std::vector<std::string> bad{"a", "zebra"};
  try {
    set.select(bad);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnknownClass);
  }
  Matrix extra(1, 2);
  extra.data = {0.5f, 0.5f};
  EXPECT_EQ(set.concat(TextEmbeddingSet({"d"}, extra)).size(), 4U);
  EXPECT_THROW(set.concat(TextEmbeddingSet({"a"}, extra)), Error);
}

TEST(TextSet, RejectsDuplicateNamesAndZeroRows) {
  Matrix m(2, 2);
  m.data = {1, 0, 0, 1};
  EXPECT_THROW(TextEmbeddingSet({"a", "a"}, m), Error);
  m.data = {1, 0, 0, 0};
  EXPECT_THROW(TextEmbeddingSet({"a", "b"}, m), Error);
}

TEST(Prompts, PlainTemplate) {
  const std::vector<std::string> names{"dog"};
  EXPECT_EQ(expand_prompts(names, PromptTemplate()), (std::vector<std::string>{"A photo of a dog"}));
}

TEST(Prompts, AdjectivesInOrder) {
  const std::vector<std::string> names{"giraffe"};
  AdjectiveMap adj{{"giraffe", {"tall", "spotted"}}};
  EXPECT_EQ(expand_prompts(names, PromptTemplate(std::string(PromptTemplate::kAdjective)), adj),
            (std::vector<std::string>{"A photo of a tall giraffe", "A photo of a spotted giraffe"}));
}

TEST(Prompts, EmptyInput) {
  EXPECT_TRUE(expand_prompts(std::vector<std::string>{}, PromptTemplate()).empty());
}

TEST(Prompts, MissingAdjectiveEntry) {
  const std::vector<std::string> names{"dog", "cat"};
  AdjectiveMap adj{{"dog", {"brown"}}};
  EXPECT_THROW(expand_prompts(names, PromptTemplate(std::string(PromptTemplate::kAdjective)), adj), Error);
  EXPECT_THROW(expand_prompts(names, PromptTemplate(std::string(PromptTemplate::kAdjective))), Error);
}

TEST(Prompts, EmptyAdjectiveListFallsBackToPlainPrompt) {
  const std::vector<std::string> names{"cat"};
  AdjectiveMap adj{{"cat", {}}};
  EXPECT_EQ(expand_prompts(names, PromptTemplate(std::string(PromptTemplate::kAdjective)), adj),
            (std::vector<std::string>{"A photo of a cat"}));
}

TEST(Prompts, TemplateValidation) {
  EXPECT_THROW(PromptTemplate("no placeholder"), Error);
  EXPECT_THROW(PromptTemplate("{class} and {class}"), Error);
  EXPECT_THROW(PromptTemplate("{adjective} {adjective} {class}"), Error);
}

TEST(Prompts, CountMatchesAdjectiveSizes) {
  SplitMix64 rng(12);
  const PromptTemplate tmpl{std::string(PromptTemplate::kAdjective)};
  for (int t = 0; t < 100; ++t) {
    std::vector<std::string> names;
    AdjectiveMap adj;
    std::size_t expected = 0;
    const std::size_t n = rng.next_below(6);
    for (std::size_t k = 0; k < n; ++k) {
      names.push_back("n" + std::to_string(k));
      std::vector<std::string> a(rng.next_below(4));
      for (std::size_t j = 0; j < a.size(); ++j) a[j] = "adj" + std::to_string(j);
      expected += std::max<std::size_t>(1, a.size());
      adj[names.back()] = a;
    }
    ASSERT_EQ(expand_prompts(names, tmpl, adj).size(), expected);
    ASSERT_EQ(expand_prompts(names, PromptTemplate(), adj).size(), n);
  }
}

}  // namespace
}  // namespace vfss
