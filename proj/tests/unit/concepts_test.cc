// Copyright 2026 The MetaUnlearn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "metaunlearn/common/errors.h"
#include "metaunlearn/concepts/world.h"

namespace metaunlearn::concepts {
namespace {

TEST(World, DefaultGeometry) {
  auto t = default_world(1);
  ASSERT_EQ(t.concepts().size(), 4u);
  EXPECT_EQ(t.forget().name, "F");
  EXPECT_EQ(t.at("R").role, ConceptRole::kRelatedRetain);
  EXPECT_EQ(t.at("U1").center, (std::vector<double>{-2.0, 2.0}));
  EXPECT_EQ(t.at("U2").center, (std::vector<double>{-2.0, -2.0}));
  for (const auto& [name, c] : t.concepts()) EXPECT_EQ(c.spread, 0.3);
  auto dist = [&](const std::string& a, const std::string& b) {
    const auto& x = t.at(a).center;
    const auto& y = t.at(b).center;
    return std::hypot(x[0] - y[0], x[1] - y[1]);
  };
  EXPECT_NEAR(dist("F", "R"), 0.70710678118654757, 1e-15);
  EXPECT_GE(dist("F", "U1"), 4.0);
  EXPECT_GE(dist("F", "U2"), 4.0);
}

TEST(World, RelatedCosineIsExact) {
  for (std::uint64_t seed : {1, 2, 3, 99}) {
    auto t = default_world(seed);
    EXPECT_NEAR(cosine(t.at("F").embedding, t.at("R").embedding), 0.6, 1e-9);
  }
}

TEST(World, UnrelatedCosineBounded) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = default_world(seed);
    EXPECT_LT(std::abs(cosine(t.at("F").embedding, t.at("U1").embedding)), 0.8);
    EXPECT_LT(std::abs(cosine(t.at("F").embedding, t.at("U2").embedding)), 0.8);
  }
}

TEST(World, EmbeddingsAreUnitAndNullIsZero) {
  auto t = default_world(4);
  for (const auto& [name, c] : t.concepts()) {
    double n = 0.0;
    for (double v : c.embedding) n += v * v;
    EXPECT_NEAR(n, 1.0, 1e-12) << name;
    EXPECT_EQ(c.embedding.size(), 8u);
  }
  for (double v : t.null_embedding()) EXPECT_EQ(v, 0.0);
}

TEST(World, SameSeedSameTable) {
  EXPECT_TRUE(default_world(5) == default_world(5));
  EXPECT_FALSE(default_world(5) == default_world(6));
}

TEST(World, ConfigValidation) {
  WorldConfig c;
  c.concepts[1].role = ConceptRole::kForget;
  EXPECT_THROW(validate(c), ConfigError);
  WorldConfig d;
  d.concepts[0].spread = 0.0;
  try {
    validate(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "world.concepts.F.spread");
  }
}

TEST(World, ConfigJsonRoundTrip) {
  WorldConfig c;
  c.related_cos = 0.4;
  c.concepts[0].center = {1.0, 1.0};
  auto back = world_config_from_json(world_config_to_json(c));
  EXPECT_EQ(back.related_cos, 0.4);
  EXPECT_EQ(back.concepts[0].center, (std::vector<double>{1.0, 1.0}));
  auto table = make_world(back, 3);
  EXPECT_NEAR(cosine(table.at("F").embedding, table.at("R").embedding), 0.4, 1e-9);
}

TEST(World, TableJsonRoundTrip) {
  auto t = default_world(8);
  EXPECT_TRUE(table_from_json(table_to_json(t)) == t);
}

TEST(Split, ZeroSizeRejected) {
  auto t = default_world(1);
  EXPECT_THROW(draw_split(t, {0, 10, 10, 10}, 1), InvalidArgument);
  EXPECT_THROW(draw_split(t, {10, 10, 0, 10}, 1), InvalidArgument);
}

TEST(Split, UnknownConceptRejected) {
  auto t = default_world(1);
  diffusion::Rng rng(1);
  EXPECT_THROW(draw_concept(t, "Q", 3, rng), InvalidArgument);
}

TEST(Split, ForgetSampleMean) {
  auto t = default_world(1);
  diffusion::Rng rng(2);
  auto s = draw_concept(t, "F", 1000, rng);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    mx += s.x[2 * i];
    my += s.x[2 * i + 1];
  }
  EXPECT_NEAR(mx / 1000, 2.0, 0.05);
  EXPECT_NEAR(my / 1000, 2.0, 0.05);
}

TEST(Split, RolesOfEachSplit) {
  auto t = default_world(1);
  auto b = draw_split(t, {}, 2);
  EXPECT_EQ(b.forget.size(), 1000u);
  EXPECT_EQ(b.retain.size(), 3000u);
  EXPECT_EQ(b.ft_pool.size(), 256u);
  EXPECT_EQ(b.benign.size(), 512u);
  for (const auto& l : b.forget.labels) EXPECT_EQ(l, "F");
  for (const auto& l : b.ft_pool.labels) EXPECT_EQ(l, "F");
  for (const auto& l : b.retain.labels) EXPECT_NE(l, "F");
  std::set<std::string> benign(b.benign.labels.begin(), b.benign.labels.end());
  EXPECT_EQ(benign, (std::set<std::string>{"U1", "U2"}));
}

TEST(Split, BenignRarelyNearestToForget) {
  auto t = default_world(1);
  auto b = draw_split(t, {}, 3);
  std::size_t near_f = 0;
  for (std::size_t i = 0; i < b.benign.size(); ++i) {
    if (nearest_concept(t, b.benign.x.data().subspan(2 * i, 2)) == "F") ++near_f;
  }
  EXPECT_LE(static_cast<double>(near_f), 0.01 * static_cast<double>(b.benign.size()));
}

TEST(Split, ReproducibleFromSeed) {
  auto t = default_world(1);
  auto a = draw_split(t, {}, 9);
  auto b = draw_split(t, {}, 9);
  EXPECT_EQ(a.forget.x.to_vector(), b.forget.x.to_vector());
  EXPECT_EQ(a.retain.labels, b.retain.labels);
  EXPECT_EQ(a.benign.x.to_vector(), b.benign.x.to_vector());
  auto c = draw_split(t, {}, 10);
  EXPECT_NE(a.forget.x.to_vector(), c.forget.x.to_vector());
}

TEST(Split, BundleJsonRoundTrip) {
  auto t = default_world(1);
  auto a = draw_split(t, {5, 3, 2, 2}, 4);
  auto b = bundle_from_json(bundle_to_json(a));
  EXPECT_EQ(a.retain.x.to_vector(), b.retain.x.to_vector());
  EXPECT_EQ(a.ft_pool.labels, b.ft_pool.labels);
}

TEST(Nearest, Centers) {
  auto t = default_world(1);
  EXPECT_EQ(nearest_concept(t, std::vector<double>{2.0, 2.0}), "F");
  EXPECT_EQ(nearest_concept(t, std::vector<double>{-2.0, 2.0}), "U1");
}

TEST(Nearest, TieGoesToSmallerName) {
  auto t = default_world(1);
  EXPECT_EQ(nearest_concept(t, std::vector<double>{2.25, 2.25}), "F");
}

TEST(Conditions, TokensAndNull) {
  auto t = default_world(1);
  diffusion::ModelConfig one;
  auto c1 = concept_condition(t, "F", one);
  EXPECT_EQ(c1.to_vector(), t.at("F").embedding);
  diffusion::ModelConfig two;
  two.num_tokens = 2;
  auto c2 = concept_condition(t, "R", two).to_vector();
  EXPECT_TRUE(std::equal(c2.begin(), c2.begin() + 8, t.at("R").embedding.begin()));
  EXPECT_TRUE(std::equal(c2.begin() + 8, c2.end(), t.style_embedding().begin()));
  for (double v : null_condition(t, two)) EXPECT_EQ(v, 0.0);
}

TEST(Conditions, ParaphrasesStayNearForget) {
  auto t = default_world(1);
  auto p = paraphrase_embeddings(t, 5, 0.15, 3);
  ASSERT_EQ(p.size(), 5u);
  for (const auto& e : p) EXPECT_GT(cosine(e, t.forget().embedding), 0.8);
  EXPECT_EQ(p, paraphrase_embeddings(t, 5, 0.15, 3));
}

}  // namespace
}  // namespace metaunlearn::concepts
