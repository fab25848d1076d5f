// Copyright 2026 The cbcl Authors
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

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cbcl/classifier.hpp"
#include "oracles.hpp"

namespace
{
using cbcl::CbclModel;
using Samples = std::vector<std::vector<double>>;

/// Class 0: one centroid at [0,0] from two samples. Class 1: centroids
/// [3,0] and [0,3] with two samples each.
CbclModel two_class_model()
{
  CbclModel m(2);
  cbcl::learn_class(m, 0, Samples{{-1.0, 0.0}, {1.0, 0.0}}, 5.0);
  cbcl::learn_class(m, 1, Samples{{3.0, 0.0}, {3.0, 0.0}, {0.0, 3.0}, {0.0, 3.0}},
                    1.0);
  return m;
}

TEST(Predict, HandEvaluatedVote)
{
  const auto m = two_class_model();
  ASSERT_EQ(m.at(1).centroids.size(), 2u);
  const auto p = cbcl::predict(m, std::vector<double>{1.0, 0.0}, 3);
  EXPECT_EQ(p.label, 0u);
  EXPECT_NEAR(p.scores.at(0), 0.5, 1e-15);
  EXPECT_NEAR(p.scores.at(1), (0.5 + 1.0 / std::sqrt(10.0)) / 4.0, 1e-15);
  EXPECT_NEAR(p.scores.at(1), 0.2040569415042095, 1e-12);
}

TEST(Predict, SingleNeighborIgnoresClassSize)
{
  CbclModel m(1);
  cbcl::learn_class(m, 0, Samples(1000, std::vector<double>{0.0}), 1.0);
  cbcl::learn_class(m, 1, Samples{{10.0}}, 1.0);
  EXPECT_EQ(cbcl::predict(m, std::vector<double>{1.0}, 1).label, 0u);
  const auto p = cbcl::predict(m, std::vector<double>{1.0}, 1);
  EXPECT_EQ(p.scores.at(1), 0.0);
}

TEST(Predict, ExactCentroidHitStaysFinite)
{
  const auto m = two_class_model();
  const auto p = cbcl::predict(m, std::vector<double>{3.0, 0.0}, 1);
  EXPECT_EQ(p.label, 1u);
  EXPECT_TRUE(std::isfinite(p.scores.at(1)));
  EXPECT_DOUBLE_EQ(p.scores.at(1), 1e12 / 4.0);
}

TEST(Predict, VoteSizeBeyondCentroidCountUsesAll)
{
  const auto m = two_class_model();
  const auto all = cbcl::predict(m, std::vector<double>{1.0, 0.0}, 3);
  const auto more = cbcl::predict(m, std::vector<double>{1.0, 0.0}, 50);
  EXPECT_EQ(all.scores, more.scores);
}

TEST(Predict, ErrorsOnEmptyModelAndShape)
{
  CbclModel empty(2);
  EXPECT_THROW(cbcl::predict(empty, std::vector<double>{0.0, 0.0}, 1),
               cbcl::StateError);
  EXPECT_THROW(cbcl::predict_ncm(empty, std::vector<double>{0.0, 0.0}),
               cbcl::StateError);
  const auto m = two_class_model();
  EXPECT_THROW(cbcl::predict(m, std::vector<double>{0.0}, 1), cbcl::ShapeError);
  EXPECT_THROW(cbcl::predict(m, std::vector<double>{0.0, 0.0}, 0),
               cbcl::ArgumentError);
}

TEST(Predict, ArgmaxTieGoesToLowestClassId)
{
  CbclModel m(1);
  cbcl::learn_class(m, 5, Samples{{-1.0}}, 1.0);
  cbcl::learn_class(m, 2, Samples{{1.0}}, 1.0);
  EXPECT_EQ(cbcl::predict(m, std::vector<double>{0.0}, 2).label, 2u);
}

TEST(PredictNcm, UsesWeightedClassMeans)
{
  CbclModel m(1);
  cbcl::learn_class(m, 0, Samples{{0.0}, {2.0}}, 0.5);  // two centroids, mean 1
  cbcl::learn_class(m, 1, Samples{{10.0}}, 0.5);
  ASSERT_EQ(m.at(0).centroids.size(), 2u);
  EXPECT_EQ(cbcl::predict_ncm(m, std::vector<double>{4.0}).label, 0u);
  // centroid 2 is nearer to 5.9 than 10 is, but the class mean 1 is not
  EXPECT_EQ(cbcl::predict_ncm(m, std::vector<double>{5.9}).label, 1u);
}

TEST(PredictNcm, AgreesWithSingleNeighborWhenOneCentroidPerClass)
{
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial)
  {
    CbclModel m(3);
    for (cbcl::ClassId c = 0; c < 6; ++c)
    {
      cbcl::learn_class(m, c, Samples{{g(rng), g(rng), g(rng)}}, 1.0);
    }
    const std::vector<double> x{g(rng), g(rng), g(rng)};
    EXPECT_EQ(cbcl::predict_ncm(m, x).label, cbcl::predict(m, x, 1).label);
  }
}

TEST(Predict, MatchesBruteForceOracle)
{
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial)
  {
    const std::size_t dim = 1 + rng() % 8;
    CbclModel m(static_cast<std::uint32_t>(dim));
    const std::size_t classes = 1 + rng() % 6;
    for (std::size_t c = 0; c < classes; ++c)
    {
      Samples s(1 + rng() % 30, std::vector<double>(dim));
      for (auto& x : s)
      {
        for (auto& v : x)
        {
          v = g(rng) + static_cast<double>(c);
        }
      }
      cbcl::learn_class(m, static_cast<cbcl::ClassId>(c * 3), s, 1.5);
    }
    std::vector<double> x(dim);
    for (auto& v : x)
    {
      v = g(rng);
    }
    const std::size_t n = 1 + rng() % 12;
    const auto got = cbcl::predict(m, x, n);
    const auto want = cbcl::oracle::brute_force_vote(m, x, n);
    EXPECT_EQ(got.label, want.label);
    for (const auto& [id, s] : want.scores)
    {
      EXPECT_NEAR(got.scores.at(id), s, 1e-9);
    }
  }
}

TEST(Predict, ScalingQueryAndCentroidsKeepsLabel)
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial)
  {
    CbclModel m(2);
    for (cbcl::ClassId c = 0; c < 3; ++c)
    {
      Samples s(4 + rng() % 8, std::vector<double>(2));
      for (auto& x : s)
      {
        x = {g(rng) + 0.5 * c, g(rng)};
      }
      cbcl::learn_class(m, c, s, 0.5);
    }
    const double factor = 7.5;
    CbclModel scaled = m;
    for (auto& [id, cls] : scaled.classes())
    {
      for (auto& c : cls.centroids)
      {
        for (auto& v : c.vector)
        {
          v *= factor;
        }
      }
    }
    const std::vector<double> x{g(rng), g(rng)};
    const std::vector<double> sx{x[0] * factor, x[1] * factor};
    for (const std::size_t n : {1, 3, 6})
    {
      EXPECT_EQ(cbcl::predict(m, x, n).label, cbcl::predict(scaled, sx, n).label);
    }
  }
}

TEST(Predict, SampleAtNearestCentroidNeverFlipsSingleNeighbor)
{
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial)
  {
    CbclModel m(2);
    for (cbcl::ClassId c = 0; c < 3; ++c)
    {
      Samples s(5, std::vector<double>(2));
      for (auto& x : s)
      {
        x = {g(rng) + c, g(rng)};
      }
      cbcl::learn_class(m, c, s, 0.3);
    }
    const std::vector<double> x{g(rng), g(rng)};
    const auto before = cbcl::predict(m, x, 1).label;
    const auto& own = m.at(before).centroids;
    const auto nearest = std::min_element(
        own.begin(), own.end(), [&](const auto& p, const auto& q) {
          return cbcl::oracle::dist(p.vector, x) < cbcl::oracle::dist(q.vector, x);
        });
    const Samples duplicate{nearest->vector};
    cbcl::learn_class(m, before, duplicate, 0.3);
    EXPECT_EQ(cbcl::predict(m, x, 1).label, before);
  }
}

// ---------------------------------------------------------------------------

TEST(Evaluate, StoredCentroidsClassifyPerfectly)
{
  CbclModel m(2);
  cbcl::EmbeddingDataset test{2, {}};
  for (cbcl::ClassId c = 0; c < 4; ++c)
  {
    const std::vector<double> v{static_cast<double>(c) * 3.0, 1.0};
    cbcl::learn_class(m, c, Samples{v}, 1.0);
    test.add(c, {static_cast<float>(v[0]), static_cast<float>(v[1])});
  }
  const auto r = cbcl::evaluate(m, test, 1);
  EXPECT_EQ(r.accuracy(), 1.0);
  EXPECT_EQ(r.total(), 4u);
}

TEST(Evaluate, ConfusionRowsSumToClassCounts)
{
  const auto data = cbcl::make_synthetic(5, 40, 3, 2.0, 2.0, 13);  // overlapping
  CbclModel m(3);
  cbcl::learn_dataset(m, data.subset({0, 1, 40, 41, 80, 81, 120, 121, 160, 161}), 1.0);
  const auto r = cbcl::evaluate(m, data, 2);
  for (const auto& [label, members] : data.class_index())
  {
    EXPECT_EQ(r.class_total(label), members.size());
  }
  EXPECT_EQ(r.total(), data.size());
  EXPECT_LT(r.accuracy(), 1.0);
}

TEST(Evaluate, SeparableSyntheticMatchesNearestNeighborOracle)
{
  const auto data = cbcl::make_synthetic(5, 60, 8, 100.0, 1.0, 21);
  const auto [train_idx, test_idx] = cbcl::split_train_test(data, 1);
  std::vector<std::size_t> tr;
  std::vector<std::size_t> te;
  for (const auto& [c, v] : train_idx)
  {
    tr.insert(tr.end(), v.begin(), v.end());
  }
  for (const auto& [c, v] : test_idx)
  {
    te.insert(te.end(), v.begin(), v.end());
  }
  const auto train = data.subset(tr);
  const auto test = data.subset(te);
  CbclModel m(8);
  cbcl::learn_dataset(m, train, 3.0);
  const double acc = cbcl::evaluate(m, test, 5).accuracy();
  const double nn = cbcl::oracle::nearest_neighbor_accuracy(train, test);
  EXPECT_GE(nn, 0.99);
  EXPECT_GE(acc, 0.99);
}

TEST(Evaluate, ThreadCountDoesNotChangeReport)
{
  const auto data = cbcl::make_synthetic(6, 50, 4, 3.0, 2.0, 2);
  CbclModel m(4);
  cbcl::learn_dataset(m, data, 1.5);
  const auto one = cbcl::evaluate(m, data, 3, cbcl::PredictionMode::Voting, 1);
  const auto many = cbcl::evaluate(m, data, 3, cbcl::PredictionMode::Voting, 7);
  EXPECT_EQ(one, many);
}

TEST(Evaluate, RejectsUnseenClassesAndShapeMismatch)
{
  CbclModel m(2);
  cbcl::learn_class(m, 0, Samples{{0.0, 0.0}}, 1.0);
  cbcl::EmbeddingDataset unseen{2, {}};
  unseen.add(9, {0.0f, 0.0f});
  EXPECT_THROW(cbcl::evaluate(m, unseen, 1), cbcl::ConfigError);
  cbcl::EmbeddingDataset wide{3, {}};
  wide.add(0, {0.0f, 0.0f, 0.0f});
  EXPECT_THROW(cbcl::evaluate(m, wide, 1), cbcl::ShapeError);
}

TEST(Evaluate, SingleCentroidModeEqualsVoteOfOne)
{
  const auto data = cbcl::make_synthetic(4, 30, 3, 2.0, 1.5, 8);
  CbclModel m(3);
  cbcl::learn_dataset(m, data, 1.0);
  EXPECT_EQ(cbcl::evaluate(m, data, 7, cbcl::PredictionMode::SingleCentroid),
            cbcl::evaluate(m, data, 1, cbcl::PredictionMode::Voting));
}

TEST(Report, SerializesMetricsAndConfusion)
{
  auto r = cbcl::empty_report({1, 4});
  r.confusion = {{3, 1}, {0, 2}};
  std::ostringstream text;
  cbcl::write_report(r, text);
  EXPECT_NE(text.str().find("accuracy\t0.833333333333\n"), std::string::npos);
  EXPECT_NE(text.str().find("class_accuracy.1\t0.75\n"), std::string::npos);
  std::ostringstream csv;
  cbcl::write_confusion_csv(r, csv);
  EXPECT_EQ(csv.str(), "truth,1,4\n1,3,1\n4,0,2\n");
  EXPECT_DOUBLE_EQ(r.accuracy_over({4}), 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy_over({1}), 0.75);
}
}  // namespace
