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

#include <random>

#include <gtest/gtest.h>

#include "cbcl/tuner.hpp"
#include "oracles.hpp"

namespace
{
using cbcl::CbclModel;
using Samples = std::vector<std::vector<double>>;
using SampleMap = std::map<cbcl::ClassId, Samples>;

SampleMap from_dataset(const cbcl::EmbeddingDataset& data)
{
  SampleMap out;
  for (const auto& r : data.records)
  {
    out[r.label].emplace_back(r.vector.begin(), r.vector.end());
  }
  return out;
}

/// Two classes whose samples sit on opposite arms of a cross, so both class
/// means land near the origin.
SampleMap cross(const std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  SampleMap out;
  for (int i = 0; i < 20; ++i)
  {
    const double s = i % 2 == 0 ? 10.0 : -10.0;
    out[0].push_back({s + g(rng), g(rng)});
    out[1].push_back({g(rng), s + g(rng)});
  }
  return out;
}

TEST(Tune, SingletonGridsReturnWithoutSearch)
{
  const CbclModel m(2);
  const auto r = cbcl::tune(m, cross(1), {3.5}, {4}, 5, 0);
  EXPECT_EQ(r.params.distance_threshold, 3.5);
  EXPECT_EQ(r.params.vote_neighbors, 4u);
  EXPECT_EQ(r.folds, 0u);
}

TEST(Tune, TiesPreferSmallerThreshold)
{
  const auto data = cbcl::make_synthetic(4, 30, 8, 100.0, 1.0, 5);
  ASSERT_EQ(cbcl::oracle::nearest_neighbor_accuracy(data, data), 1.0);
  const CbclModel m(8);
  const auto r = cbcl::tune(m, from_dataset(data), {1e6, 0.01}, {1}, 5, 9);
  EXPECT_EQ(r.params.distance_threshold, 0.01);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.folds, 5u);
}

TEST(Tune, PicksThresholdThatSeparatesArms)
{
  const CbclModel m(2);
  const auto r = cbcl::tune(m, cross(2), {1e6, 2.0}, {1, 2}, 4, 3);
  EXPECT_EQ(r.params.distance_threshold, 2.0);
  EXPECT_EQ(r.params.vote_neighbors, 1u);
  EXPECT_EQ(r.accuracy, 1.0);

  // One centroid per class near the origin cannot beat chance by much.
  CbclModel coarse(2);
  for (const auto& [id, s] : cross(2))
  {
    cbcl::learn_class(coarse, id, s, 1e6);
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& [id, s] : cross(2))
  {
    for (const auto& x : s)
    {
      hits += cbcl::predict(coarse, x, 1).label == id ? 1 : 0;
      ++total;
    }
  }
  EXPECT_LT(static_cast<double>(hits) / static_cast<double>(total), 0.8);
}

TEST(Tune, FoldsCappedBySmallestClass)
{
  auto samples = cross(3);
  samples[1].resize(3);
  const CbclModel m(2);
  const auto r = cbcl::tune(m, samples, {1.0, 2.0}, {1}, 5, 0);
  EXPECT_EQ(r.folds, 3u);
}

TEST(Tune, SingleSampleClassFallsBackToSmallestValues)
{
  auto samples = cross(3);
  samples[1].resize(1);
  const CbclModel m(2);
  const auto r = cbcl::tune(m, samples, {4.0, 2.0}, {3, 2}, 5, 0);
  EXPECT_EQ(r.params.distance_threshold, 2.0);
  EXPECT_EQ(r.params.vote_neighbors, 2u);
  EXPECT_EQ(r.folds, 0u);
}

TEST(Tune, ModelUntouchedResultInGridAndDeterministic)
{
  CbclModel m(2);
  cbcl::learn_class(m, 7, Samples{{50.0, 50.0}, {51.0, 50.0}}, 5.0);
  const auto before = m;
  const std::vector<double> d_grid{0.5, 1.0, 3.0, 30.0};
  const std::vector<std::size_t> n_grid{1, 2, 5};
  const auto a = cbcl::tune(m, cross(4), d_grid, n_grid, 5, 11);
  EXPECT_EQ(m, before);
  EXPECT_EQ(m.threshold_history, before.threshold_history);
  EXPECT_NE(std::find(d_grid.begin(), d_grid.end(), a.params.distance_threshold),
            d_grid.end());
  EXPECT_NE(std::find(n_grid.begin(), n_grid.end(), a.params.vote_neighbors),
            n_grid.end());
  const auto b = cbcl::tune(m, cross(4), d_grid, n_grid, 5, 11);
  EXPECT_EQ(a.params.distance_threshold, b.params.distance_threshold);
  EXPECT_EQ(a.params.vote_neighbors, b.params.vote_neighbors);
  EXPECT_EQ(a.accuracy, b.accuracy);
  const auto c = cbcl::tune(m, cross(4), d_grid, n_grid, 5, 11,
                            cbcl::PredictionMode::Voting, 3);
  EXPECT_EQ(a.params.distance_threshold, c.params.distance_threshold);
  EXPECT_EQ(a.params.vote_neighbors, c.params.vote_neighbors);
  EXPECT_EQ(a.accuracy, c.accuracy);
}

TEST(Tune, RejectsBadArguments)
{
  const CbclModel m(2);
  EXPECT_THROW(cbcl::tune(m, cross(1), {}, {1}, 5, 0), cbcl::ConfigError);
  EXPECT_THROW(cbcl::tune(m, cross(1), {1.0}, {}, 5, 0), cbcl::ConfigError);
  EXPECT_THROW(cbcl::tune(m, cross(1), {-1.0, 1.0}, {1}, 5, 0), cbcl::ConfigError);
  EXPECT_THROW(cbcl::tune(m, cross(1), {1.0}, {0, 1}, 5, 0), cbcl::ConfigError);
  EXPECT_THROW(cbcl::tune(m, cross(1), {1.0, 2.0}, {1}, 0, 0), cbcl::ConfigError);
  EXPECT_THROW(cbcl::tune(m, SampleMap{}, {1.0, 2.0}, {1}, 5, 0),
               cbcl::ArgumentError);
}
}  // namespace
