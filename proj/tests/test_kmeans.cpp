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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "cbcl/kmeans.hpp"
#include "oracles.hpp"

namespace
{
using Points = std::vector<std::vector<double>>;

std::vector<double> sorted_1d(const Points& centers)
{
  std::vector<double> out;
  for (const auto& c : centers)
  {
    out.push_back(c[0]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void expect_consistent(const Points& points, const cbcl::KMeansResult& r)
{
  const std::size_t k = r.centers.size();
  std::vector<std::vector<double>> sum(k, std::vector<double>(points[0].size(), 0.0));
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    ++count[r.assignment[i]];
    for (std::size_t j = 0; j < points[i].size(); ++j)
    {
      sum[r.assignment[i]][j] += points[i][j];
    }
  }
  for (std::size_t c = 0; c < k; ++c)
  {
    ASSERT_GT(count[c], 0u) << "empty cluster " << c;
    for (std::size_t j = 0; j < points[0].size(); ++j)
    {
      EXPECT_NEAR(r.centers[c][j], sum[c][j] / static_cast<double>(count[c]), 1e-12);
    }
  }
}

TEST(KMeans, KEqualsPointCountReturnsThePoints)
{
  const Points pts{{3.0}, {-1.0}, {7.5}, {0.25}};
  const auto r = cbcl::kmeans(pts, 4, 1);
  EXPECT_EQ(sorted_1d(r.centers), (std::vector<double>{-1.0, 0.25, 3.0, 7.5}));
  EXPECT_EQ(r.sse, 0.0);
}

TEST(KMeans, IdenticalPointsSingleClusterConvergesInOneIteration)
{
  const Points pts{{2.0, 5.0}, {2.0, 5.0}};
  const auto r = cbcl::kmeans(pts, 1, 3);
  ASSERT_EQ(r.centers.size(), 1u);
  EXPECT_EQ(r.centers[0], (std::vector<double>{2.0, 5.0}));
  EXPECT_EQ(r.iterations, 1u);
}

TEST(KMeans, FourPointsTwoClustersMatchesExhaustiveOptimum)
{
  const Points pts{{0.0}, {1.0}, {9.0}, {10.0}};
  EXPECT_DOUBLE_EQ(cbcl::oracle::exhaustive_min_sse(pts, 2), 1.0);
  const auto r = cbcl::kmeans(pts, 2, 0);
  EXPECT_EQ(sorted_1d(r.centers), (std::vector<double>{0.5, 9.5}));
  EXPECT_DOUBLE_EQ(r.sse, 1.0);
}

TEST(KMeans, RejectsBadK)
{
  const Points pts{{0.0}, {1.0}};
  EXPECT_THROW(cbcl::kmeans(pts, 3, 0), cbcl::ArgumentError);
  EXPECT_THROW(cbcl::kmeans(pts, 0, 0), cbcl::ArgumentError);
  EXPECT_THROW(cbcl::kmeans(Points{{0.0}, {1.0, 2.0}}, 1, 0), cbcl::ShapeError);
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster)
{
  const Points pts{{1.0}, {1.0}, {1.0}, {4.0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed)
  {
    const auto r = cbcl::kmeans(pts, 3, seed);
    expect_consistent(pts, r);
  }
}

TEST(KMeans, DeterministicForSeed)
{
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Points pts(40, std::vector<double>(3));
  for (auto& p : pts)
  {
    for (auto& v : p)
    {
      v = g(rng);
    }
  }
  const auto a = cbcl::kmeans(pts, 5, 77);
  const auto b = cbcl::kmeans(pts, 5, 77);
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(KMeans, PropertySseNonIncreasingAndCentersAreMeans)
{
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 4.0);
  for (int trial = 0; trial < 100; ++trial)
  {
    const std::size_t n = 1 + rng() % 60;
    const std::size_t dim = 1 + rng() % 5;
    Points pts(n, std::vector<double>(dim));
    for (auto& p : pts)
    {
      for (auto& v : p)
      {
        v = g(rng);
      }
    }
    const std::size_t k = 1 + rng() % n;
    cbcl::KMeansOptions opts;
    opts.restarts = 1 + rng() % 3;
    const auto r = cbcl::kmeans(pts, k, rng(), opts);
    ASSERT_GE(r.sse_history.size(), 2u);
    for (std::size_t t = 1; t < r.sse_history.size(); ++t)
    {
      EXPECT_LE(r.sse_history[t], r.sse_history[t - 1] * (1.0 + 1e-12) + 1e-300);
    }
    EXPECT_EQ(r.sse, r.sse_history.back());
    expect_consistent(pts, r);
  }
}

TEST(KMeans, SmallInstancesNearExhaustiveOptimum)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial)
  {
    const std::size_t n = 1 + rng() % 8;
    Points pts(n, std::vector<double>(1));
    for (auto& p : pts)
    {
      p[0] = u(rng);
    }
    const std::size_t k = 1 + rng() % std::min<std::size_t>(3, n);
    const double best = cbcl::oracle::exhaustive_min_sse(pts, k);
    const auto r = cbcl::kmeans(pts, k, rng());
    EXPECT_LE(r.sse, best * 1.05 + 1e-12) << "trial " << trial;
  }
}
}  // namespace
