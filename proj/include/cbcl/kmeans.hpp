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

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cbcl/detail/seed.hpp"
#include "cbcl/errors.hpp"

namespace cbcl
{
struct KMeansOptions
{
  std::size_t max_iters = 100;
  /// Stop once the summed center movement of an iteration falls below this.
  double tol = 1e-6;
  /// Independent k-means++ seedings; the lowest-SSE solution is kept.
  std::size_t restarts = 10;
};

struct KMeansResult
{
  std::vector<std::vector<double>> centers;
  /// assignment[i] is the cluster of points[i]. Every cluster is non-empty and
  /// every center is the mean of its members.
  std::vector<std::size_t> assignment;
  double sse = 0.0;
  std::size_t iterations = 0;
  /// Within-cluster SSE of the kept restart: entry 0 against the seeded
  /// centers, then one entry after each update step.
  std::vector<double> sse_history;
};

namespace detail
{
inline double squared_distance(const std::vector<double>& a,
                               const std::vector<double>& b)
{
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
  {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

inline std::vector<std::vector<double>> kmeanspp_seed(
    const std::vector<std::vector<double>>& points, const std::size_t k,
    std::mt19937_64& rng)
{
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(points[pick(rng)]);

  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    best[i] = squared_distance(points[i], centers[0]);
  }
  while (centers.size() < k)
  {
    const double total = std::accumulate(best.begin(), best.end(), 0.0);
    std::size_t next = n - 1;
    while (next > 0 && best[next] <= 0.0)
    {
      --next;
    }
    if (total <= 0.0)
    {
      next = pick(rng);
    }
    else
    {
      std::uniform_real_distribution<double> unit(0.0, total);
      const double r = unit(rng);
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i)
      {
        cumulative += best[i];
        if (best[i] > 0.0 && r < cumulative)
        {
          next = i;
          break;
        }
      }
    }
    centers.push_back(points[next]);
    for (std::size_t i = 0; i < n; ++i)
    {
      best[i] = std::min(best[i], squared_distance(points[i], centers.back()));
    }
  }
  return centers;
}

inline double assignment_sse(const std::vector<std::vector<double>>& points,
                             const std::vector<std::vector<double>>& centers,
                             const std::vector<std::size_t>& assignment)
{
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    sum += squared_distance(points[i], centers[assignment[i]]);
  }
  return sum;
}

inline KMeansResult lloyd(const std::vector<std::vector<double>>& points,
                          std::vector<std::vector<double>> centers,
                          const KMeansOptions& options)
{
  const std::size_t n = points.size();
  const std::size_t k = centers.size();
  const std::size_t dim = points[0].size();
  KMeansResult result;
  result.assignment.assign(n, 0);

  for (std::size_t iter = 0; iter < options.max_iters; ++iter)
  {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i)
    {
      std::size_t nearest = 0;
      double nearest_d2 = squared_distance(points[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c)
      {
        const double d2 = squared_distance(points[i], centers[c]);
        if (d2 < nearest_d2)
        {
          nearest = c;
          nearest_d2 = d2;
        }
      }
      result.assignment[i] = nearest;
      ++counts[nearest];
    }
    if (iter == 0)
    {
      result.sse_history.push_back(
          assignment_sse(points, centers, result.assignment));
    }

    // Empty clusters take the point farthest from its own center among
    // clusters that can spare one.
    for (std::size_t e = 0; e < k; ++e)
    {
      if (counts[e] != 0)
      {
        continue;
      }
      std::size_t donor = n;
      double donor_d2 = -1.0;
      for (std::size_t i = 0; i < n; ++i)
      {
        if (counts[result.assignment[i]] < 2)
        {
          continue;
        }
        const double d2 =
            squared_distance(points[i], centers[result.assignment[i]]);
        if (d2 > donor_d2)
        {
          donor = i;
          donor_d2 = d2;
        }
      }
      --counts[result.assignment[donor]];
      result.assignment[donor] = e;
      counts[e] = 1;
    }

    std::vector<std::vector<double>> updated(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
    {
      auto& target = updated[result.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j)
      {
        target[j] += points[i][j];
      }
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c)
    {
      for (auto& v : updated[c])
      {
        v /= static_cast<double>(counts[c]);
      }
      movement += std::sqrt(squared_distance(updated[c], centers[c]));
    }
    centers = std::move(updated);
    result.sse_history.push_back(
        assignment_sse(points, centers, result.assignment));
    result.iterations = iter + 1;
    if (movement < options.tol)
    {
      break;
    }
  }
  result.centers = std::move(centers);
  result.sse = result.sse_history.back();
  return result;
}
}  // namespace detail

/// Lloyd's algorithm from k-means++ seeding, unweighted. Deterministic for a
/// given seed.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points,
                           const std::size_t k, const std::uint64_t seed,
                           const KMeansOptions& options = {})
{
  if (k == 0)
  {
    throw ArgumentError("k-means needs k >= 1");
  }
  if (k > points.size())
  {
    throw ArgumentError("k-means asked for " + std::to_string(k)
                        + " clusters from " + std::to_string(points.size())
                        + " points");
  }
  if (options.max_iters == 0)
  {
    throw ArgumentError("k-means needs at least one iteration");
  }
  for (const auto& p : points)
  {
    if (p.size() != points[0].size())
    {
      throw ShapeError("k-means points differ in dimension");
    }
  }

  KMeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < restarts; ++r)
  {
    std::mt19937_64 rng(detail::mix_seed(seed, r));
    auto candidate =
        detail::lloyd(points, detail::kmeanspp_seed(points, k, rng), options);
    if (candidate.sse < best.sse)
    {
      best = std::move(candidate);
    }
  }
  return best;
}
}  // namespace cbcl
