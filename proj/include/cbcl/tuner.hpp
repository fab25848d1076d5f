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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cbcl/classifier.hpp"
#include "cbcl/detail/seed.hpp"
#include "cbcl/errors.hpp"
#include "cbcl/model.hpp"

namespace cbcl
{
/// Default search grids. The threshold grid suits 512-d ResNet features and
/// must be rescaled for other embeddings.
inline std::vector<double> default_threshold_grid()
{
  return {70.0, 75.0, 80.0, 85.0, 90.0};
}

inline std::vector<std::size_t> default_neighbor_grid()
{
  return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
}

struct TuneResult
{
  Hyperparams params;
  /// Folds actually used; 0 when no search ran.
  std::size_t folds = 0;
  /// Mean held-out accuracy of the chosen pair (0 when no search ran).
  double accuracy = 0.0;
};

/// Picks the (threshold, vote size) pair with the best mean k-fold accuracy.
/// Each fold learns the new classes from the remaining folds into a copy of
/// `model` and classifies the held-out fold against every class in the copy.
/// Ties go to the smaller threshold, then the smaller vote size. `model` is
/// never modified.
///
/// The fold count drops to the smallest per-class sample count; below two
/// folds the smallest grid values are returned without searching.
template <typename Sample>
TuneResult tune(const CbclModel& model,
                const std::map<ClassId, std::vector<Sample>>& new_class_samples,
                std::vector<double> d_grid, std::vector<std::size_t> n_grid,
                const std::size_t folds, const std::uint64_t seed,
                const PredictionMode mode = PredictionMode::Voting,
                const std::size_t threads = 1)
{
  if (d_grid.empty() || n_grid.empty())
  {
    throw ConfigError("tuning grids must be non-empty");
  }
  for (const double d : d_grid)
  {
    if (!(d > 0.0) || !std::isfinite(d))
    {
      throw ConfigError("threshold grid values must be positive and finite");
    }
  }
  if (std::find(n_grid.begin(), n_grid.end(), 0) != n_grid.end())
  {
    throw ConfigError("vote size grid values must be at least 1");
  }
  if (folds == 0)
  {
    throw ConfigError("fold count must be positive");
  }
  if (new_class_samples.empty())
  {
    throw ArgumentError("no new-class samples to tune on");
  }
  std::sort(d_grid.begin(), d_grid.end());
  d_grid.erase(std::unique(d_grid.begin(), d_grid.end()), d_grid.end());
  std::sort(n_grid.begin(), n_grid.end());
  n_grid.erase(std::unique(n_grid.begin(), n_grid.end()), n_grid.end());

  TuneResult result;
  result.params = Hyperparams{d_grid.front(), n_grid.front()};
  if (d_grid.size() == 1 && n_grid.size() == 1)
  {
    return result;
  }
  std::size_t min_count = std::numeric_limits<std::size_t>::max();
  for (const auto& [id, samples] : new_class_samples)
  {
    min_count = std::min(min_count, samples.size());
  }
  const std::size_t used_folds = std::min(folds, min_count);
  if (used_folds < 2)
  {
    return result;
  }

  // fold_of[id][i]: fold holding sample i of class id.
  std::map<ClassId, std::vector<std::size_t>> fold_of;
  for (const auto& [id, samples] : new_class_samples)
  {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(detail::mix_seed(seed, id));
    std::shuffle(order.begin(), order.end(), rng);
    auto& folds_for_class = fold_of[id];
    folds_for_class.resize(samples.size());
    for (std::size_t p = 0; p < order.size(); ++p)
    {
      folds_for_class[order[p]] = p % used_folds;
    }
  }

  // accuracy[d][n] summed over folds
  std::vector<std::vector<double>> accuracy(
      d_grid.size(), std::vector<double>(n_grid.size(), 0.0));
  const auto score_threshold = [&](const std::size_t di) {
    for (std::size_t f = 0; f < used_folds; ++f)
    {
      CbclModel trial = model;
      std::vector<std::pair<ClassId, const Sample*>> held_out;
      for (const auto& [id, samples] : new_class_samples)
      {
        std::vector<const Sample*> train;
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
          if (fold_of.at(id)[i] == f)
          {
            held_out.emplace_back(id, &samples[i]);
          }
          else
          {
            train.push_back(&samples[i]);
          }
        }
        std::vector<std::span<const typename Sample::value_type>> views;
        views.reserve(train.size());
        for (const Sample* s : train)
        {
          views.emplace_back(s->data(), s->size());
        }
        learn_class(trial, id, views, d_grid[di]);
      }
      const CentroidIndex index(trial);
      for (std::size_t ni = 0; ni < n_grid.size(); ++ni)
      {
        std::size_t hits = 0;
        for (const auto& [id, sample] : held_out)
        {
          hits += index.predict_label(*sample, n_grid[ni], mode) == id ? 1 : 0;
        }
        accuracy[di][ni] +=
            static_cast<double>(hits) / static_cast<double>(held_out.size());
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, d_grid.size()));
  if (workers == 1)
  {
    for (std::size_t di = 0; di < d_grid.size(); ++di)
    {
      score_threshold(di);
    }
  }
  else
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
    {
      pool.emplace_back([&, w] {
        for (std::size_t di = w; di < d_grid.size(); di += workers)
        {
          score_threshold(di);
        }
      });
    }
  }

  double best = -1.0;
  for (std::size_t di = 0; di < d_grid.size(); ++di)
  {
    for (std::size_t ni = 0; ni < n_grid.size(); ++ni)
    {
      const double mean = accuracy[di][ni] / static_cast<double>(used_folds);
      if (mean > best)
      {
        best = mean;
        result.params = Hyperparams{d_grid[di], n_grid[ni]};
      }
    }
  }
  result.folds = used_folds;
  result.accuracy = best;
  return result;
}
}  // namespace cbcl
