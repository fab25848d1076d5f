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
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cbcl/detail/seed.hpp"
#include "cbcl/errors.hpp"
#include "cbcl/kmeans.hpp"
#include "cbcl/model.hpp"

namespace cbcl
{
/// cluster: k-means over each class's centroids, merged weights summed.
/// remove: keep each class's heaviest centroids, drop the rest.
enum class ReductionMode
{
  Cluster,
  Remove
};

inline std::string to_string(const ReductionMode mode)
{
  return mode == ReductionMode::Cluster ? "cluster" : "remove";
}

inline ReductionMode parse_reduction_mode(const std::string& text)
{
  if (text == "cluster")
  {
    return ReductionMode::Cluster;
  }
  if (text == "remove")
  {
    return ReductionMode::Remove;
  }
  throw ConfigError("unknown reduction mode '" + text + "'");
}

struct ReductionPlan
{
  std::size_t k_t = 0;
  std::size_t k_new = 0;
  std::size_t k_r = 0;
  std::size_t budget = 0;
  std::map<ClassId, std::size_t> per_class_target;

  bool operator==(const ReductionPlan&) const = default;

  bool reduces() const { return k_r > 0; }

  std::size_t total_target() const
  {
    std::size_t sum = 0;
    for (const auto& [id, t] : per_class_target)
    {
      sum += t;
    }
    return sum;
  }
};

/// Per-class centroid targets that leave room for `k_new` incoming centroids
/// under a budget of `budget`. Each class shrinks in proportion to its
/// current count, floored and clamped to at least one centroid; if the clamp
/// overshoots, the largest classes give up one more centroid each in turn.
inline ReductionPlan plan_reduction(const CbclModel& model,
                                    const std::size_t k_new,
                                    const std::size_t budget)
{
  if (budget == 0)
  {
    throw ConfigError("centroid budget must be positive");
  }
  ReductionPlan plan;
  plan.k_new = k_new;
  plan.budget = budget;
  plan.k_t = total_centroids(model);
  std::size_t populated = 0;
  for (const auto& [id, cls] : model.classes())
  {
    plan.per_class_target[id] = cls.centroids.size();
    populated += cls.centroids.empty() ? 0 : 1;
  }
  if (plan.k_t + k_new <= budget)
  {
    return plan;
  }
  if (budget < populated + k_new)
  {
    throw ConfigError("budget " + std::to_string(budget) + " cannot hold "
                      + std::to_string(k_new) + " new centroids plus one per "
                      + "existing class (" + std::to_string(populated) + ")");
  }

  plan.k_r = plan.k_t + k_new - budget;
  const std::size_t keep = budget - k_new;
  for (const auto& [id, cls] : model.classes())
  {
    const std::uint64_t current = cls.centroids.size();
    if (current == 0)
    {
      continue;
    }
    // floor(current * (1 - k_r / k_t)) == floor(current * keep / k_t)
    const std::uint64_t proportional = current * keep / plan.k_t;
    plan.per_class_target[id] =
        static_cast<std::size_t>(std::max<std::uint64_t>(1, proportional));
  }

  std::vector<ClassId> largest_first;
  for (const auto& [id, cls] : model.classes())
  {
    largest_first.push_back(id);
  }
  std::stable_sort(largest_first.begin(), largest_first.end(),
                   [&](const ClassId a, const ClassId b) {
                     return model.at(a).centroids.size()
                            > model.at(b).centroids.size();
                   });
  std::size_t total = plan.total_target();
  while (total > keep)
  {
    for (const ClassId id : largest_first)
    {
      if (total <= keep)
      {
        break;
      }
      auto& target = plan.per_class_target[id];
      if (target > 1)
      {
        --target;
        --total;
      }
    }
  }
  return plan;
}

namespace detail
{
inline std::vector<Centroid> cluster_centroids(const ClassModel& cls,
                                               const std::size_t target,
                                               const std::uint64_t seed,
                                               const KMeansOptions& options)
{
  std::vector<std::vector<double>> points;
  points.reserve(cls.centroids.size());
  for (const auto& c : cls.centroids)
  {
    points.push_back(c.vector);
  }
  const auto fit = kmeans(points, target, seed, options);
  std::vector<Centroid> out(target);
  for (std::size_t c = 0; c < target; ++c)
  {
    out[c].vector = fit.centers[c];
    out[c].weight = 0;
  }
  for (std::size_t i = 0; i < cls.centroids.size(); ++i)
  {
    out[fit.assignment[i]].weight += cls.centroids[i].weight;
  }
  return out;
}

inline std::vector<Centroid> keep_heaviest(const ClassModel& cls,
                                           const std::size_t target)
{
  std::vector<std::size_t> order(cls.centroids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::size_t a, const std::size_t b) {
                     return cls.centroids[a].weight > cls.centroids[b].weight;
                   });
  order.resize(target);
  std::sort(order.begin(), order.end());
  std::vector<Centroid> out;
  out.reserve(target);
  for (const std::size_t i : order)
  {
    out.push_back(cls.centroids[i]);
  }
  return out;
}
}  // namespace detail

/// Shrinks every class to its planned centroid count. Class sample counts are
/// left untouched. The model is only modified once every class has been
/// reduced successfully.
inline void apply_reduction(CbclModel& model, const ReductionPlan& plan,
                            const ReductionMode mode, const std::uint64_t seed,
                            const KMeansOptions& options = {})
{
  std::map<ClassId, std::vector<Centroid>> replaced;
  for (const auto& [id, cls] : model.classes())
  {
    const auto it = plan.per_class_target.find(id);
    if (it == plan.per_class_target.end())
    {
      throw PlanError("plan has no target for class " + std::to_string(id));
    }
    const std::size_t target = it->second;
    const std::size_t current = cls.centroids.size();
    if (target > current)
    {
      throw PlanError("class " + std::to_string(id) + " target "
                      + std::to_string(target) + " exceeds its "
                      + std::to_string(current) + " centroids");
    }
    if (target == 0 && current > 0)
    {
      throw PlanError("class " + std::to_string(id)
                      + " would lose all centroids");
    }
    if (target == current)
    {
      continue;
    }
    replaced[id] = mode == ReductionMode::Cluster
                       ? detail::cluster_centroids(
                             cls, target, detail::mix_seed(seed, id), options)
                       : detail::keep_heaviest(cls, target);
  }
  for (auto& [id, centroids] : replaced)
  {
    model.classes().at(id).centroids = std::move(centroids);
  }
}

/// Plans and applies the reduction needed before inserting `k_new`
/// centroids under `budget`. Returns the plan used.
inline ReductionPlan enforce_budget(CbclModel& model, const std::size_t k_new,
                                    const std::size_t budget,
                                    const ReductionMode mode,
                                    const std::uint64_t seed,
                                    const KMeansOptions& options = {})
{
  auto plan = plan_reduction(model, k_new, budget);
  if (plan.reduces())
  {
    apply_reduction(model, plan, mode, seed, options);
  }
  return plan;
}
}  // namespace cbcl
