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
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <ranges>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cbcl/detail/binary_io.hpp"
#include "cbcl/errors.hpp"
#include "cbcl/feature_store.hpp"

namespace cbcl
{
/// A cluster center and the number of samples merged into it.
struct Centroid
{
  std::vector<double> vector;
  std::uint64_t weight = 1;

  bool operator==(const Centroid&) const = default;
};

/// Centroid set of one class plus the number of training samples it has seen.
/// `train_count` keeps counting every sample ever learned, so it stays the
/// class-imbalance normaliser even after centroids are dropped.
struct ClassModel
{
  ClassId class_id = 0;
  std::vector<Centroid> centroids;
  std::uint64_t train_count = 0;

  bool operator==(const ClassModel&) const = default;

  std::uint64_t total_weight() const
  {
    std::uint64_t sum = 0;
    for (const auto& c : centroids)
    {
      sum += c.weight;
    }
    return sum;
  }
};

struct Hyperparams
{
  double distance_threshold = 70.0;
  std::size_t vote_neighbors = 1;

  bool operator==(const Hyperparams&) const = default;

  void validate() const
  {
    if (!(distance_threshold > 0.0) || !std::isfinite(distance_threshold))
    {
      throw ConfigError("distance threshold must be a positive finite number");
    }
    if (vote_neighbors == 0)
    {
      throw ConfigError("vote neighbor count must be at least 1");
    }
  }
};

/// All class models learned so far. Only `dim` and `classes` are persisted
/// and take part in equality; `budget` and `threshold_history` are run-time
/// bookkeeping.
class CbclModel
{
public:
  CbclModel() = default;
  explicit CbclModel(const std::uint32_t dim) : dim_(dim)
  {
    if (dim == 0)
    {
      throw ConfigError("model dimension must be positive");
    }
  }

  std::uint32_t dim() const { return dim_; }

  const std::map<ClassId, ClassModel>& classes() const { return classes_; }
  std::map<ClassId, ClassModel>& classes() { return classes_; }

  bool has_class(const ClassId id) const { return classes_.contains(id); }
  const ClassModel& at(const ClassId id) const { return classes_.at(id); }

  std::optional<std::size_t> budget;
  std::vector<std::pair<ClassId, double>> threshold_history;

  bool operator==(const CbclModel& other) const
  {
    return dim_ == other.dim_ && classes_ == other.classes_;
  }

  /// Throws DataError / ShapeError when a class model breaks its invariants.
  void validate() const
  {
    for (const auto& [id, cls] : classes_)
    {
      if (cls.class_id != id)
      {
        throw DataError("class model keyed by " + std::to_string(id)
                        + " carries id " + std::to_string(cls.class_id));
      }
      if (cls.centroids.empty() != (cls.train_count == 0))
      {
        throw DataError("class " + std::to_string(id)
                        + " must have centroids iff it has training samples");
      }
      for (const auto& c : cls.centroids)
      {
        if (c.weight == 0)
        {
          throw DataError("class " + std::to_string(id)
                          + " has a centroid with weight 0");
        }
        if (c.vector.size() != dim_)
        {
          throw ShapeError("class " + std::to_string(id)
                           + " has a centroid of length "
                           + std::to_string(c.vector.size()));
        }
        for (const double v : c.vector)
        {
          if (!std::isfinite(v))
          {
            throw DataError("class " + std::to_string(id)
                            + " has a non-finite centroid component");
          }
        }
      }
      if (cls.total_weight() > cls.train_count)
      {
        throw DataError("class " + std::to_string(id)
                        + " has centroid weights exceeding its sample count");
      }
    }
  }

private:
  std::uint32_t dim_ = 0;
  std::map<ClassId, ClassModel> classes_;
};

inline std::size_t total_centroids(const CbclModel& model)
{
  std::size_t total = 0;
  for (const auto& [id, cls] : model.classes())
  {
    total += cls.centroids.size();
  }
  return total;
}

namespace detail
{
template <typename A, typename B>
inline double euclidean(const A& a, const B& b, const std::size_t dim)
{
  double sum = 0.0;
  for (std::size_t j = 0; j < dim; ++j)
  {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

/// Merge `x` into its nearest centroid if closer than `threshold`, otherwise
/// open a new centroid at `x`. Ties resolve to the lowest centroid index.
template <typename Sample>
inline void agg_var_step(ClassModel& cls, const Sample& x,
                         const std::size_t dim, const double threshold)
{
  if (cls.centroids.empty())
  {
    cls.centroids.push_back(
        Centroid{std::vector<double>(std::begin(x), std::end(x)), 1});
    return;
  }
  std::size_t nearest = 0;
  double nearest_distance = euclidean(cls.centroids[0].vector, x, dim);
  for (std::size_t l = 1; l < cls.centroids.size(); ++l)
  {
    const double d = euclidean(cls.centroids[l].vector, x, dim);
    if (d < nearest_distance)
    {
      nearest = l;
      nearest_distance = d;
    }
  }
  if (nearest_distance < threshold)
  {
    auto& c = cls.centroids[nearest];
    const auto w = static_cast<double>(c.weight);
    for (std::size_t j = 0; j < dim; ++j)
    {
      c.vector[j] = (w * c.vector[j] + static_cast<double>(x[j])) / (w + 1.0);
    }
    ++c.weight;
  }
  else
  {
    cls.centroids.push_back(
        Centroid{std::vector<double>(std::begin(x), std::end(x)), 1});
  }
}
}  // namespace detail

/// Learns (or continues learning) `class_id` from `samples` in the given
/// order with online threshold clustering. `samples` is any range of
/// fixed-length numeric ranges. Other classes are not touched. The model is
/// left unchanged if any argument is rejected.
template <typename Samples>
void learn_class(CbclModel& model, const ClassId class_id,
                 const Samples& samples, const double distance_threshold)
{
  if (model.dim() == 0)
  {
    throw StateError("model has no dimension");
  }
  if (std::ranges::empty(samples))
  {
    throw ArgumentError("no samples given for class "
                        + std::to_string(class_id));
  }
  if (!(distance_threshold > 0.0) || !std::isfinite(distance_threshold))
  {
    throw ArgumentError("distance threshold must be a positive finite number");
  }
  std::size_t count = 0;
  for (const auto& x : samples)
  {
    if (static_cast<std::size_t>(std::ranges::size(x)) != model.dim())
    {
      throw ShapeError("sample " + std::to_string(count) + " has length "
                       + std::to_string(std::ranges::size(x))
                       + ", model dimension is "
                       + std::to_string(model.dim()));
    }
    for (const auto v : x)
    {
      if (!std::isfinite(static_cast<double>(v)))
      {
        throw DataError("sample " + std::to_string(count)
                        + " has a non-finite component");
      }
    }
    ++count;
  }

  auto [it, inserted] = model.classes().try_emplace(class_id);
  ClassModel& cls = it->second;
  cls.class_id = class_id;
  for (const auto& x : samples)
  {
    detail::agg_var_step(cls, x, model.dim(), distance_threshold);
  }
  cls.train_count += count;
  model.threshold_history.emplace_back(class_id, distance_threshold);
}

/// Learns every class present in `dataset` (records of a class in dataset
/// order), with one threshold for all classes.
inline void learn_dataset(CbclModel& model, const EmbeddingDataset& dataset,
                          const double distance_threshold)
{
  if (dataset.dim != model.dim())
  {
    throw ShapeError("dataset dimension " + std::to_string(dataset.dim)
                     + " does not match model dimension "
                     + std::to_string(model.dim()));
  }
  for (const auto& [label, members] : dataset.class_index())
  {
    std::vector<std::span<const float>> samples;
    samples.reserve(members.size());
    for (const std::size_t i : members)
    {
      samples.emplace_back(dataset.records[i].vector);
    }
    learn_class(model, label, samples, distance_threshold);
  }
}

// ---------------------------------------------------------------------------
// CMF: "CMF1" | dim u32 | num_classes u32 | per class [class_id u32 |
// N_y u64 | num_centroids u32 | per centroid [w u64 | dim x f32]], LE.
// Centroid components are narrowed to f32 on save.
// ---------------------------------------------------------------------------

inline void save_model(const CbclModel& model, std::ostream& out)
{
  model.validate();
  out.write("CMF1", 4);
  detail::put_le<std::uint32_t>(out, model.dim());
  detail::put_le<std::uint32_t>(out,
                                static_cast<std::uint32_t>(model.classes().size()));
  for (const auto& [id, cls] : model.classes())
  {
    detail::put_le<std::uint32_t>(out, id);
    detail::put_le<std::uint64_t>(out, cls.train_count);
    detail::put_le<std::uint32_t>(
        out, static_cast<std::uint32_t>(cls.centroids.size()));
    for (const auto& c : cls.centroids)
    {
      detail::put_le<std::uint64_t>(out, c.weight);
      for (const double v : c.vector)
      {
        detail::put_f32(out, static_cast<float>(v));
      }
    }
  }
  detail::check_sink(out);
}

inline CbclModel load_model(std::istream& in)
{
  detail::expect_magic(in, "CMF1");
  const auto dim = detail::get_le<std::uint32_t>(in, "dim");
  if (dim == 0)
  {
    throw FormatError("CMF header declares dimension 0");
  }
  CbclModel model(dim);
  const auto num_classes = detail::get_le<std::uint32_t>(in, "class count");
  for (std::uint32_t k = 0; k < num_classes; ++k)
  {
    ClassModel cls;
    cls.class_id = detail::get_le<std::uint32_t>(in, "class id");
    cls.train_count = detail::get_le<std::uint64_t>(in, "train count");
    const auto num_centroids =
        detail::get_le<std::uint32_t>(in, "centroid count");
    for (std::uint32_t l = 0; l < num_centroids; ++l)
    {
      Centroid c;
      c.weight = detail::get_le<std::uint64_t>(in, "centroid weight");
      c.vector.resize(dim);
      for (auto& v : c.vector)
      {
        v = detail::get_f32(in, "centroid component");
      }
      cls.centroids.push_back(std::move(c));
    }
    if (model.has_class(cls.class_id))
    {
      throw FormatError("duplicate class id " + std::to_string(cls.class_id));
    }
    model.classes().emplace(cls.class_id, std::move(cls));
  }
  model.validate();
  return model;
}

inline void save_model(const CbclModel& model, const std::string& path)
{
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw IoError("cannot open " + path + " for writing");
  }
  save_model(model, out);
}

inline CbclModel load_model(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw IoError("cannot open " + path);
  }
  return load_model(in);
}
}  // namespace cbcl
