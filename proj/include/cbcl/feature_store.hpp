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
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cbcl/detail/binary_io.hpp"
#include "cbcl/detail/seed.hpp"
#include "cbcl/errors.hpp"

namespace cbcl
{
using ClassId = std::uint32_t;

/// One embedded sample: class label plus its feature vector.
struct EmbeddingRecord
{
  ClassId label = 0;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// An ordered list of embeddings sharing one dimension.
struct EmbeddingDataset
{
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;

  bool operator==(const EmbeddingDataset&) const = default;

  std::size_t size() const { return records.size(); }

  void add(const ClassId label, std::vector<float> vector)
  {
    records.push_back(EmbeddingRecord{label, std::move(vector)});
  }

  /// Throws ShapeError on a wrong-length vector, DataError on a non-finite
  /// component, ConfigError on a zero dimension.
  void validate() const
  {
    if (dim == 0)
    {
      throw ConfigError("dataset dimension must be positive");
    }
    for (std::size_t i = 0; i < records.size(); ++i)
    {
      const auto& record = records[i];
      if (record.vector.size() != dim)
      {
        throw ShapeError("record " + std::to_string(i) + " has length "
                         + std::to_string(record.vector.size())
                         + ", dataset dimension is " + std::to_string(dim));
      }
      for (const float v : record.vector)
      {
        if (!std::isfinite(v))
        {
          throw DataError("record " + std::to_string(i)
                          + " has a non-finite component");
        }
      }
    }
  }

  /// class-id -> record indices, in record order.
  std::map<ClassId, std::vector<std::size_t>> class_index() const
  {
    std::map<ClassId, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < records.size(); ++i)
    {
      index[records[i].label].push_back(i);
    }
    return index;
  }

  std::vector<ClassId> labels() const
  {
    std::vector<ClassId> out;
    for (const auto& [label, members] : class_index())
    {
      out.push_back(label);
    }
    return out;
  }

  /// Dataset restricted to the given record indices, in the given order.
  EmbeddingDataset subset(const std::vector<std::size_t>& indices) const
  {
    EmbeddingDataset out;
    out.dim = dim;
    out.records.reserve(indices.size());
    for (const std::size_t i : indices)
    {
      out.records.push_back(records.at(i));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// CEF: "CEF1" | dim u32 | count u64 | count x [label u32 | dim x f32], LE.
// ---------------------------------------------------------------------------

inline void write_cef(const EmbeddingDataset& dataset, std::ostream& out)
{
  dataset.validate();
  out.write("CEF1", 4);
  detail::put_le<std::uint32_t>(out, dataset.dim);
  detail::put_le<std::uint64_t>(out, dataset.records.size());
  for (const auto& record : dataset.records)
  {
    detail::put_le<std::uint32_t>(out, record.label);
    for (const float v : record.vector)
    {
      detail::put_f32(out, v);
    }
  }
  detail::check_sink(out);
}

inline EmbeddingDataset read_cef(std::istream& in)
{
  detail::expect_magic(in, "CEF1");
  EmbeddingDataset dataset;
  dataset.dim = detail::get_le<std::uint32_t>(in, "dim");
  if (dataset.dim == 0)
  {
    throw FormatError("CEF header declares dimension 0");
  }
  const auto count = detail::get_le<std::uint64_t>(in, "record count");
  for (std::uint64_t i = 0; i < count; ++i)
  {
    EmbeddingRecord record;
    record.label = detail::get_le<std::uint32_t>(in, "label");
    record.vector.resize(dataset.dim);
    for (auto& v : record.vector)
    {
      v = detail::get_f32(in, "vector component");
      if (!std::isfinite(v))
      {
        throw DataError("record " + std::to_string(i)
                        + " has a non-finite component");
      }
    }
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

inline void save_cef(const EmbeddingDataset& dataset, const std::string& path)
{
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw IoError("cannot open " + path + " for writing");
  }
  write_cef(dataset, out);
}

inline EmbeddingDataset load_cef(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw IoError("cannot open " + path);
  }
  return read_cef(in);
}

/// CSV import: header `label,f0,...,f{dim-1}`, one record per line.
inline EmbeddingDataset read_csv(std::istream& in)
{
  const auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
    {
      fields.push_back(field);
    }
    return fields;
  };

  std::string line;
  if (!std::getline(in, line))
  {
    throw FormatError("CSV input is empty");
  }
  if (!line.empty() && line.back() == '\r')
  {
    line.pop_back();
  }
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "label")
  {
    throw FormatError("CSV header must be label,f0,...");
  }
  for (std::size_t j = 1; j < header.size(); ++j)
  {
    if (header[j] != "f" + std::to_string(j - 1))
    {
      throw FormatError("unexpected CSV column '" + header[j] + "'");
    }
  }

  EmbeddingDataset dataset;
  dataset.dim = static_cast<std::uint32_t>(header.size() - 1);
  std::size_t line_no = 1;
  while (std::getline(in, line))
  {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (line.empty())
    {
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != header.size())
    {
      throw FormatError("CSV line " + std::to_string(line_no) + " has "
                        + std::to_string(fields.size()) + " fields");
    }
    try
    {
      EmbeddingRecord record;
      const unsigned long label = std::stoul(fields[0]);
      record.label = static_cast<ClassId>(label);
      for (std::size_t j = 1; j < fields.size(); ++j)
      {
        record.vector.push_back(std::stof(fields[j]));
      }
      dataset.records.push_back(std::move(record));
    }
    catch (const std::logic_error&)
    {
      throw FormatError("CSV line " + std::to_string(line_no)
                        + " has an unparsable field");
    }
  }
  dataset.validate();
  return dataset;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian clusters
// ---------------------------------------------------------------------------

struct SyntheticSet
{
  EmbeddingDataset data;
  std::vector<std::vector<double>> means;
};

/// Isotropic Gaussian clusters, one per class, records grouped by class.
/// Means are drawn uniformly from a hypercube of side 10 * separation and
/// rejected until pairwise at least `separation` apart.
inline SyntheticSet generate_synthetic(const std::size_t num_classes,
                                       const std::size_t per_class,
                                       const std::uint32_t dim,
                                       const double separation,
                                       const double spread,
                                       const std::uint64_t seed)
{
  if (num_classes == 0 || per_class == 0 || dim == 0)
  {
    throw ConfigError("synthetic classes, per-class count and dimension must "
                      "be positive");
  }
  if (!(separation > 0.0) || !(spread > 0.0))
  {
    throw ConfigError("synthetic separation and spread must be positive");
  }
  constexpr std::size_t kMaxRetries = 10000;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(0.0, 10.0 * separation);
  SyntheticSet out;
  std::size_t retries = 0;
  while (out.means.size() < num_classes)
  {
    std::vector<double> candidate(dim);
    for (auto& c : candidate)
    {
      c = box(rng);
    }
    const bool clear = std::all_of(
        out.means.begin(), out.means.end(), [&](const auto& mean) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < dim; ++j)
          {
            d2 += (mean[j] - candidate[j]) * (mean[j] - candidate[j]);
          }
          return std::sqrt(d2) >= separation;
        });
    if (clear)
    {
      out.means.push_back(std::move(candidate));
    }
    else if (++retries > kMaxRetries)
    {
      throw ConfigError("could not place " + std::to_string(num_classes)
                        + " class means at separation "
                        + std::to_string(separation));
    }
  }

  std::normal_distribution<double> noise(0.0, spread);
  out.data.dim = dim;
  out.data.records.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c)
  {
    for (std::size_t i = 0; i < per_class; ++i)
    {
      std::vector<float> v(dim);
      for (std::size_t j = 0; j < dim; ++j)
      {
        v[j] = static_cast<float>(out.means[c][j] + noise(rng));
      }
      out.data.add(static_cast<ClassId>(c), std::move(v));
    }
  }
  return out;
}

inline EmbeddingDataset make_synthetic(const std::size_t num_classes,
                                       const std::size_t per_class,
                                       const std::uint32_t dim,
                                       const double separation,
                                       const double spread,
                                       const std::uint64_t seed)
{
  return generate_synthetic(num_classes, per_class, dim, separation, spread,
                            seed)
      .data;
}

// ---------------------------------------------------------------------------
// Increment planning
// ---------------------------------------------------------------------------

/// Class order and per-class sample cap for one run of the protocol.
struct IncrementPlan
{
  std::vector<std::vector<ClassId>> class_batches;
  std::optional<std::size_t> shots;
  std::uint64_t seed = 0;

  bool operator==(const IncrementPlan&) const = default;
};

/// Record indices for one increment. `train` indexes the training dataset,
/// `test` the evaluation dataset (the same dataset when it was split here).
struct IncrementBatch
{
  std::vector<ClassId> classes;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  bool operator==(const IncrementBatch&) const = default;
};

struct IncrementSchedule
{
  IncrementPlan plan;
  std::vector<IncrementBatch> batches;

  bool operator==(const IncrementSchedule&) const = default;
};

using ClassPools = std::map<ClassId, std::vector<std::size_t>>;

/// Seeded per-class split: floor(count / 5) test records, the rest train.
/// Index lists stay in dataset order.
inline std::pair<ClassPools, ClassPools> split_train_test(
    const EmbeddingDataset& dataset, const std::uint64_t seed)
{
  ClassPools train;
  ClassPools test;
  for (const auto& [label, members] : dataset.class_index())
  {
    std::mt19937_64 rng(detail::mix_seed(seed, label));
    auto shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const std::size_t num_test = members.size() / 5;
    std::vector<std::size_t> test_part(shuffled.begin(),
                                       shuffled.begin() + num_test);
    std::vector<std::size_t> train_part(shuffled.begin() + num_test,
                                        shuffled.end());
    std::sort(test_part.begin(), test_part.end());
    std::sort(train_part.begin(), train_part.end());
    train[label] = std::move(train_part);
    test[label] = std::move(test_part);
  }
  return {std::move(train), std::move(test)};
}

/// Shuffles the classes of `train_pools`, partitions them into batches of
/// `classes_per_batch` (the last batch may be smaller) and, with `shots`,
/// samples exactly that many training indices per class without replacement.
inline IncrementSchedule plan_from_pools(const ClassPools& train_pools,
                                         const ClassPools& test_pools,
                                         const std::size_t classes_per_batch,
                                         const std::optional<std::size_t> shots,
                                         const std::uint64_t seed)
{
  if (classes_per_batch == 0)
  {
    throw ConfigError("classes per batch must be positive");
  }
  if (classes_per_batch > train_pools.size())
  {
    throw ConfigError("classes per batch (" + std::to_string(classes_per_batch)
                      + ") exceeds the number of classes ("
                      + std::to_string(train_pools.size()) + ")");
  }
  if (shots && *shots == 0)
  {
    throw ConfigError("shots must be at least 1");
  }

  std::vector<ClassId> order;
  for (const auto& [label, members] : train_pools)
  {
    order.push_back(label);
  }
  std::mt19937_64 order_rng(detail::mix_seed(seed, 0));
  std::shuffle(order.begin(), order.end(), order_rng);

  IncrementSchedule schedule;
  schedule.plan.shots = shots;
  schedule.plan.seed = seed;
  for (std::size_t start = 0; start < order.size(); start += classes_per_batch)
  {
    const std::size_t stop = std::min(order.size(), start + classes_per_batch);
    IncrementBatch batch;
    batch.classes.assign(order.begin() + start, order.begin() + stop);
    for (const ClassId label : batch.classes)
    {
      auto train = train_pools.at(label);
      if (shots)
      {
        if (*shots > train.size())
        {
          throw ConfigError("class " + std::to_string(label) + " has only "
                            + std::to_string(train.size())
                            + " training samples, " + std::to_string(*shots)
                            + " shots requested");
        }
        std::mt19937_64 shot_rng(
            detail::mix_seed(detail::mix_seed(seed, 2), label));
        std::shuffle(train.begin(), train.end(), shot_rng);
        train.resize(*shots);
        std::sort(train.begin(), train.end());
      }
      batch.train.insert(batch.train.end(), train.begin(), train.end());
      if (const auto it = test_pools.find(label); it != test_pools.end())
      {
        batch.test.insert(batch.test.end(), it->second.begin(),
                          it->second.end());
      }
    }
    schedule.plan.class_batches.push_back(batch.classes);
    schedule.batches.push_back(std::move(batch));
  }
  return schedule;
}

/// Plan over a single dataset, split 80/20 per class.
inline IncrementSchedule plan_increments(const EmbeddingDataset& dataset,
                                         const std::size_t classes_per_batch,
                                         const std::optional<std::size_t> shots,
                                         const std::uint64_t seed)
{
  const auto [train, test] = split_train_test(dataset, detail::mix_seed(seed, 1));
  return plan_from_pools(train, test, classes_per_batch, shots, seed);
}

/// Plan over presplit train/test datasets. Test classes absent from the
/// training data are ignored.
inline IncrementSchedule plan_increments(const EmbeddingDataset& train,
                                         const EmbeddingDataset& test,
                                         const std::size_t classes_per_batch,
                                         const std::optional<std::size_t> shots,
                                         const std::uint64_t seed)
{
  return plan_from_pools(train.class_index(), test.class_index(),
                         classes_per_batch, shots, seed);
}
}  // namespace cbcl
