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
#include <iomanip>
#include <map>
#include <ostream>
#include <ranges>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cbcl/errors.hpp"
#include "cbcl/feature_store.hpp"
#include "cbcl/model.hpp"

namespace cbcl
{
/// voting: inverse-distance vote of the n nearest centroids, normalised by
/// each class's training-sample count. single-centroid: voting with n = 1.
/// ncm: nearest weighted class mean.
enum class PredictionMode
{
  Voting,
  Ncm,
  SingleCentroid
};

inline std::string to_string(const PredictionMode mode)
{
  switch (mode)
  {
    case PredictionMode::Voting:
      return "voting";
    case PredictionMode::Ncm:
      return "ncm";
    case PredictionMode::SingleCentroid:
      return "single-centroid";
  }
  return "voting";
}

inline PredictionMode parse_prediction_mode(const std::string& text)
{
  if (text == "voting")
  {
    return PredictionMode::Voting;
  }
  if (text == "ncm")
  {
    return PredictionMode::Ncm;
  }
  if (text == "single-centroid")
  {
    return PredictionMode::SingleCentroid;
  }
  throw ConfigError("unknown prediction mode '" + text + "'");
}

/// Predicted label and the per-class scores it was chosen from. Every class
/// of the model has a score; classes that received no vote score exactly 0.
struct Prediction
{
  ClassId label = 0;
  std::map<ClassId, double> scores;
};

/// Lower bound applied to distances before inversion.
inline constexpr double kMinDistance = 1e-12;

/// Read-only, contiguous snapshot of a model's centroids for repeated
/// classification. Safe to share between threads.
class CentroidIndex
{
public:
  explicit CentroidIndex(const CbclModel& model) : dim_(model.dim())
  {
    for (const auto& [id, cls] : model.classes())
    {
      const std::size_t slot = class_ids_.size();
      class_ids_.push_back(id);
      inv_train_count_.push_back(
          cls.train_count > 0 ? 1.0 / static_cast<double>(cls.train_count)
                              : 0.0);
      std::vector<double> mean(dim_, 0.0);
      double weight_sum = 0.0;
      for (const auto& c : cls.centroids)
      {
        coords_.insert(coords_.end(), c.vector.begin(), c.vector.end());
        owner_.push_back(slot);
        const auto w = static_cast<double>(c.weight);
        for (std::size_t j = 0; j < dim_; ++j)
        {
          mean[j] += w * c.vector[j];
        }
        weight_sum += w;
      }
      has_mean_.push_back(!cls.centroids.empty());
      for (auto& m : mean)
      {
        m = weight_sum > 0.0 ? m / weight_sum : 0.0;
      }
      means_.insert(means_.end(), mean.begin(), mean.end());
    }
    if (owner_.empty())
    {
      throw StateError("model has no centroids");
    }
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t num_centroids() const { return owner_.size(); }
  const std::vector<ClassId>& class_ids() const { return class_ids_; }

  template <typename X>
  Prediction predict(const X& x, const std::size_t n,
                     const PredictionMode mode = PredictionMode::Voting) const
  {
    std::vector<double> scores;
    const std::size_t best = score(x, n, mode, scores);
    Prediction out;
    out.label = class_ids_[best];
    for (std::size_t s = 0; s < class_ids_.size(); ++s)
    {
      out.scores.emplace(class_ids_[s], scores[s]);
    }
    return out;
  }

  template <typename X>
  ClassId predict_label(const X& x, const std::size_t n,
                        const PredictionMode mode = PredictionMode::Voting) const
  {
    std::vector<double> scores;
    return class_ids_[score(x, n, mode, scores)];
  }

private:
  template <typename X>
  double distance_to(const X& x, const double* point) const
  {
    double sum = 0.0;
    for (std::size_t j = 0; j < dim_; ++j)
    {
      const double diff = static_cast<double>(x[j]) - point[j];
      sum += diff * diff;
    }
    return std::max(std::sqrt(sum), kMinDistance);
  }

  /// Fills per-slot scores and returns the winning slot (lowest class id on
  /// ties, since slots follow ascending class id).
  template <typename X>
  std::size_t score(const X& x, std::size_t n, const PredictionMode mode,
                    std::vector<double>& scores) const
  {
    if (static_cast<std::size_t>(std::ranges::size(x)) != dim_)
    {
      throw ShapeError("query has length " + std::to_string(std::ranges::size(x))
                       + ", model dimension is " + std::to_string(dim_));
    }
    if (n == 0)
    {
      throw ArgumentError("vote neighbor count must be at least 1");
    }
    scores.assign(class_ids_.size(), 0.0);
    if (mode == PredictionMode::Ncm)
    {
      for (std::size_t s = 0; s < class_ids_.size(); ++s)
      {
        if (has_mean_[s])
        {
          scores[s] = 1.0 / distance_to(x, means_.data() + s * dim_);
        }
      }
    }
    else
    {
      if (mode == PredictionMode::SingleCentroid)
      {
        n = 1;
      }
      const std::size_t m = owner_.size();
      std::vector<std::pair<double, std::size_t>> dist(m);
      for (std::size_t i = 0; i < m; ++i)
      {
        dist[i] = {distance_to(x, coords_.data() + i * dim_), i};
      }
      const std::size_t take = std::min(n, m);
      std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
      for (std::size_t j = 0; j < take; ++j)
      {
        scores[owner_[dist[j].second]] += 1.0 / dist[j].first;
      }
      for (std::size_t s = 0; s < scores.size(); ++s)
      {
        scores[s] *= inv_train_count_[s];
      }
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < scores.size(); ++s)
    {
      if (scores[s] > scores[best])
      {
        best = s;
      }
    }
    return best;
  }

  std::uint32_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<std::size_t> owner_;
  std::vector<ClassId> class_ids_;
  std::vector<double> inv_train_count_;
  std::vector<double> means_;
  std::vector<bool> has_mean_;
};

/// Weighted vote of the `n` globally nearest centroids (all of them when the
/// model holds fewer than `n`).
template <typename X>
Prediction predict(const CbclModel& model, const X& x, const std::size_t n)
{
  return CentroidIndex(model).predict(x, n, PredictionMode::Voting);
}

/// Nearest class mean, where each class mean is the weight-averaged centroid.
template <typename X>
Prediction predict_ncm(const CbclModel& model, const X& x)
{
  return CentroidIndex(model).predict(x, 1, PredictionMode::Ncm);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Top-1 evaluation outcome. `confusion[t][p]` counts test samples of class
/// `classes[t]` predicted as `classes[p]`.
struct IncrementReport
{
  std::vector<ClassId> classes;
  std::vector<std::vector<std::uint64_t>> confusion;

  bool operator==(const IncrementReport&) const = default;

  std::uint64_t total() const
  {
    std::uint64_t sum = 0;
    for (const auto& row : confusion)
    {
      for (const auto v : row)
      {
        sum += v;
      }
    }
    return sum;
  }

  std::uint64_t correct() const
  {
    std::uint64_t sum = 0;
    for (std::size_t t = 0; t < confusion.size(); ++t)
    {
      sum += confusion[t][t];
    }
    return sum;
  }

  double accuracy() const
  {
    const auto n = total();
    return n == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(n);
  }

  std::uint64_t class_total(const ClassId id) const
  {
    const auto& row = confusion.at(slot(id));
    std::uint64_t sum = 0;
    for (const auto v : row)
    {
      sum += v;
    }
    return sum;
  }

  std::uint64_t class_correct(const ClassId id) const
  {
    const std::size_t s = slot(id);
    return confusion.at(s).at(s);
  }

  /// Accuracy restricted to test samples whose true class is in `ids`.
  /// Returns 0 when those classes have no test samples.
  double accuracy_over(const std::vector<ClassId>& ids) const
  {
    std::uint64_t hit = 0;
    std::uint64_t seen = 0;
    for (const ClassId id : ids)
    {
      hit += class_correct(id);
      seen += class_total(id);
    }
    return seen == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(seen);
  }

  std::map<ClassId, double> per_class_accuracy() const
  {
    std::map<ClassId, double> out;
    for (const ClassId id : classes)
    {
      const auto n = class_total(id);
      if (n > 0)
      {
        out[id] = static_cast<double>(class_correct(id)) / static_cast<double>(n);
      }
    }
    return out;
  }

  /// Adds another report over the same class axis.
  void merge(const IncrementReport& other)
  {
    if (other.classes != classes)
    {
      throw ArgumentError("cannot merge reports over different classes");
    }
    for (std::size_t t = 0; t < confusion.size(); ++t)
    {
      for (std::size_t p = 0; p < confusion[t].size(); ++p)
      {
        confusion[t][p] += other.confusion[t][p];
      }
    }
  }

  std::size_t slot(const ClassId id) const
  {
    const auto it = std::lower_bound(classes.begin(), classes.end(), id);
    if (it == classes.end() || *it != id)
    {
      throw ArgumentError("class " + std::to_string(id) + " not in report");
    }
    return static_cast<std::size_t>(it - classes.begin());
  }
};

inline IncrementReport empty_report(const std::vector<ClassId>& classes)
{
  IncrementReport report;
  report.classes = classes;
  report.confusion.assign(classes.size(),
                          std::vector<std::uint64_t>(classes.size(), 0));
  return report;
}

/// Classifies every record of `test` and tallies a confusion matrix over the
/// model's classes. Work is split into contiguous chunks across `threads`.
inline IncrementReport evaluate(const CbclModel& model,
                                const EmbeddingDataset& test,
                                const std::size_t n,
                                const PredictionMode mode = PredictionMode::Voting,
                                const std::size_t threads = 1)
{
  if (test.dim != model.dim())
  {
    throw ShapeError("test dimension " + std::to_string(test.dim)
                     + " does not match model dimension "
                     + std::to_string(model.dim()));
  }
  const CentroidIndex index(model);
  for (const auto& record : test.records)
  {
    const auto it = model.classes().find(record.label);
    if (it == model.classes().end() || it->second.centroids.empty())
    {
      throw ConfigError("test set contains unseen class "
                        + std::to_string(record.label));
    }
  }

  const auto base = empty_report(index.class_ids());
  const auto run_chunk = [&](const std::size_t begin, const std::size_t end) {
    auto part = base;
    for (std::size_t i = begin; i < end; ++i)
    {
      const auto& record = test.records[i];
      const ClassId predicted = index.predict_label(record.vector, n, mode);
      ++part.confusion[part.slot(record.label)][part.slot(predicted)];
    }
    return part;
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(threads, test.size()));
  if (workers == 1)
  {
    return run_chunk(0, test.size());
  }
  std::vector<IncrementReport> parts(workers);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (test.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w)
    {
      const std::size_t begin = std::min(test.size(), w * chunk);
      const std::size_t end = std::min(test.size(), begin + chunk);
      pool.emplace_back(
          [&, w, begin, end] { parts[w] = run_chunk(begin, end); });
    }
  }
  auto report = base;
  for (const auto& part : parts)
  {
    report.merge(part);
  }
  return report;
}

inline std::string format_real(const double value)
{
  std::ostringstream out;
  out << std::setprecision(12) << value;
  return out.str();
}

/// `metric<TAB>value` lines.
inline void write_report(const IncrementReport& report, std::ostream& out)
{
  out << "accuracy\t" << format_real(report.accuracy()) << '\n';
  out << "samples\t" << report.total() << '\n';
  out << "correct\t" << report.correct() << '\n';
  out << "classes\t" << report.classes.size() << '\n';
  for (const auto& [id, acc] : report.per_class_accuracy())
  {
    out << "class_accuracy." << id << '\t' << format_real(acc) << '\n';
  }
}

/// Rows are true classes, columns predicted classes.
inline void write_confusion_csv(const IncrementReport& report, std::ostream& out)
{
  out << "truth";
  for (const ClassId id : report.classes)
  {
    out << ',' << id;
  }
  out << '\n';
  for (std::size_t t = 0; t < report.classes.size(); ++t)
  {
    out << report.classes[t];
    for (const auto v : report.confusion[t])
    {
      out << ',' << v;
    }
    out << '\n';
  }
}
}  // namespace cbcl
