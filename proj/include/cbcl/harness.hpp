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
#include <exception>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cbcl/classifier.hpp"
#include "cbcl/detail/seed.hpp"
#include "cbcl/errors.hpp"
#include "cbcl/feature_store.hpp"
#include "cbcl/kmeans.hpp"
#include "cbcl/model.hpp"
#include "cbcl/reducer.hpp"
#include "cbcl/tuner.hpp"

namespace cbcl
{
struct ExperimentConfig
{
  std::size_t classes_per_batch = 10;
  /// Few-shot mode: training samples drawn per class.
  std::optional<std::size_t> shots;
  /// Maximum number of stored centroids; unlimited when empty.
  std::optional<std::size_t> budget;
  std::vector<double> d_grid = default_threshold_grid();
  /// Empty selects 1..10, or just 1 in few-shot mode.
  std::vector<std::size_t> n_grid;
  std::size_t folds = 5;
  PredictionMode mode = PredictionMode::Voting;
  ReductionMode reduction = ReductionMode::Cluster;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  /// When false every run reuses `seed`, so all runs are identical.
  bool reseed_runs = true;
  bool shuffle_within_class = false;
  std::optional<double> alpha_offline;
  KMeansOptions kmeans;
  std::size_t threads = 1;

  std::vector<std::size_t> effective_n_grid() const
  {
    if (mode != PredictionMode::Voting)
    {
      return {1};
    }
    if (!n_grid.empty())
    {
      return n_grid;
    }
    return shots ? std::vector<std::size_t>{1} : default_neighbor_grid();
  }

  void validate() const
  {
    if (runs == 0)
    {
      throw ConfigError("runs must be at least 1");
    }
    if (classes_per_batch == 0)
    {
      throw ConfigError("classes_per_batch must be at least 1");
    }
    if (shots && *shots == 0)
    {
      throw ConfigError("shots must be at least 1");
    }
    if (budget && *budget == 0)
    {
      throw ConfigError("budget must be at least 1");
    }
    if (d_grid.empty())
    {
      throw ConfigError("d_grid must be non-empty");
    }
    for (const double d : d_grid)
    {
      if (!(d > 0.0) || !std::isfinite(d))
      {
        throw ConfigError("d_grid values must be positive and finite");
      }
    }
    for (const std::size_t n : n_grid)
    {
      if (n == 0)
      {
        throw ConfigError("n_grid values must be at least 1");
      }
    }
    if (folds == 0)
    {
      throw ConfigError("folds must be at least 1");
    }
    if (alpha_offline && !(*alpha_offline > 0.0 && *alpha_offline <= 1.0))
    {
      throw ConfigError("alpha_offline must lie in (0, 1]");
    }
    if (kmeans.max_iters == 0)
    {
      throw ConfigError("kmeans_max_iters must be at least 1");
    }
  }
};

/// Outcome of one increment of one run.
struct IncrementRecord
{
  std::vector<ClassId> new_classes;
  std::size_t classes_seen = 0;
  Hyperparams params;
  std::size_t k_new = 0;
  bool reduced = false;
  std::size_t centroids = 0;
  IncrementReport report;
  double accuracy = 0.0;
  /// Accuracy on the first increment's classes.
  double alpha_base = 0.0;
  /// Accuracy on this increment's classes.
  double alpha_new = 0.0;
};

struct RunResult
{
  std::uint64_t seed = 0;
  IncrementSchedule schedule;
  std::vector<IncrementRecord> increments;
  double average_incremental_accuracy = 0.0;
  CbclModel final_model;
};

struct OmegaMetrics
{
  double omega_base = 0.0;
  double omega_new = 0.0;
  double omega_all = 0.0;
};

struct ExperimentResult
{
  std::vector<RunResult> runs;
  std::vector<double> accuracy_mean;
  std::vector<double> accuracy_stddev;
  double average_incremental_accuracy_mean = 0.0;
  double average_incremental_accuracy_stddev = 0.0;
  std::optional<OmegaMetrics> omega;
};

/// Per-increment accuracies feeding the retention metrics.
struct IncrementAlphas
{
  double alpha_base = 0.0;
  double alpha_new = 0.0;
  double alpha_all = 0.0;
};

inline double mean_of(std::span<const double> values)
{
  if (values.empty())
  {
    return 0.0;
  }
  double sum = 0.0;
  for (const double v : values)
  {
    sum += v;
  }
  return sum / static_cast<double>(values.size());
}

/// Population standard deviation.
inline double stddev_of(std::span<const double> values)
{
  if (values.size() < 2)
  {
    return 0.0;
  }
  const double mean = mean_of(values);
  double sum = 0.0;
  for (const double v : values)
  {
    sum += (v - mean) * (v - mean);
  }
  return std::sqrt(sum / static_cast<double>(values.size()));
}

/// Mean of the overall top-1 accuracies over every increment, the first
/// included.
inline double average_incremental_accuracy(std::span<const double> accuracies)
{
  return mean_of(accuracies);
}

/// Retention metrics over increments 2..T, with base and overall accuracy
/// normalised by an offline reference accuracy. Values above 1 are valid.
inline OmegaMetrics omega_metrics(std::span<const IncrementAlphas> increments,
                                  const double alpha_offline)
{
  if (increments.size() < 2)
  {
    throw MetricError("retention metrics need at least two increments");
  }
  if (!(alpha_offline > 0.0 && alpha_offline <= 1.0))
  {
    throw ConfigError("alpha_offline must lie in (0, 1]");
  }
  OmegaMetrics out;
  for (std::size_t t = 1; t < increments.size(); ++t)
  {
    out.omega_base += increments[t].alpha_base / alpha_offline;
    out.omega_new += increments[t].alpha_new;
    out.omega_all += increments[t].alpha_all / alpha_offline;
  }
  const auto denom = static_cast<double>(increments.size() - 1);
  out.omega_base /= denom;
  out.omega_new /= denom;
  out.omega_all /= denom;
  return out;
}

inline std::vector<IncrementAlphas> alphas_of(const RunResult& run)
{
  std::vector<IncrementAlphas> out;
  for (const auto& inc : run.increments)
  {
    out.push_back({inc.alpha_base, inc.alpha_new, inc.accuracy});
  }
  return out;
}

/// Retention metrics averaged over runs.
inline OmegaMetrics omega_metrics(const ExperimentResult& result,
                                  const double alpha_offline)
{
  if (result.runs.empty())
  {
    throw MetricError("no runs to compute retention metrics from");
  }
  OmegaMetrics out;
  for (const auto& run : result.runs)
  {
    const auto m = omega_metrics(alphas_of(run), alpha_offline);
    out.omega_base += m.omega_base;
    out.omega_new += m.omega_new;
    out.omega_all += m.omega_all;
  }
  const auto denom = static_cast<double>(result.runs.size());
  out.omega_base /= denom;
  out.omega_new /= denom;
  out.omega_all /= denom;
  return out;
}

/// One run of the class-incremental protocol: per increment, tune, learn the
/// new classes, shrink the old classes to make room under the budget, insert
/// the new classes and evaluate on the test samples of every class seen.
/// `test` may be null, in which case `train` is split 80/20 per class.
inline RunResult run_once(const EmbeddingDataset& train,
                          const EmbeddingDataset* test,
                          const ExperimentConfig& config,
                          const std::uint64_t run_seed,
                          const std::size_t threads)
{
  train.validate();
  if (test != nullptr)
  {
    test->validate();
    if (test->dim != train.dim)
    {
      throw ShapeError("test dimension " + std::to_string(test->dim)
                       + " does not match training dimension "
                       + std::to_string(train.dim));
    }
  }
  RunResult run;
  run.seed = run_seed;
  run.schedule =
      test != nullptr
          ? plan_increments(train, *test, config.classes_per_batch,
                            config.shots, run_seed)
          : plan_increments(train, config.classes_per_batch, config.shots,
                            run_seed);
  const EmbeddingDataset& eval_source = test != nullptr ? *test : train;
  const auto n_grid = config.effective_n_grid();

  CbclModel model(train.dim);
  model.budget = config.budget;
  std::vector<std::size_t> seen_test;
  std::vector<double> accuracies;
  for (std::size_t t = 0; t < run.schedule.batches.size(); ++t)
  {
    const auto& batch = run.schedule.batches[t];
    IncrementRecord record;
    record.new_classes = batch.classes;

    std::map<ClassId, std::vector<std::span<const float>>> samples;
    for (const std::size_t i : batch.train)
    {
      samples[train.records[i].label].emplace_back(train.records[i].vector);
    }
    if (config.shuffle_within_class)
    {
      for (auto& [id, list] : samples)
      {
        std::mt19937_64 rng(
            detail::mix_seed(detail::mix_seed(run_seed, 3), id));
        std::shuffle(list.begin(), list.end(), rng);
      }
    }

    record.params = tune(model, samples, config.d_grid, n_grid, config.folds,
                         detail::mix_seed(detail::mix_seed(run_seed, 4), t),
                         config.mode, threads)
                        .params;

    CbclModel incoming(train.dim);
    for (const auto& [id, list] : samples)
    {
      learn_class(incoming, id, list, record.params.distance_threshold);
    }
    record.k_new = total_centroids(incoming);
    if (config.budget)
    {
      const auto plan = enforce_budget(
          model, record.k_new, *config.budget, config.reduction,
          detail::mix_seed(detail::mix_seed(run_seed, 5), t), config.kmeans);
      record.reduced = plan.reduces();
    }
    for (auto& [id, cls] : incoming.classes())
    {
      if (model.has_class(id))
      {
        throw ConfigError("class " + std::to_string(id)
                          + " appears in more than one increment");
      }
      model.classes().emplace(id, std::move(cls));
    }
    model.threshold_history.insert(model.threshold_history.end(),
                                   incoming.threshold_history.begin(),
                                   incoming.threshold_history.end());
    record.centroids = total_centroids(model);

    seen_test.insert(seen_test.end(), batch.test.begin(), batch.test.end());
    const auto eval_set = eval_source.subset(seen_test);
    if (eval_set.records.empty())
    {
      throw ConfigError("increment " + std::to_string(t + 1)
                        + " has no test samples");
    }
    record.report = evaluate(model, eval_set, record.params.vote_neighbors,
                             config.mode, threads);
    record.accuracy = record.report.accuracy();
    record.alpha_base = record.report.accuracy_over(run.schedule.batches[0].classes);
    record.alpha_new = record.report.accuracy_over(batch.classes);
    std::size_t seen = 0;
    for (std::size_t u = 0; u <= t; ++u)
    {
      seen += run.schedule.batches[u].classes.size();
    }
    record.classes_seen = seen;
    accuracies.push_back(record.accuracy);
    run.increments.push_back(std::move(record));
  }
  run.average_incremental_accuracy = average_incremental_accuracy(accuracies);
  run.final_model = std::move(model);
  return run;
}

/// Runs the protocol `config.runs` times with a fresh class order per run and
/// aggregates across runs. Runs execute in parallel when `config.threads`
/// allows; results do not depend on the thread count.
inline ExperimentResult run_experiment(const EmbeddingDataset& train,
                                       const EmbeddingDataset* test,
                                       const ExperimentConfig& config)
{
  config.validate();
  ExperimentResult result;
  result.runs.resize(config.runs);
  const auto seed_for = [&](const std::size_t r) {
    return config.reseed_runs ? detail::mix_seed(config.seed, r) : config.seed;
  };

  const std::size_t run_workers =
      std::max<std::size_t>(1, std::min(config.threads, config.runs));
  if (run_workers == 1)
  {
    for (std::size_t r = 0; r < config.runs; ++r)
    {
      result.runs[r] = run_once(train, test, config, seed_for(r), config.threads);
    }
  }
  else
  {
    std::vector<std::exception_ptr> errors(run_workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < run_workers; ++w)
      {
        pool.emplace_back([&, w] {
          try
          {
            for (std::size_t r = w; r < config.runs; r += run_workers)
            {
              result.runs[r] = run_once(train, test, config, seed_for(r), 1);
            }
          }
          catch (...)
          {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors)
    {
      if (e)
      {
        std::rethrow_exception(e);
      }
    }
  }

  const std::size_t increments = result.runs.front().increments.size();
  for (std::size_t t = 0; t < increments; ++t)
  {
    std::vector<double> column;
    for (const auto& run : result.runs)
    {
      column.push_back(run.increments.at(t).accuracy);
    }
    result.accuracy_mean.push_back(mean_of(column));
    result.accuracy_stddev.push_back(stddev_of(column));
  }
  std::vector<double> averages;
  for (const auto& run : result.runs)
  {
    averages.push_back(run.average_incremental_accuracy);
  }
  result.average_incremental_accuracy_mean = mean_of(averages);
  result.average_incremental_accuracy_stddev = stddev_of(averages);
  if (config.alpha_offline && increments >= 2)
  {
    result.omega = omega_metrics(result, *config.alpha_offline);
  }
  return result;
}

inline ExperimentResult run_experiment(const EmbeddingDataset& dataset,
                                       const ExperimentConfig& config)
{
  return run_experiment(dataset, nullptr, config);
}

inline ExperimentResult run_experiment(const EmbeddingDataset& train,
                                       const EmbeddingDataset& test,
                                       const ExperimentConfig& config)
{
  return run_experiment(train, &test, config);
}

// ---------------------------------------------------------------------------
// Result output
// ---------------------------------------------------------------------------

inline void write_increments_csv(const ExperimentResult& result,
                                 std::ostream& out)
{
  out << "run,seed,increment,classes_seen,threshold,neighbors,k_new,reduced,"
         "centroids,accuracy,alpha_base,alpha_new\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r)
  {
    const auto& run = result.runs[r];
    for (std::size_t t = 0; t < run.increments.size(); ++t)
    {
      const auto& inc = run.increments[t];
      out << r << ',' << run.seed << ',' << t + 1 << ',' << inc.classes_seen
          << ',' << format_real(inc.params.distance_threshold) << ','
          << inc.params.vote_neighbors << ',' << inc.k_new << ','
          << (inc.reduced ? 1 : 0) << ',' << inc.centroids << ','
          << format_real(inc.accuracy) << ',' << format_real(inc.alpha_base)
          << ',' << format_real(inc.alpha_new) << '\n';
    }
  }
}

/// `metric<TAB>value` lines.
inline void write_summary(const ExperimentResult& result, std::ostream& out)
{
  out << "runs\t" << result.runs.size() << '\n';
  out << "increments\t" << result.accuracy_mean.size() << '\n';
  out << "average_incremental_accuracy_mean\t"
      << format_real(result.average_incremental_accuracy_mean) << '\n';
  out << "average_incremental_accuracy_stddev\t"
      << format_real(result.average_incremental_accuracy_stddev) << '\n';
  if (!result.accuracy_mean.empty())
  {
    out << "final_accuracy_mean\t" << format_real(result.accuracy_mean.back())
        << '\n';
    out << "final_accuracy_stddev\t"
        << format_real(result.accuracy_stddev.back()) << '\n';
  }
  for (std::size_t t = 0; t < result.accuracy_mean.size(); ++t)
  {
    out << "accuracy_mean." << t + 1 << '\t'
        << format_real(result.accuracy_mean[t]) << '\n';
    out << "accuracy_stddev." << t + 1 << '\t'
        << format_real(result.accuracy_stddev[t]) << '\n';
  }
  if (result.omega)
  {
    out << "omega_base\t" << format_real(result.omega->omega_base) << '\n';
    out << "omega_new\t" << format_real(result.omega->omega_new) << '\n';
    out << "omega_all\t" << format_real(result.omega->omega_all) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Config file: flat key=value lines, '#' starts a comment.
// ---------------------------------------------------------------------------

/// Paths named by a config file (train, test, output CSV, summary),
/// resolved against the file's directory.
struct ExperimentFiles
{
  std::string train;
  std::string test;
  std::string output;
  std::string summary;
};

namespace detail
{
inline std::string trim(const std::string& text)
{
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos)
  {
    return "";
  }
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

inline std::uint64_t parse_unsigned(const std::string& key,
                                    const std::string& value)
{
  try
  {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-')
    {
      throw std::invalid_argument(value);
    }
    const auto parsed = std::stoull(value, &used);
    if (used != value.size())
    {
      throw std::invalid_argument(value);
    }
    return parsed;
  }
  catch (const std::logic_error&)
  {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '"
                      + value + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& value)
{
  try
  {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size())
    {
      throw std::invalid_argument(value);
    }
    return parsed;
  }
  catch (const std::logic_error&)
  {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value)
{
  if (value == "true" || value == "1" || value == "yes")
  {
    return true;
  }
  if (value == "false" || value == "0" || value == "no")
  {
    return false;
  }
  throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value)
{
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    item = trim(item);
    if (!item.empty())
    {
      out.push_back(item);
    }
  }
  return out;
}
}  // namespace detail

/// Applies one `key=value` setting. Unknown keys raise ConfigError. `none`
/// clears the optional settings (shots, budget, alpha_offline).
inline void apply_setting(ExperimentConfig& config, const std::string& key,
                          const std::string& value)
{
  using detail::parse_bool;
  using detail::parse_real;
  using detail::parse_unsigned;
  if (key == "classes_per_batch")
  {
    config.classes_per_batch = parse_unsigned(key, value);
  }
  else if (key == "shots")
  {
    config.shots = value == "none" ? std::nullopt
                                   : std::optional<std::size_t>(parse_unsigned(key, value));
  }
  else if (key == "budget")
  {
    config.budget = value == "none" ? std::nullopt
                                    : std::optional<std::size_t>(parse_unsigned(key, value));
  }
  else if (key == "d_grid")
  {
    config.d_grid.clear();
    for (const auto& item : detail::split_list(value))
    {
      config.d_grid.push_back(parse_real(key, item));
    }
  }
  else if (key == "n_grid")
  {
    config.n_grid.clear();
    for (const auto& item : detail::split_list(value))
    {
      config.n_grid.push_back(parse_unsigned(key, item));
    }
  }
  else if (key == "folds")
  {
    config.folds = parse_unsigned(key, value);
  }
  else if (key == "mode")
  {
    config.mode = parse_prediction_mode(value);
  }
  else if (key == "reduction")
  {
    config.reduction = parse_reduction_mode(value);
  }
  else if (key == "runs")
  {
    config.runs = parse_unsigned(key, value);
  }
  else if (key == "seed")
  {
    config.seed = parse_unsigned(key, value);
  }
  else if (key == "reseed_runs")
  {
    config.reseed_runs = parse_bool(key, value);
  }
  else if (key == "shuffle_within_class")
  {
    config.shuffle_within_class = parse_bool(key, value);
  }
  else if (key == "alpha_offline")
  {
    config.alpha_offline = value == "none"
                               ? std::nullopt
                               : std::optional<double>(parse_real(key, value));
  }
  else if (key == "threads")
  {
    config.threads = parse_unsigned(key, value);
  }
  else if (key == "kmeans_max_iters")
  {
    config.kmeans.max_iters = parse_unsigned(key, value);
  }
  else if (key == "kmeans_tol")
  {
    config.kmeans.tol = parse_real(key, value);
  }
  else if (key == "kmeans_restarts")
  {
    config.kmeans.restarts = parse_unsigned(key, value);
  }
  else
  {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parses a config stream. Path keys (train, test, output) are resolved
/// against `base_dir` when relative.
inline std::pair<ExperimentConfig, ExperimentFiles> parse_config(
    std::istream& in, const std::filesystem::path& base_dir = {})
{
  ExperimentConfig config;
  ExperimentFiles files;
  const auto resolve = [&](const std::string& value) {
    const std::filesystem::path p(value);
    return (p.is_absolute() || base_dir.empty() ? p : base_dir / p).string();
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
    {
      line.erase(hash);
    }
    line = detail::trim(line);
    if (line.empty())
    {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError("config line " + std::to_string(line_no)
                        + " is not key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "train")
    {
      files.train = resolve(value);
    }
    else if (key == "test")
    {
      files.test = resolve(value);
    }
    else if (key == "output")
    {
      files.output = resolve(value);
    }
    else if (key == "summary")
    {
      files.summary = resolve(value);
    }
    else
    {
      apply_setting(config, key, value);
    }
  }
  return {config, files};
}
}  // namespace cbcl
