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

// Command-line front end for the cbcl library.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbcl/cbcl.hpp"

namespace
{
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

bool ends_with(const std::string& text, const std::string& suffix)
{
  return text.size() >= suffix.size()
         && text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// CEF by default, CSV when the path ends in ".csv".
cbcl::EmbeddingDataset load_embeddings(const std::string& path)
{
  if (ends_with(path, ".csv"))
  {
    std::ifstream in(path);
    if (!in)
    {
      throw cbcl::IoError("cannot open " + path);
    }
    return cbcl::read_csv(in);
  }
  return cbcl::load_cef(path);
}

std::ofstream open_output(const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw cbcl::IoError("cannot open " + path + " for writing");
  }
  return out;
}

void check_written(const std::ofstream& out, const std::string& path)
{
  if (!out)
  {
    throw cbcl::IoError("write to " + path + " failed");
  }
}

struct SynthArgs
{
  std::size_t classes = 10;
  std::size_t per_class = 100;
  std::uint32_t dim = 16;
  double separation = 50.0;
  double spread = 1.0;
  std::uint64_t seed = 0;
  std::string output;
  std::string csv;
};

int run_synth(const SynthArgs& args)
{
  const auto data = cbcl::make_synthetic(args.classes, args.per_class, args.dim,
                                         args.separation, args.spread, args.seed);
  cbcl::save_cef(data, args.output);
  std::cout << "wrote " << data.size() << " records of dimension " << data.dim
            << " to " << args.output << '\n';
  return 0;
}

struct LearnArgs
{
  std::string input;
  std::string output;
  std::string base_model;
  double threshold = 70.0;
  std::optional<std::size_t> budget;
  std::string reduction = "cluster";
  bool shuffle = false;
  std::uint64_t seed = 0;
};

int run_learn(const LearnArgs& args)
{
  const auto data = load_embeddings(args.input);
  data.validate();
  cbcl::CbclModel model = args.base_model.empty()
                              ? cbcl::CbclModel(data.dim)
                              : cbcl::load_model(args.base_model);
  if (model.dim() != data.dim)
  {
    throw cbcl::ShapeError("dataset dimension " + std::to_string(data.dim)
                           + " does not match model dimension "
                           + std::to_string(model.dim()));
  }

  cbcl::CbclModel incoming(data.dim);
  for (auto [label, members] : data.class_index())
  {
    if (args.shuffle)
    {
      std::mt19937_64 rng(cbcl::detail::mix_seed(args.seed, label));
      std::shuffle(members.begin(), members.end(), rng);
    }
    std::vector<std::span<const float>> samples;
    for (const std::size_t i : members)
    {
      samples.emplace_back(data.records[i].vector);
    }
    if (model.has_class(label))
    {
      if (args.budget)
      {
        throw cbcl::ConfigError("class " + std::to_string(label)
                                + " already exists; cannot extend existing "
                                  "classes under a budget");
      }
      cbcl::learn_class(model, label, samples, args.threshold);
    }
    else
    {
      cbcl::learn_class(incoming, label, samples, args.threshold);
    }
  }
  const std::size_t k_new = cbcl::total_centroids(incoming);
  if (args.budget)
  {
    const auto plan = cbcl::enforce_budget(
        model, k_new, *args.budget, cbcl::parse_reduction_mode(args.reduction),
        args.seed);
    if (plan.reduces())
    {
      std::cout << "reduced stored centroids from " << plan.k_t << " to "
                << plan.total_target() << '\n';
    }
  }
  for (auto& [id, cls] : incoming.classes())
  {
    model.classes().emplace(id, std::move(cls));
  }
  cbcl::save_model(model, args.output);
  std::cout << "model: " << model.classes().size() << " classes, "
            << cbcl::total_centroids(model) << " centroids -> " << args.output
            << '\n';
  return 0;
}

struct ClassifyArgs
{
  std::string model;
  std::string input;
  std::string output;
  std::string confusion;
  std::size_t n = 1;
  std::string mode = "voting";
  std::size_t threads = 1;
};

int run_predict(const ClassifyArgs& args)
{
  const auto model = cbcl::load_model(args.model);
  const auto data = load_embeddings(args.input);
  if (data.dim != model.dim())
  {
    throw cbcl::ShapeError("dataset dimension " + std::to_string(data.dim)
                           + " does not match model dimension "
                           + std::to_string(model.dim()));
  }
  const auto mode = cbcl::parse_prediction_mode(args.mode);
  const cbcl::CentroidIndex index(model);
  auto out = open_output(args.output);
  out << "index,label,predicted\n";
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    out << i << ',' << data.records[i].label << ','
        << index.predict_label(data.records[i].vector, args.n, mode) << '\n';
  }
  check_written(out, args.output);
  return 0;
}

int run_evaluate(const ClassifyArgs& args)
{
  const auto model = cbcl::load_model(args.model);
  const auto data = load_embeddings(args.input);
  const auto report = cbcl::evaluate(model, data, args.n,
                                     cbcl::parse_prediction_mode(args.mode),
                                     args.threads);
  if (args.output.empty())
  {
    cbcl::write_report(report, std::cout);
  }
  else
  {
    auto out = open_output(args.output);
    cbcl::write_report(report, out);
    check_written(out, args.output);
  }
  if (!args.confusion.empty())
  {
    auto out = open_output(args.confusion);
    cbcl::write_confusion_csv(report, out);
    check_written(out, args.confusion);
  }
  return 0;
}

struct ReduceArgs
{
  std::string model;
  std::string output;
  std::size_t budget = 0;
  std::size_t k_new = 0;
  std::string reduction = "cluster";
  std::uint64_t seed = 0;
};

int run_reduce(const ReduceArgs& args)
{
  auto model = cbcl::load_model(args.model);
  const auto plan =
      cbcl::enforce_budget(model, args.k_new, args.budget,
                           cbcl::parse_reduction_mode(args.reduction), args.seed);
  cbcl::save_model(model, args.output);
  std::cout << "centroids " << plan.k_t << " -> "
            << cbcl::total_centroids(model) << " (budget " << args.budget
            << ", reserved " << args.k_new << ")\n";
  return 0;
}

struct TuneArgs
{
  std::string input;
  std::string model;
  std::vector<double> d_grid = cbcl::default_threshold_grid();
  std::vector<std::size_t> n_grid = cbcl::default_neighbor_grid();
  std::size_t folds = 5;
  std::string mode = "voting";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

int run_tune(const TuneArgs& args)
{
  const auto data = load_embeddings(args.input);
  data.validate();
  const cbcl::CbclModel model = args.model.empty()
                                    ? cbcl::CbclModel(data.dim)
                                    : cbcl::load_model(args.model);
  if (model.dim() != data.dim)
  {
    throw cbcl::ShapeError("dataset dimension " + std::to_string(data.dim)
                           + " does not match model dimension "
                           + std::to_string(model.dim()));
  }
  std::map<cbcl::ClassId, std::vector<std::span<const float>>> samples;
  for (const auto& record : data.records)
  {
    samples[record.label].emplace_back(record.vector);
  }
  const auto result =
      cbcl::tune(model, samples, args.d_grid, args.n_grid, args.folds,
                 args.seed, cbcl::parse_prediction_mode(args.mode), args.threads);
  std::cout << "threshold\t" << cbcl::format_real(result.params.distance_threshold)
            << '\n'
            << "neighbors\t" << result.params.vote_neighbors << '\n'
            << "folds\t" << result.folds << '\n'
            << "accuracy\t" << cbcl::format_real(result.accuracy) << '\n';
  return 0;
}

struct RunArgs
{
  std::string config;
  std::string train;
  std::string test;
  std::string output;
  std::string summary;
  std::vector<std::pair<std::string, std::string>> overrides;
};

int run_run(const RunArgs& args)
{
  std::ifstream in(args.config);
  if (!in)
  {
    throw cbcl::IoError("cannot open " + args.config);
  }
  auto [config, files] = cbcl::parse_config(
      in, std::filesystem::path(args.config).parent_path());
  for (const auto& [key, value] : args.overrides)
  {
    cbcl::apply_setting(config, key, value);
  }
  if (!args.train.empty())
  {
    files.train = args.train;
  }
  if (!args.test.empty())
  {
    files.test = args.test;
  }
  if (!args.output.empty())
  {
    files.output = args.output;
  }
  if (!args.summary.empty())
  {
    files.summary = args.summary;
  }
  if (files.train.empty())
  {
    throw cbcl::ConfigError("no training data: set train= in the config or "
                            "pass --train");
  }
  if (files.output.empty())
  {
    throw cbcl::ConfigError("no output path: set output= in the config or "
                            "pass --output");
  }

  const auto train = load_embeddings(files.train);
  std::optional<cbcl::EmbeddingDataset> test;
  if (!files.test.empty())
  {
    test = load_embeddings(files.test);
  }
  const auto result = cbcl::run_experiment(train, test ? &*test : nullptr, config);

  auto out = open_output(files.output);
  cbcl::write_increments_csv(result, out);
  check_written(out, files.output);
  if (!files.summary.empty())
  {
    auto summary = open_output(files.summary);
    cbcl::write_summary(result, summary);
    check_written(summary, files.summary);
  }
  cbcl::write_summary(result, std::cout);
  return 0;
}
}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Centroid-based class-incremental learning over feature "
               "embeddings"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate Gaussian-cluster embeddings as a CEF file");
  synth_cmd->add_option("--classes", synth.classes, "Number of classes")
      ->capture_default_str();
  synth_cmd->add_option("--per-class", synth.per_class, "Samples per class")
      ->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "Embedding dimension")
      ->capture_default_str();
  synth_cmd->add_option("--sep", synth.separation,
                        "Minimum distance between class means")
      ->capture_default_str();
  synth_cmd->add_option("--spread", synth.spread,
                        "Per-coordinate standard deviation")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("-o,--output", synth.output, "Output CEF path")->required();

  LearnArgs learn;
  auto* learn_cmd =
      app.add_subcommand("learn", "Learn class centroids from a CEF/CSV file");
  learn_cmd->add_option("-i,--input", learn.input, "Training embeddings")
      ->required();
  learn_cmd->add_option("-o,--output", learn.output, "Output CMF model")
      ->required();
  learn_cmd->add_option("--model", learn.base_model,
                        "Existing CMF model to extend");
  learn_cmd->add_option("-d,--threshold", learn.threshold,
                        "Distance threshold for merging into a centroid")
      ->capture_default_str();
  learn_cmd->add_option("--budget", learn.budget, "Maximum stored centroids");
  learn_cmd->add_option("--reduction", learn.reduction,
                        "Budget reduction: cluster|remove")
      ->check(CLI::IsMember({"cluster", "remove"}))
      ->capture_default_str();
  learn_cmd->add_flag("--shuffle", learn.shuffle,
                      "Shuffle sample order within each class");
  learn_cmd->add_option("--seed", learn.seed, "Random seed")->capture_default_str();

  ClassifyArgs predict;
  auto* predict_cmd =
      app.add_subcommand("predict", "Write predicted labels as CSV");
  predict_cmd->add_option("-m,--model", predict.model, "CMF model")->required();
  predict_cmd->add_option("-i,--input", predict.input, "Embeddings to classify")
      ->required();
  predict_cmd->add_option("-o,--output", predict.output, "Output labels CSV")
      ->required();
  predict_cmd->add_option("-n,--neighbors", predict.n,
                          "Nearest centroids that vote")
      ->capture_default_str();
  predict_cmd->add_option("--mode", predict.mode,
                          "voting|ncm|single-centroid")
      ->check(CLI::IsMember({"voting", "ncm", "single-centroid"}))
      ->capture_default_str();

  ClassifyArgs eval;
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Top-1 accuracy report and confusion matrix");
  eval_cmd->add_option("-m,--model", eval.model, "CMF model")->required();
  eval_cmd->add_option("-i,--input", eval.input, "Labelled test embeddings")
      ->required();
  eval_cmd->add_option("-o,--output", eval.output,
                       "Report path (default: stdout)");
  eval_cmd->add_option("--confusion", eval.confusion, "Confusion matrix CSV");
  eval_cmd->add_option("-n,--neighbors", eval.n, "Nearest centroids that vote")
      ->capture_default_str();
  eval_cmd->add_option("--mode", eval.mode, "voting|ncm|single-centroid")
      ->check(CLI::IsMember({"voting", "ncm", "single-centroid"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval.threads, "Worker threads")
      ->capture_default_str();

  ReduceArgs reduce;
  auto* reduce_cmd = app.add_subcommand(
      "reduce", "Shrink a model to fit a centroid budget");
  reduce_cmd->add_option("-m,--model", reduce.model, "Input CMF model")
      ->required();
  reduce_cmd->add_option("-o,--output", reduce.output, "Output CMF model")
      ->required();
  reduce_cmd->add_option("--budget", reduce.budget, "Maximum stored centroids")
      ->required();
  reduce_cmd->add_option("--new", reduce.k_new,
                         "Centroids to reserve for incoming classes")
      ->capture_default_str();
  reduce_cmd->add_option("--reduction", reduce.reduction, "cluster|remove")
      ->check(CLI::IsMember({"cluster", "remove"}))
      ->capture_default_str();
  reduce_cmd->add_option("--seed", reduce.seed, "Random seed")
      ->capture_default_str();

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand(
      "tune", "Cross-validate threshold and vote size on new-class data");
  tune_cmd->add_option("-i,--input", tune.input, "New-class embeddings")
      ->required();
  tune_cmd->add_option("-m,--model", tune.model,
                       "Existing CMF model (default: empty)");
  tune_cmd->add_option("--d-grid", tune.d_grid, "Threshold candidates")
      ->delimiter(',');
  tune_cmd->add_option("--n-grid", tune.n_grid, "Vote size candidates")
      ->delimiter(',');
  tune_cmd->add_option("--folds", tune.folds, "Cross-validation folds")
      ->capture_default_str();
  tune_cmd->add_option("--mode", tune.mode, "voting|ncm|single-centroid")
      ->check(CLI::IsMember({"voting", "ncm", "single-centroid"}))
      ->capture_default_str();
  tune_cmd->add_option("--seed", tune.seed, "Random seed")->capture_default_str();
  tune_cmd->add_option("--threads", tune.threads, "Worker threads")
      ->capture_default_str();

  RunArgs run;
  auto* run_cmd =
      app.add_subcommand("run", "Run an incremental-learning experiment");
  run_cmd->add_option("-c,--config", run.config, "key=value config file")
      ->required();
  run_cmd->add_option("--train", run.train, "Training embeddings");
  run_cmd->add_option("--test", run.test, "Test embeddings (default: 80/20 split)");
  run_cmd->add_option("-o,--output", run.output, "Per-increment CSV");
  run_cmd->add_option("--summary", run.summary, "Summary file");
  // Overrides for config keys, applied after the file.
  const std::vector<std::pair<std::string, std::string>> override_flags = {
      {"--mode", "mode"},
      {"--reduction", "reduction"},
      {"--shots", "shots"},
      {"--budget", "budget"},
      {"--runs", "runs"},
      {"--seed", "seed"},
      {"--classes-per-batch", "classes_per_batch"},
      {"--d-grid", "d_grid"},
      {"--n-grid", "n_grid"},
      {"--folds", "folds"},
      {"--alpha-offline", "alpha_offline"},
      {"--threads", "threads"},
  };
  std::vector<std::string> override_values(override_flags.size());
  for (std::size_t i = 0; i < override_flags.size(); ++i)
  {
    run_cmd->add_option(override_flags[i].first, override_values[i],
                        "Overrides config key " + override_flags[i].second);
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp&)
  {
    std::cout << app.help();
    return 0;
  }
  catch (const CLI::CallForAllHelp&)
  {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  }
  catch (const CLI::ParseError& e)
  {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? nullptr
                                                    : app.get_subcommands().front();
    std::cerr << (sub != nullptr ? sub->help() : app.help());
    return kExitUsage;
  }

  try
  {
    if (*synth_cmd)
    {
      return run_synth(synth);
    }
    if (*learn_cmd)
    {
      return run_learn(learn);
    }
    if (*predict_cmd)
    {
      return run_predict(predict);
    }
    if (*eval_cmd)
    {
      return run_evaluate(eval);
    }
    if (*reduce_cmd)
    {
      return run_reduce(reduce);
    }
    if (*tune_cmd)
    {
      return run_tune(tune);
    }
    if (*run_cmd)
    {
      for (std::size_t i = 0; i < override_flags.size(); ++i)
      {
        if (run_cmd->count(override_flags[i].first) > 0)
        {
          run.overrides.emplace_back(override_flags[i].second, override_values[i]);
        }
      }
      return run_run(run);
    }
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
