// modl: train, predict, evaluate, explain and sample-features on
// multi-table CSV data described by a schema JSON.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <new>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modl/modl.hpp"

namespace {

int fail(modl::ErrorCategory category, const std::string& message) {
  std::cerr << "modl: error[" << modl::category_name(category) << "]: " << message << '\n';
  return static_cast<int>(category);
}

std::map<std::string, std::string> parse_data(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw modl::UsageError("--data expects Table=path, got '" + item + "'");
    }
    if (!out.emplace(item.substr(0, eq), item.substr(eq + 1)).second) {
      throw modl::UsageError("--data given twice for table '" + item.substr(0, eq) + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modl: multi-table MODL preparation and selective naive Bayes", "modl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MODL_VERSION);

  modl::RunConfig config;
  std::vector<std::string> data;
  int n_trees = 0;
  long long n_features = static_cast<long long>(config.n_features);
  long long threads = 0;

  auto add_data = [&](CLI::App* sub, bool need_target) {
    sub->add_option("--schema", config.schema_path, "Schema JSON file")->required();
    sub->add_option("--data", data, "Table=path, once per table (tertiary tables as Parent/Child=path)")
        ->required()
        ->take_all();
    if (need_target) sub->add_option("--target", config.target, "Target column of the root table")->required();
    sub->add_option("--out", config.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", threads, "Worker threads (0 = one per hardware thread)")->capture_default_str();
    sub->add_flag("--allow-orphans", config.allow_orphans, "Drop child rows without a parent instead of failing");
    sub->add_option("--chunk-rows", config.chunk_rows, "Root rows per ingestion chunk")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "Construct features, prepare variables and fit the classifier");
  add_data(train, true);
  train->add_option("--n-features", n_features, "Number of constructed features")->capture_default_str();
  train->add_option("--max-depth", config.max_depth, "Maximum aggregate nesting depth")->capture_default_str();
  train->add_option("--seed", config.seed, "Master seed")->capture_default_str();
  train->add_option("--train-fraction", config.train_fraction, "Share of instances used for training")
      ->capture_default_str();
  train->add_option("--spill-threshold-mb", config.spill_threshold_mb,
                    "Flattened columns go to temporary files when the root file is larger")
      ->capture_default_str();
  train->add_option("--n-trees", n_trees, "Must be 0 (trees are not supported)")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Write predictions.csv for new data");
  add_data(predict, false);
  predict->add_option("--model", config.model_path, "Model JSON from train")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Write evaluation.json for labelled data");
  add_data(evaluate, false);
  evaluate->add_option("--model", config.model_path, "Model JSON from train")->required();

  auto* explain = app.add_subcommand("explain", "Write shapley.csv, shapley.json and reinforcement.csv");
  add_data(explain, false);
  explain->add_option("--model", config.model_path, "Model JSON from train")->required();
  explain->add_option("--class", config.class_label, "Class of interest (default: last class label)");
  explain->add_option("--k", config.k, "Variables and suggestions per instance")->capture_default_str();

  auto* sample = app.add_subcommand("sample-features", "Write features.json with sampled feature names");
  sample->add_option("--schema", config.schema_path, "Schema JSON file")->required();
  sample->add_option("--target", config.target, "Target column of the root table");
  sample->add_option("--n-features", n_features, "Number of features")->capture_default_str();
  sample->add_option("--max-depth", config.max_depth, "Maximum aggregate nesting depth")->capture_default_str();
  sample->add_option("--seed", config.seed, "Master seed")->capture_default_str();
  sample->add_option("--out", config.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(modl::ErrorCategory::usage, e.what());
  }

  try {
    if (n_features < 0) throw modl::UsageError("--n-features must be >= 0");
    if (threads < 0) throw modl::UsageError("--threads must be >= 0");
    if (n_trees != 0) throw modl::UsageError("--n-trees must be 0");
    config.n_features = static_cast<std::size_t>(n_features);
    config.threads = static_cast<std::size_t>(threads);
    config.data = parse_data(data);
    if (*train) {
      modl::run_train(config);
    } else if (*predict) {
      modl::run_predict(config);
    } else if (*evaluate) {
      modl::run_evaluate(config);
    } else if (*explain) {
      modl::run_explain(config);
    } else if (*sample) {
      modl::run_sample_features(config);
    }
  } catch (const modl::Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(modl::ErrorCategory::internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(modl::ErrorCategory::internal, e.what());
  }
  return 0;
}
