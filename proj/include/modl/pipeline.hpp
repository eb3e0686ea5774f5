#pragma once

// End-to-end runs behind the command line. The root table is streamed in
// chunks; flattened columns are kept in memory or, for large root files,
// spilled to per-column temporary files and prepared one column at a time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "modl/dataset.hpp"
#include "modl/error.hpp"
#include "modl/explain.hpp"
#include "modl/feature.hpp"
#include "modl/report.hpp"
#include "modl/rng.hpp"
#include "modl/schema.hpp"
#include "modl/snb.hpp"

namespace modl {

struct RunConfig {
  std::string schema_path;
  std::map<std::string, std::string> data;  // table name or path -> CSV file
  std::string target;
  std::size_t n_features = 100;
  std::size_t max_depth = 2;
  std::uint64_t seed = 42;
  std::size_t threads = 0;
  double train_fraction = 0.7;
  std::string out = ".";
  bool allow_orphans = false;
  std::size_t chunk_rows = 8192;
  std::size_t spill_threshold_mb = 32;
  std::string model_path;
  std::string class_label;  // explain: class of interest
  std::size_t k = 2;        // explain: triplets and suggestions per row
};

struct PhaseTimer {
  std::vector<std::pair<std::string, double>> phases;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point last = start;

  void mark(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    phases.emplace_back(phase, std::chrono::duration<double>(now - last).count());
    last = now;
  }
  nlohmann::ordered_json to_json(std::size_t threads) const {
    nlohmann::ordered_json j;
    j["threads"] = threads;
    nlohmann::ordered_json p;
    for (const auto& [name, s] : phases) p[name] = s;
    j["phases_seconds"] = p;
    j["total_seconds"] = std::chrono::duration<double>(last - start).count();
    return j;
  }
};

namespace detail {

inline std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string("cannot read ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::shared_ptr<const Schema> load_schema(const RunConfig& c) {
  if (c.schema_path.empty()) throw UsageError("--schema is required");
  return std::make_shared<const Schema>(parse_schema(std::string_view(read_text(c.schema_path, "schema"))));
}

inline std::filesystem::path output_dir(const RunConfig& c) {
  std::filesystem::path out(c.out.empty() ? "." : c.out);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (!std::filesystem::is_directory(out)) throw DataError("cannot create output directory '" + out.string() + "'");
  return out;
}

inline LoadOptions load_options(const RunConfig& c, bool target_optional) {
  if (c.chunk_rows == 0) throw UsageError("--chunk-rows must be positive");
  LoadOptions o;
  o.allow_orphans = c.allow_orphans;
  o.chunk_rows = c.chunk_rows;
  o.target_optional = target_optional;
  return o;
}

inline SnbModel load_model(const RunConfig& c) {
  if (c.model_path.empty()) throw UsageError("--model is required");
  const auto text = read_text(c.model_path, "model");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: invalid JSON: ") + e.what());
  }
  return model_from_json(j);
}

// Features the model needs at deployment (weight > 0, constructed only).
inline std::vector<FeatureExpr> deployment_features(const SnbModel& m, const Schema& schema) {
  const FeatureSpace space(schema, m.target, std::max<std::size_t>(1, schema.max_depth()));
  std::vector<FeatureExpr> out;
  for (const auto& v : m.variables) {
    if (v.weight <= 0 || !v.constructed()) continue;
    try {
      out.push_back(parse_feature(v.name, space));
    } catch (const DataError& e) {
      throw DataError(std::string("schema does not match the model: ") + e.what());
    }
    if (out.back().name != v.name) {
      throw DataError("schema does not match the model: feature '" + v.name + "' resolves to '" +
                      out.back().name + "'");
    }
  }
  for (const auto& v : m.variables) {
    if (v.weight <= 0 || v.constructed()) continue;
    const auto& spec = schema.table(schema.root());
    auto idx = spec.column_index(v.name);
    const auto want = v.model.kind == PartitionKind::Intervals ? ColumnType::Numerical : ColumnType::Categorical;
    if (!idx || spec.columns[*idx].type != want) {
      throw DataError("schema does not match the model: root table '" + spec.name + "' needs " + to_string(want) +
                      " column '" + v.name + "'");
    }
  }
  return out;
}

// Streams the deployment data and calls fn(flat chunk, log posteriors).
template <typename Fn>
std::size_t stream_posteriors(const RunConfig& c, const SnbModel& m, bool need_target, Fn&& fn) {
  auto schema = load_schema(c);
  const auto features = deployment_features(m, *schema);
  const auto options = load_options(c, !need_target);
  RootStream stream(load_secondaries(schema, c.data, m.target, options), c.data, options);
  FeatureEvaluator evaluator;
  const auto threads = resolve_threads(c.threads);
  std::size_t rows = 0;
  while (auto chunk = stream.next()) {
    const auto flat = flatten(*chunk, features, threads, &evaluator);
    const auto lp = predict_log_proba(m, flat, threads);
    fn(flat, lp);
    rows += flat.rows;
  }
  stream.finish();
  return rows;
}

inline std::vector<std::string> key_names(const Schema& schema) { return schema.table(schema.root()).key; }

}  // namespace detail

struct TrainResult {
  SnbModel model;
  AnalysisReport report;
  nlohmann::ordered_json timing;
};

/// load -> split -> sample features -> flatten -> prepare -> fit -> evaluate;
/// writes model.json, report.json and timing.json under config.out.
inline TrainResult run_train(const RunConfig& c, bool write = true) {
  if (c.target.empty()) throw UsageError("--target is required");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
    throw UsageError("--train-fraction must be in (0, 1)");
  }
  PhaseTimer timer;
  const auto threads = resolve_threads(c.threads);
  auto schema = detail::load_schema(c);
  const auto out_dir = write ? detail::output_dir(c) : std::filesystem::path(".");
  const auto options = detail::load_options(c, false);
  Dataset secondaries = load_secondaries(schema, c.data, c.target, options);
  timer.mark("load_secondary_tables");

  const FeatureSpace space(*schema, c.target, c.max_depth);
  const auto features = sample_features(space, c.n_features, c.seed);
  timer.mark("sample_features");

  const auto root_file = detail::file_for(*schema, schema->root(), c.data);
  std::error_code ec;
  const auto root_bytes = std::filesystem::file_size(root_file, ec);
  std::optional<std::filesystem::path> spill;
  if (!ec && root_bytes > c.spill_threshold_mb * 1024ull * 1024ull) {
    spill = (write ? out_dir : std::filesystem::temp_directory_path()) /
            (".modl-spill-" + std::to_string(fnv1a(root_file + std::to_string(c.seed))));
  }
  FlatStore store(spill, false);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> key_hashes;  // (hash, row)
  std::size_t orphans = 0;
  {
    RootStream stream(secondaries, c.data, options);
    FeatureEvaluator evaluator;
    while (auto chunk = stream.next()) {
      auto flat = flatten(*chunk, features.features, threads, &evaluator);
      for (std::size_t r = 0; r < flat.rows; ++r) key_hashes.emplace_back(fnv1a(flat.key_text(r)), store.rows() + r);
      store.append(flat);
    }
    orphans = stream.finish();
  }
  secondaries = Dataset{};
  timer.mark("flatten");

  const std::size_t n = store.rows();
  if (n == 0) throw DataError("root table '" + schema->root_name() + "' has no rows");
  std::sort(key_hashes.begin(), key_hashes.end());
  for (std::size_t i = 1; i < key_hashes.size(); ++i) {
    if (key_hashes[i].first == key_hashes[i - 1].first) {
      throw DataError("table '" + schema->root_name() + "': duplicate root key at data rows " +
                      std::to_string(key_hashes[i - 1].second + 1) + " and " + std::to_string(key_hashes[i].second + 1));
    }
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>>().swap(key_hashes);
  const auto& target = *store.target();
  for (std::size_t r = 0; r < n; ++r) {
    if (target.missing(r)) {
      throw DataError("target '" + c.target + "' is missing for root row " + std::to_string(r + 1));
    }
  }
  auto [train_rows, test_rows] = split_indices(n, c.train_fraction, c.seed);
  const auto labels = class_labels_of(target, train_rows);
  const auto classes = class_indices(target, labels);
  std::vector<std::uint32_t> train_classes;
  for (auto r : train_rows) train_classes.push_back(classes[r]);
  timer.mark("split");

  auto prepared = prepare_columns(
      store.size(), [&](std::size_t j) { return store.load(j); },
      [&](std::size_t j) { return store.construction_nats(j); }, train_rows, train_classes, labels, threads);
  timer.mark("preparation");

  SnbOptions snb;
  snb.threads = threads;
  auto model = fit_prepared(prepared, train_rows, train_classes, labels, c.target, snb);
  timer.mark("modeling");

  std::vector<const std::vector<std::uint32_t>*> var_parts(model.variables.size(), nullptr);
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    for (const auto& p : prepared) {
      if (p.name == model.variables[j].name) var_parts[j] = &p.parts;
    }
  }
  auto evaluate_rows = [&](const std::vector<std::uint32_t>& rows, const std::string& role) {
    const std::size_t J = model.class_count();
    std::vector<double> lp(rows.size() * J);
    std::vector<std::uint32_t> cls(rows.size());
    parallel_for(threads, rows.size(), [&](std::size_t i) {
      std::vector<std::uint32_t> parts(model.variables.size(), 0);
      for (std::size_t j = 0; j < parts.size(); ++j) {
        if (model.variables[j].weight > 0) parts[j] = (*var_parts[j])[rows[i]];
      }
      const auto row = log_proba_from_parts(model, parts);
      std::copy(row.begin(), row.end(), lp.begin() + static_cast<std::ptrdiff_t>(i * J));
      cls[i] = classes[rows[i]];
    });
    return evaluate_posteriors(model, std::span<const double>(lp), cls, role);
  };
  AnalysisReport report;
  report.evaluation.push_back(evaluate_rows(train_rows, "train"));
  if (!test_rows.empty()) report.evaluation.push_back(evaluate_rows(test_rows, "test"));
  timer.mark("evaluation");

  for (auto& p : prepared) std::vector<std::uint32_t>().swap(p.parts);
  report.schema = to_json(*schema);
  report.target = c.target;
  report.instances = n;
  report.train_instances = train_rows.size();
  report.test_instances = test_rows.size();
  report.orphans_dropped = orphans;
  report.seed = c.seed;
  report.requested_features = c.n_features;
  report.max_depth = c.max_depth;
  report.features = features.features;
  report.preparation = std::move(prepared);
  report.model = model;

  TrainResult result{std::move(model), std::move(report), {}};
  if (write) {
    write_json(to_json(result.model), (out_dir / "model.json").string());
    write_report(result.report, (out_dir / "report.json").string());
    timer.mark("write");
    result.timing = timer.to_json(threads);
    write_json(result.timing, (out_dir / "timing.json").string());
  } else {
    result.timing = timer.to_json(threads);
  }
  return result;
}

/// predictions.csv: root key columns, predicted label, one probability per class.
inline std::size_t run_predict(const RunConfig& c) {
  const auto model = detail::load_model(c);
  const auto out_dir = detail::output_dir(c);
  const auto path = (out_dir / "predictions.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  bool header = false;
  std::vector<std::string> fields;
  const auto rows = detail::stream_posteriors(c, model, false, [&](const FlatTable& flat, const auto& lp) {
    if (!header) {
      fields.clear();
      for (const auto& k : flat.keys) fields.push_back(k.name);
      fields.push_back("Predicted");
      for (const auto& l : model.class_labels) fields.push_back("Prob_" + l);
      csv::write_record(out, fields);
      header = true;
    }
    for (std::size_t r = 0; r < flat.rows; ++r) {
      fields.clear();
      for (const auto& k : flat.keys) fields.emplace_back(k.category(r));
      fields.push_back(model.class_labels[argmax_class(lp[r])]);
      for (double x : lp[r]) fields.push_back(csv::format_number(std::exp(x)));
      csv::write_record(out, fields);
    }
  });
  if (!header) {
    fields = detail::key_names(*detail::load_schema(c));
    fields.push_back("Predicted");
    for (const auto& l : model.class_labels) fields.push_back("Prob_" + l);
    csv::write_record(out, fields);
  }
  if (!out) throw DataError("cannot write '" + path + "'");
  return rows;
}

/// evaluation.json for labelled deployment data.
inline EvaluationResult run_evaluate(const RunConfig& c) {
  const auto model = detail::load_model(c);
  const auto out_dir = detail::output_dir(c);
  std::vector<std::vector<double>> lp;
  std::vector<std::uint32_t> classes;
  detail::stream_posteriors(c, model, true, [&](const FlatTable& flat, const auto& chunk_lp) {
    const auto cls = class_indices(*flat.target, model.class_labels);
    lp.insert(lp.end(), chunk_lp.begin(), chunk_lp.end());
    classes.insert(classes.end(), cls.begin(), cls.end());
  });
  auto result = evaluate_posteriors(model, lp, classes, "evaluation");
  write_json(to_json(result), (out_dir / "evaluation.json").string());
  return result;
}

/// shapley.csv (1 + 3k columns), shapley.json (full matrices) and
/// reinforcement.csv for the class of interest.
inline std::vector<Explanation> run_explain(const RunConfig& c) {
  const auto model = detail::load_model(c);
  if (c.k == 0) throw UsageError("--k must be at least 1");
  const std::string label = c.class_label.empty() ? model.class_labels.back() : c.class_label;
  const auto cls = model.class_index(label);
  if (!cls) throw UsageError("unknown class '" + label + "'");
  const auto out_dir = detail::output_dir(c);
  std::vector<Explanation> rows;
  const auto threads = resolve_threads(c.threads);
  detail::stream_posteriors(c, model, false, [&](const FlatTable& flat, const auto& lp) {
    const auto by_var = parts_of_flat(model, flat);
    const auto base = rows.size();
    rows.resize(base + flat.rows);
    parallel_for(threads, flat.rows, [&](std::size_t r) {
      auto& e = rows[base + r];
      e.key = flat.key_text(r);
      const auto parts = row_parts(by_var, r);
      for (double x : lp[r]) e.posterior.push_back(std::exp(x));
      e.attributions = shapley_from_parts(model, parts, e.key);
      e.reinforcement = reinforce_from_parts(model, parts, *cls, c.k, e.key);
    });
  });
  auto open = [&](const char* name) {
    const auto path = (out_dir / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path + "'");
    return f;
  };
  {
    auto f = open("shapley.csv");
    write_shapley_csv(f, rows, *cls, label, c.k);
  }
  {
    auto f = open("reinforcement.csv");
    write_reinforcement_csv(f, rows);
  }
  write_json(explanations_to_json(model, rows), (out_dir / "shapley.json").string());
  return rows;
}

/// features.json: the sampled features with their prior coding lengths.
inline FeatureSet run_sample_features(const RunConfig& c) {
  auto schema = detail::load_schema(c);
  const FeatureSpace space(*schema, c.target, c.max_depth);
  auto set = sample_features(space, c.n_features, c.seed);
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["requested"] = c.n_features;
  j["max_depth"] = c.max_depth;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : set.features) arr.push_back({{"name", f.name}, {"prior_nats", f.prior.nats}});
  j["features"] = arr;
  write_json(j, (detail::output_dir(c) / "features.json").string());
  return set;
}

}  // namespace modl
