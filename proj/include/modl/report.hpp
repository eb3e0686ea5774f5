#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "modl/error.hpp"
#include "modl/schema.hpp"
#include "modl/snb.hpp"

#ifndef MODL_VERSION
#define MODL_VERSION "0.0.0"
#endif

namespace modl {

/// Mann-Whitney AUC with midranks; nullopt without both classes.
inline std::optional<double> auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool p : positive) n_pos += p;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t e = i;
    while (e < n && scores[order[e]] == scores[order[i]]) ++e;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(e)) / 2.0;
    for (std::size_t k = i; k < e; ++k) {
      if (positive[order[k]]) rank_sum += midrank;
    }
    i = e;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

inline std::optional<double> auc(const std::vector<std::pair<double, bool>>& scored) {
  std::vector<double> s;
  std::vector<bool> p;
  for (const auto& [score, pos] : scored) {
    s.push_back(score);
    p.push_back(pos);
  }
  return auc(s, p);
}

struct EvaluationResult {
  std::string role;
  std::vector<std::string> class_labels;
  std::size_t instances = 0;
  std::size_t unknown_labels = 0;  // instances whose label the model never saw
  double accuracy = 0.0;
  std::optional<double> auc;
  std::vector<std::vector<std::uint64_t>> confusion;  // [actual][predicted]
};

/// Metrics from per-row log posteriors and class indices (kNoClass rows are
/// counted in unknown_labels and skipped).
/// log_proba is row-major, one class_count() stride per row.
inline EvaluationResult evaluate_posteriors(const SnbModel& m, std::span<const double> log_proba,
                                            std::span<const std::uint32_t> classes, std::string role) {
  EvaluationResult r;
  r.role = std::move(role);
  r.class_labels = m.class_labels;
  const std::size_t J = m.class_count();
  if (log_proba.size() != classes.size() * J) throw std::invalid_argument("evaluate_posteriors: size mismatch");
  auto row = [&](std::size_t i) { return log_proba.subspan(i * J, J); };
  r.confusion.assign(J, std::vector<std::uint64_t>(J, 0));
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == kNoClass) {
      ++r.unknown_labels;
      continue;
    }
    rows.push_back(i);
  }
  if (rows.empty()) throw DataError("cannot evaluate on an empty table");
  r.instances = rows.size();
  std::uint64_t correct = 0;
  for (auto i : rows) {
    const auto pred = argmax_class(row(i));
    ++r.confusion[classes[i]][pred];
    correct += pred == classes[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  std::vector<double> s(rows.size());
  std::vector<bool> pos(rows.size());
  auto class_auc = [&](std::size_t c) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      s[k] = row(rows[k])[c];
      pos[k] = classes[rows[k]] == c;
    }
    return auc(s, pos);
  };
  if (J == 2) {
    r.auc = class_auc(1);
  } else {
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < J; ++c) {
      if (auto a = class_auc(c)) {
        sum += *a;
        ++defined;
      }
    }
    if (defined) r.auc = sum / static_cast<double>(defined);
  }
  return r;
}

inline EvaluationResult evaluate_posteriors(const SnbModel& m, const std::vector<std::vector<double>>& log_proba,
                                            std::span<const std::uint32_t> classes, std::string role) {
  std::vector<double> flat;
  flat.reserve(log_proba.size() * m.class_count());
  for (const auto& lp : log_proba) {
    if (lp.size() != m.class_count()) throw std::invalid_argument("evaluate_posteriors: size mismatch");
    flat.insert(flat.end(), lp.begin(), lp.end());
  }
  return evaluate_posteriors(m, std::span<const double>(flat), classes, std::move(role));
}

inline EvaluationResult evaluate(const SnbModel& m, const FlatTable& flat, std::string role = "test",
                                 std::size_t threads = 1) {
  if (!flat.target) throw DataError("flat table has no target column");
  if (flat.rows == 0) throw DataError("cannot evaluate on an empty table");
  const auto lp = predict_log_proba(m, flat, threads);
  return evaluate_posteriors(m, lp, class_indices(*flat.target, m.class_labels), std::move(role));
}

inline nlohmann::ordered_json to_json(const EvaluationResult& r) {
  nlohmann::ordered_json j;
  j["role"] = r.role;
  j["instances"] = r.instances;
  j["unknown_labels"] = r.unknown_labels;
  j["accuracy"] = r.accuracy;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["class_labels"] = r.class_labels;
  j["confusion"] = r.confusion;
  return j;
}

/// The analysis report: preparation, modeling and evaluation panels.
struct AnalysisReport {
  nlohmann::ordered_json schema;
  std::string target;
  std::size_t instances = 0;
  std::size_t train_instances = 0;
  std::size_t test_instances = 0;
  std::size_t orphans_dropped = 0;
  std::uint64_t seed = 0;
  std::size_t requested_features = 0;
  std::size_t max_depth = 0;
  std::vector<FeatureExpr> features;
  std::vector<PreparedColumn> preparation;
  SnbModel model;
  std::vector<EvaluationResult> evaluation;
};

inline nlohmann::ordered_json preparation_json(const std::vector<PreparedColumn>& columns) {
  std::vector<const PreparedColumn*> order;
  for (const auto& c : columns) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const PreparedColumn* a, const PreparedColumn* b) {
    if (a->prep.level.value != b->prep.level.value) return a->prep.level.value > b->prep.level.value;
    return a->name < b->name;
  });
  auto out = nlohmann::ordered_json::array();
  for (const auto* c : order) {
    nlohmann::ordered_json j;
    j["name"] = c->name;
    j["type"] = to_string(c->type);
    j["level"] = c->prep.level.value;
    j["construction_nats"] = c->construction_nats;
    j["null_cost_nats"] = c->prep.null_cost.nats;
    j["partition"] = to_json(c->prep.model);
    out.push_back(j);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const AnalysisReport& r) {
  nlohmann::ordered_json j;
  j["tool"] = "modl";
  j["version"] = MODL_VERSION;
  j["interval_bounds"] = "midpoints between adjacent observed values";
  j["schema"] = r.schema;
  j["target"] = r.target;
  j["instances"] = {{"total", r.instances},
                    {"train", r.train_instances},
                    {"test", r.test_instances},
                    {"orphans_dropped", r.orphans_dropped}};
  nlohmann::ordered_json fc;
  fc["seed"] = r.seed;
  fc["requested"] = r.requested_features;
  fc["max_depth"] = r.max_depth;
  auto feats = nlohmann::ordered_json::array();
  for (const auto& f : r.features) feats.push_back({{"name", f.name}, {"prior_nats", f.prior.nats}});
  fc["features"] = feats;
  j["feature_construction"] = fc;
  j["preparation"] = preparation_json(r.preparation);
  nlohmann::ordered_json mod;
  mod["considered"] = r.model.considered;
  mod["candidates"] = r.model.variables.size();
  mod["selected"] = r.model.selected();
  auto sel = nlohmann::ordered_json::array();
  for (const auto& v : r.model.variables) {
    if (v.weight <= 0) continue;
    sel.push_back({{"name", v.name}, {"weight", v.weight}, {"level", v.level.value}});
  }
  mod["variables"] = sel;
  mod["cost"] = {{"selection_nats", r.model.cost.selection_nats},
                 {"preparation_nats", r.model.cost.preparation_nats},
                 {"likelihood_nats", r.model.cost.likelihood_nats},
                 {"total_nats", r.model.cost.total()}};
  j["modeling"] = mod;
  auto ev = nlohmann::ordered_json::array();
  for (const auto& e : r.evaluation) ev.push_back(to_json(e));
  j["evaluation"] = ev;
  return j;
}

inline void write_json(const nlohmann::ordered_json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("cannot write '" + path + "'");
}

inline void write_report(const AnalysisReport& report, const std::string& path) { write_json(to_json(report), path); }

}  // namespace modl
