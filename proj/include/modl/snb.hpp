#pragma once

// Selective naive Bayes with per-variable weights in [0, 1].
//
//   score_c(x) = ln P(c) + sum_j w_j ln P(part_j(x) | c)
//   P(p | c)   = (n_pc + 1/P_j) / (n_c + 1)
//
// Selection minimizes
//   ln(F+1) + ln C(F, K)                          which K of F variables
//   + sum_{w_j>0} (prep prior_j + construction_j)  their descriptions
//   + sum_i -ln P(y_i | x_i)                        training likelihood
// by forward/backward passes at weight 1, then a cyclic line search of each
// weight over {0, 1/16, ..., 1}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "modl/dataset.hpp"
#include "modl/error.hpp"
#include "modl/feature.hpp"
#include "modl/modl_math.hpp"
#include "modl/parallel.hpp"
#include "modl/preparation.hpp"

namespace modl {

inline constexpr const char* kModelFormat = "snb-1";

struct SnbVariable {
  std::string name;
  ColumnType type = ColumnType::Numerical;  // type of the input column
  PartitionModel model;
  double weight = 0.0;
  Level level;
  CodingLength null_cost;
  double construction_nats = 0.0;
  std::vector<std::vector<double>> log_prob;  // [part][class]
  std::vector<double> part_frequency;         // training marginal q_p

  bool constructed() const { return name.find('(') != std::string::npos; }
};

struct SelectionCost {
  double selection_nats = 0.0;
  double preparation_nats = 0.0;
  double likelihood_nats = 0.0;
  double total() const { return selection_nats + preparation_nats + likelihood_nats; }
};

struct SnbModel {
  std::string target;
  std::vector<std::string> class_labels;
  std::vector<std::uint64_t> class_counts;
  std::vector<double> class_log_prior;
  std::vector<SnbVariable> variables;  // Level > 0 candidates, zero weights included
  std::size_t considered = 0;          // F
  SelectionCost cost;
  std::vector<double> trace;  // total cost after each accepted step; not serialized

  std::size_t class_count() const { return class_labels.size(); }
  std::size_t selected() const {
    return static_cast<std::size_t>(
        std::count_if(variables.begin(), variables.end(), [](const SnbVariable& v) { return v.weight > 0; }));
  }
  std::optional<std::size_t> class_index(std::string_view label) const {
    for (std::size_t c = 0; c < class_labels.size(); ++c) {
      if (class_labels[c] == label) return c;
    }
    return std::nullopt;
  }
  std::optional<std::size_t> variable_index(std::string_view name) const {
    for (std::size_t j = 0; j < variables.size(); ++j) {
      if (variables[j].name == name) return j;
    }
    return std::nullopt;
  }
};

struct SnbOptions {
  std::size_t threads = 1;
  PreparationOptions preparation;
  std::size_t max_selection_rounds = 20;
  std::size_t max_weight_rounds = 100;
  double weight_improvement = 1e-6;
};

inline constexpr std::size_t kWeightGrid = 16;

/// Smoothed conditional log-probabilities and part frequencies.
inline void fill_conditionals(SnbVariable& v, std::span<const std::uint64_t> class_counts) {
  const std::size_t P = v.model.part_count(), J = class_counts.size();
  const double total = static_cast<double>(v.model.n);
  v.log_prob.assign(P, std::vector<double>(J, 0.0));
  v.part_frequency.assign(P, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < J; ++c) {
      const double num = static_cast<double>(v.model.parts[p].counts[c]) + 1.0 / static_cast<double>(P);
      v.log_prob[p][c] = std::log(num / (static_cast<double>(class_counts[c]) + 1.0));
    }
    v.part_frequency[p] = total > 0 ? static_cast<double>(v.model.parts[p].total()) / total : 0.0;
  }
}

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::vector<std::uint32_t> recode(const Column& column, const PartitionModel& model) {
  std::vector<std::uint32_t> parts(column.size());
  if (column.numerical()) {
    for (std::size_t r = 0; r < parts.size(); ++r) parts[r] = model.part_of_number(column.numbers[r]);
    return parts;
  }
  std::vector<std::uint32_t> by_code(column.dictionary.size());
  for (std::size_t d = 0; d < by_code.size(); ++d) by_code[d] = model.part_of_category(column.dictionary[d]);
  const auto missing = model.part_of_missing();
  for (std::size_t r = 0; r < parts.size(); ++r) {
    parts[r] = column.codes[r] == kMissingCode ? missing : by_code[column.codes[r]];
  }
  return parts;
}

}  // namespace detail

/// A prepared column; `parts` (all rows) is filled only when Level > 0.
struct PreparedColumn {
  std::string name;
  ColumnType type = ColumnType::Numerical;
  PreparedVariable prep;
  double construction_nats = 0.0;
  std::vector<std::uint32_t> parts;
};

/// Class labels (sorted) and per-row class indices of a target column;
/// rows whose label is missing get kNoClass.
inline constexpr std::uint32_t kNoClass = 0xffffffffu;

inline std::vector<std::string> class_labels_of(const Column& target, std::span<const std::uint32_t> rows) {
  std::set<std::string> labels;
  for (auto r : rows) {
    if (target.missing(r)) continue;
    labels.insert(target.numerical() ? csv::format_number(target.numbers[r]) : std::string(target.category(r)));
  }
  return {labels.begin(), labels.end()};
}

inline std::vector<std::uint32_t> class_indices(const Column& target, const std::vector<std::string>& labels) {
  std::vector<std::uint32_t> out(target.size(), kNoClass);
  std::map<std::string, std::uint32_t, std::less<>> index;
  for (std::uint32_t c = 0; c < labels.size(); ++c) index.emplace(labels[c], c);
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (target.missing(r)) continue;
    auto it = index.find(target.numerical() ? csv::format_number(target.numbers[r]) : std::string(target.category(r)));
    if (it != index.end()) out[r] = it->second;
  }
  return out;
}

/// Prepares `count` columns obtained from `load` on the training rows, in
/// parallel; results are in column order.
inline std::vector<PreparedColumn> prepare_columns(std::size_t count, const std::function<Column(std::size_t)>& load,
                                                   const std::function<double(std::size_t)>& construction_nats,
                                                   std::span<const std::uint32_t> train_rows,
                                                   std::span<const std::uint32_t> train_classes,
                                                   const std::vector<std::string>& labels, std::size_t threads,
                                                   const PreparationOptions& options = {}) {
  std::vector<PreparedColumn> out(count);
  parallel_for(threads, count, [&](std::size_t j) {
    const Column col = load(j);
    auto& pc = out[j];
    pc.name = col.name;
    pc.type = col.type;
    pc.construction_nats = construction_nats(j);
    pc.prep = prepare_column(col, train_rows, train_classes, labels, options);
    if (pc.prep.level.value > 0.0) pc.parts = detail::recode(col, pc.prep.model);
  });
  return out;
}

namespace detail {

class SelectionSearch {
 public:
  SelectionSearch(const std::vector<const PreparedColumn*>& cands, std::vector<SnbVariable>& vars,
                  std::span<const std::uint32_t> rows, std::span<const std::uint32_t> classes,
                  const std::vector<double>& log_prior, std::size_t considered)
      : cands_(cands), vars_(vars), rows_(rows), classes_(classes), J_(log_prior.size()), considered_(considered) {
    scores_.resize(rows.size() * J_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < J_; ++c) scores_[i * J_ + c] = log_prior[c];
    }
    buf_.resize(J_);
  }

  SelectionCost cost_with(std::size_t j, double w) const {
    SelectionCost sc;
    std::size_t K = 0;
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      const double wk = k == j ? w : vars_[k].weight;
      if (wk > 0) {
        ++K;
        sc.preparation_nats += vars_[k].model.prior.nats + vars_[k].construction_nats;
      }
    }
    sc.selection_nats = std::log(static_cast<double>(considered_ + 1)) + log_binomial(considered_, K).nats;
    const double delta = j < vars_.size() ? w - vars_[j].weight : 0.0;
    double nll = 0.0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const double* s = &scores_[i * J_];
      if (delta != 0.0) {
        const auto& lp = vars_[j].log_prob[cands_[j]->parts[rows_[i]]];
        for (std::size_t c = 0; c < J_; ++c) buf_[c] = s[c] + delta * lp[c];
      } else {
        for (std::size_t c = 0; c < J_; ++c) buf_[c] = s[c];
      }
      nll += log_sum_exp(buf_) - buf_[classes_[i]];
    }
    sc.likelihood_nats = nll;
    return sc;
  }

  SelectionCost current() const { return cost_with(vars_.size(), 0.0); }

  void set(std::size_t j, double w) {
    const double delta = w - vars_[j].weight;
    vars_[j].weight = w;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& lp = vars_[j].log_prob[cands_[j]->parts[rows_[i]]];
      for (std::size_t c = 0; c < J_; ++c) scores_[i * J_ + c] += delta * lp[c];
    }
  }

 private:
  const std::vector<const PreparedColumn*>& cands_;
  std::vector<SnbVariable>& vars_;
  std::span<const std::uint32_t> rows_, classes_;
  std::size_t J_, considered_;
  std::vector<double> scores_;
  mutable std::vector<double> buf_;
};

}  // namespace detail

/// Fits from prepared columns. `train_rows` index the columns' parts;
/// `train_classes[i]` is the class of train_rows[i].
inline SnbModel fit_prepared(const std::vector<PreparedColumn>& columns, std::span<const std::uint32_t> train_rows,
                             std::span<const std::uint32_t> train_classes, const std::vector<std::string>& labels,
                             const std::string& target = "", const SnbOptions& options = {}) {
  if (train_rows.empty()) throw DataError("cannot fit on an empty table");
  SnbModel m;
  m.target = target;
  m.class_labels = labels;
  m.class_counts.assign(labels.size(), 0);
  for (auto c : train_classes) ++m.class_counts[c];
  const auto present = std::count_if(m.class_counts.begin(), m.class_counts.end(), [](auto n) { return n > 0; });
  if (present < 2) throw DataError("target '" + target + "' has fewer than 2 classes in the training data");
  const double n = static_cast<double>(train_rows.size());
  for (auto cnt : m.class_counts) m.class_log_prior.push_back(std::log(static_cast<double>(cnt) / n));
  m.considered = columns.size();

  std::vector<const PreparedColumn*> cands;
  for (const auto& c : columns) {
    if (c.prep.level.value > 0.0) cands.push_back(&c);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const PreparedColumn* a, const PreparedColumn* b) {
    if (a->prep.level.value != b->prep.level.value) return a->prep.level.value > b->prep.level.value;
    return a->name < b->name;
  });
  for (const auto* c : cands) {
    SnbVariable v;
    v.name = c->name;
    v.type = c->type;
    v.model = c->prep.model;
    v.level = c->prep.level;
    v.null_cost = c->prep.null_cost;
    v.construction_nats = c->construction_nats;
    fill_conditionals(v, m.class_counts);
    m.variables.push_back(std::move(v));
  }

  detail::SelectionSearch search(cands, m.variables, train_rows, train_classes, m.class_log_prior, m.considered);
  double current = search.current().total();
  m.trace.push_back(current);
  constexpr double eps = 1e-9;
  for (std::size_t round = 0; round < options.max_selection_rounds; ++round) {
    bool changed = false;
    for (std::size_t j = 0; j < m.variables.size(); ++j) {
      if (m.variables[j].weight > 0) continue;
      const double t = search.cost_with(j, 1.0).total();
      if (t < current - eps) {
        search.set(j, 1.0);
        current = t;
        m.trace.push_back(t);
        changed = true;
      }
    }
    for (std::size_t j = 0; j < m.variables.size(); ++j) {
      if (m.variables[j].weight == 0) continue;
      const double t = search.cost_with(j, 0.0).total();
      if (t < current - eps) {
        search.set(j, 0.0);
        current = t;
        m.trace.push_back(t);
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (std::size_t round = 0; round < options.max_weight_rounds; ++round) {
    bool improved = false;
    for (std::size_t j = 0; j < m.variables.size(); ++j) {
      double best = current;
      std::optional<double> best_w;
      for (std::size_t g = 0; g <= kWeightGrid; ++g) {
        const double w = static_cast<double>(g) / kWeightGrid;
        if (w == m.variables[j].weight) continue;
        const double t = search.cost_with(j, w).total();
        if (t < best) {
          best = t;
          best_w = w;
        }
      }
      if (best_w && best < current - options.weight_improvement) {
        search.set(j, *best_w);
        current = best;
        m.trace.push_back(best);
        improved = true;
      }
    }
    if (!improved) break;
  }
  m.cost = search.current();
  return m;
}

/// Fits on every row of a flat table with a target column.
inline SnbModel fit(const FlatTable& flat, const SnbOptions& options = {}) {
  if (!flat.target) throw DataError("flat table has no target column");
  if (flat.rows == 0) throw DataError("cannot fit on an empty table");
  std::vector<std::uint32_t> all(flat.rows);
  std::iota(all.begin(), all.end(), 0u);
  const auto labels = class_labels_of(*flat.target, all);
  const auto classes = class_indices(*flat.target, labels);
  std::vector<std::uint32_t> rows, cls;
  for (std::uint32_t r = 0; r < flat.rows; ++r) {
    if (classes[r] == kNoClass) continue;
    rows.push_back(r);
    cls.push_back(classes[r]);
  }
  auto prepared = prepare_columns(
      flat.columns.size(), [&](std::size_t j) { return flat.columns[j]; },
      [&](std::size_t j) { return flat.construction_nats[j]; }, rows, cls, labels, options.threads,
      options.preparation);
  return fit_prepared(prepared, rows, cls, labels, flat.target->name, options);
}

/// Normalized log posteriors from per-variable part indices (one entry per
/// model variable; zero-weight entries are ignored).
inline std::vector<double> log_proba_from_parts(const SnbModel& m, std::span<const std::uint32_t> parts) {
  std::vector<double> s = m.class_log_prior;
  for (std::size_t j = 0; j < m.variables.size(); ++j) {
    const auto& v = m.variables[j];
    if (v.weight <= 0) continue;
    const auto& lp = v.log_prob.at(parts[j]);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += v.weight * lp[c];
  }
  const double z = detail::log_sum_exp(s);
  for (auto& x : s) x -= z;
  return s;
}

/// Unnormalized class scores (log prior plus weighted log conditionals).
inline std::vector<double> scores_from_parts(const SnbModel& m, std::span<const std::uint32_t> parts) {
  std::vector<double> s = m.class_log_prior;
  for (std::size_t j = 0; j < m.variables.size(); ++j) {
    const auto& v = m.variables[j];
    if (v.weight <= 0) continue;
    const auto& lp = v.log_prob.at(parts[j]);
    for (std::size_t c = 0; c < s.size(); ++c) s[c] += v.weight * lp[c];
  }
  return s;
}

using Row = std::map<std::string, Cell, std::less<>>;

/// Part index of every model variable for a row; zero-weight variables may
/// be absent from the row. Throws UsageError for a missing variable.
inline std::vector<std::uint32_t> parts_of_row(const SnbModel& m, const Row& row) {
  std::vector<std::uint32_t> parts(m.variables.size(), 0);
  for (std::size_t j = 0; j < m.variables.size(); ++j) {
    const auto& v = m.variables[j];
    auto it = row.find(v.name);
    if (it == row.end()) {
      if (v.weight > 0) throw UsageError("row has no value for variable '" + v.name + "'");
      continue;
    }
    parts[j] = v.model.part_of(it->second);
  }
  return parts;
}

inline std::vector<double> predict_log_proba(const SnbModel& m, const Row& row) {
  for (const auto& [name, cell] : row) {
    if (!m.variable_index(name)) throw UsageError("unknown variable '" + name + "'");
  }
  return log_proba_from_parts(m, parts_of_row(m, row));
}

/// Argmax class index; ties go to the first label.
inline std::size_t argmax_class(std::span<const double> log_proba) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < log_proba.size(); ++c) {
    if (log_proba[c] > log_proba[best]) best = c;
  }
  return best;
}

inline const std::string& predict(const SnbModel& m, const Row& row) {
  return m.class_labels[argmax_class(predict_log_proba(m, row))];
}

/// Part indices of every model variable for every row of a flat table.
inline std::vector<std::vector<std::uint32_t>> parts_of_flat(const SnbModel& m, const FlatTable& flat) {
  std::vector<std::vector<std::uint32_t>> by_var(m.variables.size());
  for (std::size_t j = 0; j < m.variables.size(); ++j) {
    if (m.variables[j].weight <= 0) continue;
    auto c = flat.column_index(m.variables[j].name);
    if (!c) throw DataError("flat table has no column '" + m.variables[j].name + "'");
    by_var[j] = detail::recode(flat.columns[*c], m.variables[j].model);
  }
  return by_var;
}

inline std::vector<std::uint32_t> row_parts(const std::vector<std::vector<std::uint32_t>>& by_var, std::size_t r) {
  std::vector<std::uint32_t> p(by_var.size(), 0);
  for (std::size_t j = 0; j < by_var.size(); ++j) {
    if (!by_var[j].empty()) p[j] = by_var[j][r];
  }
  return p;
}

/// Row-wise log posteriors for a flat table, parallel over rows.
inline std::vector<std::vector<double>> predict_log_proba(const SnbModel& m, const FlatTable& flat,
                                                          std::size_t threads = 1) {
  const auto by_var = parts_of_flat(m, flat);
  std::vector<std::vector<double>> out(flat.rows);
  parallel_for(threads, flat.rows, [&](std::size_t r) { out[r] = log_proba_from_parts(m, row_parts(by_var, r)); });
  return out;
}

// ---- serialization ----

namespace detail {

inline nlohmann::ordered_json bound_json(double b) {
  return std::isinf(b) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(b);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const PartitionModel& pm) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(pm.kind);
  j["n"] = pm.n;
  j["value_count"] = pm.value_count;
  j["prior_nats"] = pm.prior.nats;
  j["likelihood_nats"] = pm.likelihood.nats;
  auto parts = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < pm.part_count(); ++p) {
    const auto& part = pm.parts[p];
    nlohmann::ordered_json jp;
    jp["label"] = pm.label(p);
    if (pm.kind == PartitionKind::Intervals) {
      jp["lower"] = detail::bound_json(part.lower);
      jp["upper"] = detail::bound_json(part.upper);
      jp["has_numbers"] = part.has_numbers;
    } else {
      jp["values"] = part.values;
      jp["catch_all"] = part.catch_all;
    }
    jp["includes_missing"] = part.includes_missing;
    jp["counts"] = part.counts;
    parts.push_back(jp);
  }
  j["parts"] = parts;
  return j;
}

inline PartitionModel partition_from_json(const nlohmann::json& j, const std::vector<std::string>& labels,
                                          const std::string& variable) {
  PartitionModel pm;
  pm.variable = variable;
  pm.class_labels = labels;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "Intervals") {
    pm.kind = PartitionKind::Intervals;
  } else if (kind == "Groups") {
    pm.kind = PartitionKind::Groups;
  } else {
    throw DataError("model: variable '" + variable + "': unknown partition kind '" + kind + "'");
  }
  pm.n = j.at("n").get<std::uint64_t>();
  pm.value_count = j.at("value_count").get<std::uint64_t>();
  pm.prior = CodingLength(j.at("prior_nats").get<double>());
  pm.likelihood = CodingLength(j.at("likelihood_nats").get<double>());
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& jp : j.at("parts")) {
    Part part;
    part.counts = jp.at("counts").get<std::vector<std::uint64_t>>();
    if (part.counts.size() != labels.size()) {
      throw DataError("model: variable '" + variable + "': part counts do not match the class count");
    }
    part.includes_missing = jp.at("includes_missing").get<bool>();
    if (pm.kind == PartitionKind::Intervals) {
      part.has_numbers = jp.at("has_numbers").get<bool>();
      part.lower = jp.at("lower").is_null() ? -inf : jp.at("lower").get<double>();
      part.upper = jp.at("upper").is_null() ? (part.has_numbers ? inf : -inf) : jp.at("upper").get<double>();
    } else {
      part.values = jp.at("values").get<std::vector<std::string>>();
      part.catch_all = jp.at("catch_all").get<bool>();
    }
    pm.parts.push_back(std::move(part));
  }
  if (pm.parts.empty()) throw DataError("model: variable '" + variable + "': no parts");
  pm.finalize();
  return pm;
}

inline nlohmann::ordered_json to_json(const SnbModel& m) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["target"] = m.target;
  j["class_labels"] = m.class_labels;
  j["class_counts"] = m.class_counts;
  j["class_log_prior"] = m.class_log_prior;
  j["considered"] = m.considered;
  j["selected"] = m.selected();
  j["cost"] = {{"selection_nats", m.cost.selection_nats},
               {"preparation_nats", m.cost.preparation_nats},
               {"likelihood_nats", m.cost.likelihood_nats},
               {"total_nats", m.cost.total()}};
  auto vars = nlohmann::ordered_json::array();
  for (const auto& v : m.variables) {
    nlohmann::ordered_json jv;
    jv["name"] = v.name;
    jv["kind"] = v.constructed() ? "constructed" : "native";
    jv["type"] = to_string(v.type);
    jv["weight"] = v.weight;
    jv["level"] = v.level.value;
    jv["construction_nats"] = v.construction_nats;
    jv["null_cost_nats"] = v.null_cost.nats;
    jv["partition"] = to_json(v.model);
    jv["log_prob"] = v.log_prob;
    vars.push_back(jv);
  }
  j["variables"] = vars;
  return j;
}

inline SnbModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != kModelFormat) {
      throw DataError("model: unsupported format '" + j.value("format", std::string()) + "', expected snb-1");
    }
    SnbModel m;
    m.target = j.at("target").get<std::string>();
    m.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    m.class_counts = j.at("class_counts").get<std::vector<std::uint64_t>>();
    m.class_log_prior = j.at("class_log_prior").get<std::vector<double>>();
    if (m.class_labels.size() < 2 || m.class_counts.size() != m.class_labels.size() ||
        m.class_log_prior.size() != m.class_labels.size()) {
      throw DataError("model: inconsistent class arrays");
    }
    m.considered = j.at("considered").get<std::size_t>();
    const auto& jc = j.at("cost");
    m.cost.selection_nats = jc.at("selection_nats").get<double>();
    m.cost.preparation_nats = jc.at("preparation_nats").get<double>();
    m.cost.likelihood_nats = jc.at("likelihood_nats").get<double>();
    for (const auto& jv : j.at("variables")) {
      SnbVariable v;
      v.name = jv.at("name").get<std::string>();
      const auto type = jv.at("type").get<std::string>();
      v.type = type == "Numerical" ? ColumnType::Numerical : ColumnType::Categorical;
      v.weight = jv.at("weight").get<double>();
      if (!(v.weight >= 0.0 && v.weight <= 1.0)) throw DataError("model: variable '" + v.name + "': bad weight");
      v.level.value = jv.at("level").get<double>();
      v.construction_nats = jv.at("construction_nats").get<double>();
      v.null_cost = CodingLength(jv.at("null_cost_nats").get<double>());
      v.model = partition_from_json(jv.at("partition"), m.class_labels, v.name);
      v.log_prob = jv.at("log_prob").get<std::vector<std::vector<double>>>();
      if (v.log_prob.size() != v.model.part_count()) {
        throw DataError("model: variable '" + v.name + "': log_prob does not match the parts");
      }
      const double total = static_cast<double>(v.model.n);
      for (const auto& part : v.model.parts) {
        v.part_frequency.push_back(total > 0 ? static_cast<double>(part.total()) / total : 0.0);
      }
      m.variables.push_back(std::move(v));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: malformed document: ") + e.what());
  }
}

}  // namespace modl
