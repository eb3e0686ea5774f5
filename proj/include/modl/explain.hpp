#pragma once

// Per-instance attributions and reinforcement for the weighted naive Bayes.
//
//   phi_j(x, c) = w_j * sum_p q_jp (ln P(part_j(x)|c) - ln P(p|c))
//   baseline(c) = ln P(c) + sum_j w_j sum_p q_jp ln P(p|c)
// so sum_j phi_j(x, c) = score_c(x) - baseline(c).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "modl/csv.hpp"
#include "modl/error.hpp"
#include "modl/snb.hpp"

namespace modl {

struct AttributionEntry {
  std::string variable;
  std::string part;
  double value = 0.0;
};

struct Attribution {
  std::string key;
  std::string class_label;
  std::vector<AttributionEntry> entries;  // decreasing value
};

struct Suggestion {
  std::string variable;
  std::string current_part;
  std::string proposed_part;
  std::uint32_t proposed_index = 0;
  double new_posterior = 0.0;
};

struct Reinforcement {
  std::string key;
  std::string target_class;
  double current_posterior = 0.0;
  std::vector<Suggestion> suggestions;  // decreasing new posterior
};

inline double baseline(const SnbModel& m, std::size_t c) {
  double b = m.class_log_prior.at(c);
  for (const auto& v : m.variables) {
    if (v.weight <= 0) continue;
    double e = 0.0;
    for (std::size_t p = 0; p < v.log_prob.size(); ++p) e += v.part_frequency[p] * v.log_prob[p][c];
    b += v.weight * e;
  }
  return b;
}

inline double shapley_value(const SnbVariable& v, std::uint32_t part, std::size_t c) {
  double s = 0.0;
  const double own = v.log_prob[part][c];
  for (std::size_t p = 0; p < v.log_prob.size(); ++p) s += v.part_frequency[p] * (own - v.log_prob[p][c]);
  return v.weight * s;
}

/// One Attribution per class, entries over weight-positive variables sorted
/// by decreasing value (ties in model order).
inline std::vector<Attribution> shapley_from_parts(const SnbModel& m, std::span<const std::uint32_t> parts,
                                                   const std::string& key = "") {
  std::vector<Attribution> out(m.class_count());
  for (std::size_t c = 0; c < m.class_count(); ++c) {
    out[c].key = key;
    out[c].class_label = m.class_labels[c];
    for (std::size_t j = 0; j < m.variables.size(); ++j) {
      const auto& v = m.variables[j];
      if (v.weight <= 0) continue;
      out[c].entries.push_back({v.name, v.model.label(parts[j]), shapley_value(v, parts[j], c)});
    }
    std::stable_sort(out[c].entries.begin(), out[c].entries.end(),
                     [](const AttributionEntry& a, const AttributionEntry& b) { return a.value > b.value; });
  }
  return out;
}

inline std::vector<Attribution> shapley_values(const SnbModel& m, const Row& row, const std::string& key = "") {
  for (const auto& [name, cell] : row) {
    if (!m.variable_index(name)) throw UsageError("unknown variable '" + name + "'");
  }
  return shapley_from_parts(m, parts_of_row(m, row), key);
}

/// Best strictly improving part change per weight-positive variable for
/// the target class, top k by new posterior (ties in model order).
inline Reinforcement reinforce_from_parts(const SnbModel& m, std::span<const std::uint32_t> parts,
                                          std::size_t target, std::size_t k, const std::string& key = "") {
  if (target >= m.class_count()) throw UsageError("unknown class index");
  if (k == 0) throw UsageError("k must be at least 1");
  Reinforcement r;
  r.key = key;
  r.target_class = m.class_labels[target];
  r.current_posterior = std::exp(log_proba_from_parts(m, parts)[target]);
  for (std::size_t j = 0; j < m.variables.size(); ++j) {
    const auto& v = m.variables[j];
    if (v.weight <= 0) continue;
    std::optional<Suggestion> best;
    for (std::uint32_t p = 0; p < v.log_prob.size(); ++p) {
      if (p == parts[j]) continue;
      std::vector<std::uint32_t> changed(parts.begin(), parts.end());
      changed[j] = p;
      const auto lp = log_proba_from_parts(m, changed);
      const double post = std::exp(lp[target]);
      if (post > r.current_posterior && (!best || post > best->new_posterior)) {
        best = Suggestion{v.name, v.model.label(parts[j]), v.model.label(p), p, post};
      }
    }
    if (best) r.suggestions.push_back(std::move(*best));
  }
  std::stable_sort(r.suggestions.begin(), r.suggestions.end(),
                   [](const Suggestion& a, const Suggestion& b) { return a.new_posterior > b.new_posterior; });
  if (r.suggestions.size() > k) r.suggestions.resize(k);
  return r;
}

inline Reinforcement reinforce(const SnbModel& m, const Row& row, const std::string& target_class, std::size_t k,
                               const std::string& key = "") {
  auto c = m.class_index(target_class);
  if (!c) throw UsageError("unknown class '" + target_class + "'");
  return reinforce_from_parts(m, parts_of_row(m, row), *c, k, key);
}

/// One explained instance: its key, posterior vector and attributions.
struct Explanation {
  std::string key;
  std::vector<double> posterior;
  std::vector<Attribution> attributions;  // per class
  Reinforcement reinforcement;
};

/// CSV with 1 + 3k columns: posterior of the class of interest, then k
/// (variable, part, value) triplets for that class. Rows are sorted by
/// posterior, decreasing; missing triplets are left empty.
inline void write_shapley_csv(std::ostream& out, const std::vector<Explanation>& rows, std::size_t class_index,
                              const std::string& class_label, std::size_t k) {
  std::vector<std::string> header{"Posterior_" + class_label};
  for (std::size_t i = 1; i <= k; ++i) {
    header.push_back("ShapleyVariable_" + std::to_string(i));
    header.push_back("ShapleyPart_" + std::to_string(i));
    header.push_back("ShapleyValue_" + std::to_string(i));
  }
  csv::write_record(out, header);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].posterior[class_index] > rows[b].posterior[class_index];
  });
  std::vector<std::string> fields;
  for (auto i : order) {
    fields.clear();
    fields.push_back(csv::format_number(rows[i].posterior[class_index]));
    const auto& entries = rows[i].attributions[class_index].entries;
    for (std::size_t t = 0; t < k; ++t) {
      if (t < entries.size()) {
        fields.push_back(entries[t].variable);
        fields.push_back(entries[t].part);
        fields.push_back(csv::format_number(entries[t].value));
      } else {
        fields.insert(fields.end(), 3, "");
      }
    }
    csv::write_record(out, fields);
  }
}

/// Long-format reinforcement CSV: one line per suggestion.
inline void write_reinforcement_csv(std::ostream& out, const std::vector<Explanation>& rows) {
  csv::write_record(out, std::vector<std::string>{"Key", "Class", "Posterior", "Rank", "Variable", "CurrentPart",
                                                  "ProposedPart", "NewPosterior"});
  for (const auto& e : rows) {
    const auto& r = e.reinforcement;
    for (std::size_t i = 0; i < r.suggestions.size(); ++i) {
      const auto& s = r.suggestions[i];
      csv::write_record(out, std::vector<std::string>{e.key, r.target_class, csv::format_number(r.current_posterior),
                                                      std::to_string(i + 1), s.variable, s.current_part,
                                                      s.proposed_part, csv::format_number(s.new_posterior)});
    }
  }
}

/// Full export: per instance, the posterior and the attribution matrix of
/// every class over the weight-positive variables.
inline nlohmann::ordered_json explanations_to_json(const SnbModel& m, const std::vector<Explanation>& rows) {
  nlohmann::ordered_json j;
  j["class_labels"] = m.class_labels;
  std::vector<std::string> vars;
  std::vector<double> base;
  for (const auto& v : m.variables) {
    if (v.weight > 0) vars.push_back(v.name);
  }
  for (std::size_t c = 0; c < m.class_count(); ++c) base.push_back(baseline(m, c));
  j["variables"] = vars;
  j["baseline"] = base;
  auto inst = nlohmann::ordered_json::array();
  for (const auto& e : rows) {
    nlohmann::ordered_json ji;
    ji["key"] = e.key;
    ji["posterior"] = e.posterior;
    // rows: classes, columns: variables in model order
    std::vector<std::vector<double>> matrix(m.class_count(), std::vector<double>(vars.size(), 0.0));
    std::vector<std::string> parts(vars.size());
    for (std::size_t c = 0; c < m.class_count(); ++c) {
      for (const auto& entry : e.attributions[c].entries) {
        const auto col = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), entry.variable) - vars.begin());
        matrix[c][col] = entry.value;
        parts[col] = entry.part;
      }
    }
    ji["parts"] = parts;
    ji["shapley"] = matrix;
    inst.push_back(ji);
  }
  j["instances"] = inst;
  return j;
}

}  // namespace modl
