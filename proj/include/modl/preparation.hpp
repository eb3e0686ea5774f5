#pragma once

// Supervised univariate preparation under the MODL criterion.
//
// Discretization (I intervals over n instances, J classes):
//   prior      = ln n + ln C(n+I-1, I-1) + sum_i ln C(n_i+J-1, J-1)
//   likelihood = sum_i ln(n_i! / prod_j n_ij!)
// Value grouping (V distinct values into K groups):
//   prior      = ln V + ln B(V, K) + sum_k ln C(n_k+J-1, J-1)
//   likelihood = sum_k ln(n_k! / prod_j n_kj!)
// Missing values sort below every number, so a dedicated missing part is
// simply a cut right after them. For categorical variables missing is one
// more value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "modl/csv.hpp"
#include "modl/dataset.hpp"
#include "modl/modl_math.hpp"

namespace modl {

enum class PartitionKind { Intervals, Groups };

inline const char* to_string(PartitionKind k) { return k == PartitionKind::Intervals ? "Intervals" : "Groups"; }

struct Part {
  std::vector<std::uint64_t> counts;  // per class

  // Intervals: ]lower, upper]; a missing-only part has no numeric range.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool has_numbers = true;

  // Groups: member values, sorted. Unseen values route to the catch-all.
  std::vector<std::string> values;
  bool catch_all = false;

  bool includes_missing = false;

  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

struct Level {
  double value = 0.0;
};

class PartitionModel {
 public:
  std::string variable;
  PartitionKind kind = PartitionKind::Intervals;
  std::vector<Part> parts;
  std::vector<std::string> class_labels;
  CodingLength prior;
  CodingLength likelihood;
  std::uint64_t n = 0;
  // Groups: number of distinct observed values (V), missing counted as one.
  std::uint64_t value_count = 0;

  CodingLength total() const { return prior + likelihood; }
  std::size_t part_count() const { return parts.size(); }
  std::size_t class_count() const { return class_labels.size(); }
  bool is_null() const { return parts.size() <= 1; }

  // Rebuilds lookup structures; call after editing parts.
  void finalize() {
    uppers_.clear();
    numeric_parts_.clear();
    value_to_part_.clear();
    missing_part_ = 0;
    catch_all_part_ = 0;
    for (std::uint32_t p = 0; p < parts.size(); ++p) {
      const auto& part = parts[p];
      if (part.includes_missing) missing_part_ = p;
      if (kind == PartitionKind::Intervals) {
        if (part.has_numbers) {
          uppers_.push_back(part.upper);
          numeric_parts_.push_back(p);
        }
      } else {
        if (part.catch_all) catch_all_part_ = p;
        for (const auto& v : part.values) value_to_part_.emplace(v, p);
      }
    }
    if (kind == PartitionKind::Groups && !has_missing_part()) missing_part_ = catch_all_part_;
  }

  std::uint32_t part_of_number(double x) const {
    if (kind == PartitionKind::Groups) return part_of_category(csv::format_number(x));
    if (std::isnan(x)) return part_of_missing();
    if (numeric_parts_.empty()) return 0;
    auto it = std::lower_bound(uppers_.begin(), uppers_.end(), x);
    if (it == uppers_.end()) --it;
    return numeric_parts_[static_cast<std::size_t>(it - uppers_.begin())];
  }

  std::uint32_t part_of_category(std::string_view s) const {
    if (kind == PartitionKind::Intervals) {
      auto v = csv::parse_number(s);
      if (!v) throw DataError("variable '" + variable + "': '" + std::string(s) + "' is not a number");
      return part_of_number(*v);
    }
    auto it = value_to_part_.find(std::string(s));
    return it == value_to_part_.end() ? catch_all_part_ : it->second;
  }

  // Missing values: the part that held them in training, else the lowest
  // interval / the catch-all group.
  std::uint32_t part_of_missing() const { return missing_part_; }

  std::uint32_t part_of(const Cell& cell) const {
    if (is_missing(cell)) return part_of_missing();
    if (auto d = std::get_if<double>(&cell)) return part_of_number(*d);
    return part_of_category(std::get<std::string>(cell));
  }

  std::string label(std::size_t p) const {
    const auto& part = parts.at(p);
    if (kind == PartitionKind::Intervals) {
      if (!part.has_numbers) return "Missing";
      std::string s;
      if (part.includes_missing) s = "Missing U ";
      s += "]" + bound_text(part.lower) + "," + bound_text(part.upper) + (std::isinf(part.upper) ? "[" : "]");
      return s;
    }
    std::string s = "{";
    bool first = true;
    if (part.includes_missing) {
      s += "Missing";
      first = false;
    }
    for (const auto& v : part.values) {
      if (!first) s += ", ";
      s += v;
      first = false;
    }
    if (part.catch_all) s += first ? "*" : ", *";
    return s + "}";
  }

 private:
  bool has_missing_part() const {
    return std::any_of(parts.begin(), parts.end(), [](const Part& p) { return p.includes_missing; });
  }
  static std::string bound_text(double b) {
    if (std::isinf(b)) return b < 0 ? "-inf" : "+inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", b);
    return buf;
  }

  std::vector<double> uppers_;
  std::vector<std::uint32_t> numeric_parts_;
  std::unordered_map<std::string, std::uint32_t> value_to_part_;
  std::uint32_t missing_part_ = 0;
  std::uint32_t catch_all_part_ = 0;
};

namespace detail {

// ln C(n+J-1, J-1) + ln(n! / prod n_j!) for one part.
inline double part_cost(const std::uint64_t* counts, std::size_t classes) {
  std::uint64_t n = 0;
  long double v = 0.0L;
  for (std::size_t j = 0; j < classes; ++j) {
    n += counts[j];
    v -= log_factorial_ld(counts[j]);
  }
  v += log_factorial_ld(n);
  return log_binomial(n + classes - 1, classes - 1).nats + static_cast<double>(v);
}

inline double part_prior(std::uint64_t n, std::size_t classes) {
  return log_binomial(n + classes - 1, classes - 1).nats;
}

inline void check_counts(const PartitionModel& m) {
  if (m.parts.empty()) throw std::invalid_argument("partition '" + m.variable + "': no parts");
  std::uint64_t total = 0;
  for (const auto& p : m.parts) {
    if (p.counts.size() != m.class_count()) {
      throw std::invalid_argument("partition '" + m.variable + "': part has " + std::to_string(p.counts.size()) +
                                  " class counts, expected " + std::to_string(m.class_count()));
    }
    total += p.total();
  }
  if (total != m.n) {
    throw std::invalid_argument("partition '" + m.variable + "': part counts sum to " + std::to_string(total) +
                                ", expected n=" + std::to_string(m.n));
  }
}

inline std::pair<double, double> split_costs(const PartitionModel& m) {
  double prior = 0.0;
  double likelihood = 0.0;
  const std::size_t J = m.class_count();
  for (const auto& p : m.parts) {
    prior += part_prior(p.total(), J);
    likelihood += log_multinomial(p.counts).nats;
  }
  return {prior, likelihood};
}

}  // namespace detail

/// MODL cost of an interval partition; stores the prior/likelihood split.
/// Throws std::invalid_argument on inconsistent counts.
inline CodingLength discretization_cost(PartitionModel& m) {
  if (m.kind != PartitionKind::Intervals) throw std::invalid_argument("discretization_cost: not an interval model");
  detail::check_counts(m);
  auto [parts_prior, likelihood] = detail::split_costs(m);
  const std::uint64_t I = m.parts.size();
  const double prior = std::log(static_cast<double>(m.n)) + log_binomial(m.n + I - 1, I - 1).nats + parts_prior;
  m.prior = CodingLength(prior);
  m.likelihood = CodingLength(likelihood);
  return m.total();
}

/// MODL cost of a value grouping; stores the prior/likelihood split.
inline CodingLength grouping_cost(PartitionModel& m) {
  if (m.kind != PartitionKind::Groups) throw std::invalid_argument("grouping_cost: not a group model");
  detail::check_counts(m);
  const std::uint64_t K = m.parts.size();
  if (m.value_count < K) {
    throw std::invalid_argument("grouping_cost: " + std::to_string(K) + " groups but only " +
                                std::to_string(m.value_count) + " values");
  }
  auto [parts_prior, likelihood] = detail::split_costs(m);
  const double prior = std::log(static_cast<double>(m.value_count)) + log_partition_count(m.value_count, K).nats +
                       parts_prior;
  m.prior = CodingLength(prior);
  m.likelihood = CodingLength(likelihood);
  return m.total();
}

inline CodingLength partition_cost(PartitionModel& m) {
  return m.kind == PartitionKind::Intervals ? discretization_cost(m) : grouping_cost(m);
}

/// Cost of the one-part model for n instances with the given class totals.
inline CodingLength null_discretization_cost(std::span<const std::uint64_t> class_totals) {
  std::uint64_t n = std::accumulate(class_totals.begin(), class_totals.end(), std::uint64_t{0});
  return CodingLength(std::log(static_cast<double>(n)) + detail::part_cost(class_totals.data(), class_totals.size()));
}

inline CodingLength null_grouping_cost(std::span<const std::uint64_t> class_totals, std::uint64_t value_count) {
  return CodingLength(std::log(static_cast<double>(value_count)) +
                      detail::part_cost(class_totals.data(), class_totals.size()));
}

/// 1 - cost(best)/cost(null), clipped to [0, 1].
inline Level level(const PartitionModel& best, CodingLength null_cost) {
  if (best.is_null() || !(null_cost.nats > 0.0)) return Level{0.0};
  const double v = 1.0 - best.total().nats / null_cost.nats;
  return Level{std::clamp(v, 0.0, 1.0)};
}

struct PreparationOptions {
  // Exact search up to these sizes (distinct sorted values / distinct
  // categories), greedy merging with post-optimization otherwise.
  std::size_t exact_interval_blocks = 0;
  std::size_t exact_group_values = 8;
  // Categorical variables with more distinct values start greedy merging
  // with the rarest values pooled into one group.
  std::size_t max_initial_groups = 256;
};

namespace detail {

inline constexpr double kImprovementEps = 1e-10;

// Interval search state over m sorted blocks with prefix class counts.
class IntervalSearch {
 public:
  IntervalSearch(std::vector<std::uint64_t> block_counts, std::size_t blocks, std::size_t classes)
      : m_(blocks), J_(classes), prefix_((blocks + 1) * classes, 0), tmp_(classes) {
    for (std::size_t b = 0; b < m_; ++b) {
      for (std::size_t j = 0; j < J_; ++j) prefix_[(b + 1) * J_ + j] = prefix_[b * J_ + j] + block_counts[b * J_ + j];
    }
    n_ = 0;
    for (std::size_t j = 0; j < J_; ++j) n_ += prefix_[m_ * J_ + j];
    log_n_ = std::log(static_cast<double>(n_));
  }

  std::size_t blocks() const { return m_; }

  // cost of the interval covering blocks [a, b)
  double cost(std::size_t a, std::size_t b) const {
    for (std::size_t j = 0; j < J_; ++j) tmp_[j] = prefix_[b * J_ + j] - prefix_[a * J_ + j];
    return part_cost(tmp_.data(), J_);
  }

  double global_prior(std::size_t intervals) const {
    return log_n_ + log_binomial(n_ + intervals - 1, intervals - 1).nats;
  }

  double total(const std::vector<std::size_t>& starts) const {
    double t = global_prior(starts.size());
    for (std::size_t k = 0; k < starts.size(); ++k) t += cost(starts[k], end_of(starts, k));
    return t;
  }

  std::size_t end_of(const std::vector<std::size_t>& starts, std::size_t k) const {
    return k + 1 < starts.size() ? starts[k + 1] : m_;
  }

  // Best single cut strictly inside (a, b); returns cut and summed cost.
  std::pair<std::size_t, double> best_cut(std::size_t a, std::size_t b) const {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t c = a + 1; c < b; ++c) {
      const double v = cost(a, c) + cost(c, b);
      if (v < best_cost - 1e-13) {
        best_cost = v;
        best = c;
      }
    }
    return {best, best_cost};
  }

  // Exact minimum by dynamic programming over (prefix, interval count).
  std::vector<std::size_t> exact() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    // best[k][i]: min summed part cost of blocks [0, i) in k intervals
    std::vector<std::vector<double>> best(m_ + 1, std::vector<double>(m_ + 1, inf));
    std::vector<std::vector<std::size_t>> from(m_ + 1, std::vector<std::size_t>(m_ + 1, 0));
    for (std::size_t i = 1; i <= m_; ++i) best[1][i] = cost(0, i);
    for (std::size_t k = 2; k <= m_; ++k) {
      for (std::size_t i = k; i <= m_; ++i) {
        for (std::size_t c = k - 1; c < i; ++c) {
          const double v = best[k - 1][c] + cost(c, i);
          if (v < best[k][i]) {
            best[k][i] = v;
            from[k][i] = c;
          }
        }
      }
    }
    std::size_t best_k = 1;
    double best_total = inf;
    for (std::size_t k = 1; k <= m_; ++k) {
      const double t = best[k][m_] + global_prior(k);
      if (t < best_total - kImprovementEps) {
        best_total = t;
        best_k = k;
      }
    }
    std::vector<std::size_t> starts(best_k);
    std::size_t i = m_;
    for (std::size_t k = best_k; k >= 1; --k) {
      const std::size_t c = k == 1 ? 0 : from[k][i];
      starts[k - 1] = c;
      i = c;
    }
    return starts;
  }

  // Bottom-up greedy merging from elementary blocks down to one interval,
  // keeping the best intermediate partition; ties go to the leftmost pair.
  std::vector<std::size_t> greedy_merge() const {
    struct Candidate {
      double delta;
      std::size_t left;  // start block of the left interval
      std::uint64_t stamp_left, stamp_right;
      bool operator>(const Candidate& o) const {
        if (delta != o.delta) return delta > o.delta;
        return left > o.left;
      }
    };
    std::vector<std::size_t> next(m_), prev(m_), end(m_);
    std::vector<double> icost(m_);
    std::vector<std::uint64_t> stamp(m_, 0);
    std::vector<char> alive(m_, 1);
    for (std::size_t b = 0; b < m_; ++b) {
      next[b] = b + 1;
      prev[b] = b == 0 ? m_ : b - 1;
      end[b] = b + 1;
      icost[b] = cost(b, b + 1);
    }
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
    auto push = [&](std::size_t a) {
      const std::size_t b = next[a];
      if (b >= m_) return;
      heap.push({cost(a, end[b]) - icost[a] - icost[b], a, stamp[a], stamp[b]});
    };
    for (std::size_t b = 0; b + 1 < m_; ++b) push(b);

    std::size_t intervals = m_;
    double parts_sum = 0.0;
    for (double c : icost) parts_sum += c;
    double best_total = parts_sum + global_prior(intervals);
    std::size_t best_step = 0;
    std::vector<std::size_t> merges;  // left start of each merge, in order
    while (!heap.empty()) {
      auto cand = heap.top();
      heap.pop();
      const std::size_t a = cand.left;
      if (!alive[a] || stamp[a] != cand.stamp_left) continue;
      const std::size_t b = next[a];
      if (b >= m_ || stamp[b] != cand.stamp_right) continue;
      // merge b into a
      const double merged = cost(a, end[b]);
      parts_sum += merged - icost[a] - icost[b];
      icost[a] = merged;
      end[a] = end[b];
      next[a] = next[b];
      if (next[a] < m_) prev[next[a]] = a;
      alive[b] = 0;
      ++stamp[a];
      --intervals;
      merges.push_back(a);
      const double t = parts_sum + global_prior(intervals);
      if (t <= best_total + kImprovementEps) {
        if (t < best_total) best_total = t;
        best_step = merges.size();
      }
      push(a);
      if (prev[a] < m_) push(prev[a]);
    }
    // replay the first best_step merges
    std::vector<std::size_t> nxt(m_);
    std::vector<char> start(m_, 1);
    for (std::size_t b = 0; b < m_; ++b) nxt[b] = b + 1;
    for (std::size_t s = 0; s < best_step; ++s) {
      const std::size_t a = merges[s];
      const std::size_t b = nxt[a];
      start[b] = 0;
      nxt[a] = nxt[b];
    }
    std::vector<std::size_t> starts;
    for (std::size_t b = 0; b < m_; ++b) {
      if (start[b]) starts.push_back(b);
    }
    return starts;
  }

  // Local moves until none improves: split, merge, merge-split (move one
  // boundary), merge-merge-split (three intervals into two).
  void post_optimize(std::vector<std::size_t>& starts) const {
    bool improved = true;
    while (improved) {
      improved = false;
      // splits
      for (std::size_t k = 0; k < starts.size(); ++k) {
        const std::size_t a = starts[k], b = end_of(starts, k);
        if (b - a < 2) continue;
        auto [c, v] = best_cut(a, b);
        const double delta = v - cost(a, b) + global_prior(starts.size() + 1) - global_prior(starts.size());
        if (delta < -kImprovementEps) {
          starts.insert(starts.begin() + static_cast<std::ptrdiff_t>(k + 1), c);
          improved = true;
          ++k;
        }
      }
      // merges
      for (std::size_t k = 0; k + 1 < starts.size();) {
        const std::size_t a = starts[k], b = starts[k + 1], c = end_of(starts, k + 1);
        const double delta =
            cost(a, c) - cost(a, b) - cost(b, c) + global_prior(starts.size() - 1) - global_prior(starts.size());
        if (delta < -kImprovementEps) {
          starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(k + 1));
          improved = true;
        } else {
          ++k;
        }
      }
      // boundary moves
      for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
        const std::size_t a = starts[k], b = starts[k + 1], c = end_of(starts, k + 1);
        auto [cut, v] = best_cut(a, c);
        if (cut != b && v - cost(a, b) - cost(b, c) < -kImprovementEps) {
          starts[k + 1] = cut;
          improved = true;
        }
      }
      // three into two
      for (std::size_t k = 0; k + 2 < starts.size();) {
        const std::size_t a = starts[k], b = starts[k + 1], c = starts[k + 2], d = end_of(starts, k + 2);
        auto [cut, v] = best_cut(a, d);
        const double delta = v - cost(a, b) - cost(b, c) - cost(c, d) + global_prior(starts.size() - 1) -
                             global_prior(starts.size());
        if (delta < -kImprovementEps) {
          starts[k + 1] = cut;
          starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(k + 2));
          improved = true;
        } else {
          ++k;
        }
      }
    }
  }

 private:
  std::size_t m_, J_;
  std::vector<std::uint64_t> prefix_;
  mutable std::vector<std::uint64_t> tmp_;
  std::uint64_t n_ = 0;
  double log_n_ = 0.0;
};

inline double midpoint(double a, double b) {
  double mid = a / 2 + b / 2;
  if (!(mid >= a && mid < b)) mid = a;
  return mid;
}

}  // namespace detail

/// Optimal supervised discretization of a numerical variable.
/// `values` uses NaN for missing; `classes[i] < class_labels.size()`.
inline PartitionModel optimize_discretization(std::span<const double> values, std::span<const std::uint32_t> classes,
                                              const std::vector<std::string>& class_labels,
                                              const std::string& variable = "",
                                              const PreparationOptions& options = {}) {
  if (values.size() != classes.size()) throw std::invalid_argument("optimize_discretization: size mismatch");
  if (values.empty()) throw std::invalid_argument("optimize_discretization: no instances");
  const std::size_t J = std::max<std::size_t>(1, class_labels.size());
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const bool ma = std::isnan(values[a]), mb = std::isnan(values[b]);
    if (ma != mb) return ma;
    if (ma) return false;
    return values[a] < values[b];
  });

  // blocks of equal values; missing forms the first block when present
  std::vector<std::uint64_t> block_counts;
  std::vector<double> block_value;
  std::vector<char> block_missing;
  for (std::size_t i = 0; i < order.size();) {
    const double v = values[order[i]];
    const bool miss = std::isnan(v);
    std::size_t e = i;
    block_counts.resize(block_counts.size() + J, 0);
    auto* row = &block_counts[block_counts.size() - J];
    while (e < order.size() && (miss ? std::isnan(values[order[e]]) : values[order[e]] == v)) {
      const auto c = classes[order[e]];
      if (c >= J) throw std::invalid_argument("optimize_discretization: class index out of range");
      ++row[c];
      ++e;
    }
    block_value.push_back(v);
    block_missing.push_back(miss);
    i = e;
  }
  const std::size_t m = block_value.size();

  detail::IntervalSearch search(block_counts, m, J);
  std::vector<std::size_t> starts;
  if (m <= options.exact_interval_blocks) {
    starts = search.exact();
  } else {
    starts = search.greedy_merge();
    search.post_optimize(starts);
  }

  PartitionModel model;
  model.variable = variable;
  model.kind = PartitionKind::Intervals;
  model.class_labels = class_labels;
  model.n = values.size();
  model.value_count = m;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t a = starts[k], b = search.end_of(starts, k);
    Part part;
    part.counts.assign(J, 0);
    for (std::size_t blk = a; blk < b; ++blk) {
      for (std::size_t j = 0; j < J; ++j) part.counts[j] += block_counts[blk * J + j];
    }
    part.includes_missing = block_missing[a] != 0;
    part.has_numbers = !(b - a == 1 && block_missing[a]);
    part.lower = k == 0 || model.parts.back().upper == -std::numeric_limits<double>::infinity()
                     ? -std::numeric_limits<double>::infinity()
                     : model.parts.back().upper;
    if (!part.has_numbers) {
      part.upper = -std::numeric_limits<double>::infinity();
    } else if (k + 1 == starts.size()) {
      part.upper = std::numeric_limits<double>::infinity();
    } else {
      part.upper = detail::midpoint(block_value[b - 1], block_value[b]);
    }
    model.parts.push_back(std::move(part));
  }
  if (model.parts.size() == 1) {
    model.parts[0].lower = -std::numeric_limits<double>::infinity();
    model.parts[0].upper = std::numeric_limits<double>::infinity();
    model.parts[0].has_numbers = true;
  }
  discretization_cost(model);
  model.finalize();
  return model;
}

/// Spec-shaped convenience: (value or missing, class index) pairs.
inline PartitionModel optimize_discretization(const std::vector<std::pair<std::optional<double>, std::uint32_t>>& data,
                                              const std::vector<std::string>& class_labels,
                                              const PreparationOptions& options = {}) {
  std::vector<double> v;
  std::vector<std::uint32_t> c;
  for (const auto& [x, k] : data) {
    v.push_back(x ? *x : std::numeric_limits<double>::quiet_NaN());
    c.push_back(k);
  }
  return optimize_discretization(v, c, class_labels, "", options);
}

namespace detail {

struct GroupState {
  std::vector<std::uint64_t> counts;
  std::vector<std::uint32_t> members;  // value indices, ascending
};

class GroupSearch {
 public:
  GroupSearch(std::vector<std::uint64_t> value_counts, std::size_t values, std::size_t classes)
      : V_(values), J_(classes), counts_(std::move(value_counts)), tmp_(classes) {}

  double cost_of(const std::vector<std::uint64_t>& c) const { return part_cost(c.data(), J_); }

  double merged_cost(const GroupState& a, const GroupState& b) const {
    for (std::size_t j = 0; j < J_; ++j) tmp_[j] = a.counts[j] + b.counts[j];
    return part_cost(tmp_.data(), J_);
  }

  double global_prior(std::size_t groups) const {
    return std::log(static_cast<double>(V_)) + log_partition_count(V_, groups).nats;
  }

  double total(const std::vector<GroupState>& groups) const {
    double t = global_prior(groups.size());
    for (const auto& g : groups) t += cost_of(g.counts);
    return t;
  }

  GroupState singleton(std::uint32_t v) const {
    GroupState g;
    g.counts.assign(counts_.begin() + static_cast<std::ptrdiff_t>(v * J_),
                    counts_.begin() + static_cast<std::ptrdiff_t>((v + 1) * J_));
    g.members = {v};
    return g;
  }

  // Exhaustive search over set partitions (restricted growth strings).
  std::vector<GroupState> exact() const {
    std::vector<std::uint32_t> rgs(V_, 0), maxes(V_, 0);
    std::vector<std::uint32_t> best_rgs = rgs;
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::uint64_t>> gc;
    for (;;) {
      const std::uint32_t k = V_ == 0 ? 0 : *std::max_element(rgs.begin(), rgs.end()) + 1;
      gc.assign(k, std::vector<std::uint64_t>(J_, 0));
      for (std::size_t v = 0; v < V_; ++v) {
        for (std::size_t j = 0; j < J_; ++j) gc[rgs[v]][j] += counts_[v * J_ + j];
      }
      double t = global_prior(k);
      for (const auto& c : gc) t += cost_of(c);
      if (t < best - kImprovementEps) {
        best = t;
        best_rgs = rgs;
      }
      if (!advance(rgs, maxes)) break;
    }
    std::uint32_t k = *std::max_element(best_rgs.begin(), best_rgs.end()) + 1;
    std::vector<GroupState> groups(k);
    for (auto& g : groups) g.counts.assign(J_, 0);
    for (std::uint32_t v = 0; v < V_; ++v) {
      auto& g = groups[best_rgs[v]];
      g.members.push_back(v);
      for (std::size_t j = 0; j < J_; ++j) g.counts[j] += counts_[v * J_ + j];
    }
    return groups;
  }

  static bool advance(std::vector<std::uint32_t>& rgs, std::vector<std::uint32_t>& maxes) {
    for (std::size_t i = rgs.size(); i-- > 1;) {
      if (rgs[i] <= maxes[i]) {
        ++rgs[i];
        for (std::size_t r = i + 1; r < rgs.size(); ++r) {
          rgs[r] = 0;
          maxes[r] = std::max(maxes[r - 1], rgs[r - 1]);
        }
        return true;
      }
    }
    return false;
  }

  // Greedy merging from the initial groups down to one, keeping the best
  // intermediate partition. Ties go to the pair whose smallest members come
  // first.
  std::vector<GroupState> greedy(std::vector<GroupState> groups) const {
    const auto history_start = groups;
    double parts = 0.0;
    std::vector<double> gcost;
    for (const auto& g : groups) {
      gcost.push_back(cost_of(g.counts));
      parts += gcost.back();
    }
    double best_total = parts + global_prior(groups.size());
    std::size_t best_step = 0;
    std::vector<std::pair<std::size_t, std::size_t>> merges;
    while (groups.size() > 1) {
      double best_delta = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 1;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
          const double d = merged_cost(groups[i], groups[j]) - gcost[i] - gcost[j];
          if (d < best_delta) {
            best_delta = d;
            bi = i;
            bj = j;
          }
        }
      }
      merge_into(groups, bi, bj);
      gcost[bi] = cost_of(groups[bi].counts);
      gcost.erase(gcost.begin() + static_cast<std::ptrdiff_t>(bj));
      parts += best_delta;
      merges.emplace_back(bi, bj);
      const double t = parts + global_prior(groups.size());
      if (t <= best_total + kImprovementEps) {
        if (t < best_total) best_total = t;
        best_step = merges.size();
      }
    }
    groups = history_start;
    for (std::size_t s = 0; s < best_step; ++s) merge_into(groups, merges[s].first, merges[s].second);
    return groups;
  }

  // Moves single values between groups, then merges groups, until stable.
  void post_optimize(std::vector<GroupState>& groups) const {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::uint32_t v = 0; v < V_; ++v) {
        std::size_t from = 0;
        while (std::find(groups[from].members.begin(), groups[from].members.end(), v) == groups[from].members.end()) {
          ++from;
        }
        const auto single = singleton(v);
        auto removed = groups[from].counts;
        for (std::size_t j = 0; j < J_; ++j) removed[j] -= single.counts[j];
        const bool empties = groups[from].members.size() == 1;
        const double base_from = cost_of(groups[from].counts);
        const double from_after = empties ? 0.0 : cost_of(removed);
        double best_delta = -kImprovementEps;
        std::optional<std::size_t> best_to;
        for (std::size_t to = 0; to < groups.size(); ++to) {
          if (to == from) continue;
          double d = from_after - base_from + merged_cost(groups[to], single) - cost_of(groups[to].counts);
          if (empties) d += global_prior(groups.size() - 1) - global_prior(groups.size());
          if (d < best_delta) {
            best_delta = d;
            best_to = to;
          }
        }
        if (!best_to) continue;
        auto& dst = groups[*best_to];
        for (std::size_t j = 0; j < J_; ++j) dst.counts[j] += single.counts[j];
        dst.members.insert(std::upper_bound(dst.members.begin(), dst.members.end(), v), v);
        if (empties) {
          groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(from));
        } else {
          groups[from].counts = removed;
          auto& mem = groups[from].members;
          mem.erase(std::find(mem.begin(), mem.end(), v));
        }
        sort_groups(groups);
        improved = true;
      }
      for (std::size_t i = 0; i < groups.size() && !improved; ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
          const double d = merged_cost(groups[i], groups[j]) - cost_of(groups[i].counts) -
                           cost_of(groups[j].counts) + global_prior(groups.size() - 1) - global_prior(groups.size());
          if (d < -kImprovementEps) {
            merge_into(groups, i, j);
            improved = true;
            break;
          }
        }
      }
    }
  }

  static void sort_groups(std::vector<GroupState>& groups) {
    std::sort(groups.begin(), groups.end(),
              [](const GroupState& a, const GroupState& b) { return a.members.front() < b.members.front(); });
  }

  static void merge_into(std::vector<GroupState>& groups, std::size_t i, std::size_t j) {
    auto& a = groups[i];
    auto& b = groups[j];
    for (std::size_t c = 0; c < a.counts.size(); ++c) a.counts[c] += b.counts[c];
    std::vector<std::uint32_t> mem;
    std::merge(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(), std::back_inserter(mem));
    a.members = std::move(mem);
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(j));
  }

 private:
  std::size_t V_, J_;
  std::vector<std::uint64_t> counts_;
  mutable std::vector<std::uint64_t> tmp_;
};

}  // namespace detail

/// Optimal supervised grouping of a categorical variable. `codes` index into
/// `dictionary`, kMissingCode for missing.
inline PartitionModel optimize_grouping(std::span<const std::int32_t> codes, std::span<const std::string> dictionary,
                                        std::span<const std::uint32_t> classes,
                                        const std::vector<std::string>& class_labels,
                                        const std::string& variable = "", const PreparationOptions& options = {}) {
  if (codes.size() != classes.size()) throw std::invalid_argument("optimize_grouping: size mismatch");
  if (codes.empty()) throw std::invalid_argument("optimize_grouping: no instances");
  const std::size_t J = std::max<std::size_t>(1, class_labels.size());

  // observed values in alphabetical order, missing first
  std::vector<std::uint64_t> seen(dictionary.size() + 1, 0);
  for (auto c : codes) ++seen[static_cast<std::size_t>(c + 1)];
  std::vector<std::int32_t> observed;
  if (seen[0]) observed.push_back(kMissingCode);
  std::vector<std::int32_t> cats;
  for (std::size_t d = 0; d < dictionary.size(); ++d) {
    if (seen[d + 1]) cats.push_back(static_cast<std::int32_t>(d));
  }
  std::sort(cats.begin(), cats.end(), [&](std::int32_t a, std::int32_t b) { return dictionary[a] < dictionary[b]; });
  observed.insert(observed.end(), cats.begin(), cats.end());
  const std::size_t V = observed.size();
  std::vector<std::uint32_t> slot(dictionary.size() + 1, 0);
  for (std::uint32_t v = 0; v < V; ++v) slot[static_cast<std::size_t>(observed[v] + 1)] = v;
  std::vector<std::uint64_t> counts(V * J, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (classes[i] >= J) throw std::invalid_argument("optimize_grouping: class index out of range");
    ++counts[slot[static_cast<std::size_t>(codes[i] + 1)] * J + classes[i]];
  }

  detail::GroupSearch search(counts, V, J);
  std::vector<detail::GroupState> groups;
  if (V <= options.exact_group_values) {
    groups = search.exact();
  } else {
    std::vector<detail::GroupState> init;
    std::vector<std::uint32_t> by_freq(V);
    std::iota(by_freq.begin(), by_freq.end(), 0u);
    std::vector<char> pooled(V, 0);
    auto freq = [&](std::uint32_t v) {
      std::uint64_t f = 0;
      for (std::size_t j = 0; j < J; ++j) f += counts[v * J + j];
      return f;
    };
    if (V > options.max_initial_groups) {
      std::stable_sort(by_freq.begin(), by_freq.end(), [&](auto a, auto b) { return freq(a) > freq(b); });
      for (std::size_t i = options.max_initial_groups - 1; i < V; ++i) pooled[by_freq[i]] = 1;
    }
    std::optional<detail::GroupState> pool;
    for (std::uint32_t v = 0; v < V; ++v) {
      if (!pooled[v]) {
        init.push_back(search.singleton(v));
        continue;
      }
      auto g = search.singleton(v);
      if (!pool) {
        pool = g;
      } else {
        for (std::size_t j = 0; j < J; ++j) pool->counts[j] += g.counts[j];
        pool->members.push_back(v);
      }
    }
    if (pool) init.push_back(*pool);
    detail::GroupSearch::sort_groups(init);
    groups = search.greedy(std::move(init));
    search.post_optimize(groups);
  }

  // most frequent group first; it doubles as the catch-all
  std::vector<std::uint64_t> totals;
  for (const auto& g : groups) totals.push_back(std::accumulate(g.counts.begin(), g.counts.end(), std::uint64_t{0}));
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (totals[a] != totals[b]) return totals[a] > totals[b];
    return groups[a].members.front() < groups[b].members.front();
  });

  PartitionModel model;
  model.variable = variable;
  model.kind = PartitionKind::Groups;
  model.class_labels = class_labels;
  model.n = codes.size();
  model.value_count = V;
  for (std::size_t gi = 0; gi < order.size(); ++gi) {
    const auto& g = groups[order[gi]];
    Part part;
    part.counts = g.counts;
    for (auto v : g.members) {
      if (observed[v] == kMissingCode) {
        part.includes_missing = true;
      } else {
        part.values.push_back(dictionary[observed[v]]);
      }
    }
    part.catch_all = gi == 0;
    model.parts.push_back(std::move(part));
  }
  grouping_cost(model);
  model.finalize();
  return model;
}

/// Spec-shaped convenience: (category or missing, class index) pairs.
inline PartitionModel optimize_grouping(const std::vector<std::pair<std::optional<std::string>, std::uint32_t>>& data,
                                        const std::vector<std::string>& class_labels,
                                        const PreparationOptions& options = {}) {
  Column col;
  col.type = ColumnType::Categorical;
  std::vector<std::uint32_t> classes;
  for (const auto& [v, k] : data) {
    col.append(v ? Cell(*v) : Cell{});
    classes.push_back(k);
  }
  return optimize_grouping(col.codes, col.dictionary, classes, class_labels, "", options);
}

/// A prepared variable: its best partition, the null-model cost and Level.
struct PreparedVariable {
  PartitionModel model;
  CodingLength null_cost;
  Level level;
};

/// Prepares one column restricted to `rows` (training instances).
inline PreparedVariable prepare_column(const Column& column, std::span<const std::uint32_t> rows,
                                       std::span<const std::uint32_t> classes,
                                       const std::vector<std::string>& class_labels,
                                       const PreparationOptions& options = {}) {
  const std::size_t J = class_labels.size();
  std::vector<std::uint64_t> totals(J, 0);
  for (auto c : classes) ++totals[c];
  PreparedVariable out;
  if (column.numerical()) {
    std::vector<double> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = column.numbers[rows[i]];
    out.model = optimize_discretization(v, classes, class_labels, column.name, options);
    out.null_cost = null_discretization_cost(totals);
  } else {
    std::vector<std::int32_t> c(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) c[i] = column.codes[rows[i]];
    out.model = optimize_grouping(c, column.dictionary, classes, class_labels, column.name, options);
    out.null_cost = null_grouping_cost(totals, out.model.value_count);
  }
  out.level = level(out.model, out.null_cost);
  return out;
}

}  // namespace modl
