#pragma once

// Aggregate variables over a multi-table schema.
//
// An expression is either a native root column or Op(TablePath, Operand)
// where TablePath is a child of the enclosing table and Operand is a column
// of TablePath or a nested aggregate over one of its children. The prior is
// hierarchical and uniform at each decision:
//   native vs constructed   ln 2 (only when both are possible)
//   native column           ln |root native columns|
//   operation               ln |ops applicable to some child|
//   child table             ln |children where the op applies|
//   operand                 ln |applicable columns (+1 for recursion)|
// Nested aggregates must produce a number, so Mode is not offered there.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "modl/dataset.hpp"
#include "modl/error.hpp"
#include "modl/modl_math.hpp"
#include "modl/parallel.hpp"
#include "modl/rng.hpp"
#include "modl/schema.hpp"

namespace modl {

enum class AggregateOp { Count, CountDistinct, Mode, Mean, Median, Min, Max, Sum, StdDev };

inline constexpr std::array<AggregateOp, 9> kAggregateOps{
    AggregateOp::Count, AggregateOp::CountDistinct, AggregateOp::Mode, AggregateOp::Mean,  AggregateOp::Median,
    AggregateOp::Min,   AggregateOp::Max,           AggregateOp::Sum,  AggregateOp::StdDev};

inline const char* to_string(AggregateOp op) {
  switch (op) {
    case AggregateOp::Count: return "Count";
    case AggregateOp::CountDistinct: return "CountDistinct";
    case AggregateOp::Mode: return "Mode";
    case AggregateOp::Mean: return "Mean";
    case AggregateOp::Median: return "Median";
    case AggregateOp::Min: return "Min";
    case AggregateOp::Max: return "Max";
    case AggregateOp::Sum: return "Sum";
    case AggregateOp::StdDev: return "StdDev";
  }
  return "?";
}

inline std::optional<AggregateOp> parse_aggregate_op(std::string_view s) {
  for (auto op : kAggregateOps) {
    if (s == to_string(op)) return op;
  }
  return std::nullopt;
}

inline bool takes_categorical(AggregateOp op) { return op == AggregateOp::CountDistinct || op == AggregateOp::Mode; }
inline bool takes_numerical(AggregateOp op) { return op != AggregateOp::Count && !takes_categorical(op); }
inline bool numeric_result(AggregateOp op) { return op != AggregateOp::Mode; }

struct FeatureExpr {
  bool aggregate = false;
  AggregateOp op = AggregateOp::Count;
  std::string table;   // full path; "" for a native root column
  std::string column;  // native column, or the operand column
  std::shared_ptr<const FeatureExpr> nested;
  CodingLength prior;
  std::string name;

  bool numeric(const Schema& schema) const {
    if (aggregate) return numeric_result(op);
    const auto& spec = schema.table(schema.root());
    return spec.columns[*spec.column_index(column)].type == ColumnType::Numerical;
  }
  std::size_t depth() const { return aggregate ? 1 + (nested ? nested->depth() : 0) : 0; }
  bool operator==(const FeatureExpr& o) const { return name == o.name; }
};

struct FeatureSet {
  std::vector<FeatureExpr> features;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
};

/// Per-table choice sets used by the prior, the sampler and the parser.
class FeatureSpace {
 public:
  FeatureSpace(const Schema& schema, std::string target, std::size_t max_depth)
      : schema_(&schema), target_(std::move(target)), max_depth_(max_depth) {
    numerical_.resize(schema.size());
    categorical_.resize(schema.size());
    for (std::size_t t = 0; t < schema.size(); ++t) {
      for (const auto& c : schema.table(t).columns) {
        if (t == schema.root() && c.name == target_) continue;
        if (c.type == ColumnType::Numerical) numerical_[t].push_back(c.name);
        if (c.type == ColumnType::Categorical) categorical_[t].push_back(c.name);
      }
    }
    for (const auto& c : schema.table(schema.root()).columns) {
      if (c.type != ColumnType::Key && c.name != target_) natives_.push_back(c.name);
    }
  }

  const Schema& schema() const { return *schema_; }
  std::size_t max_depth() const { return max_depth_; }
  const std::string& target() const { return target_; }
  const std::vector<std::string>& natives() const { return natives_; }
  const std::vector<std::string>& numerical(std::size_t t) const { return numerical_[t]; }
  const std::vector<std::string>& categorical(std::size_t t) const { return categorical_[t]; }

  bool can_construct() const { return max_depth_ >= 1 && !schema_->children(schema_->root()).empty(); }

  bool can_recurse(std::size_t table, std::size_t level) const {
    return level < max_depth_ && !schema_->children(table).empty();
  }

  // op aggregating over `table`, the aggregate itself sitting at `level`
  bool applies(AggregateOp op, std::size_t table, std::size_t level) const {
    if (op == AggregateOp::Count) return true;
    if (takes_categorical(op)) return !categorical_[table].empty();
    return !numerical_[table].empty() || can_recurse(table, level);
  }

  // operations offered when aggregating a child of `parent`
  std::vector<AggregateOp> ops(std::size_t parent, std::size_t level) const {
    std::vector<AggregateOp> out;
    for (auto op : kAggregateOps) {
      if (level > 1 && !numeric_result(op)) continue;
      for (auto c : schema_->children(parent)) {
        if (applies(op, c, level)) {
          out.push_back(op);
          break;
        }
      }
    }
    return out;
  }

  std::vector<std::size_t> tables(AggregateOp op, std::size_t parent, std::size_t level) const {
    std::vector<std::size_t> out;
    for (auto c : schema_->children(parent)) {
      if (applies(op, c, level)) out.push_back(c);
    }
    return out;
  }

  // operand choices: columns, plus one recursion slot for numeric ops
  std::size_t operand_choices(AggregateOp op, std::size_t table, std::size_t level) const {
    if (op == AggregateOp::Count) return 1;
    if (takes_categorical(op)) return categorical_[table].size();
    return numerical_[table].size() + (can_recurse(table, level) ? 1 : 0);
  }

 private:
  const Schema* schema_;
  std::string target_;
  std::size_t max_depth_;
  std::vector<std::vector<std::string>> numerical_, categorical_;
  std::vector<std::string> natives_;
};

namespace detail {

inline double ln(std::size_t n) { return std::log(static_cast<double>(n)); }

inline std::string display(const FeatureExpr& e) {
  if (!e.aggregate) return e.column;
  std::string s = std::string(to_string(e.op)) + "(" + e.table;
  if (e.nested) {
    s += ", " + display(*e.nested);
  } else if (e.op != AggregateOp::Count) {
    s += ", " + e.column;
  }
  return s + ")";
}

// Prior of an aggregate over a child of `parent` at `level`; validates.
inline double aggregate_prior(const FeatureExpr& e, const FeatureSpace& space, std::size_t parent,
                              std::size_t level) {
  const auto& schema = space.schema();
  auto fail = [&](const std::string& msg) -> double { throw DataError("feature '" + display(e) + "': " + msg); };
  if (!e.aggregate) return fail("expected an aggregate");
  if (level > space.max_depth()) return fail("nesting deeper than max depth " + std::to_string(space.max_depth()));
  const auto t = schema.find(e.table);
  if (!t || schema.parent(*t) != parent) {
    return fail("table '" + e.table + "' is not a child of '" +
                (parent == schema.root() ? schema.root_name() : schema.path(parent)) + "'");
  }
  if (level > 1 && !numeric_result(e.op)) return fail("nested aggregates must be numeric");
  if (!space.applies(e.op, *t, level)) return fail(std::string(to_string(e.op)) + " does not apply");
  double p = ln(space.ops(parent, level).size()) + ln(space.tables(e.op, parent, level).size());
  if (e.op == AggregateOp::Count) {
    if (e.nested || !e.column.empty()) return fail("Count takes no operand");
    return p;
  }
  p += ln(space.operand_choices(e.op, *t, level));
  if (e.nested) {
    if (takes_categorical(e.op)) return fail("categorical aggregates take a column operand");
    if (!space.can_recurse(*t, level)) return fail("no nesting allowed here");
    return p + aggregate_prior(*e.nested, space, *t, level + 1);
  }
  const auto& cols = takes_categorical(e.op) ? space.categorical(*t) : space.numerical(*t);
  if (std::find(cols.begin(), cols.end(), e.column) == cols.end()) {
    return fail("'" + e.column + "' is not a " + (takes_categorical(e.op) ? "categorical" : "numerical") +
                " column of '" + schema.path(*t) + "'");
  }
  return p;
}

// Canonicalizes table references to full paths.
inline void canonicalize(FeatureExpr& e, const Schema& schema) {
  if (!e.aggregate) return;
  e.table = schema.path(schema.require(e.table));
  if (e.nested) {
    auto inner = *e.nested;
    canonicalize(inner, schema);
    e.nested = std::make_shared<const FeatureExpr>(std::move(inner));
  }
}

}  // namespace detail

inline bool natives_possible(const FeatureSpace& space) { return !space.natives().empty(); }

/// Prior coding length of a validated expression. Throws DataError when the
/// expression does not fit the schema.
inline CodingLength feature_prior_nats(const FeatureExpr& expr, const FeatureSpace& space) {
  const auto& schema = space.schema();
  if (!expr.aggregate) {
    const auto& natives = space.natives();
    if (std::find(natives.begin(), natives.end(), expr.column) == natives.end()) {
      throw DataError("feature '" + expr.column + "': not a native variable of '" + schema.root_name() + "'");
    }
    return CodingLength((space.can_construct() ? std::log(2.0) : 0.0) + detail::ln(natives.size()));
  }
  if (!space.can_construct()) throw DataError("feature '" + detail::display(expr) + "': no construction possible");
  const double choose = natives_possible(space) ? std::log(2.0) : 0.0;
  return CodingLength(choose + detail::aggregate_prior(expr, space, schema.root(), 1));
}

inline CodingLength feature_prior_nats(const FeatureExpr& expr, const Schema& schema, const std::string& target,
                                       std::size_t max_depth = 2) {
  return feature_prior_nats(expr, FeatureSpace(schema, target, max_depth));
}

namespace detail {

class FeatureParser {
 public:
  explicit FeatureParser(std::string_view text) : s_(text) {}

  FeatureExpr parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected '" + std::string(s_.substr(pos_)) + "'");
    return e;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    throw DataError("cannot parse feature '" + std::string(s_) + "': " + msg);
  }
  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  std::string token() {
    skip();
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != ',') ++pos_;
    auto t = std::string(s_.substr(start, pos_ - start));
    while (!t.empty() && t.back() == ' ') t.pop_back();
    return t;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  FeatureExpr expr() {
    FeatureExpr e;
    auto head = token();
    if (head.empty()) error("empty name");
    if (!eat('(')) {
      e.column = head;
      return e;
    }
    auto op = parse_aggregate_op(head);
    if (!op) error("unknown operation '" + head + "'");
    e.aggregate = true;
    e.op = *op;
    e.table = token();
    if (e.table.empty()) error("missing table");
    if (eat(',')) {
      auto save = pos_;
      auto operand = token();
      if (eat('(')) {
        pos_ = save;
        e.nested = std::make_shared<const FeatureExpr>(expr());
      } else {
        e.column = operand;
        if (e.column.empty()) error("missing operand");
      }
    }
    if (!eat(')')) error("expected ')'");
    return e;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a canonical name. Short table names are accepted and resolved to
/// full paths; the prior is computed.
inline FeatureExpr parse_feature(std::string_view text, const FeatureSpace& space) {
  auto e = detail::FeatureParser(text).parse();
  if (!e.aggregate) {
    e.prior = feature_prior_nats(e, space);
    e.name = e.column;
    return e;
  }
  detail::canonicalize(e, space.schema());
  e.prior = feature_prior_nats(e, space);
  e.name = detail::display(e);
  return e;
}

namespace detail {

inline FeatureExpr draw_aggregate(const FeatureSpace& space, std::size_t parent, std::size_t level, Rng& rng) {
  const auto& schema = space.schema();
  FeatureExpr e;
  e.aggregate = true;
  const auto ops = space.ops(parent, level);
  e.op = ops[rng.uniform_index(ops.size())];
  const auto tables = space.tables(e.op, parent, level);
  const auto t = tables[rng.uniform_index(tables.size())];
  e.table = schema.path(t);
  if (e.op == AggregateOp::Count) return e;
  const auto& cols = takes_categorical(e.op) ? space.categorical(t) : space.numerical(t);
  const auto pick = rng.uniform_index(space.operand_choices(e.op, t, level));
  if (pick < cols.size()) {
    e.column = cols[pick];
  } else {
    e.nested = std::make_shared<const FeatureExpr>(draw_aggregate(space, t, level + 1, rng));
  }
  return e;
}

}  // namespace detail

/// Draws up to n distinct constructed features by walking the prior from
/// the seeded "features" substream. Stops after 10*n consecutive duplicate
/// draws, so fewer than n features come back when the space is exhausted.
inline FeatureSet sample_features(const FeatureSpace& space, std::size_t n, std::uint64_t seed) {
  FeatureSet set;
  set.seed = seed;
  set.requested = n;
  if (n == 0 || !space.can_construct()) return set;
  auto rng = Rng::substream(seed, "features");
  std::unordered_set<std::string> seen;
  std::size_t rejections = 0;
  const std::size_t budget = 10 * n;
  while (set.features.size() < n && rejections < budget) {
    auto e = detail::draw_aggregate(space, space.schema().root(), 1, rng);
    e.name = detail::display(e);
    if (!seen.insert(e.name).second) {
      ++rejections;
      continue;
    }
    rejections = 0;
    e.prior = feature_prior_nats(e, space);
    set.features.push_back(std::move(e));
  }
  return set;
}

inline FeatureSet sample_features(const Schema& schema, const std::string& target, std::size_t n,
                                  std::uint64_t seed, std::size_t max_depth = 2) {
  return sample_features(FeatureSpace(schema, target, max_depth), n, seed);
}

namespace detail {

inline void enumerate_aggregates(const FeatureSpace& space, std::size_t parent, std::size_t level,
                                 std::vector<FeatureExpr>& out) {
  const auto& schema = space.schema();
  for (auto op : space.ops(parent, level)) {
    for (auto t : space.tables(op, parent, level)) {
      FeatureExpr e;
      e.aggregate = true;
      e.op = op;
      e.table = schema.path(t);
      if (op == AggregateOp::Count) {
        out.push_back(e);
        continue;
      }
      for (const auto& c : takes_categorical(op) ? space.categorical(t) : space.numerical(t)) {
        e.column = c;
        out.push_back(e);
      }
      e.column.clear();
      if (takes_numerical(op) && space.can_recurse(t, level)) {
        std::vector<FeatureExpr> inner;
        enumerate_aggregates(space, t, level + 1, inner);
        for (auto& i : inner) {
          e.nested = std::make_shared<const FeatureExpr>(std::move(i));
          out.push_back(e);
        }
        e.nested.reset();
      }
    }
  }
}

}  // namespace detail

/// Every constructible aggregate, in choice order.
inline std::vector<FeatureExpr> enumerate_features(const FeatureSpace& space) {
  std::vector<FeatureExpr> out;
  if (!space.can_construct()) return out;
  detail::enumerate_aggregates(space, space.schema().root(), 1, out);
  for (auto& e : out) {
    e.name = detail::display(e);
    e.prior = feature_prior_nats(e, space);
  }
  return out;
}

// ---- evaluation ----

namespace detail {

// Aggregate of the non-missing numbers in `v` (reordered); NaN when empty.
inline double aggregate_numbers(AggregateOp op, std::vector<double>& v) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (v.empty()) return nan;
  switch (op) {
    case AggregateOp::Mean:
    case AggregateOp::Sum: {
      double s = 0.0;
      for (double x : v) s += x;
      return op == AggregateOp::Sum ? s : s / static_cast<double>(v.size());
    }
    case AggregateOp::Median: {
      std::sort(v.begin(), v.end());
      const auto m = v.size();
      return m % 2 ? v[m / 2] : v[m / 2 - 1] / 2 + v[m / 2] / 2;
    }
    case AggregateOp::Min: return *std::min_element(v.begin(), v.end());
    case AggregateOp::Max: return *std::max_element(v.begin(), v.end());
    case AggregateOp::StdDev: {
      if (v.size() == 1) return 0.0;
      double s = 0.0;
      for (double x : v) s += x;
      const double mean = s / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::sqrt(ss / static_cast<double>(v.size()));
    }
    default: return nan;
  }
}

// CountDistinct as a number or Mode as a dictionary code; codes exclude missing.
inline std::int32_t mode_code(std::vector<std::int32_t>& codes, const std::vector<std::string>& dictionary) {
  std::sort(codes.begin(), codes.end());
  std::int32_t best = kMissingCode;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < codes.size();) {
    std::size_t e = i;
    while (e < codes.size() && codes[e] == codes[i]) ++e;
    const auto count = e - i;
    if (count > best_count || (count == best_count && dictionary[codes[i]] < dictionary[best])) {
      best = codes[i];
      best_count = count;
    }
    i = e;
  }
  return best;
}

inline std::size_t distinct_count(std::vector<std::int32_t>& codes) {
  std::sort(codes.begin(), codes.end());
  return static_cast<std::size_t>(std::unique(codes.begin(), codes.end()) - codes.begin());
}

inline std::size_t child_slot(const Schema& schema, std::size_t parent, std::size_t child) {
  const auto& c = schema.children(parent);
  return static_cast<std::size_t>(std::find(c.begin(), c.end(), child) - c.begin());
}

// Cell-level recursive evaluation of an aggregate for one row of `parent`.
inline Cell evaluate_at(const FeatureExpr& e, const Dataset& ds, std::size_t parent, std::size_t row) {
  const auto& schema = *ds.schema;
  const auto t = schema.require(e.table);
  const auto range = ds.table(parent).child_ranges[child_slot(schema, parent, t)][row];
  if (e.op == AggregateOp::Count) return static_cast<double>(range.size());
  const auto& table = ds.table(t);
  if (takes_categorical(e.op)) {
    const auto& col = table.column(e.column);
    std::vector<std::int32_t> codes;
    for (auto r = range.begin; r < range.end; ++r) {
      if (col.codes[r] != kMissingCode) codes.push_back(col.codes[r]);
    }
    if (codes.empty()) return Cell{};
    if (e.op == AggregateOp::CountDistinct) return static_cast<double>(distinct_count(codes));
    return col.dictionary[mode_code(codes, col.dictionary)];
  }
  std::vector<double> values;
  for (auto r = range.begin; r < range.end; ++r) {
    if (e.nested) {
      auto c = evaluate_at(*e.nested, ds, t, r);
      if (auto d = std::get_if<double>(&c)) values.push_back(*d);
    } else {
      const double x = table.column(e.column).numbers[r];
      if (!std::isnan(x)) values.push_back(x);
    }
  }
  const double v = aggregate_numbers(e.op, values);
  return std::isnan(v) ? Cell{} : Cell{v};
}

}  // namespace detail

/// Value of a feature for one root instance.
inline Cell evaluate_feature(const FeatureExpr& expr, const Dataset& ds, std::size_t root_row) {
  const auto root = ds.schema->root();
  if (root_row >= ds.size()) throw DataError("root row out of range");
  if (!expr.aggregate) return ds.root().column(expr.column).cell(root_row);
  return detail::evaluate_at(expr, ds, root, root_row);
}

/// Same, by key text (key values joined by ','). Throws DataError for an
/// unknown key.
inline Cell evaluate_feature(const FeatureExpr& expr, const Dataset& ds, std::string_view key) {
  std::string k(key);
  std::replace(k.begin(), k.end(), ',', detail::kKeySeparator);
  auto row = ds.find_root_row(k);
  if (!row) throw DataError("no root instance with key '" + std::string(key) + "'");
  return evaluate_feature(expr, ds, *row);
}

/// Column-wise evaluation. Nested operand columns over secondary tables do
/// not depend on the root rows, so they are cached across root chunks of the
/// same secondary tables.
class FeatureEvaluator {
 public:
  // Values of `e` for every row of the parent of e.table (or the root for a
  // native column).
  Column evaluate(const FeatureExpr& e, const Dataset& ds) {
    if (!e.aggregate) {
      Column c = ds.root().column(e.column);
      c.name = e.name;
      return c;
    }
    const auto& schema = *ds.schema;
    const auto t = schema.require(e.table);
    const auto parent = *schema.parent(t);
    if (parent != schema.root()) {
      const auto& owner = ds.tables[parent];
      const auto key = e.name.empty() ? detail::display(e) : e.name;
      {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end() && it->second.first == owner) return *it->second.second;
      }
      auto col = std::make_shared<const Column>(compute(e, ds, t, parent));
      std::lock_guard lock(mutex_);
      cache_[key] = {owner, col};
      return *col;
    }
    return compute(e, ds, t, parent);
  }

 private:
  Column compute(const FeatureExpr& e, const Dataset& ds, std::size_t t, std::size_t parent) {
    const auto& schema = *ds.schema;
    const auto& ptable = ds.table(parent);
    const auto& ranges = ptable.child_ranges[detail::child_slot(schema, parent, t)];
    const auto& table = ds.table(t);
    Column out;
    out.name = e.name;
    out.type = numeric_result(e.op) ? ColumnType::Numerical : ColumnType::Categorical;
    const std::size_t rows = ptable.rows;
    if (e.op == AggregateOp::Count) {
      out.numbers.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) out.numbers[r] = static_cast<double>(ranges[r].size());
      return out;
    }
    if (takes_categorical(e.op)) {
      const auto& col = table.column(e.column);
      std::vector<std::int32_t> codes;
      if (e.op == AggregateOp::CountDistinct) out.numbers.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        codes.clear();
        for (auto i = ranges[r].begin; i < ranges[r].end; ++i) {
          if (col.codes[i] != kMissingCode) codes.push_back(col.codes[i]);
        }
        if (e.op == AggregateOp::CountDistinct) {
          out.numbers[r] =
              codes.empty() ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(detail::distinct_count(codes));
        } else if (codes.empty()) {
          out.append(Cell{});
        } else {
          out.append(Cell{col.dictionary[detail::mode_code(codes, col.dictionary)]});
        }
      }
      return out;
    }
    Column operand_storage;
    const std::vector<double>* operand;
    if (e.nested) {
      operand_storage = evaluate(*e.nested, ds);
      operand = &operand_storage.numbers;
    } else {
      operand = &table.column(e.column).numbers;
    }
    out.numbers.resize(rows);
    std::vector<double> values;
    for (std::size_t r = 0; r < rows; ++r) {
      values.clear();
      for (auto i = ranges[r].begin; i < ranges[r].end; ++i) {
        const double x = (*operand)[i];
        if (!std::isnan(x)) values.push_back(x);
      }
      out.numbers[r] = detail::aggregate_numbers(e.op, values);
    }
    return out;
  }

  std::mutex mutex_;
  std::unordered_map<std::string, std::pair<std::shared_ptr<const Table>, std::shared_ptr<const Column>>> cache_;
};

/// One row per root instance: native root variables, then features.
struct FlatTable {
  std::vector<Column> keys;     // root key columns
  std::vector<Column> columns;  // explanatory variables
  std::vector<double> construction_nats;  // 0 for natives
  std::optional<Column> target;
  std::size_t rows = 0;

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return i;
    }
    return std::nullopt;
  }
  std::string key_text(std::size_t row) const {
    std::string s;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (k) s += ',';
      s += keys[k].category(row);
    }
    return s;
  }
};

/// Native root variables (schema order, target and keys excluded) followed
/// by the features, evaluated column by column on up to `threads` workers.
inline FlatTable flatten(const Dataset& ds, const std::vector<FeatureExpr>& features, std::size_t threads = 1,
                         FeatureEvaluator* evaluator = nullptr, bool include_natives = true) {
  const auto& schema = *ds.schema;
  const auto& root = ds.root();
  FlatTable flat;
  flat.rows = root.rows;
  for (auto k : ds.key_columns(schema.root())) flat.keys.push_back(root.columns[k]);
  if (!ds.target.empty()) {
    if (auto t = root.column_index(ds.target)) flat.target = root.columns[*t];
  }
  if (include_natives) {
    for (const auto& c : schema.table(schema.root()).columns) {
      if (c.type == ColumnType::Key || c.name == ds.target) continue;
      flat.columns.push_back(root.column(c.name));
      flat.construction_nats.push_back(0.0);
    }
  }
  const auto base = flat.columns.size();
  flat.columns.resize(base + features.size());
  flat.construction_nats.resize(base + features.size());
  FeatureEvaluator local;
  auto& ev = evaluator ? *evaluator : local;
  parallel_for(threads, features.size(), [&](std::size_t i) {
    flat.columns[base + i] = ev.evaluate(features[i], ds);
    flat.construction_nats[base + i] = features[i].aggregate ? features[i].prior.nats : 0.0;
  });
  return flat;
}

inline FlatTable flatten(const Dataset& ds, const FeatureSet& set, std::size_t threads = 1) {
  return flatten(ds, set.features, threads);
}

/// Accumulates flat chunks column by column, in memory or in per-column
/// temporary files. Categorical columns keep one merged dictionary.
class FlatStore {
 public:
  FlatStore() = default;
  FlatStore(const FlatStore&) = delete;
  FlatStore& operator=(const FlatStore&) = delete;
  FlatStore(FlatStore&&) = default;
  FlatStore& operator=(FlatStore&&) = default;

  explicit FlatStore(std::optional<std::filesystem::path> spill_dir, bool keep_keys = true)
      : spill_dir_(std::move(spill_dir)), keep_keys_(keep_keys) {
    if (spill_dir_) std::filesystem::create_directories(*spill_dir_);
  }

  ~FlatStore() {
    if (spill_dir_) {
      std::error_code ec;
      for (const auto& f : files_) std::filesystem::remove(f, ec);
      std::filesystem::remove(*spill_dir_, ec);
    }
  }

  bool spilled() const { return spill_dir_.has_value(); }
  std::size_t rows() const { return rows_; }
  std::size_t size() const { return headers_.size(); }
  const Column& header(std::size_t j) const { return headers_[j]; }
  double construction_nats(std::size_t j) const { return construction_nats_[j]; }
  const std::vector<Column>& keys() const { return keys_; }
  const std::optional<Column>& target() const { return target_; }

  void append(const FlatTable& chunk) {
    if (headers_.empty() && rows_ == 0) init(chunk);
    for (std::size_t k = 0; k < keys_.size(); ++k) append_column(keys_[k], chunk.keys[k]);
    if (target_) append_column(*target_, *chunk.target);
    for (std::size_t j = 0; j < headers_.size(); ++j) {
      const auto& src = chunk.columns[j];
      if (!spilled()) {
        append_column(headers_[j], src);
        continue;
      }
      std::ofstream out(files_[j], std::ios::binary | std::ios::app);
      if (src.numerical()) {
        out.write(reinterpret_cast<const char*>(src.numbers.data()),
                  static_cast<std::streamsize>(src.numbers.size() * sizeof(double)));
      } else {
        std::vector<std::int32_t> codes(src.codes.size());
        for (std::size_t r = 0; r < codes.size(); ++r) {
          codes[r] = src.codes[r] == kMissingCode ? kMissingCode : headers_[j].intern(src.dictionary[src.codes[r]]);
        }
        out.write(reinterpret_cast<const char*>(codes.data()),
                  static_cast<std::streamsize>(codes.size() * sizeof(std::int32_t)));
      }
      if (!out) throw DataError("cannot write temporary file '" + files_[j].string() + "'");
    }
    rows_ += chunk.rows;
  }

  Column load(std::size_t j) const {
    if (!spilled()) return headers_[j];
    Column c;
    c.name = headers_[j].name;
    c.type = headers_[j].type;
    c.dictionary = headers_[j].dictionary;
    std::ifstream in(files_[j], std::ios::binary);
    if (c.numerical()) {
      c.numbers.resize(rows_);
      in.read(reinterpret_cast<char*>(c.numbers.data()), static_cast<std::streamsize>(rows_ * sizeof(double)));
    } else {
      c.codes.resize(rows_);
      in.read(reinterpret_cast<char*>(c.codes.data()), static_cast<std::streamsize>(rows_ * sizeof(std::int32_t)));
    }
    if (!in) throw DataError("cannot read temporary file '" + files_[j].string() + "'");
    return c;
  }

 private:
  void init(const FlatTable& chunk) {
    if (keep_keys_) {
      for (const auto& k : chunk.keys) keys_.push_back(empty_like(k));
    }
    if (chunk.target) target_ = empty_like(*chunk.target);
    for (std::size_t j = 0; j < chunk.columns.size(); ++j) {
      headers_.push_back(empty_like(chunk.columns[j]));
      construction_nats_.push_back(chunk.construction_nats[j]);
      if (spilled()) files_.push_back(*spill_dir_ / ("col" + std::to_string(j) + ".bin"));
    }
  }
  static Column empty_like(const Column& c) {
    Column e;
    e.name = c.name;
    e.type = c.type;
    return e;
  }
  static void append_column(Column& dst, const Column& src) {
    if (dst.numerical()) {
      dst.numbers.insert(dst.numbers.end(), src.numbers.begin(), src.numbers.end());
      return;
    }
    for (auto code : src.codes) {
      dst.codes.push_back(code == kMissingCode ? kMissingCode : dst.intern(src.dictionary[code]));
    }
  }

  std::optional<std::filesystem::path> spill_dir_;
  bool keep_keys_ = true;
  std::vector<std::filesystem::path> files_;
  std::vector<Column> headers_;
  std::vector<double> construction_nats_;
  std::vector<Column> keys_;
  std::optional<Column> target_;
  std::size_t rows_ = 0;
};

}  // namespace modl
