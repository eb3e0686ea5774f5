#pragma once

// Columnar multi-table datasets. Secondary tables are held in memory, sorted
// by their parent key and indexed; the root table is either fully loaded or
// streamed in fixed-size chunks that share the indexed secondary tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "modl/csv.hpp"
#include "modl/error.hpp"
#include "modl/rng.hpp"
#include "modl/schema.hpp"

namespace modl {

/// A typed cell: missing, a finite number, or a non-empty category.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

inline std::string cell_text(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) return csv::format_number(*d);
  if (auto s = std::get_if<std::string>(&c)) return *s;
  return "";
}

inline constexpr std::int32_t kMissingCode = -1;

struct Column {
  std::string name;
  ColumnType type = ColumnType::Categorical;
  std::vector<double> numbers;      // Numerical; NaN marks missing
  std::vector<std::int32_t> codes;  // Categorical/Key; kMissingCode marks missing
  std::vector<std::string> dictionary;
  std::unordered_map<std::string, std::int32_t> lookup;

  bool numerical() const { return type == ColumnType::Numerical; }
  std::size_t size() const { return numerical() ? numbers.size() : codes.size(); }

  bool missing(std::size_t row) const {
    return numerical() ? std::isnan(numbers[row]) : codes[row] == kMissingCode;
  }
  std::string_view category(std::size_t row) const {
    auto c = codes[row];
    return c == kMissingCode ? std::string_view() : std::string_view(dictionary[c]);
  }
  Cell cell(std::size_t row) const {
    if (missing(row)) return {};
    if (numerical()) return numbers[row];
    return std::string(category(row));
  }

  std::int32_t intern(std::string_view s) {
    auto it = lookup.find(std::string(s));
    if (it != lookup.end()) return it->second;
    auto code = static_cast<std::int32_t>(dictionary.size());
    dictionary.emplace_back(s);
    lookup.emplace(dictionary.back(), code);
    return code;
  }

  void append(const Cell& c) {
    if (numerical()) {
      if (auto d = std::get_if<double>(&c)) {
        numbers.push_back(*d);
      } else if (is_missing(c)) {
        numbers.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        throw DataError("column '" + name + "': category in a numerical column");
      }
    } else {
      auto text = cell_text(c);
      codes.push_back(text.empty() ? kMissingCode : intern(text));
    }
  }

  void reserve(std::size_t n) {
    if (numerical()) numbers.reserve(n); else codes.reserve(n);
  }

  void permute(const std::vector<std::uint32_t>& order) {
    if (numerical()) {
      std::vector<double> v(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) v[i] = numbers[order[i]];
      numbers = std::move(v);
    } else {
      std::vector<std::int32_t> v(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) v[i] = codes[order[i]];
      codes = std::move(v);
    }
  }
};

struct Range {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::size_t rows = 0;
  // child_ranges[c][row]: rows of the c-th child table (schema.children order)
  std::vector<std::vector<Range>> child_ranges;

  std::optional<std::size_t> column_index(std::string_view n) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == n) return i;
    }
    return std::nullopt;
  }
  const Column& column(std::string_view n) const {
    auto i = column_index(n);
    if (!i) throw DataError("table '" + name + "': no column '" + std::string(n) + "'");
    return columns[*i];
  }
};

namespace detail {
inline constexpr char kKeySeparator = '\x1f';

inline std::string key_string(const Table& table, const std::vector<std::size_t>& key_cols,
                              std::size_t n, std::size_t row) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s.push_back(kKeySeparator);
    s += table.columns[key_cols[i]].category(row);
  }
  return s;
}
}  // namespace detail

/// Parent key -> range of child rows, for one non-root table.
struct KeyIndex {
  std::unordered_map<std::string, Range> by_parent_key;
  std::size_t parent_key_size = 0;
};

struct LoadOptions {
  bool allow_orphans = false;
  std::size_t chunk_rows = 8192;
  // Deployment data may omit the target column.
  bool target_optional = false;
};

struct Dataset {
  std::shared_ptr<const Schema> schema;
  std::string target;
  std::vector<std::shared_ptr<const Table>> tables;      // by schema index
  std::vector<std::shared_ptr<const KeyIndex>> indexes;  // null for the root
  std::size_t orphans_dropped = 0;

  const Table& root() const { return *tables[schema->root()]; }
  const Table& table(std::size_t i) const { return *tables[i]; }
  std::size_t size() const { return root().rows; }

  const std::vector<std::size_t>& key_columns(std::size_t t) const { return key_cols_.at(t); }

  std::string row_key(std::size_t t, std::size_t row) const {
    return detail::key_string(*tables[t], key_cols_[t], key_cols_[t].size(), row);
  }

  // Child rows of `child` (a schema table index) under the parent key text.
  Range child_rows(std::string_view child, std::string_view parent_key) const {
    auto c = schema->require(child);
    MODL_ASSERT(indexes[c], "root has no parent index");
    auto it = indexes[c]->by_parent_key.find(std::string(parent_key));
    return it == indexes[c]->by_parent_key.end() ? Range{} : it->second;
  }

  std::optional<std::size_t> find_root_row(std::string_view key) const {
    for (std::size_t r = 0; r < size(); ++r) {
      if (row_key(schema->root(), r) == key) return r;
    }
    return std::nullopt;
  }

  void set_key_columns(std::vector<std::vector<std::size_t>> k) { key_cols_ = std::move(k); }

 private:
  std::vector<std::vector<std::size_t>> key_cols_;
};

namespace detail {

inline Table empty_table(const Schema& schema, std::size_t t, const std::string& target) {
  const auto& spec = schema.table(t);
  Table table;
  table.name = spec.name;
  for (const auto& c : spec.columns) {
    Column col;
    col.name = c.name;
    col.type = c.type;
    if (t == schema.root() && c.name == target) col.type = ColumnType::Categorical;
    table.columns.push_back(std::move(col));
  }
  table.child_ranges.resize(schema.children(t).size());
  return table;
}

inline std::vector<std::vector<std::size_t>> key_column_indices(const Schema& schema) {
  std::vector<std::vector<std::size_t>> out(schema.size());
  for (std::size_t t = 0; t < schema.size(); ++t) {
    for (const auto& k : schema.table(t).key) out[t].push_back(*schema.table(t).column_index(k));
  }
  return out;
}

// Reads a CSV header and maps file columns onto schema columns.
class TableReader {
 public:
  TableReader(const Schema& schema, std::size_t t, const std::string& path, const std::string& target,
              bool target_optional)
      : reader_(path), path_(path) {
    const auto& spec = schema.table(t);
    std::vector<std::string> header;
    if (!reader_.next(header)) throw DataError(path_ + ": missing header row");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    file_to_col_.assign(header.size(), -1);
    std::vector<bool> seen(spec.columns.size(), false);
    for (std::size_t f = 0; f < header.size(); ++f) {
      auto idx = spec.column_index(header[f]);
      if (!idx) throw DataError(path_ + ": column '" + header[f] + "' not in schema table '" + spec.name + "'");
      if (seen[*idx]) throw DataError(path_ + ": duplicate header column '" + header[f] + "'");
      seen[*idx] = true;
      file_to_col_[f] = static_cast<std::ptrdiff_t>(*idx);
    }
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      if (seen[c]) continue;
      const bool is_target = t == schema.root() && spec.columns[c].name == target;
      if (is_target && target_optional) {
        absent_.push_back(c);
        continue;
      }
      throw DataError(path_ + ": header lacks schema column '" + spec.columns[c].name + "'");
    }
    fields_.reserve(header.size());
  }

  // Appends up to max_rows records; returns the number appended.
  std::size_t read_into(Table& table, std::size_t max_rows) {
    std::size_t n = 0;
    while (n < max_rows && reader_.next(fields_)) {
      if (fields_.size() == 1 && fields_[0].empty() && file_to_col_.size() != 1) continue;  // blank line
      if (fields_.size() != file_to_col_.size()) {
        throw DataError(path_ + " line " + std::to_string(reader_.record_line()) + ": expected " +
                        std::to_string(file_to_col_.size()) + " fields, found " +
                        std::to_string(fields_.size()));
      }
      for (std::size_t f = 0; f < fields_.size(); ++f) {
        auto& col = table.columns[static_cast<std::size_t>(file_to_col_[f])];
        const auto& text = fields_[f];
        if (col.numerical()) {
          if (text.empty()) {
            col.numbers.push_back(std::numeric_limits<double>::quiet_NaN());
          } else if (auto v = csv::parse_number(text)) {
            col.numbers.push_back(*v);
          } else {
            throw DataError(path_ + " line " + std::to_string(reader_.record_line()) + " column '" +
                            col.name + "': '" + text + "' is not a number");
          }
        } else {
          if (text.empty() && col.type == ColumnType::Key) {
            throw DataError(path_ + " line " + std::to_string(reader_.record_line()) + ": empty key column '" +
                            col.name + "'");
          }
          col.codes.push_back(text.empty() ? kMissingCode : col.intern(text));
        }
      }
      for (auto c : absent_) table.columns[c].append(Cell{});
      ++n;
    }
    table.rows += n;
    return n;
  }

 private:
  csv::Reader reader_;
  std::string path_;
  std::vector<std::ptrdiff_t> file_to_col_;
  std::vector<std::size_t> absent_;
  std::vector<std::string> fields_;
};

inline std::string file_for(const Schema& schema, std::size_t t,
                            const std::map<std::string, std::string>& files) {
  const auto& spec = schema.table(t);
  for (const auto& [name, path] : files) {
    if (name == spec.name || (t != schema.root() && name == schema.path(t))) return path;
  }
  throw DataError("no data file given for table '" + (t == schema.root() ? spec.name : schema.path(t)) + "'");
}

// Sorts a child table by its key and builds the parent-key index.
inline KeyIndex sort_and_index(Table& table, const std::vector<std::size_t>& key_cols,
                               std::size_t parent_key_size, bool one_to_one) {
  std::vector<std::string> full(table.rows);
  for (std::size_t r = 0; r < table.rows; ++r) full[r] = key_string(table, key_cols, key_cols.size(), r);
  std::vector<std::string> parent(table.rows);
  for (std::size_t r = 0; r < table.rows; ++r) parent[r] = key_string(table, key_cols, parent_key_size, r);
  std::vector<std::uint32_t> order(table.rows);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (parent[a] != parent[b]) return parent[a] < parent[b];
    return full[a] < full[b];
  });
  for (auto& c : table.columns) c.permute(order);

  KeyIndex index;
  index.parent_key_size = parent_key_size;
  std::size_t r = 0;
  while (r < order.size()) {
    const auto& k = parent[order[r]];
    std::size_t e = r + 1;
    while (e < order.size() && parent[order[e]] == k) ++e;
    if (one_to_one && e - r > 1) {
      std::string shown = k;
      std::replace(shown.begin(), shown.end(), kKeySeparator, ',');
      throw DataError("table '" + table.name + "': duplicate 0:1 child key '" + shown + "'");
    }
    index.by_parent_key.emplace(k, Range{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(e)});
    r = e;
  }
  return index;
}

inline void keep_rows(Table& table, const std::vector<std::uint32_t>& rows) {
  for (auto& c : table.columns) c.permute(rows);
  table.rows = rows.size();
}

// Fills parent.child_ranges[c] by looking up each parent row's key and marks
// the referenced child rows in `used` (sized to the child table).
inline void link_children(Table& parent, const std::vector<std::size_t>& parent_keys, std::size_t child_slot,
                          const KeyIndex& index, std::vector<char>& used) {
  auto& ranges = parent.child_ranges[child_slot];
  ranges.assign(parent.rows, Range{});
  for (std::size_t r = 0; r < parent.rows; ++r) {
    auto it = index.by_parent_key.find(key_string(parent, parent_keys, parent_keys.size(), r));
    if (it == index.by_parent_key.end()) continue;
    ranges[r] = it->second;
    for (auto i = it->second.begin; i < it->second.end; ++i) used[i] = 1;
  }
}

inline std::vector<char> link_children(Table& parent, const std::vector<std::size_t>& parent_keys,
                                       std::size_t child_slot, const KeyIndex& index, std::size_t child_rows) {
  std::vector<char> used(child_rows, 0);
  link_children(parent, parent_keys, child_slot, index, used);
  return used;
}

}  // namespace detail

// Loads every non-root table, links the secondary hierarchy top-down and
// leaves the root table empty. Orphans of root children are resolved later.
inline Dataset load_secondaries(std::shared_ptr<const Schema> schema,
                                const std::map<std::string, std::string>& files, const std::string& target,
                                const LoadOptions& options) {
  Dataset ds;
  ds.schema = schema;
  ds.target = target;
  const auto& s = *schema;
  const auto& root_spec = s.table(s.root());
  if (!target.empty()) {
    auto idx = root_spec.column_index(target);
    if (!idx) throw DataError("target '" + target + "' is not a column of root table '" + root_spec.name + "'");
    if (root_spec.columns[*idx].type == ColumnType::Key) throw DataError("target '" + target + "' is a key column");
  }
  const auto key_cols = detail::key_column_indices(s);
  ds.set_key_columns(key_cols);

  std::vector<Table> tables(s.size());
  std::vector<KeyIndex> indexes(s.size());
  tables[s.root()] = detail::empty_table(s, s.root(), target);

  // breadth-first so parents are indexed before their children link to them
  std::vector<std::size_t> order{s.root()};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (auto c : s.children(order[i])) order.push_back(c);
  }
  for (std::size_t oi = 1; oi < order.size(); ++oi) {
    const auto t = order[oi];
    const auto p = *s.parent(t);
    tables[t] = detail::empty_table(s, t, target);
    detail::TableReader reader(s, t, detail::file_for(s, t, files), target, false);
    while (reader.read_into(tables[t], options.chunk_rows) > 0) {
    }
    const bool one_to_one = s.table(t).relation == Relation::OneToOne;
    indexes[t] = detail::sort_and_index(tables[t], key_cols[t], key_cols[p].size(), one_to_one);
    if (p == s.root()) continue;
    const auto slot = static_cast<std::size_t>(
        std::find(s.children(p).begin(), s.children(p).end(), t) - s.children(p).begin());
    auto used = detail::link_children(tables[p], key_cols[p], slot, indexes[t], tables[t].rows);
    std::vector<std::uint32_t> keep;
    for (std::uint32_t r = 0; r < used.size(); ++r) {
      if (used[r]) keep.push_back(r);
    }
    if (keep.size() != used.size()) {
      if (!options.allow_orphans) {
        auto r = static_cast<std::size_t>(std::find(used.begin(), used.end(), 0) - used.begin());
        std::string k = detail::key_string(tables[t], key_cols[t], key_cols[p].size(), r);
        std::replace(k.begin(), k.end(), detail::kKeySeparator, ',');
        throw DataError("table '" + s.table(t).name + "': orphan row with parent key '" + k + "' (no row in '" +
                        s.table(p).name + "')");
      }
      ds.orphans_dropped += used.size() - keep.size();
      detail::keep_rows(tables[t], keep);
      indexes[t] = detail::sort_and_index(tables[t], key_cols[t], key_cols[p].size(), one_to_one);
      detail::link_children(tables[p], key_cols[p], slot, indexes[t], tables[t].rows);
    }
  }
  ds.tables.resize(s.size());
  ds.indexes.resize(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    ds.tables[t] = std::make_shared<const Table>(std::move(tables[t]));
    if (t != s.root()) ds.indexes[t] = std::make_shared<const KeyIndex>(std::move(indexes[t]));
  }
  return ds;
}

/// Streams the root table in chunks of `chunk_rows` rows. Each chunk is a
/// Dataset whose root holds the chunk rows and whose secondary tables are
/// shared with every other chunk.
class RootStream {
 public:
  RootStream(Dataset secondaries, const std::map<std::string, std::string>& files, LoadOptions options)
      : base_(std::move(secondaries)),
        options_(options),
        reader_(*base_.schema, base_.schema->root(), detail::file_for(*base_.schema, base_.schema->root(), files),
                base_.target, options.target_optional) {
    for (auto c : base_.schema->children(base_.schema->root())) used_.emplace_back(base_.table(c).rows, 0);
  }

  std::optional<Dataset> next() {
    const auto& s = *base_.schema;
    Table chunk = detail::empty_table(s, s.root(), base_.target);
    for (auto& c : chunk.columns) c.reserve(options_.chunk_rows);
    if (reader_.read_into(chunk, options_.chunk_rows) == 0) return std::nullopt;
    const auto& children = s.children(s.root());
    for (std::size_t slot = 0; slot < children.size(); ++slot) {
      detail::link_children(chunk, base_.key_columns(s.root()), slot, *base_.indexes[children[slot]], used_[slot]);
    }
    rows_read_ += chunk.rows;
    Dataset out = base_;
    out.tables[s.root()] = std::make_shared<const Table>(std::move(chunk));
    return out;
  }

  std::size_t rows_read() const { return rows_read_; }

  // Call after the stream is exhausted: counts child rows no root row
  // referenced, throwing unless orphans are allowed.
  std::size_t finish() {
    const auto& s = *base_.schema;
    const auto& children = s.children(s.root());
    std::size_t orphans = 0;
    for (std::size_t slot = 0; slot < children.size(); ++slot) {
      for (std::size_t i = 0; i < used_[slot].size(); ++i) {
        if (used_[slot][i]) continue;
        if (!options_.allow_orphans) {
          throw DataError("table '" + s.table(children[slot]).name + "': orphan row with parent key '" +
                          shown_key(children[slot], i) + "' (no row in '" + s.root_name() + "')");
        }
        ++orphans;
      }
    }
    return orphans + base_.orphans_dropped;
  }

  const Dataset& secondaries() const { return base_; }

 private:
  std::string shown_key(std::size_t t, std::size_t row) const {
    const auto& s = *base_.schema;
    auto k = detail::key_string(base_.table(t), base_.key_columns(t), base_.key_columns(s.root()).size(), row);
    std::replace(k.begin(), k.end(), detail::kKeySeparator, ',');
    return k;
  }

  Dataset base_;
  LoadOptions options_;
  detail::TableReader reader_;
  std::vector<std::vector<char>> used_;
  std::size_t rows_read_ = 0;
};

/// Builds the Dataset formed by a subset of root rows, with every secondary
/// row following its root instance. Indexes are rebuilt.
inline Dataset subset(const Dataset& ds, const std::vector<std::uint32_t>& root_rows);

/// Loads all tables in memory. Reading is chunked; orphan child rows are an
/// error unless options.allow_orphans, in which case they are dropped and
/// counted in orphans_dropped.
inline Dataset load_dataset(std::shared_ptr<const Schema> schema, const std::map<std::string, std::string>& files,
                            const std::string& target, const LoadOptions& options = {}) {
  RootStream stream(load_secondaries(schema, files, target, options), files, options);
  const auto& s = *schema;
  Table root = detail::empty_table(s, s.root(), target);
  while (auto chunk = stream.next()) {
    const auto& c = chunk->root();
    for (std::size_t col = 0; col < root.columns.size(); ++col) {
      for (std::size_t r = 0; r < c.rows; ++r) root.columns[col].append(c.columns[col].cell(r));
    }
    root.rows += c.rows;
  }
  const std::size_t orphans = stream.finish();
  Dataset ds = stream.secondaries();
  const auto& children = s.children(s.root());
  std::unordered_map<std::string, std::uint32_t> seen;
  for (std::size_t r = 0; r < root.rows; ++r) {
    if (ds.key_columns(s.root()).empty()) break;
    auto k = detail::key_string(root, ds.key_columns(s.root()), ds.key_columns(s.root()).size(), r);
    if (!seen.emplace(k, static_cast<std::uint32_t>(r)).second) {
      std::replace(k.begin(), k.end(), detail::kKeySeparator, ',');
      throw DataError("table '" + s.root_name() + "': duplicate root key '" + k + "'");
    }
  }
  for (std::size_t slot = 0; slot < children.size(); ++slot) {
    detail::link_children(root, ds.key_columns(s.root()), slot, *ds.indexes[children[slot]],
                          ds.table(children[slot]).rows);
  }
  ds.tables[s.root()] = std::make_shared<const Table>(std::move(root));
  if (orphans > ds.orphans_dropped) {
    // drop the unreferenced secondary rows physically
    std::vector<std::uint32_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0u);
    ds = subset(ds, all);
    ds.orphans_dropped = orphans;
  }
  return ds;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::uint32_t>& root_rows) {
  const auto& s = *ds.schema;
  std::vector<std::vector<std::uint32_t>> keep(s.size());
  keep[s.root()] = root_rows;
  std::vector<std::size_t> order{s.root()};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto t = order[i];
    const auto& children = s.children(t);
    for (std::size_t slot = 0; slot < children.size(); ++slot) {
      for (auto r : keep[t]) {
        auto range = ds.table(t).child_ranges[slot][r];
        for (auto c = range.begin; c < range.end; ++c) keep[children[slot]].push_back(c);
      }
      order.push_back(children[slot]);
    }
  }
  std::vector<Table> tables(s.size());
  std::vector<KeyIndex> indexes(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    tables[t] = ds.table(t);
    for (auto& rng : tables[t].child_ranges) rng.clear();
    detail::keep_rows(tables[t], keep[t]);
  }
  Dataset out;
  out.schema = ds.schema;
  out.target = ds.target;
  out.set_key_columns(detail::key_column_indices(s));
  for (std::size_t oi = 1; oi < order.size(); ++oi) {
    const auto t = order[oi];
    const auto p = *s.parent(t);
    indexes[t] = detail::sort_and_index(tables[t], out.key_columns(t), out.key_columns(p).size(),
                                        s.table(t).relation == Relation::OneToOne);
  }
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const auto t = order[oi];
    const auto& children = s.children(t);
    for (std::size_t slot = 0; slot < children.size(); ++slot) {
      detail::link_children(tables[t], out.key_columns(t), slot, indexes[children[slot]],
                            tables[children[slot]].rows);
    }
  }
  out.tables.resize(s.size());
  out.indexes.resize(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    out.tables[t] = std::make_shared<const Table>(std::move(tables[t]));
    if (t != s.root()) out.indexes[t] = std::make_shared<const KeyIndex>(std::move(indexes[t]));
  }
  return out;
}

/// Seeded train/test partition of root row indices; both lists ascending.
inline std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> split_indices(std::size_t n,
                                                                                        double train_fraction,
                                                                                        std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must be in (0, 1), got " + std::to_string(train_fraction));
  }
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  auto rng = Rng::substream(seed, "split");
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::uint32_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::uint32_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  auto [train, test] = split_indices(ds.size(), train_fraction, seed);
  return {subset(ds, train), subset(ds, test)};
}

/// Writes one table as CSV in schema column order.
inline void write_table_csv(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::vector<std::string> fields;
  for (const auto& c : table.columns) fields.push_back(c.name);
  csv::write_record(out, fields);
  for (std::size_t r = 0; r < table.rows; ++r) {
    fields.clear();
    for (const auto& c : table.columns) fields.push_back(cell_text(c.cell(r)));
    csv::write_record(out, fields);
  }
}

}  // namespace modl
