#pragma once

// Multi-table star/snowflake schema: one root table, child tables in 0:1 or
// 0:n relations, each child's key extending its parent's key as a prefix.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "modl/error.hpp"

namespace modl {

enum class ColumnType { Numerical, Categorical, Key };
enum class Relation { Root, OneToOne, ZeroToMany };

inline const char* to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Numerical: return "Numerical";
    case ColumnType::Categorical: return "Categorical";
    case ColumnType::Key: return "Key";
  }
  return "?";
}

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::Root: return "root";
    case Relation::OneToOne: return "01";
    case Relation::ZeroToMany: return "0n";
  }
  return "?";
}

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Categorical;
};

struct TableSpec {
  std::string name;
  std::string parent;  // empty for the root
  Relation relation = Relation::Root;
  std::vector<std::string> key;
  std::vector<ColumnSpec> columns;  // key columns included, typed Key

  std::optional<std::size_t> column_index(std::string_view column) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == column) return i;
    }
    return std::nullopt;
  }
};

class Schema {
 public:
  Schema() = default;

  // Validates and indexes; throws DataError naming the offending table.
  Schema(std::string root, std::vector<TableSpec> tables)
      : root_name_(std::move(root)), tables_(std::move(tables)) {
    validate();
  }

  const std::string& root_name() const { return root_name_; }
  std::size_t root() const { return root_index_; }
  std::size_t size() const { return tables_.size(); }
  const TableSpec& table(std::size_t i) const { return tables_.at(i); }
  const std::vector<TableSpec>& tables() const { return tables_; }

  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  std::optional<std::size_t> parent(std::size_t i) const {
    if (i == root_index_) return std::nullopt;
    return parent_.at(i);
  }

  // "/"-separated chain of table names below the root ("" for the root),
  // e.g. "Vehicles/Users".
  const std::string& path(std::size_t i) const { return paths_.at(i); }

  std::size_t depth(std::size_t i) const {
    std::size_t d = 0;
    while (i != root_index_) {
      i = parent_[i];
      ++d;
    }
    return d;
  }

  std::size_t max_depth() const {
    std::size_t d = 0;
    for (std::size_t i = 0; i < tables_.size(); ++i) d = std::max(d, depth(i));
    return d;
  }

  // Resolves a table name or a full path.
  std::optional<std::size_t> find(std::string_view name_or_path) const {
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      if (tables_[i].name == name_or_path || (i != root_index_ && paths_[i] == name_or_path)) {
        return i;
      }
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view name_or_path) const {
    auto t = find(name_or_path);
    if (!t) throw DataError("unknown table '" + std::string(name_or_path) + "'");
    return *t;
  }

 private:
  void validate();

  std::string root_name_;
  std::vector<TableSpec> tables_;
  std::size_t root_index_ = 0;
  std::vector<std::size_t> parent_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::string> paths_;
};

inline void Schema::validate() {
  auto fail = [](const std::string& table, const std::string& msg) {
    throw DataError("schema: table '" + table + "': " + msg);
  };
  if (tables_.empty()) throw DataError("schema: no tables");

  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    auto& t = tables_[i];
    if (t.name.empty()) throw DataError("schema: table #" + std::to_string(i) + " has no name");
    if (t.name.find('/') != std::string::npos) fail(t.name, "table names may not contain '/'");
    if (!by_name.emplace(t.name, i).second) fail(t.name, "duplicate table name");

    std::set<std::string> seen;
    for (auto& c : t.columns) {
      if (c.name.empty()) fail(t.name, "column with empty name");
      if (!seen.insert(c.name).second) fail(t.name, "duplicate column '" + c.name + "'");
    }
    std::set<std::string> key_seen;
    for (auto& k : t.key) {
      if (!key_seen.insert(k).second) fail(t.name, "key column '" + k + "' listed twice");
      auto idx = t.column_index(k);
      if (!idx) {
        t.columns.insert(t.columns.begin() + static_cast<std::ptrdiff_t>(key_seen.size() - 1),
                         ColumnSpec{k, ColumnType::Key});
      } else {
        // key columns are matched by exact string equality
        t.columns[*idx].type = ColumnType::Key;
      }
    }
  }

  auto root_it = by_name.find(root_name_);
  if (root_it == by_name.end()) throw DataError("schema: root table '" + root_name_ + "' not declared");
  root_index_ = root_it->second;

  parent_.assign(tables_.size(), 0);
  children_.assign(tables_.size(), {});
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    auto& t = tables_[i];
    if (i == root_index_) {
      if (!t.parent.empty()) fail(t.name, "root table cannot have a parent");
      t.relation = Relation::Root;
      continue;
    }
    if (t.parent.empty()) fail(t.name, "second root: non-root table without parent");
    auto p = by_name.find(t.parent);
    if (p == by_name.end()) fail(t.name, "unknown parent '" + t.parent + "'");
    if (t.relation == Relation::Root) fail(t.name, "child table needs relation '01' or '0n'");
    parent_[i] = p->second;
  }

  // cycle check: every parent chain must reach the root
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    std::size_t cur = i;
    for (std::size_t steps = 0; cur != root_index_; ++steps) {
      if (steps > tables_.size()) fail(tables_[i].name, "cycle in relations");
      cur = parent_[cur];
    }
  }
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (i != root_index_) children_[parent_[i]].push_back(i);
  }

  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (i == root_index_) continue;
    const auto& t = tables_[i];
    const auto& p = tables_[parent_[i]];
    auto fmt = [](const std::vector<std::string>& k) {
      std::string s = "[";
      for (std::size_t j = 0; j < k.size(); ++j) s += (j ? ", " : "") + k[j];
      return s + "]";
    };
    if (p.key.empty()) fail(p.name, "table with children must declare a key");
    bool prefix = t.key.size() >= p.key.size() && std::equal(p.key.begin(), p.key.end(), t.key.begin());
    if (!prefix) {
      fail(t.name, "key-prefix violation: key " + fmt(t.key) + " does not extend parent '" + p.name +
                       "' key " + fmt(p.key));
    }
  }

  paths_.assign(tables_.size(), "");
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    std::vector<std::string> chain;
    for (std::size_t cur = i; cur != root_index_; cur = parent_[cur]) chain.push_back(tables_[cur].name);
    std::string path;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      if (!path.empty()) path += '/';
      path += *it;
    }
    paths_[i] = path;
  }
}

inline ColumnType parse_column_type(const std::string& s, const std::string& where) {
  if (s == "Numerical") return ColumnType::Numerical;
  if (s == "Categorical") return ColumnType::Categorical;
  if (s == "Key") return ColumnType::Key;
  throw DataError("schema: " + where + ": unknown column type '" + s + "'");
}

inline Schema parse_schema(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw DataError("schema: document must be a JSON object");
    if (!doc.contains("root") || !doc.contains("tables")) {
      throw DataError("schema: document needs \"root\" and \"tables\"");
    }
    std::vector<TableSpec> tables;
    for (const auto& jt : doc.at("tables")) {
      TableSpec t;
      t.name = jt.at("name").get<std::string>();
      t.parent = jt.value("parent", std::string());
      const std::string rel = jt.value("relation", std::string(t.parent.empty() ? "root" : "0n"));
      if (rel == "0n" || rel == "0:n" || rel == "1n") {
        t.relation = Relation::ZeroToMany;
      } else if (rel == "01" || rel == "0:1" || rel == "11") {
        t.relation = Relation::OneToOne;
      } else if (rel == "root") {
        t.relation = Relation::Root;
      } else {
        throw DataError("schema: table '" + t.name + "': unknown relation '" + rel + "'");
      }
      if (jt.contains("key")) t.key = jt.at("key").get<std::vector<std::string>>();
      if (jt.contains("columns")) {
        for (const auto& jc : jt.at("columns")) {
          ColumnSpec c;
          c.name = jc.at("name").get<std::string>();
          c.type = parse_column_type(jc.value("type", std::string("Categorical")),
                                     "table '" + t.name + "' column '" + c.name + "'");
          t.columns.push_back(std::move(c));
        }
      }
      tables.push_back(std::move(t));
    }
    return Schema(doc.at("root").get<std::string>(), std::move(tables));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("schema: malformed document: ") + e.what());
  }
}

inline Schema parse_schema(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("schema: invalid JSON: ") + e.what());
  }
  return parse_schema(doc);
}

inline nlohmann::ordered_json to_json(const Schema& schema) {
  nlohmann::ordered_json doc;
  doc["root"] = schema.root_name();
  auto tables = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& t = schema.table(i);
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    if (i != schema.root()) {
      jt["parent"] = t.parent;
      jt["relation"] = to_string(t.relation);
    }
    jt["key"] = t.key;
    auto cols = nlohmann::ordered_json::array();
    for (const auto& c : t.columns) {
      if (c.type == ColumnType::Key) continue;
      cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    }
    jt["columns"] = cols;
    tables.push_back(jt);
  }
  doc["tables"] = tables;
  return doc;
}

}  // namespace modl
