#pragma once

// Brute-force reference computations used only by tests. They share the
// coding-length primitives with the library but none of its search code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "modl/modl_math.hpp"

namespace oracle {

using Counts = std::vector<std::uint64_t>;

inline double part_term(const Counts& c) {
  std::uint64_t n = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
  return modl::log_binomial(n + c.size() - 1, c.size() - 1).nats + modl::log_multinomial(c).nats;
}

// Discretization cost straight from the formula.
inline double interval_cost(const std::vector<Counts>& parts) {
  std::uint64_t n = 0;
  for (const auto& p : parts) n += std::accumulate(p.begin(), p.end(), std::uint64_t{0});
  const std::uint64_t I = parts.size();
  double t = std::log(static_cast<double>(n)) + modl::log_binomial(n + I - 1, I - 1).nats;
  for (const auto& p : parts) t += part_term(p);
  return t;
}

inline double group_cost(const std::vector<Counts>& groups, std::uint64_t values) {
  double t = std::log(static_cast<double>(values)) + modl::log_partition_count(values, groups.size()).nats;
  for (const auto& g : groups) t += part_term(g);
  return t;
}

// Minimum over all 2^(m-1) cut subsets of m sorted value blocks.
inline double min_interval_cost(const std::vector<Counts>& blocks) {
  const std::size_t m = blocks.size();
  const std::size_t J = blocks.front().size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (m - 1)); ++mask) {
    std::vector<Counts> parts(1, Counts(J, 0));
    for (std::size_t b = 0; b < m; ++b) {
      if (b > 0 && (mask >> (b - 1) & 1)) parts.emplace_back(J, 0);
      for (std::size_t j = 0; j < J; ++j) parts.back()[j] += blocks[b][j];
    }
    best = std::min(best, interval_cost(parts));
  }
  return best;
}

// Minimum over every set partition of the values, by recursive assignment.
inline void enumerate_groups(const std::vector<Counts>& values, std::size_t v, std::vector<Counts>& groups,
                             double& best) {
  if (v == values.size()) {
    best = std::min(best, group_cost(groups, values.size()));
    return;
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t j = 0; j < values[v].size(); ++j) groups[g][j] += values[v][j];
    enumerate_groups(values, v + 1, groups, best);
    for (std::size_t j = 0; j < values[v].size(); ++j) groups[g][j] -= values[v][j];
  }
  groups.push_back(values[v]);
  enumerate_groups(values, v + 1, groups, best);
  groups.pop_back();
}

inline double min_group_cost(const std::vector<Counts>& values) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<Counts> groups;
  enumerate_groups(values, 0, groups, best);
  return best;
}

inline std::uint64_t count_set_partitions(std::size_t v) {
  // Bell numbers by the triangle
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 1; i < v; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto x : row) next.push_back(next.back() + x);
    row = next;
  }
  return row.back();
}

}  // namespace oracle
