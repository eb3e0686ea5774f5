#pragma once

// Coding-length arithmetic shared by every criterion. All values are natural
// log units (nats); conversion to bits happens only when reporting.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modl {

struct CodingLength {
  double nats = 0.0;

  constexpr CodingLength() = default;
  constexpr explicit CodingLength(double n) : nats(n) {}

  double bits() const { return nats / std::numbers::ln2; }

  friend constexpr CodingLength operator+(CodingLength a, CodingLength b) {
    return CodingLength(a.nats + b.nats);
  }
  friend constexpr CodingLength operator-(CodingLength a, CodingLength b) {
    return CodingLength(a.nats - b.nats);
  }
  constexpr CodingLength& operator+=(CodingLength o) {
    nats += o.nats;
    return *this;
  }
  friend constexpr auto operator<=>(CodingLength, CodingLength) = default;
};

namespace detail {

inline constexpr std::uint64_t kFactorialTableSize = 10001;

inline const std::vector<double>& log_factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kFactorialTableSize);
    long double acc = 0.0L;
    t[0] = 0.0;
    for (std::uint64_t i = 1; i < kFactorialTableSize; ++i) {
      acc += std::log(static_cast<long double>(i));
      t[i] = static_cast<double>(acc);
    }
    return t;
  }();
  return table;
}

// Stirling series, truncated after the n^-7 term; for n > 10^4 the remainder
// is below 1e-30 relative.
inline long double stirling_log_factorial(long double n) {
  const long double inv = 1.0L / n;
  const long double inv2 = inv * inv;
  const long double series =
      inv * (1.0L / 12.0L -
             inv2 * (1.0L / 360.0L - inv2 * (1.0L / 1260.0L - inv2 * (1.0L / 1680.0L))));
  return n * std::log(n) - n + 0.5L * std::log(2.0L * std::numbers::pi_v<long double> * n) +
         series;
}

inline long double log_factorial_ld(std::uint64_t n) {
  if (n < kFactorialTableSize) return log_factorial_table()[n];
  return stirling_log_factorial(static_cast<long double>(n));
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace detail

/// ln(n!). Exact table up to 10^4, Stirling series beyond.
inline CodingLength log_factorial(std::uint64_t n) {
  return CodingLength(static_cast<double>(detail::log_factorial_ld(n)));
}

/// ln C(n, k). Throws std::invalid_argument when k > n.
inline CodingLength log_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) {
    throw std::invalid_argument("log_binomial: k=" + std::to_string(k) + " exceeds n=" +
                                std::to_string(n));
  }
  if (k == 0 || k == n) return CodingLength(0.0);
  const long double v = detail::log_factorial_ld(n) - detail::log_factorial_ld(k) -
                        detail::log_factorial_ld(n - k);
  return CodingLength(std::max(0.0, static_cast<double>(v)));
}

/// ln((sum counts)! / prod counts_j!).
inline CodingLength log_multinomial(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  long double v = 0.0L;
  for (auto c : counts) {
    total += c;
    v -= detail::log_factorial_ld(c);
  }
  v += detail::log_factorial_ld(total);
  return CodingLength(std::max(0.0, static_cast<double>(v)));
}

inline CodingLength log_multinomial(std::initializer_list<std::uint64_t> counts) {
  return log_multinomial(std::span<const std::uint64_t>(counts.begin(), counts.size()));
}

namespace detail {

// Row V of ln B(V, K) = ln sum_{k<=K} S(V, k) for K = 1..V, index K-1.
// Rows are computed once and shared; lookups take a shared lock only.
class PartitionCountCache {
 public:
  std::shared_ptr<const std::vector<double>> row(std::uint64_t v) {
    {
      std::shared_lock lock(mutex_);
      auto it = rows_.find(v);
      if (it != rows_.end()) return it->second;
    }
    auto computed = std::make_shared<const std::vector<double>>(compute(v));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = rows_.emplace(v, computed);
    return it->second;
  }

 private:
  static std::vector<double> compute(std::uint64_t v) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    // log S(n, k) for the current n, k = 0..v
    std::vector<double> s(v + 1, neg_inf);
    s[0] = 0.0;  // S(0, 0) = 1
    for (std::uint64_t n = 1; n <= v; ++n) {
      for (std::uint64_t k = std::min(n, v); k >= 1; --k) {
        const double stay = s[k] == neg_inf ? neg_inf : std::log(static_cast<double>(k)) + s[k];
        s[k] = log_add_exp(stay, s[k - 1]);
      }
      s[0] = neg_inf;
    }
    std::vector<double> prefix(v);
    double acc = neg_inf;
    for (std::uint64_t k = 1; k <= v; ++k) {
      acc = log_add_exp(acc, s[k]);
      prefix[k - 1] = k == 1 ? 0.0 : std::max(0.0, acc);
    }
    return prefix;
  }

  std::shared_mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const std::vector<double>>> rows_;
};

inline PartitionCountCache& partition_count_cache() {
  static PartitionCountCache cache;
  return cache;
}

}  // namespace detail

/// ln of the number of partitions of V values into at most K non-empty groups.
inline CodingLength log_partition_count(std::uint64_t v, std::uint64_t k) {
  if (v == 0 || k == 0 || k > v) {
    throw std::invalid_argument("log_partition_count: need 1 <= K <= V, got V=" +
                                std::to_string(v) + " K=" + std::to_string(k));
  }
  if (k == 1) return CodingLength(0.0);
  return CodingLength((*detail::partition_count_cache().row(v))[k - 1]);
}

}  // namespace modl
