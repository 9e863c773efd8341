#include "sofa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sofa {

namespace {

// ln( (P-a)! (P-b)! / (P! (P-a-b)!) ): log of the no-collision probability
// for two without-replacement draws of sizes a and b from a pool of P.
double log_no_collision(std::uint64_t pool, std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0.0;
  const auto p = static_cast<double>(pool);
  return std::lgamma(p - a + 1) + std::lgamma(p - b + 1) - std::lgamma(p + 1) -
         std::lgamma(p - a - b + 1);
}

}  // namespace

double leakage_probability(const LeakageQuery& query) {
  if (query.wild1 > query.width || query.wild2 > query.width) {
    throw std::invalid_argument("leakage_probability: wildcard count exceeds rule width");
  }
  const std::uint64_t m1 = query.width - query.wild1;
  const std::uint64_t m2 = query.width - query.wild2;
  // Pigeonhole: some unit must repeat, collision certain.
  if (query.wild1 + query.wild2 > query.equal_units) return 1.0;
  if (m1 + m2 > query.unequal_units) return 1.0;
  const double log_p = log_no_collision(query.equal_units, query.wild1, query.wild2) +
                       log_no_collision(query.unequal_units, m1, m2);
  return std::clamp(1.0 - std::exp(log_p), 0.0, 1.0);
}

MonteCarloEstimate leakage_monte_carlo(const LeakageQuery& query, std::uint64_t trials,
                                       RandomSource& rng) {
  if (trials == 0) throw std::invalid_argument("leakage_monte_carlo: trials must be >= 1");
  if (query.wild1 > query.width || query.wild2 > query.width) {
    throw std::invalid_argument("leakage_monte_carlo: wildcard count exceeds rule width");
  }
  const std::uint64_t m1 = query.width - query.wild1;
  const std::uint64_t m2 = query.width - query.wild2;
  if (query.wild1 + query.wild2 > query.equal_units || m1 + m2 > query.unequal_units) {
    return MonteCarloEstimate{1.0, 0.0, trials};
  }

  // One without-replacement draw of `count` slots, marking them in `used`;
  // returns true if any slot was already marked by the other rule.
  auto draw_hits = [&rng](std::vector<std::uint32_t>& pool, std::vector<bool>& used,
                          std::uint64_t count, bool mark) {
    bool hit = false;
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(rng.below_u64(pool.size() - i));
      std::swap(pool[j], pool[pool.size() - 1 - i]);
      const std::uint32_t slot = pool[pool.size() - 1 - i];
      if (mark) {
        used[slot] = true;
      } else if (used[slot]) {
        hit = true;
      }
    }
    return hit;
  };

  std::vector<std::uint32_t> equal_pool(query.equal_units);
  std::vector<std::uint32_t> unequal_pool(query.unequal_units);
  std::uint64_t collisions = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::iota(equal_pool.begin(), equal_pool.end(), 0);
    std::iota(unequal_pool.begin(), unequal_pool.end(), 0);
    std::vector<bool> equal_used(query.equal_units, false);
    std::vector<bool> unequal_used(query.unequal_units, false);
    draw_hits(equal_pool, equal_used, query.wild1, true);
    draw_hits(unequal_pool, unequal_used, m1, true);
    std::iota(equal_pool.begin(), equal_pool.end(), 0);
    std::iota(unequal_pool.begin(), unequal_pool.end(), 0);
    bool hit = draw_hits(equal_pool, equal_used, query.wild2, false);
    hit = draw_hits(unequal_pool, unequal_used, m2, false) || hit;
    if (hit) ++collisions;
  }

  MonteCarloEstimate out;
  out.trials = trials;
  out.estimate = static_cast<double>(collisions) / static_cast<double>(trials);
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(trials));
  return out;
}

CountReport count_report(const OpCounter& counter, Scheme scheme, std::uint64_t n,
                         std::uint64_t l, std::uint64_t m_units, std::uint64_t n_units,
                         std::uint64_t domain_total) {
  CountReport report;
  report.scheme = scheme;
  report.measured_encode = counter.encode;
  report.measured_re_rand = counter.re_rand;
  switch (scheme) {
    case Scheme::naive:
      report.predicted = 2 * l * (2 * n + 1);
      break;
    case Scheme::basic:
      report.predicted = 4 * (m_units + n_units) + 2 * l;
      break;
    case Scheme::blocking:
      report.predicted = 2 * l * (domain_total + 1);
      break;
    case Scheme::dnc:
      throw std::invalid_argument("count_report: report dnc parts with their inner scheme");
  }
  report.matches =
      report.measured_encode == report.predicted && report.measured_re_rand == report.predicted;
  return report;
}

}  // namespace sofa
