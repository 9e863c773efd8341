#pragma once

#include <cstdint>

#include "sofa/obfuscate.hpp"
#include "sofa/op_counter.hpp"
#include "sofa/random.hpp"

namespace sofa {

/// Inputs of the index-collision probability for two basic-scheme rules:
/// unit pool sizes M and N, the rules' wildcard counts, and the rule
/// width n (non-wildcard counts m_i = n - w_i are derived).
struct LeakageQuery {
  std::uint64_t equal_units = 0;    // M
  std::uint64_t unequal_units = 0;  // N
  std::uint32_t wild1 = 0;          // |W_1|
  std::uint32_t wild2 = 0;          // |W_2|
  std::uint32_t width = 0;          // n
};

/// Probability that two independently drawn index arrays share a unit:
///   1 - (M-w1)! (M-w2)! / (M! (M-w1-w2)!) * (N-m1)! (N-m2)! / (N! (N-m1-m2)!)
/// evaluated in log-gamma arithmetic so large pools do not overflow.
/// Pigeonhole-forced collisions (w1+w2 > M or m1+m2 > N) return exactly 1.
double leakage_probability(const LeakageQuery& query);

struct MonteCarloEstimate {
  double estimate = 0;
  double std_error = 0;
  std::uint64_t trials = 0;
};

/// Simulates the two without-replacement draws and counts collisions.
/// Infeasible draws report probability exactly 1 without simulating.
MonteCarloEstimate leakage_monte_carlo(const LeakageQuery& query, std::uint64_t trials,
                                       RandomSource& rng);

/// Measured encode/re-randomization counts next to their closed forms:
/// naive 2l(2n+1), basic 4(M+N)+2l, blocking 2l(sum|I_i|+1).
struct CountReport {
  Scheme scheme = Scheme::naive;
  std::uint64_t measured_encode = 0;
  std::uint64_t measured_re_rand = 0;
  std::uint64_t predicted = 0;  // applies to encode and re_rand alike
  bool matches = false;
};

CountReport count_report(const OpCounter& counter, Scheme scheme, std::uint64_t n,
                         std::uint64_t l, std::uint64_t m_units, std::uint64_t n_units,
                         std::uint64_t domain_total);

}  // namespace sofa
