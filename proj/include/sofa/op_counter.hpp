#pragma once

#include <cstdint>

namespace sofa {

/// Per-run tally of graded-encoding procedure invocations. A counter is
/// owned by exactly one obfuscation or matching run; parallel workers
/// count into private instances that are merged at the end of the run.
struct OpCounter {
  std::uint64_t samp = 0;
  std::uint64_t encode = 0;
  std::uint64_t re_rand = 0;
  std::uint64_t add = 0;
  std::uint64_t neg = 0;
  std::uint64_t mul = 0;
  std::uint64_t is_zero = 0;
  std::uint64_t extract = 0;

  void merge(const OpCounter& other) {
    samp += other.samp;
    encode += other.encode;
    re_rand += other.re_rand;
    add += other.add;
    neg += other.neg;
    mul += other.mul;
    is_zero += other.is_zero;
    extract += other.extract;
  }

  /// Counts accumulated since an earlier snapshot of the same counter.
  OpCounter since(const OpCounter& snapshot) const {
    OpCounter d;
    d.samp = samp - snapshot.samp;
    d.encode = encode - snapshot.encode;
    d.re_rand = re_rand - snapshot.re_rand;
    d.add = add - snapshot.add;
    d.neg = neg - snapshot.neg;
    d.mul = mul - snapshot.mul;
    d.is_zero = is_zero - snapshot.is_zero;
    d.extract = extract - snapshot.extract;
    return d;
  }
};

}  // namespace sofa
