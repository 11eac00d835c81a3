#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace prl {

struct PrimeEvent {
  std::uint64_t p = 0;
  std::uint32_t residue = 0;
  bool is_unit = false;

  bool operator==(const PrimeEvent&) const = default;
};

struct PrimePower {
  std::uint64_t n = 0;  // p^k
  std::uint64_t p = 0;
  std::uint32_t k = 0;

  bool operator==(const PrimePower&) const = default;
};

struct SieveOptions {
  std::uint64_t segment_entries = std::uint64_t{1} << 20;  // odd entries per segment
  unsigned threads = 1;
};

inline constexpr std::uint64_t kMaxSieveBound = (std::uint64_t{1} << 63) - 1;

// Primality of the integers in [lo, hi), odd entries only.
class SieveSegment {
 public:
  SieveSegment() = default;
  SieveSegment(std::uint64_t lo, std::uint64_t hi, std::span<const std::uint32_t> base_primes);

  std::uint64_t lo() const { return lo_; }
  std::uint64_t hi() const { return hi_; }
  bool is_prime(std::uint64_t n) const;

  template <class F>
  void for_each_prime(F&& f) const {
    if (lo_ <= 2 && 2 < hi_) f(std::uint64_t{2});
    for (std::size_t w = 0; w < bits_.size(); ++w) {
      std::uint64_t word = bits_[w];
      while (word) {
        const int b = std::countr_zero(word);
        word &= word - 1;
        f(first_odd_ + 2 * (64 * w + static_cast<std::uint64_t>(b)));
      }
    }
  }

 private:
  std::uint64_t lo_ = 0, hi_ = 0;
  std::uint64_t first_odd_ = 1;
  std::uint64_t n_odd_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Plain sieve of all primes <= limit.
std::vector<std::uint32_t> small_primes(std::uint32_t limit);

// Base primes sufficient to sieve any segment below hi.
std::vector<std::uint32_t> base_primes_for(std::uint64_t hi);

std::uint64_t isqrt_u64(std::uint64_t n);

// Segment k of a sieve over [lo, hi) covers [lo + k*span, lo + (k+1)*span)
// with span = 2 * segment_entries.
struct SegmentPlan {
  std::uint64_t lo = 0, hi = 0, span = 0;
  std::size_t count = 0;

  std::uint64_t segment_lo(std::size_t k) const { return lo + k * span; }
  std::uint64_t segment_hi(std::size_t k) const {
    const std::uint64_t end = segment_lo(k) + span;
    return end < hi ? end : hi;
  }
};

SegmentPlan plan_segments(std::uint64_t lo, std::uint64_t hi, std::uint64_t segment_entries);

// Every prime in [lo, hi) exactly once, in increasing order, tagged with its
// residue mod q. Segments are sieved on `threads` workers and delivered in
// order.
void for_each_prime(std::uint64_t lo, std::uint64_t hi, std::uint32_t q, const SieveOptions& opts,
                    const std::function<void(const PrimeEvent&)>& sink);

std::vector<PrimeEvent> stream_primes(std::uint64_t lo, std::uint64_t hi, std::uint32_t q,
                                      const SieveOptions& opts = {});

// All p^k <= x_max with k >= 2, sorted by value.
std::vector<PrimePower> prime_power_stream(std::uint64_t x_max);

}  // namespace prl
