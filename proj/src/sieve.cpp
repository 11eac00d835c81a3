#include "prl/sieve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prl/ordered_pool.hpp"

namespace prl {

std::uint64_t isqrt_u64(std::uint64_t n) {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(n)));
  while (r > 0 && static_cast<unsigned __int128>(r) * r > n) --r;
  while (static_cast<unsigned __int128>(r + 1) * (r + 1) <= n) ++r;
  return r;
}

std::vector<std::uint32_t> small_primes(std::uint32_t limit) {
  std::vector<std::uint32_t> out;
  if (limit < 2) return out;
  std::vector<bool> composite(static_cast<std::size_t>(limit) + 1, false);
  for (std::uint64_t i = 2; i <= limit; ++i) {
    if (composite[i]) continue;
    out.push_back(static_cast<std::uint32_t>(i));
    for (std::uint64_t j = i * i; j <= limit; j += i) composite[j] = true;
  }
  return out;
}

std::vector<std::uint32_t> base_primes_for(std::uint64_t hi) {
  const std::uint64_t root = hi > 0 ? isqrt_u64(hi - 1) : 0;
  return small_primes(static_cast<std::uint32_t>(root));
}

SieveSegment::SieveSegment(std::uint64_t lo, std::uint64_t hi, std::span<const std::uint32_t> base_primes)
    : lo_(lo), hi_(hi) {
  if (hi < lo) throw std::invalid_argument("sieve segment range inverted");
  first_odd_ = lo | 1;
  n_odd_ = hi > first_odd_ ? (hi - first_odd_ + 1) / 2 : 0;
  bits_.assign((n_odd_ + 63) / 64, ~std::uint64_t{0});
  if (n_odd_ % 64) bits_.back() = (std::uint64_t{1} << (n_odd_ % 64)) - 1;
  if (n_odd_ == 0) return;
  if (first_odd_ == 1) bits_[0] &= ~std::uint64_t{1};

  for (std::uint32_t p32 : base_primes) {
    const std::uint64_t p = p32;
    if (p == 2) continue;
    if (p * p >= hi) break;
    std::uint64_t start = std::max(p * p, (lo + p - 1) / p * p);
    if ((start & 1) == 0) start += p;
    for (std::uint64_t j = (start - first_odd_) / 2; j < n_odd_; j += p) {
      bits_[j >> 6] &= ~(std::uint64_t{1} << (j & 63));
    }
  }
}

bool SieveSegment::is_prime(std::uint64_t n) const {
  if (n < lo_ || n >= hi_) throw std::out_of_range("value outside sieve segment");
  if (n == 2) return true;
  if ((n & 1) == 0) return false;
  const std::uint64_t j = (n - first_odd_) / 2;
  return (bits_[j >> 6] >> (j & 63)) & 1;
}

SegmentPlan plan_segments(std::uint64_t lo, std::uint64_t hi, std::uint64_t segment_entries) {
  if (segment_entries == 0) throw std::invalid_argument("segment size must be positive");
  if (hi < lo) throw std::invalid_argument("prime range inverted: [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  if (hi > kMaxSieveBound) throw std::invalid_argument("prime range exceeds 2^63 - 1");
  SegmentPlan plan{lo, hi, 2 * segment_entries, 0};
  plan.count = hi > lo ? static_cast<std::size_t>((hi - lo + plan.span - 1) / plan.span) : 0;
  return plan;
}

void for_each_prime(std::uint64_t lo, std::uint64_t hi, std::uint32_t q, const SieveOptions& opts,
                    const std::function<void(const PrimeEvent&)>& sink) {
  if (q == 0) throw std::invalid_argument("modulus must be positive");
  if (hi < lo) throw std::invalid_argument("prime range inverted: [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  lo = std::max<std::uint64_t>(lo, 2);
  const SegmentPlan plan = plan_segments(lo, std::max(lo, hi), opts.segment_entries);
  if (plan.count == 0) return;
  const auto base = base_primes_for(hi);

  ordered_parallel_for(
      plan.count, opts.threads,
      [&](std::size_t k) { return SieveSegment(plan.segment_lo(k), plan.segment_hi(k), base); },
      [&](std::size_t, SieveSegment seg) {
        seg.for_each_prime([&](std::uint64_t p) {
          const auto r = static_cast<std::uint32_t>(p % q);
          sink(PrimeEvent{p, r, std::gcd(r, q) == 1});
        });
      });
}

std::vector<PrimeEvent> stream_primes(std::uint64_t lo, std::uint64_t hi, std::uint32_t q, const SieveOptions& opts) {
  if (hi < lo) throw std::invalid_argument("prime range inverted");
  std::vector<PrimeEvent> out;
  for_each_prime(lo, hi, q, opts, [&](const PrimeEvent& e) { out.push_back(e); });
  return out;
}

std::vector<PrimePower> prime_power_stream(std::uint64_t x_max) {
  std::vector<PrimePower> out;
  if (x_max < 4) return out;
  for (std::uint32_t p32 : small_primes(static_cast<std::uint32_t>(isqrt_u64(x_max)))) {
    const std::uint64_t p = p32;
    std::uint64_t n = p * p;
    for (std::uint32_t k = 2;; ++k) {
      out.push_back({n, p, k});
      if (n > x_max / p) break;
      n *= p;
    }
  }
  std::sort(out.begin(), out.end(), [](const PrimePower& a, const PrimePower& b) { return a.n < b.n; });
  return out;
}

}  // namespace prl
