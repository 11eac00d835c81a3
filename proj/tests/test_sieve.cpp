#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "prl/sieve.hpp"

using namespace prl;

namespace {

std::vector<std::uint64_t> values(const std::vector<PrimeEvent>& ev) {
  std::vector<std::uint64_t> out;
  for (const auto& e : ev) out.push_back(e.p);
  return out;
}

}  // namespace

TEST_CASE("small_primes") {
  CHECK(small_primes(1).empty());
  CHECK(small_primes(2) == std::vector<std::uint32_t>{2});
  CHECK(small_primes(30) == std::vector<std::uint32_t>{2, 3, 5, 7, 11, 13, 17, 19, 23, 29});
  CHECK(small_primes(100000).size() == 9592);
}

TEST_CASE("isqrt_u64") {
  CHECK(isqrt_u64(0) == 0);
  CHECK(isqrt_u64(15) == 3);
  CHECK(isqrt_u64(16) == 4);
  CHECK(isqrt_u64(kMaxSieveBound) == 3037000499ULL);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t n = rng() >> (rng() % 64);
    const std::uint64_t r = isqrt_u64(n);
    CHECK((unsigned __int128)r * r <= n);
    CHECK((unsigned __int128)(r + 1) * (r + 1) > n);
  }
}

TEST_CASE("stream_primes examples") {
  auto ev = stream_primes(2, 30, 4);
  CHECK(values(ev) == std::vector<std::uint64_t>{2, 3, 5, 7, 11, 13, 17, 19, 23, 29});
  for (const auto& e : ev) {
    CHECK(e.residue == e.p % 4);
    CHECK(e.is_unit == (e.p != 2));
  }
  CHECK(values(stream_primes(1000000, 1000100, 4)) ==
        std::vector<std::uint64_t>{1000003, 1000033, 1000037, 1000039, 1000081, 1000099});
  CHECK(stream_primes(0, 2, 4).empty());
  CHECK(stream_primes(24, 29, 4).empty());
  CHECK_THROWS_AS(stream_primes(10, 5, 4), std::invalid_argument);
}

TEST_CASE("sieve matches trial division on random windows") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::uint64_t lo = rng() % 2000000;
    const std::uint64_t hi = lo + rng() % 5000;
    SieveOptions opts{1 + rng() % 300, static_cast<unsigned>(1 + rng() % 3)};
    CAPTURE(lo);
    CAPTURE(hi);
    CHECK(values(stream_primes(lo, hi, 7, opts)) == oracle::primes_td(lo, hi));
  }
}

TEST_CASE("segment size and thread count do not change the stream") {
  const auto ref = stream_primes(0, 300000, 5);
  CHECK(ref.size() == 25997);
  for (std::uint64_t seg : {1ULL, 7ULL, 64ULL, 1000ULL, 1ULL << 20}) {
    for (unsigned threads : {1u, 2u, 4u}) {
      CAPTURE(seg);
      CAPTURE(threads);
      if (seg == 1 && threads > 1) continue;
      CHECK(stream_primes(0, 300000, 5, {seg, threads}) == ref);
    }
  }
}

TEST_CASE("large-range windows") {
  const std::uint64_t lo = 1000000000000ULL;
  CHECK(values(stream_primes(lo, lo + 2000, 3)) == oracle::primes_td(lo, lo + 2000));
  const std::uint64_t far = 1000000000000000ULL;
  CHECK(values(stream_primes(far, far + 400, 3, {64, 2})) == oracle::primes_td(far, far + 400));
}

TEST_CASE("plan_segments") {
  auto plan = plan_segments(10, 100, 8);
  CHECK(plan.span == 16);
  CHECK(plan.count == 6);
  CHECK(plan.segment_lo(0) == 10);
  CHECK(plan.segment_hi(5) == 100);
  CHECK_THROWS_AS(plan_segments(0, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(plan_segments(10, 0, 8), std::invalid_argument);
  // segments tile the range
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t lo = rng() % 1000, hi = lo + rng() % 1000;
    const auto p = plan_segments(lo, hi, 1 + rng() % 50);
    std::uint64_t at = lo;
    for (std::size_t k = 0; k < p.count; ++k) {
      CHECK(p.segment_lo(k) == at);
      CHECK(p.segment_hi(k) > at);
      at = p.segment_hi(k);
    }
    CHECK(at == hi);
  }
}

TEST_CASE("prime_power_stream") {
  const auto pw = prime_power_stream(100);
  std::vector<std::uint64_t> ns;
  for (const auto& e : pw) ns.push_back(e.n);
  CHECK(ns == std::vector<std::uint64_t>{4, 8, 9, 16, 25, 27, 32, 49, 64, 81});
  for (std::uint64_t x : {1ULL, 3ULL, 4ULL, 1000ULL, 123456ULL}) {
    std::vector<PrimePower> brute;
    for (std::uint64_t n = 2; n <= x; ++n) {
      unsigned k = 0;
      const auto p = oracle::prime_power_base(n, &k);
      if (p && k >= 2) brute.push_back({n, p, k});
    }
    CHECK(prime_power_stream(x) == brute);
  }
}

TEST_CASE("workers propagate failures from the sink") {
  int seen = 0;
  auto sink = [&](const PrimeEvent&) {
    if (++seen == 1000) throw std::runtime_error("stop");
  };
  CHECK_THROWS_AS(for_each_prime(0, 1000000, 4, {256, 3}, sink), std::runtime_error);
}
