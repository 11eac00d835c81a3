#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "prl/characters.hpp"
#include "prl/exact_sum.hpp"
#include "prl/sieve.hpp"

namespace prl {

// Log-scale checkpoint abscissae. For a uniform grid y_j = log 2 + j*h and
// x_j = e^{y_j}; cutoff_j is the largest integer <= x_j (exact integers are
// snapped, so e^{log 2} counts 2).
class CheckpointGrid {
 public:
  CheckpointGrid() = default;

  static CheckpointGrid uniform(double h, std::uint64_t x_max);
  // Uniform in y over [y0, y_max]; x and cutoffs are only meaningful while
  // e^y fits in 63 bits.
  static CheckpointGrid uniform_y(double y0, double h, double y_max);
  static CheckpointGrid from_abscissae(std::vector<double> xs);

  bool is_uniform() const { return h_ > 0.0; }
  double h() const { return h_; }
  double y0() const { return y_.empty() ? 0.0 : y_.front(); }
  double y_max() const { return y_.empty() ? 0.0 : y_.back(); }
  std::size_t size() const { return y_.size(); }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<std::uint64_t>& cutoffs() const { return cutoff_; }

 private:
  void fill_x();
  double h_ = 0.0;
  std::vector<double> y_, x_;
  std::vector<std::uint64_t> cutoff_;
};

std::uint64_t snapped_floor(double x);

struct ClassSums {
  std::uint64_t count = 0;
  ExactSum inv_sqrt;  // sum 1/sqrt(p)
  ExactSum log;       // theta: sum log p
  ExactSum psi;       // sum Lambda(n) over prime powers n in the class
  ExactSum sqrt;      // sum sqrt(p), for the exact mean integral

  bool operator==(const ClassSums&) const = default;
};

struct CharacterSums {
  ExactComplexSum inv_sqrt;   // sum chi(p)/sqrt(p)
  ExactComplexSum sq_over_p;  // sum chi(p^2)/p
  ExactComplexSum euler_log;  // sum -log(1 - chi(p)/sqrt(p))

  bool operator==(const CharacterSums&) const = default;
};

// Sums over the integers in [lo, hi). Classes are indexed by unit index,
// characters by canonical index.
struct TallyPartial {
  std::uint64_t lo = 0, hi = 0;
  std::vector<ClassSums> classes;
  std::vector<CharacterSums> chars;

  static TallyPartial zero(const CharacterGroup& group, std::uint64_t lo);
  bool empty() const { return hi <= lo; }
  bool operator==(const TallyPartial&) const = default;
};

class RangeOverlap : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Componentwise sum of two adjacent partials, left below right. An empty
// partial is the identity.
TallyPartial merge(const TallyPartial& left, const TallyPartial& right);

struct ClassTotals {
  std::uint32_t residue = 0;
  std::uint64_t count = 0;
  double inv_sqrt = 0, log = 0, psi = 0, sqrt = 0;
};

struct TallyCheckpoint {
  std::uint32_t q = 0;
  double y = 0, x = 0;
  std::uint64_t cutoff = 0;
  std::vector<ClassTotals> classes;
  std::vector<cplx> chi_inv_sqrt, chi_sq_over_p, euler_log;
};

TallyCheckpoint make_checkpoint(const CharacterGroup& group, const TallyPartial& totals, double y, double x,
                                std::uint64_t cutoff);

// pi_{1/2}(x; t) = sum_{p <= x} t(p)/sqrt(p)
cplx pi_half(const TallyCheckpoint& c, const ClassFunction& t);
// pi(x; t) = sum_{p <= x} t(p)
cplx pi_count(const TallyCheckpoint& c, const ClassFunction& t);
cplx theta(const TallyCheckpoint& c, const ClassFunction& t);
cplx psi(const TallyCheckpoint& c, const ClassFunction& t);
// sum_{p <= x} t(p) sqrt(p)
cplx sqrt_weighted(const TallyCheckpoint& c, const ClassFunction& t);

// (log x)^m * prod_{p <= x} (1 - chi(p)/sqrt(p))^{-1}, from the stored log-sum.
cplx euler_product_partial(const TallyCheckpoint& c, const Character& chi, int m);
cplx mertens_chi_square(const TallyCheckpoint& c, const Character& chi);

class StreamOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact natural and logarithmic measure of {u in [lo, x] : D(u) > 0} for
// D = pi_{1/2}(.; 1_a - 1_b), fed one prime at a time in increasing order.
class RaceMeter {
 public:
  struct State {
    ExactSum d;
    double piece_start = 2.0;
    std::uint64_t last_prime = 0;
    CompensatedSum length, log_length;
  };

  RaceMeter(std::uint32_t q, std::uint32_t a, std::uint32_t b, double window_lo = 2.0);

  void observe(std::uint64_t p);

  std::uint32_t modulus() const { return q_; }
  std::uint32_t a() const { return a_; }
  std::uint32_t b() const { return b_; }
  double window_lo() const { return lo_; }
  const ExactSum& d() const { return s_.d; }

  // Valid once every prime <= x has been observed.
  double measure(double x) const;
  double log_measure(double x) const;

  const State& state() const { return s_; }
  void restore(const State& s) { s_ = s; }

 private:
  std::uint32_t q_, a_, b_;
  double lo_;
  State s_;
};

// Sequential core: consumes an increasing stream of primes and prime powers
// from lo on and snapshots local sums at the checkpoint cutoffs it passes.
class SegmentTally {
 public:
  SegmentTally(const CharacterGroup& group, std::uint64_t lo, std::span<const std::uint64_t> cutoffs,
               std::optional<std::pair<std::uint32_t, std::uint32_t>> race = std::nullopt);

  void add_prime(std::uint64_t p);
  void add_prime_power(std::uint64_t n, std::uint64_t p);
  // Flushes every cutoff below hi and closes the range at hi.
  void close(std::uint64_t hi);

  TallyPartial local;
  std::vector<std::pair<std::size_t, TallyPartial>> snapshots;  // (checkpoint index, local sums)
  std::vector<std::uint64_t> race_primes;
  std::uint64_t last_prime = 0;

 private:
  void advance(std::uint64_t n);
  const CharacterGroup& group_;
  std::span<const std::uint64_t> cutoffs_;
  std::size_t next_cut_ = 0;
  std::uint64_t last_ = 0;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> race_;
};

// Single-threaded accumulation of an explicit event stream over [2, hi).
// Out-of-order input throws StreamOrderError.
std::vector<TallyCheckpoint> accumulate(const CharacterGroup& group, const CheckpointGrid& grid,
                                        std::span<const PrimeEvent> primes, std::span<const PrimePower> powers,
                                        std::uint64_t hi);

struct TallyOptions {
  std::uint64_t segment_entries = std::uint64_t{1} << 20;
  unsigned threads = 1;
};

// Segmented, optionally parallel accumulation over the grid. Segments are
// tallied independently and reduced in ascending order; exact sums make the
// result independent of thread count and segment size.
class TallyEngine {
 public:
  TallyEngine(const CharacterGroup& group, CheckpointGrid grid, TallyOptions opts = {});

  void track_race(std::uint32_t a, std::uint32_t b, double window_lo);
  void restore(TallyPartial totals, std::vector<TallyCheckpoint> emitted, std::optional<RaceMeter::State> race,
               std::uint64_t last_prime);

  // Processes every integer below hi.
  void run(std::uint64_t hi, const std::function<void(const TallyEngine&)>& after_segment = {});

  const CharacterGroup& group() const { return group_; }
  const CheckpointGrid& grid() const { return grid_; }
  const TallyPartial& totals() const { return totals_; }
  std::uint64_t processed_hi() const { return totals_.hi; }
  std::uint64_t last_prime() const { return last_prime_; }
  const std::vector<TallyCheckpoint>& checkpoints() const { return checkpoints_; }
  const std::optional<RaceMeter>& race() const { return race_; }

 private:
  const CharacterGroup& group_;
  CheckpointGrid grid_;
  TallyOptions opts_;
  TallyPartial totals_;
  std::uint64_t last_prime_ = 0;
  std::vector<TallyCheckpoint> checkpoints_;
  std::optional<RaceMeter> race_;
};

}  // namespace prl
