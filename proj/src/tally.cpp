#include "prl/tally.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "prl/ordered_pool.hpp"

namespace prl {

namespace {

// -log(1 - z) for |z| < 1, accurate for small |z|.
cplx neg_log_one_minus(cplx z) {
  if (z.imag() == 0.0) return {-std::log1p(-z.real()), 0.0};
  const double re = 0.5 * std::log1p(-2.0 * z.real() + std::norm(z));
  const double im = std::atan2(-z.imag(), 1.0 - z.real());
  return {-re, -im};
}

void require_same_modulus(const TallyCheckpoint& c, std::uint32_t q) {
  if (c.q != q) throw ModulusMismatch("checkpoint modulus " + std::to_string(c.q) + " does not match " + std::to_string(q));
}

template <class Field>
cplx class_combination(const TallyCheckpoint& c, const ClassFunction& t, Field field) {
  require_same_modulus(c, t.modulus());
  cplx s{};
  for (const auto& cls : c.classes) s += t(cls.residue) * field(cls);
  return s;
}

}  // namespace

std::uint64_t snapped_floor(double x) {
  if (!(x >= 0.0)) return 0;
  if (x >= 9.2e18) return std::numeric_limits<std::uint64_t>::max();
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::floor(x));
}

void CheckpointGrid::fill_x() {
  x_.resize(y_.size());
  cutoff_.resize(y_.size());
  for (std::size_t j = 0; j < y_.size(); ++j) {
    x_[j] = std::exp(y_[j]);
    cutoff_[j] = snapped_floor(x_[j]);
  }
}

CheckpointGrid CheckpointGrid::uniform(double h, std::uint64_t x_max) {
  if (!(h > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (x_max < 2) throw std::invalid_argument("grid needs x_max >= 2");
  CheckpointGrid g = uniform_y(std::log(2.0), h, std::log(static_cast<double>(x_max)));
  for (auto& c : g.cutoff_) c = std::min(c, x_max);
  return g;
}

CheckpointGrid CheckpointGrid::uniform_y(double y0, double h, double y_max) {
  if (!(h > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (!(y_max >= y0)) throw std::invalid_argument("grid upper end below its start");
  CheckpointGrid g;
  g.h_ = h;
  const auto n = static_cast<std::size_t>(std::floor((y_max - y0) / h + 1e-9));
  g.y_.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) g.y_[j] = y0 + static_cast<double>(j) * h;
  g.fill_x();
  return g;
}

CheckpointGrid CheckpointGrid::from_abscissae(std::vector<double> xs) {
  CheckpointGrid g;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (!(xs[j] >= 2.0)) throw std::invalid_argument("checkpoint abscissae must be >= 2");
    if (j > 0 && !(xs[j] > xs[j - 1])) throw std::invalid_argument("checkpoint abscissae must increase");
  }
  g.x_ = std::move(xs);
  g.y_.resize(g.x_.size());
  g.cutoff_.resize(g.x_.size());
  for (std::size_t j = 0; j < g.x_.size(); ++j) {
    g.y_[j] = std::log(g.x_[j]);
    g.cutoff_[j] = snapped_floor(g.x_[j]);
  }
  return g;
}

TallyPartial TallyPartial::zero(const CharacterGroup& group, std::uint64_t lo) {
  TallyPartial t;
  t.lo = t.hi = lo;
  t.classes.resize(group.phi());
  t.chars.resize(group.size());
  return t;
}

TallyPartial merge(const TallyPartial& left, const TallyPartial& right) {
  if (left.empty()) return right;
  if (right.empty()) return left;
  if (left.classes.size() != right.classes.size() || left.chars.size() != right.chars.size()) {
    throw std::invalid_argument("merging tallies of different moduli");
  }
  if (right.lo < left.hi) {
    throw RangeOverlap("tally ranges overlap: [" + std::to_string(left.lo) + ", " + std::to_string(left.hi) + ") and [" +
                       std::to_string(right.lo) + ", " + std::to_string(right.hi) + ")");
  }
  if (right.lo != left.hi) throw std::invalid_argument("tally ranges are not adjacent");
  TallyPartial out = left;
  out.hi = right.hi;
  for (std::size_t i = 0; i < out.classes.size(); ++i) {
    auto& c = out.classes[i];
    const auto& r = right.classes[i];
    c.count += r.count;
    c.inv_sqrt += r.inv_sqrt;
    c.log += r.log;
    c.psi += r.psi;
    c.sqrt += r.sqrt;
  }
  for (std::size_t i = 0; i < out.chars.size(); ++i) {
    out.chars[i].inv_sqrt += right.chars[i].inv_sqrt;
    out.chars[i].sq_over_p += right.chars[i].sq_over_p;
    out.chars[i].euler_log += right.chars[i].euler_log;
  }
  return out;
}

TallyCheckpoint make_checkpoint(const CharacterGroup& group, const TallyPartial& totals, double y, double x,
                                std::uint64_t cutoff) {
  TallyCheckpoint c;
  c.q = group.modulus();
  c.y = y;
  c.x = x;
  c.cutoff = cutoff;
  c.classes.resize(totals.classes.size());
  for (std::size_t i = 0; i < totals.classes.size(); ++i) {
    const auto& s = totals.classes[i];
    c.classes[i] = {group.units()[i], s.count, s.inv_sqrt.value(), s.log.value(), s.psi.value(), s.sqrt.value()};
  }
  c.chi_inv_sqrt.resize(totals.chars.size());
  c.chi_sq_over_p.resize(totals.chars.size());
  c.euler_log.resize(totals.chars.size());
  for (std::size_t k = 0; k < totals.chars.size(); ++k) {
    c.chi_inv_sqrt[k] = totals.chars[k].inv_sqrt.value();
    c.chi_sq_over_p[k] = totals.chars[k].sq_over_p.value();
    c.euler_log[k] = totals.chars[k].euler_log.value();
  }
  return c;
}

cplx pi_half(const TallyCheckpoint& c, const ClassFunction& t) {
  return class_combination(c, t, [](const ClassTotals& s) { return s.inv_sqrt; });
}

cplx pi_count(const TallyCheckpoint& c, const ClassFunction& t) {
  return class_combination(c, t, [](const ClassTotals& s) { return static_cast<double>(s.count); });
}

cplx theta(const TallyCheckpoint& c, const ClassFunction& t) {
  return class_combination(c, t, [](const ClassTotals& s) { return s.log; });
}

cplx psi(const TallyCheckpoint& c, const ClassFunction& t) {
  return class_combination(c, t, [](const ClassTotals& s) { return s.psi; });
}

cplx sqrt_weighted(const TallyCheckpoint& c, const ClassFunction& t) {
  return class_combination(c, t, [](const ClassTotals& s) { return s.sqrt; });
}

cplx euler_product_partial(const TallyCheckpoint& c, const Character& chi, int m) {
  require_same_modulus(c, chi.modulus());
  if (chi.is_principal()) throw std::invalid_argument("partial Euler product needs a nonprincipal character");
  if (m < 0) throw std::invalid_argument("order of vanishing must be nonnegative");
  if (c.x < 2.0) throw std::invalid_argument("partial Euler product needs x >= 2");
  cplx f = std::exp(c.euler_log.at(chi.index()));
  if (m > 0) f *= std::pow(std::log(c.x), m);
  return f;
}

cplx mertens_chi_square(const TallyCheckpoint& c, const Character& chi) {
  require_same_modulus(c, chi.modulus());
  return c.chi_sq_over_p.at(chi.index());
}

RaceMeter::RaceMeter(std::uint32_t q, std::uint32_t a, std::uint32_t b, double window_lo)
    : q_(q), a_(a % q), b_(b % q), lo_(window_lo) {
  if (a_ == b_) throw std::invalid_argument("race residues must be distinct");
  if (!(window_lo >= 2.0)) throw std::invalid_argument("race window must start at x >= 2");
}

void RaceMeter::observe(std::uint64_t p) {
  if (p <= s_.last_prime) throw StreamOrderError("race meter fed out of order at " + std::to_string(p));
  s_.last_prime = p;
  const auto r = static_cast<std::uint32_t>(p % q_);
  if (r != a_ && r != b_) return;
  const double pd = static_cast<double>(p);
  if (s_.d.sign() > 0) {
    const double start = std::max(s_.piece_start, lo_);
    if (pd > start) {
      s_.length.add(pd - start);
      s_.log_length.add(std::log(pd / start));
    }
  }
  const double w = 1.0 / std::sqrt(pd);
  s_.d.add(r == a_ ? w : -w);
  s_.piece_start = pd;
}

double RaceMeter::measure(double x) const {
  double m = s_.length.value();
  const double start = std::max(s_.piece_start, lo_);
  if (s_.d.sign() > 0 && x > start) m += x - start;
  return m;
}

double RaceMeter::log_measure(double x) const {
  double m = s_.log_length.value();
  const double start = std::max(s_.piece_start, lo_);
  if (s_.d.sign() > 0 && x > start) m += std::log(x / start);
  return m;
}

SegmentTally::SegmentTally(const CharacterGroup& group, std::uint64_t lo, std::span<const std::uint64_t> cutoffs,
                           std::optional<std::pair<std::uint32_t, std::uint32_t>> race)
    : local(TallyPartial::zero(group, lo)), group_(group), cutoffs_(cutoffs), race_(race) {
  next_cut_ = static_cast<std::size_t>(std::lower_bound(cutoffs_.begin(), cutoffs_.end(), lo) - cutoffs_.begin());
  last_ = lo == 0 ? 0 : lo - 1;
  if (race_) {
    race_->first %= group.modulus();
    race_->second %= group.modulus();
  }
}

void SegmentTally::advance(std::uint64_t n) {
  if (n <= last_) {
    throw StreamOrderError("tally stream out of order: " + std::to_string(n) + " after " + std::to_string(last_));
  }
  while (next_cut_ < cutoffs_.size() && cutoffs_[next_cut_] < n) {
    TallyPartial snap = local;
    snap.hi = cutoffs_[next_cut_] + 1;
    snapshots.emplace_back(next_cut_, std::move(snap));
    ++next_cut_;
  }
  last_ = n;
  local.hi = n + 1;
}

void SegmentTally::add_prime(std::uint64_t p) {
  advance(p);
  last_prime = p;
  const std::uint32_t q = group_.modulus();
  const auto r = static_cast<std::uint32_t>(p % q);
  if (race_ && (r == race_->first || r == race_->second)) race_primes.push_back(p);
  const int u = group_.unit_index(r);
  if (u < 0) return;

  const double pd = static_cast<double>(p);
  const double sp = std::sqrt(pd);
  const double inv = 1.0 / sp;
  const double lg = std::log(pd);
  auto& cls = local.classes[static_cast<std::size_t>(u)];
  ++cls.count;
  cls.inv_sqrt.add(inv);
  cls.log.add(lg);
  cls.psi.add(lg);
  cls.sqrt.add(sp);

  const auto r2 = static_cast<std::uint32_t>((static_cast<std::uint64_t>(r) * r) % q);
  const double inv_p = 1.0 / pd;
  for (const Character& chi : group_.characters()) {
    auto& s = local.chars[chi.index()];
    const cplx z = chi(r) * inv;
    s.inv_sqrt.add(z);
    s.sq_over_p.add(chi(r2) * inv_p);
    s.euler_log.add(neg_log_one_minus(z));
  }
}

void SegmentTally::add_prime_power(std::uint64_t n, std::uint64_t p) {
  advance(n);
  const int u = group_.unit_index(n % group_.modulus());
  if (u < 0) return;
  local.classes[static_cast<std::size_t>(u)].psi.add(std::log(static_cast<double>(p)));
}

void SegmentTally::close(std::uint64_t hi) {
  if (hi < local.hi) throw StreamOrderError("segment closed below its last event");
  while (next_cut_ < cutoffs_.size() && cutoffs_[next_cut_] < hi) {
    TallyPartial snap = local;
    snap.hi = cutoffs_[next_cut_] + 1;
    snapshots.emplace_back(next_cut_, std::move(snap));
    ++next_cut_;
  }
  local.hi = hi;
}

std::vector<TallyCheckpoint> accumulate(const CharacterGroup& group, const CheckpointGrid& grid,
                                        std::span<const PrimeEvent> primes, std::span<const PrimePower> powers,
                                        std::uint64_t hi) {
  SegmentTally seg(group, 2, grid.cutoffs());
  std::size_t i = 0, j = 0;
  while (i < primes.size() || j < powers.size()) {
    const bool take_prime = j == powers.size() || (i < primes.size() && primes[i].p < powers[j].n);
    if (take_prime) {
      const PrimeEvent& e = primes[i++];
      if (e.residue != e.p % group.modulus()) throw StreamOrderError("prime event residue does not match p mod q");
      if (e.p >= hi) throw StreamOrderError("prime event beyond the stream range");
      seg.add_prime(e.p);
    } else {
      const PrimePower& pp = powers[j++];
      if (pp.n >= hi) continue;
      seg.add_prime_power(pp.n, pp.p);
    }
  }
  seg.close(hi);
  std::vector<TallyCheckpoint> out;
  out.reserve(seg.snapshots.size());
  for (const auto& [idx, snap] : seg.snapshots) {
    out.push_back(make_checkpoint(group, snap, grid.y()[idx], grid.x()[idx], grid.cutoffs()[idx]));
  }
  return out;
}

TallyEngine::TallyEngine(const CharacterGroup& group, CheckpointGrid grid, TallyOptions opts)
    : group_(group), grid_(std::move(grid)), opts_(opts), totals_(TallyPartial::zero(group, 2)) {
  if (opts_.segment_entries == 0) throw std::invalid_argument("segment size must be positive");
}

void TallyEngine::track_race(std::uint32_t a, std::uint32_t b, double window_lo) {
  if (processed_hi() > 2) throw std::logic_error("race tracking must be set before the first run");
  race_.emplace(group_.modulus(), a, b, window_lo);
}

void TallyEngine::restore(TallyPartial totals, std::vector<TallyCheckpoint> emitted,
                          std::optional<RaceMeter::State> race, std::uint64_t last_prime) {
  if (totals.classes.size() != group_.phi() || totals.chars.size() != group_.size()) {
    throw std::invalid_argument("restored tally does not match the character group");
  }
  if (totals.lo != 2) throw std::invalid_argument("restored tally must start at 2");
  for (std::size_t j = 0; j < emitted.size(); ++j) {
    if (j >= grid_.size() || grid_.cutoffs()[j] >= totals.hi) {
      throw std::invalid_argument("restored checkpoints do not match the grid");
    }
  }
  if (emitted.size() < grid_.size() && grid_.cutoffs()[emitted.size()] < totals.hi) {
    throw std::invalid_argument("restored checkpoints are incomplete");
  }
  if (race_.has_value() != race.has_value()) throw std::invalid_argument("restored race state does not match tracking");
  if (race) race_->restore(*race);
  totals_ = std::move(totals);
  checkpoints_ = std::move(emitted);
  last_prime_ = last_prime;
}

void TallyEngine::run(std::uint64_t hi, const std::function<void(const TallyEngine&)>& after_segment) {
  const std::uint64_t lo = processed_hi();
  if (hi <= lo) return;
  const SegmentPlan plan = plan_segments(lo, hi, opts_.segment_entries);
  const auto base = base_primes_for(hi);
  const auto powers_all = prime_power_stream(hi - 1);
  const std::span<const PrimePower> powers(powers_all);
  std::optional<std::pair<std::uint32_t, std::uint32_t>> race_pair;
  if (race_) race_pair.emplace(race_->a(), race_->b());

  auto work = [&](std::size_t k) {
    const std::uint64_t s_lo = plan.segment_lo(k), s_hi = plan.segment_hi(k);
    SieveSegment sieve(s_lo, s_hi, base);
    SegmentTally seg(group_, s_lo, grid_.cutoffs(), race_pair);
    auto pw = std::lower_bound(powers.begin(), powers.end(), s_lo,
                               [](const PrimePower& a, std::uint64_t v) { return a.n < v; });
    sieve.for_each_prime([&](std::uint64_t p) {
      while (pw != powers.end() && pw->n < p) {
        seg.add_prime_power(pw->n, pw->p);
        ++pw;
      }
      seg.add_prime(p);
    });
    while (pw != powers.end() && pw->n < s_hi) {
      seg.add_prime_power(pw->n, pw->p);
      ++pw;
    }
    seg.close(s_hi);
    return seg;
  };

  auto reduce = [&](std::size_t, SegmentTally seg) {
    for (const auto& [idx, snap] : seg.snapshots) {
      if (idx != checkpoints_.size()) throw std::logic_error("checkpoint emitted out of order");
      checkpoints_.push_back(make_checkpoint(group_, merge(totals_, snap), grid_.y()[idx], grid_.x()[idx],
                                             grid_.cutoffs()[idx]));
    }
    if (race_) {
      for (std::uint64_t p : seg.race_primes) race_->observe(p);
    }
    totals_ = merge(totals_, seg.local);
    if (seg.last_prime) last_prime_ = seg.last_prime;
    if (after_segment) after_segment(*this);
  };

  ordered_parallel_for(plan.count, opts_.threads, work, reduce);
}

}  // namespace prl
