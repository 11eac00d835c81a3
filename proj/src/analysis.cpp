#include "prl/analysis.hpp"

#include <algorithm>
#include <numbers>

namespace prl {

namespace {

void require_grid(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts) {
  if (grid.size() != ckpts.size()) {
    throw GridMismatch("grid has " + std::to_string(grid.size()) + " points but " + std::to_string(ckpts.size()) +
                       " checkpoints were supplied");
  }
  for (std::size_t j = 0; j < ckpts.size(); ++j) {
    if (ckpts[j].y != grid.y()[j]) throw GridMismatch("checkpoint " + std::to_string(j) + " is off the grid");
  }
}

SampleSeries empty_like(const std::string& kind, const CheckpointGrid& grid) {
  SampleSeries s;
  s.kind = kind;
  s.h = grid.h();
  s.y = grid.y();
  s.values.reserve(grid.size());
  return s;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

cplx complex_median(const std::vector<cplx>& z) {
  std::vector<double> re, im;
  re.reserve(z.size());
  im.reserve(z.size());
  for (const auto& v : z) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  return {median_of(std::move(re)), median_of(std::move(im))};
}

// Integral over [a, b] of the piecewise-linear interpolant of (y, f).
double integrate(const std::vector<double>& y, const std::vector<double>& f, double a, double b) {
  if (b <= a) return 0.0;
  auto at = [&](double u) {
    auto it = std::upper_bound(y.begin(), y.end(), u);
    if (it == y.begin()) return f.front();
    if (it == y.end()) return f.back();
    const std::size_t j = static_cast<std::size_t>(it - y.begin());
    const double w = (u - y[j - 1]) / (y[j] - y[j - 1]);
    return f[j - 1] + w * (f[j] - f[j - 1]);
  };
  const std::size_t first = static_cast<std::size_t>(std::upper_bound(y.begin(), y.end(), a) - y.begin());
  double total = 0.0;
  double u0 = a, f0 = at(a);
  for (std::size_t j = first; j < y.size() && y[j] < b; ++j) {
    total += 0.5 * (y[j] - u0) * (f0 + f[j]);
    u0 = y[j];
    f0 = f[j];
  }
  total += 0.5 * (b - u0) * (f0 + at(b));
  return total;
}

void require_covers(const SampleSeries& s, double a, double b) {
  constexpr double slack = 1e-9;
  if (s.y.empty() || s.y.front() > a + slack || s.y.back() < b - slack) {
    throw InsufficientRange("series does not cover the requested range");
  }
}

DensityReport check_predicate(const std::vector<double>& y, const std::vector<double>& dev, const EnvelopeOptions& o) {
  DensityReport r;
  const std::size_t n = y.size();
  if (n == 0) throw InsufficientRange("empty series");

  std::size_t start = static_cast<std::size_t>(std::lower_bound(y.begin(), y.end(), o.y_min - 1e-9) - y.begin());
  if (start >= n) throw InsufficientRange("series ends before the check window");

  EnvelopeOptions opts = o;
  if (opts.kind == Envelope::LogK && opts.K <= 0.0) {
    // Calibrate K on the first half of the window, judge the second half.
    const double mid = 0.5 * (y[start] + y.back());
    double worst = 0.0;
    std::size_t j = start;
    for (; j < n && y[j] <= mid; ++j) {
      if (y[j] > 1.0) worst = std::max(worst, dev[j] * y[j] / std::log(y[j]));
    }
    opts.K = 1.1 * worst;
    start = j;
    if (start >= n) throw InsufficientRange("window too short to calibrate K");
  }
  r.K = opts.kind == Envelope::LogK ? opts.K : 0.0;

  auto ok = [&](std::size_t j) { return dev[j] <= envelope(y[j], opts); };

  double len = 0.0, good_len = 0.0, mass = 0.0, good_mass = 0.0;
  std::size_t good_points = 0;
  for (std::size_t j = start; j < n; ++j) {
    const bool good = ok(j);
    good_points += good;
    if (j + 1 < n) {
      const double l = y[j + 1] - y[j];
      const double e = std::exp(y[j + 1]) - std::exp(y[j]);
      len += l;
      mass += e;
      if (good) {
        good_len += l;
        good_mass += e;
      }
    }
  }
  r.window_lo = y[start];
  r.window_hi = y.back();
  r.points = n - start;
  r.point_fraction = static_cast<double>(good_points) / static_cast<double>(r.points);
  r.natural = mass > 0 ? good_mass / mass : r.point_fraction;
  r.logarithmic = len > 0 ? good_len / len : r.point_fraction;
  r.exceedance_measure = len - good_len;

  // dyadic blocks over the full series
  for (std::size_t j = 0; j < n; ++j) {
    if (y[j] <= 0.0) continue;
    const int k = static_cast<int>(std::floor(std::log2(y[j] / opts.block_anchor))) + 1;
    if (r.blocks.empty() || r.blocks.back().k != k) {
      BlockExceedance b;
      b.k = k;
      b.y_lo = std::ldexp(opts.block_anchor, k - 1);
      b.y_hi = std::ldexp(opts.block_anchor, k);
      r.blocks.push_back(b);
    }
    auto& b = r.blocks.back();
    ++b.points;
    if (!ok(j)) {
      ++b.violations;
      if (j + 1 < n) b.measure += y[j + 1] - y[j];
    }
  }
  return r;
}

}  // namespace

double SampleSeries::max_abs_imag() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v.imag()));
  return m;
}

SampleSeries d_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t) {
  require_grid(grid, ckpts);
  SampleSeries s = empty_like("D", grid);
  for (const auto& c : ckpts) s.values.push_back(pi_half(c, t));
  return s;
}

SampleSeries delta_exact(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t,
                         const BiasConstant& M) {
  require_grid(grid, ckpts);
  SampleSeries s = empty_like("Delta", grid);
  for (const auto& c : ckpts) s.values.push_back(c.y * pi_count(c, t) / std::exp(c.y / 2) + 2.0 * M.value);
  return s;
}

ZeroSumSeries delta_zero_sum(const std::vector<double>& y, double h, const ExpandedZeros& zeros, double T,
                             bool strict) {
  if (!(T > 0.0)) throw std::invalid_argument("zero-sum height must be positive");
  ZeroSumSeries out;
  out.warnings = zeros.warnings;
  if (T > zeros.height * (1 + 1e-12)) {
    const std::string msg = "height T = " + std::to_string(T) + " exceeds the zero data height " + std::to_string(zeros.height);
    if (strict) throw InsufficientRange(msg);
    out.warnings.push_back(msg);
  }
  std::vector<cplx> coef;
  std::vector<double> gam;
  for (const auto& z : zeros.terms) {
    if (std::abs(z.gamma) > T) break;
    coef.push_back(z.coef / z.rho());
    gam.push_back(z.gamma);
  }
  out.terms_used = coef.size();
  out.series.kind = "DeltaZeros";
  out.series.h = h;
  out.series.y = y;
  out.series.values.reserve(y.size());
  for (double u : y) {
    cplx s{};
    for (std::size_t n = 0; n < coef.size(); ++n) s += coef[n] * std::polar(1.0, u * gam[n]);
    out.series.values.push_back(cplx{} - s);  // +0 rather than -0 for an empty sum
  }
  return out;
}

SampleSeries g_of(const SampleSeries& delta) {
  SampleSeries g;
  g.kind = "G";
  g.h = delta.h;
  g.y = delta.y;
  g.values.resize(delta.size());
  cplx acc{};
  for (std::size_t j = 0; j < delta.size(); ++j) {
    if (j > 0) acc += 0.5 * (delta.y[j] - delta.y[j - 1]) * (delta.values[j] + delta.values[j - 1]);
    g.values[j] = acc;
  }
  return g;
}

LEstimate estimate_L(const SampleSeries& delta) {
  if (delta.y.empty() || delta.y.back() < 10.0) throw InsufficientRange("estimating L needs the grid to reach y = 10");
  LEstimate e;
  e.trace.kind = "Ltrace";
  e.trace.h = delta.h;
  e.trace.y = delta.y;
  e.trace.values.resize(delta.size());
  cplx acc{};
  for (std::size_t j = 0; j < delta.size(); ++j) {
    if (j > 0) {
      acc += 0.5 * (delta.y[j] - delta.y[j - 1]) *
             (delta.values[j] / delta.y[j] + delta.values[j - 1] / delta.y[j - 1]);
    }
    e.trace.values[j] = acc;
  }
  e.L = acc;
  return e;
}

cplx estimate_c_pointwise(const SampleSeries& d, const BiasConstant& M, double tail) {
  if (d.y.empty()) throw InsufficientRange("empty series");
  if (!(tail > 0.0 && tail <= 1.0)) throw std::invalid_argument("tail fraction must lie in (0, 1]");
  const double start = d.y.back() - tail * (d.y.back() - d.y.front());
  std::vector<cplx> v;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (d.y[j] >= start && d.y[j] > 1.0) v.push_back(d.values[j] + M.value * std::log(d.y[j]));
  }
  if (v.size() < 100) {
    throw InsufficientRange("fit window has " + std::to_string(v.size()) + " points, need at least 100");
  }
  return complex_median(v);
}

cplx estimate_c_via_l(const BiasConstant& M, cplx L) { return M.value * std::log(std::log(2.0)) + 0.5 * L; }

cplx estimate_c_mean(const SampleSeries& mean, const BiasConstant& M) {
  if (mean.y.empty()) throw InsufficientRange("empty series");
  return mean.values.back() + M.value * std::log(mean.y.back());
}

cplx median_over(const SampleSeries& s, double y_lo, double y_hi) {
  std::vector<cplx> v;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.y[j] >= y_lo && s.y[j] <= y_hi) v.push_back(s.values[j]);
  }
  if (v.empty()) throw InsufficientRange("no samples in the median window");
  return complex_median(v);
}

double envelope(double y, const EnvelopeOptions& opts) {
  const double ly = std::max(std::log(y), 0.0);
  if (opts.kind == Envelope::TheoremMain) return std::pow(ly, 3.0 + opts.eps) / y;
  return opts.K * ly / y;
}

DensityReport envelope_check(const SampleSeries& d, const BiasConstant& M, cplx C, const EnvelopeOptions& opts) {
  if (opts.kind == Envelope::TheoremMain && !(opts.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  std::vector<double> dev(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double ly = d.y[j] > 0.0 ? std::log(d.y[j]) : -INFINITY;
    dev[j] = std::isfinite(ly) ? std::abs(d.values[j] + M.value * ly - C) : INFINITY;
  }
  return check_predicate(d.y, dev, opts);
}

DensityReport euler_density_check(const SampleSeries& F, cplx ell_hat, const EnvelopeOptions& opts) {
  std::vector<double> dev(F.size());
  for (std::size_t j = 0; j < F.size(); ++j) dev[j] = std::abs(F.values[j] - ell_hat);
  DensityReport r = check_predicate(F.y, dev, opts);
  if (std::abs(ell_hat) < 1e-6) {
    r.flagged = true;
    r.note = "limit estimate is numerically zero; the order of vanishing may be misconfigured";
  }
  return r;
}

DensityReport density_race(std::span<const Jump> jumps, double lo, double X) {
  if (!(lo > 0.0) || !(X > lo)) throw std::invalid_argument("race window needs 0 < lo < X");
  ExactSum d;
  double start = 0.0;
  CompensatedSum len, log_len;
  auto close_piece = [&](double end) {
    if (d.sign() <= 0) return;
    const double a = std::max(start, lo), b = std::min(end, X);
    if (b > a) {
      len.add(b - a);
      log_len.add(std::log(b / a));
    }
  };
  double prev = -INFINITY;
  for (const auto& j : jumps) {
    if (!(j.x > prev)) throw StreamOrderError("race jumps must be strictly increasing");
    prev = j.x;
    if (j.x > X) break;
    close_piece(j.x);
    d.add(j.w);
    start = j.x;
  }
  close_piece(X);
  DensityReport r;
  r.window_lo = lo;
  r.window_hi = X;
  r.points = jumps.size();
  // summed piece logs can overshoot log(X/lo) by a few ulps
  r.natural = std::clamp(len.value() / (X - lo), 0.0, 1.0);
  r.logarithmic = std::clamp(log_len.value() / std::log(X / lo), 0.0, 1.0);
  r.exceedance_measure = std::max(0.0, std::log(X / lo) - log_len.value());
  r.point_fraction = r.natural;
  return r;
}

DensityReport race_report(const RaceMeter& meter, double X) {
  const double lo = meter.window_lo();
  if (!(X > lo)) throw std::invalid_argument("race window needs lo < X");
  DensityReport r;
  r.window_lo = lo;
  r.window_hi = X;
  r.natural = std::clamp(meter.measure(X) / (X - lo), 0.0, 1.0);
  r.logarithmic = std::clamp(meter.log_measure(X) / std::log(X / lo), 0.0, 1.0);
  r.exceedance_measure = std::max(0.0, std::log(X / lo) - meter.log_measure(X));
  r.point_fraction = r.natural;
  return r;
}

double moment(const SampleSeries& delta, int k, double Y) {
  if (k < 1 || k > 6) throw std::invalid_argument("moment order k must be in [1, 6]");
  const double a = std::log(2.0);
  if (!(Y > a)) throw std::invalid_argument("moment needs Y > log 2");
  require_covers(delta, a, Y);
  std::vector<double> f(delta.size());
  for (std::size_t j = 0; j < delta.size(); ++j) f[j] = std::pow(std::norm(delta.values[j]), k);
  return integrate(delta.y, f, std::max(a, delta.y.front()), Y) / Y;
}

WeightedMoment weighted_second_moment(const SampleSeries& delta, double Y) {
  if (!(Y > 2.0)) throw std::invalid_argument("weighted moment needs Y > 2");
  require_covers(delta, 2.0, Y);
  std::vector<double> f(delta.size());
  for (std::size_t j = 0; j < delta.size(); ++j) {
    f[j] = delta.y[j] > 1.0 ? std::norm(delta.values[j]) / std::log(delta.y[j]) : 0.0;
  }
  WeightedMoment w;
  w.trace.kind = "weighted_m2";
  w.trace.h = delta.h;
  // running integral from 2, starting from the interpolated integrand there
  auto first = std::upper_bound(delta.y.begin(), delta.y.end(), 2.0);
  double acc = 0.0, u0 = 2.0;
  double prev_f = f.front();
  if (const auto j = static_cast<std::size_t>(first - delta.y.begin()); j > 0) {
    const double t = (2.0 - delta.y[j - 1]) / (delta.y[j] - delta.y[j - 1]);
    prev_f = f[j - 1] + t * (f[j] - f[j - 1]);
  }
  for (auto it = first; it != delta.y.end() && *it <= Y + 1e-12; ++it) {
    const std::size_t j = static_cast<std::size_t>(it - delta.y.begin());
    acc += 0.5 * (*it - u0) * (prev_f + f[j]);
    u0 = *it;
    prev_f = f[j];
    w.trace.y.push_back(*it);
    w.trace.values.push_back(acc / *it);
  }
  w.value = integrate(delta.y, f, 2.0, Y) / Y;
  return w;
}

double mean_integral(std::span<const Jump> jumps, double x) {
  if (!(x >= 2.0)) throw std::invalid_argument("mean integral needs x >= 2");
  CompensatedSum s;
  for (const auto& j : jumps) {
    if (j.x > x) break;
    s.add(j.w * (x - std::max(j.x, 2.0)));
  }
  return s.value() / x;
}

SampleSeries mean_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t) {
  require_grid(grid, ckpts);
  SampleSeries s = empty_like("mean", grid);
  for (const auto& c : ckpts) s.values.push_back((c.x * pi_half(c, t) - sqrt_weighted(c, t)) / c.x);
  return s;
}

SampleSeries euler_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const Character& chi,
                          int m) {
  require_grid(grid, ckpts);
  SampleSeries s = empty_like("F", grid);
  for (const auto& c : ckpts) s.values.push_back(euler_product_partial(c, chi, m));
  return s;
}

GrowthCheck g_growth_check(const SampleSeries& G, double y_lo) {
  if (G.y.empty()) throw InsufficientRange("empty series");
  const double mid = 0.5 * G.y.back();
  GrowthCheck g;
  bool any_first = false, any_second = false;
  for (std::size_t j = 0; j < G.size(); ++j) {
    const double y = G.y[j];
    if (y < y_lo || y <= 1.0) continue;
    const double r = std::abs(G.values[j]) / std::log(y);
    if (y <= mid) {
      g.first_max = std::max(g.first_max, r);
      any_first = true;
    } else {
      g.second_max = std::max(g.second_max, r);
      any_second = true;
    }
  }
  if (!any_first || !any_second) throw InsufficientRange("growth check needs points on both halves of the range");
  g.ok = g.second_max <= 2.0 * g.first_max;
  return g;
}

MomentFit fit_moments(const SampleSeries& delta, const std::vector<int>& ks, double Y) {
  MomentFit fit;
  fit.C = std::max(1.0, std::pow(moment(delta, 1, Y), 0.25));
  for (int k : ks) {
    MomentRow row;
    row.k = k;
    row.Y = Y;
    row.m = moment(delta, k, Y);
    row.root = std::pow(row.m, 1.0 / (2.0 * k));
    row.bound = (fit.C * k) * (fit.C * k);
    row.dominated = row.root <= row.bound * (1 + 1e-12);
    fit.rows.push_back(row);
  }
  return fit;
}

double rms_difference(const SampleSeries& a, const SampleSeries& b, double y_lo, double y_hi) {
  if (a.y != b.y) throw GridMismatch("series are on different grids");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.y[j] < y_lo || a.y[j] > y_hi) continue;
    s += std::norm(a.values[j] - b.values[j]);
    ++n;
  }
  if (n == 0) throw InsufficientRange("no samples in the RMS window");
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace prl
