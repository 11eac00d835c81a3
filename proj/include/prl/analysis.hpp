#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prl/characters.hpp"
#include "prl/ingest.hpp"
#include "prl/tally.hpp"

namespace prl {

// Values on an increasing y-grid, uniform with spacing h when h > 0.
struct SampleSeries {
  std::string kind;
  double h = 0.0;
  std::vector<double> y;
  std::vector<cplx> values;

  std::size_t size() const { return y.size(); }
  double max_abs_imag() const;
};

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientRange : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Builds a uniform series from a function of y; used for synthetic inputs.
template <class F>
SampleSeries sample(const std::string& kind, double y0, double h, double y_max, F&& f) {
  SampleSeries s;
  s.kind = kind;
  s.h = h;
  const auto n = static_cast<std::size_t>(std::floor((y_max - y0) / h + 1e-9));
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = y0 + static_cast<double>(j) * h;
    s.y.push_back(y);
    s.values.push_back(cplx(f(y)));
  }
  return s;
}

// D(e^y) = pi_{1/2}(e^y; t) at each checkpoint.
SampleSeries d_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t);

// Delta(y; t) = y * pi(e^y; t) / e^{y/2} + 2 M(t).
SampleSeries delta_exact(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t,
                         const BiasConstant& M);

struct ZeroSumSeries {
  SampleSeries series;
  std::size_t terms_used = 0;
  std::vector<std::string> warnings;
};

// -sum_{|gamma_n| <= T} a_n e^{i y gamma_n} / (1/2 + i gamma_n) at each y.
// T above the data height throws when strict, warns otherwise.
ZeroSumSeries delta_zero_sum(const std::vector<double>& y, double h, const ExpandedZeros& zeros, double T,
                             bool strict = false);

// G(y) = int_{y_0}^{y} Delta, cumulative trapezoid.
SampleSeries g_of(const SampleSeries& delta);

struct LEstimate {
  cplx L;
  SampleSeries trace;  // int_{y_0}^{y} Delta(u)/u du
};

// Needs a grid reaching y >= 10.
LEstimate estimate_L(const SampleSeries& delta);

// Median of D + M log y over the top `tail` fraction of the y-range
// (componentwise for complex values). Needs at least 100 points there.
cplx estimate_c_pointwise(const SampleSeries& d, const BiasConstant& M, double tail = 0.25);
cplx estimate_c_via_l(const BiasConstant& M, cplx L);
// mean-integral route: mean(x) + M log log x at the series endpoint.
cplx estimate_c_mean(const SampleSeries& mean, const BiasConstant& M);

// Componentwise median of the values with y in [y_lo, y_hi].
cplx median_over(const SampleSeries& s, double y_lo, double y_hi);

struct BlockExceedance {
  int k = 0;
  double y_lo = 0.0, y_hi = 0.0;
  double measure = 0.0;  // y-measure of violations inside the block
  std::size_t points = 0, violations = 0;
};

struct DensityReport {
  double window_lo = 0.0, window_hi = 0.0;  // in y for envelope checks, in x for races
  double natural = 0.0;
  double logarithmic = 0.0;
  double exceedance_measure = 0.0;  // y-measure of the violating set
  double point_fraction = 0.0;      // share of grid points satisfying the predicate
  std::size_t points = 0;
  std::vector<BlockExceedance> blocks;
  double K = 0.0;  // log-envelope constant when used
  bool flagged = false;
  std::string note;
};

enum class Envelope { TheoremMain, LogK };

struct EnvelopeOptions {
  Envelope kind = Envelope::TheoremMain;
  double eps = 0.5;
  double K = 0.0;           // LogK only; 0 calibrates on the first half of the window
  double y_min = 10.0;      // window start
  double block_anchor = 10.0;
};

double envelope(double y, const EnvelopeOptions& opts);

// Predicate |D(e^y) + M log y - C| <= envelope(y) at every grid point with
// y >= y_min. Each point stands for the cell [y_j, y_j + h) clipped to the
// grid. Natural density weights cells by e^y, logarithmic by length.
// Dyadic blocks [2^{k-1} Y0, 2^k Y0) are reported over the whole series,
// not just the window, so blocks with k <= 0 appear as well.
DensityReport envelope_check(const SampleSeries& d, const BiasConstant& M, cplx C, const EnvelopeOptions& opts);

// Same predicate for |F - ell|.
DensityReport euler_density_check(const SampleSeries& F, cplx ell_hat, const EnvelopeOptions& opts);

struct Jump {
  double x = 0.0;
  double w = 0.0;
};

// Exact measure of {u in [lo, X] : sum_{x_i <= u} w_i > 0} for jumps in
// increasing x. Natural density normalizes by X - lo, logarithmic by
// log(X / lo).
DensityReport density_race(std::span<const Jump> jumps, double lo, double X);
DensityReport race_report(const RaceMeter& meter, double X);

// (1/Y) int_{log 2}^{Y} |Delta|^{2k} dy by trapezoid, 1 <= k <= 6.
double moment(const SampleSeries& delta, int k, double Y);

struct WeightedMoment {
  double value = 0.0;
  SampleSeries trace;
};
// (1/Y) int_2^Y |Delta(u)|^2 / log u du with its trace over the grid.
WeightedMoment weighted_second_moment(const SampleSeries& delta, double Y);

// (1/x) int_2^x D(u) du for D = sum of jumps, evaluated exactly.
double mean_integral(std::span<const Jump> jumps, double x);
// The same at every checkpoint, from the stored sums of t(p)/sqrt(p) and
// t(p) sqrt(p).
SampleSeries mean_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const ClassFunction& t);

// F(x) = (log x)^m prod_{p <= x} (1 - chi(p)/sqrt(p))^{-1} at each checkpoint.
SampleSeries euler_series(const CheckpointGrid& grid, std::span<const TallyCheckpoint> ckpts, const Character& chi,
                          int m);

struct GrowthCheck {
  double first_max = 0.0;   // max |G|/log y on [y_lo, Y/2]
  double second_max = 0.0;  // max on [Y/2, Y]
  bool ok = false;          // second_max <= 2 first_max
};
GrowthCheck g_growth_check(const SampleSeries& G, double y_lo);

struct MomentRow {
  int k = 0;
  double Y = 0.0;
  double m = 0.0;     // m_{2k}
  double root = 0.0;  // m_{2k}^{1/(2k)}
  double bound = 0.0; // (C k)^2
  bool dominated = false;
};
struct MomentFit {
  double C = 0.0;  // fitted from k = 1: max(1, m_2^{1/4})
  std::vector<MomentRow> rows;
};
MomentFit fit_moments(const SampleSeries& delta, const std::vector<int>& ks, double Y);

// Root mean square of a - b over grid points with y in [y_lo, y_hi].
double rms_difference(const SampleSeries& a, const SampleSeries& b, double y_lo, double y_hi);

}  // namespace prl
