#include "prl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "prl/analysis.hpp"
#include "prl/ingest.hpp"
#include "prl/persist.hpp"
#include "prl/tally.hpp"

namespace prl {

namespace {

using nlohmann::ordered_json;

const std::set<std::string> kCommands{"bias", "euler", "delta", "moments", "mean", "zeros-validate"};

bool needs_weight(const std::string& cmd) { return cmd == "bias" || cmd == "delta" || cmd == "moments" || cmd == "mean"; }

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

template <class T>
std::string join_numbers(const std::vector<T>& v) {
  std::vector<std::string> parts;
  for (const auto& x : v) {
    if constexpr (std::is_floating_point_v<T>) {
      parts.push_back(format_double(x));
    } else {
      parts.push_back(std::to_string(x));
    }
  }
  return join(parts, ",");
}

ordered_json complex_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

ordered_json report_json(const DensityReport& r) {
  ordered_json blocks = ordered_json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"k", b.k},
                      {"y_lo", b.y_lo},
                      {"y_hi", b.y_hi},
                      {"exceedance_measure", b.measure},
                      {"points", b.points},
                      {"violations", b.violations}});
  }
  return {{"window_lo", r.window_lo},
          {"window_hi", r.window_hi},
          {"natural_density", r.natural},
          {"logarithmic_density", r.logarithmic},
          {"exceedance_measure", r.exceedance_measure},
          {"point_fraction", r.point_fraction},
          {"points", r.points},
          {"K", r.K},
          {"flagged", r.flagged},
          {"note", r.note},
          {"blocks", blocks}};
}

// Collects report files so a failed run can take them back.
class Outputs {
 public:
  Outputs(std::filesystem::path dir, const RunConfig& cfg) : dir_(std::move(dir)), meta_(metadata(cfg)) {}

  void write(const std::string& name, const std::string& text) {
    std::filesystem::create_directories(dir_);
    const auto path = dir_ / name;
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << text;
      if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    written_.push_back(path);
  }

  void json(const std::string& name, ordered_json body) {
    ordered_json doc;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : meta_) cfg[k] = v;
    doc["config"] = cfg;
    for (auto& [k, v] : body.items()) doc[k] = std::move(v);
    write(name, doc.dump(2) + "\n");
  }

  // Metadata and warnings go in leading '#' lines.
  std::ostringstream csv_head(const std::vector<std::string>& cols, const std::vector<std::string>& warnings = {}) {
    std::ostringstream s;
    for (const auto& [k, v] : meta_) s << "# " << k << '=' << v << '\n';
    for (const auto& w : warnings) s << "# warning=" << w << '\n';
    s << join(cols, ",") << '\n';
    return s;
  }

  void discard() noexcept {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

  const std::vector<std::filesystem::path>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::filesystem::path> written_;
};

struct TallyResult {
  CheckpointGrid grid;
  std::vector<TallyCheckpoint> ckpts;
  std::optional<RaceMeter> race;
};

TallyResult run_tally(const RunConfig& cfg, const CharacterGroup& group, std::optional<std::pair<std::uint32_t, std::uint32_t>> race,
                      std::ostream& log) {
  auto grid = CheckpointGrid::uniform(cfg.grid_h, cfg.x_max);
  TallyEngine engine(group, grid, {cfg.segment_entries, cfg.threads});
  const std::uint64_t hi = cfg.x_max + 1;

  if (!cfg.resume.empty()) {
    auto snap = load_snapshot(cfg.resume, group);
    if (snap.grid_h != cfg.grid_h) {
      throw std::runtime_error("checkpoint grid spacing " + format_double(snap.grid_h) + " differs from --grid-h " +
                               format_double(cfg.grid_h));
    }
    if (snap.totals.hi > hi) throw std::runtime_error("checkpoint extends beyond --xmax");
    std::optional<RaceMeter::State> state;
    if (snap.race) {
      const auto& r = *snap.race;
      if (race && (race->first != r.a || race->second != r.b || r.window_lo != cfg.race_lo)) {
        throw std::runtime_error("checkpoint tracks a different race or race window");
      }
      engine.track_race(r.a, r.b, r.window_lo);
      state = r.state;
    } else if (race) {
      throw std::runtime_error("checkpoint has no race state; rerun without --resume");
    }
    engine.restore(std::move(snap.totals), std::move(snap.checkpoints), state, snap.last_prime);
    log << "resumed at " << engine.processed_hi() << " with " << engine.checkpoints().size() << " checkpoints\n";
  } else if (race) {
    engine.track_race(race->first, race->second, cfg.race_lo);
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto last_save = t0;
  engine.run(hi, [&](const TallyEngine& e) {
    const auto now = std::chrono::steady_clock::now();
    if (std::chrono::duration<double>(now - last_save).count() >= cfg.save_every) {
      save_snapshot(cfg.out, snapshot_of(e, cfg.x_max), group);
      last_save = now;
    }
  });
  save_snapshot(cfg.out, snapshot_of(engine, cfg.x_max), group);
  log << "tally: " << engine.checkpoints().size() << " checkpoints to x=" << cfg.x_max << " in "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";

  if (engine.checkpoints().size() != grid.size()) throw std::logic_error("tally stopped short of the grid");
  return {std::move(grid), engine.checkpoints(), engine.race()};
}

std::map<std::uint32_t, int> vanishing_orders(const RunConfig& cfg, const CharacterGroup& group) {
  std::map<std::uint32_t, int> out;
  for (const auto& [label, m] : cfg.m) out[group.by_label(label).index()] = m;
  return out;
}

// Tail window [y_hi - tail (y_hi - y_0), y_hi] of a series.
double tail_start(const SampleSeries& s, double tail) { return s.y.back() - tail * (s.y.back() - s.y.front()); }

void row(std::ostringstream& s, std::initializer_list<double> v) {
  bool first = true;
  for (double x : v) {
    s << (first ? "" : ",") << format_double(x);
    first = false;
  }
  s << '\n';
}

void cmd_bias(const RunConfig& cfg, const CharacterGroup& group, const TallyResult& tr, Outputs& out,
              RunResult& res) {
  const auto t = weight_of(cfg);
  const auto M = bias_constant(group, t, vanishing_orders(cfg, group));
  const auto d = d_series(tr.grid, tr.ckpts, t);

  ordered_json notes = ordered_json::array();
  std::optional<cplx> c_point, c_via_l, c_mean, L;
  try {
    c_point = estimate_c_pointwise(d, M, cfg.c_tail);
  } catch (const InsufficientRange& e) {
    notes.push_back(std::string("pointwise: ") + e.what());
  }
  try {
    L = estimate_L(delta_exact(tr.grid, tr.ckpts, t, M)).L;
    c_via_l = estimate_c_via_l(M, *L);
  } catch (const InsufficientRange& e) {
    notes.push_back(std::string("via_L: ") + e.what());
  }
  c_mean = estimate_c_mean(mean_series(tr.grid, tr.ckpts, t), M);

  auto opt = [](const std::optional<cplx>& z) { return z ? complex_json(*z) : ordered_json(nullptr); };
  auto diff = [&](const std::optional<cplx>& z) {
    return c_point && z ? ordered_json(std::abs(*c_point - *z)) : ordered_json(nullptr);
  };

  EnvelopeOptions main_opts;
  main_opts.eps = cfg.eps;
  main_opts.y_min = cfg.y_min;
  EnvelopeOptions log_opts = main_opts;
  log_opts.kind = Envelope::LogK;
  log_opts.K = cfg.K;

  {
    auto s = out.csv_head({"y", "x", "D_re", "D_im", "shifted_re", "shifted_im", "envelope", "residual"});
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double y = d.y[j];
      const cplx shifted = d.values[j] + M.value * std::log(y);
      const double resid = c_point ? std::abs(shifted - *c_point) : NAN;
      row(s, {y, tr.grid.x()[j], d.values[j].real(), d.values[j].imag(), shifted.real(), shifted.imag(),
              envelope(y, main_opts), resid});
    }
    out.write("D_series.csv", s.str());
  }

  ordered_json orders = ordered_json::object();
  for (const auto& [k, m] : M.vanishing_orders) orders[group[k].label()] = m;
  out.json("bias_fit.json", {{"M", complex_json(M.value)},
                             {"vanishing_orders", orders},
                             {"L", opt(L)},
                             {"C", {{"pointwise", opt(c_point)}, {"via_L", opt(c_via_l)}, {"mean", opt(c_mean)}}},
                             {"abs_diff", {{"pointwise_mean", diff(c_mean)}, {"pointwise_via_L", diff(c_via_l)}}},
                             {"tail_fraction", cfg.c_tail},
                             {"notes", notes}});

  ordered_json env;
  env["C_used"] = opt(c_point);
  for (const auto& [key, o] : {std::pair{"theorem_main", main_opts}, std::pair{"log_envelope", log_opts}}) {
    if (!c_point) {
      env[key] = nullptr;
      continue;
    }
    try {
      env[key] = report_json(envelope_check(d, M, *c_point, o));
    } catch (const InsufficientRange& e) {
      env[key] = {{"note", e.what()}};
      res.warnings.push_back(std::string(key) + ": " + e.what());
    }
  }
  out.json("bias_envelope.json", env);

  if (tr.race && as_race(t)) {
    out.json("bias_race.json", {{"a", tr.race->a()}, {"b", tr.race->b()},
                                {"report", report_json(race_report(*tr.race, static_cast<double>(cfg.x_max)))}});
  } else {
    out.json("bias_race.json", {{"report", nullptr}, {"note", "weight is not a two-class race"}});
  }
}

void cmd_euler(const RunConfig& cfg, const CharacterGroup& group, const TallyResult& tr, Outputs& out) {
  const auto& chi = group.by_label(cfg.chi);
  const int m = cfg.m.count(cfg.chi) ? cfg.m.at(cfg.chi) : 0;
  const auto F = euler_series(tr.grid, tr.ckpts, chi, m);
  {
    auto s = out.csv_head({"y", "x", "F_re", "F_im", "F_abs"});
    for (std::size_t j = 0; j < F.size(); ++j) {
      row(s, {F.y[j], tr.grid.x()[j], F.values[j].real(), F.values[j].imag(), std::abs(F.values[j])});
    }
    out.write("F_series.csv", s.str());
  }
  const cplx ell = median_over(F, tail_start(F, cfg.c_tail), F.y.back());
  ordered_json decades = ordered_json::array();
  for (int e = 1; std::pow(10.0, e + 1) <= static_cast<double>(cfg.x_max); ++e) {
    const double lo = e * std::log(10.0), hi = (e + 1) * std::log(10.0);
    decades.push_back({{"x_lo", std::pow(10.0, e)}, {"x_hi", std::pow(10.0, e + 1)},
                       {"median", complex_json(median_over(F, lo, hi))}});
  }
  EnvelopeOptions o;
  o.eps = cfg.eps;
  o.y_min = cfg.y_min;
  ordered_json density;
  try {
    density = report_json(euler_density_check(F, ell, o));
  } catch (const InsufficientRange& e) {
    density = {{"note", e.what()}};
  }
  out.json("euler_report.json", {{"character", chi.label()},
                                 {"m", m},
                                 {"ell_hat", complex_json(ell)},
                                 {"abs_ell_hat", std::abs(ell)},
                                 {"flagged", std::abs(ell) < 1e-6},
                                 {"tail_fraction", cfg.c_tail},
                                 {"decade_medians", decades},
                                 {"density", density}});
}

void cmd_delta(const RunConfig& cfg, const CharacterGroup& group, const TallyResult& tr, Outputs& out,
               RunResult& res) {
  const auto t = weight_of(cfg);
  const auto M = bias_constant(group, t, vanishing_orders(cfg, group));
  const auto delta = delta_exact(tr.grid, tr.ckpts, t, M);
  const auto zd = load_zeros(cfg.zeros, cfg.q);
  const auto ex = symmetric_expand(zd, group, t);
  res.warnings.insert(res.warnings.end(), ex.warnings.begin(), ex.warnings.end());

  auto Ts = cfg.T;
  std::sort(Ts.begin(), Ts.end());
  Ts.erase(std::unique(Ts.begin(), Ts.end()), Ts.end());
  std::vector<ZeroSumSeries> sums;
  for (double T : Ts) {
    sums.push_back(delta_zero_sum(delta.y, delta.h, ex, T));
    for (const auto& w : sums.back().warnings) {
      if (std::find(res.warnings.begin(), res.warnings.end(), w) == res.warnings.end()) res.warnings.push_back(w);
    }
  }
  if (ex.terms.empty()) res.warnings.push_back("zero data is empty; the zero sums are identically 0");

  {
    auto s = out.csv_head({"y", "x", "delta_re", "delta_im"});
    for (std::size_t j = 0; j < delta.size(); ++j) {
      row(s, {delta.y[j], tr.grid.x()[j], delta.values[j].real(), delta.values[j].imag()});
    }
    out.write("delta_exact.csv", s.str());
  }
  {
    std::vector<std::string> cols{"y"};
    for (double T : Ts) {
      cols.push_back("T" + format_double(T) + "_re");
      cols.push_back("T" + format_double(T) + "_im");
    }
    auto s = out.csv_head(cols, res.warnings);
    for (std::size_t j = 0; j < delta.size(); ++j) {
      s << format_double(delta.y[j]);
      for (const auto& z : sums) {
        s << ',' << format_double(z.series.values[j].real()) << ',' << format_double(z.series.values[j].imag());
      }
      s << '\n';
    }
    out.write("delta_zerosum.csv", s.str());
  }
  {
    auto s = out.csv_head({"T", "rms", "terms", "nonincreasing"});
    double prev = INFINITY;
    for (std::size_t i = 0; i < Ts.size(); ++i) {
      const double r = rms_difference(delta, sums[i].series, cfg.rms_lo, cfg.rms_hi);
      s << format_double(Ts[i]) << ',' << format_double(r) << ',' << sums[i].terms_used << ',' << (r <= prev ? 1 : 0)
        << '\n';
      prev = r;
    }
    out.write("delta_rms.csv", s.str());
  }
}

void cmd_moments(const RunConfig& cfg, const CharacterGroup& group, const TallyResult& tr, Outputs& out) {
  const auto t = weight_of(cfg);
  const auto M = bias_constant(group, t, vanishing_orders(cfg, group));
  const auto delta = delta_exact(tr.grid, tr.ckpts, t, M);
  const double y_max = delta.y.back();

  auto Ys = cfg.Y;
  if (Ys.empty()) {
    for (int Y = 2; Y <= static_cast<int>(std::floor(y_max)); ++Y) Ys.push_back(Y);
    if (Ys.empty() || Ys.back() != y_max) Ys.push_back(y_max);
  }
  {
    auto s = out.csv_head({"k", "Y", "m_2k", "root", "C", "bound", "dominated"});
    for (double Y : Ys) {
      const auto fit = fit_moments(delta, cfg.k, Y);
      for (const auto& r : fit.rows) {
        s << r.k << ',' << format_double(r.Y) << ',' << format_double(r.m) << ',' << format_double(r.root) << ','
          << format_double(fit.C) << ',' << format_double(r.bound) << ',' << (r.dominated ? 1 : 0) << '\n';
      }
    }
    out.write("moments.csv", s.str());
  }

  const auto G = g_of(delta);
  const auto w_full = weighted_second_moment(delta, y_max);
  const auto w_half = weighted_second_moment(delta, y_max / 2);
  {
    auto s = out.csv_head({"y", "G_re", "G_im", "weighted_m2"});
    std::size_t i = 0;
    for (std::size_t j = 0; j < G.size(); ++j) {
      s << format_double(G.y[j]) << ',' << format_double(G.values[j].real()) << ','
        << format_double(G.values[j].imag()) << ',';
      if (i < w_full.trace.size() && w_full.trace.y[i] == G.y[j]) s << format_double(w_full.trace.values[i++].real());
      s << '\n';
    }
    out.write("moments_trace.csv", s.str());
  }

  const auto fit = fit_moments(delta, cfg.k, y_max);
  ordered_json rows = ordered_json::array();
  for (const auto& r : fit.rows) {
    rows.push_back({{"k", r.k}, {"m_2k", r.m}, {"root", r.root}, {"bound", r.bound}, {"dominated", r.dominated}});
  }
  ordered_json growth;
  try {
    const auto g = g_growth_check(G, 2.0);
    growth = {{"first_half_max", g.first_max}, {"second_half_max", g.second_max}, {"ok", g.ok}};
  } catch (const InsufficientRange& e) {
    growth = {{"note", e.what()}};
  }
  out.json("moments_fit.json", {{"Y_max", y_max},
                                {"C", fit.C},
                                {"rows", rows},
                                {"G_growth", growth},
                                {"weighted_m2", {{"at_Y_max", w_full.value},
                                                 {"at_half_Y_max", w_half.value},
                                                 {"decreasing", w_full.value < w_half.value}}}});
}

void cmd_mean(const RunConfig& cfg, const CharacterGroup& group, const TallyResult& tr, Outputs& out) {
  const auto t = weight_of(cfg);
  const auto M = bias_constant(group, t, vanishing_orders(cfg, group));
  const auto mean = mean_series(tr.grid, tr.ckpts, t);
  {
    auto s = out.csv_head({"y", "x", "mean_re", "mean_im", "shifted_re", "shifted_im"});
    for (std::size_t j = 0; j < mean.size(); ++j) {
      const double y = mean.y[j];
      const cplx shifted = mean.values[j] + M.value * std::log(y);
      row(s, {y, tr.grid.x()[j], mean.values[j].real(), mean.values[j].imag(), shifted.real(), shifted.imag()});
    }
    out.write("mean_trace.csv", s.str());
  }
  const cplx c_mean = estimate_c_mean(mean, M);
  ordered_json point = nullptr, diff = nullptr;
  try {
    const cplx c = estimate_c_pointwise(d_series(tr.grid, tr.ckpts, t), M, cfg.c_tail);
    point = complex_json(c);
    diff = std::abs(c - c_mean);
  } catch (const InsufficientRange&) {
  }
  out.json("mean_fit.json", {{"M", complex_json(M.value)},
                             {"x", static_cast<double>(cfg.x_max)},
                             {"mean_at_x", complex_json(mean.values.back())},
                             {"C_mean", complex_json(c_mean)},
                             {"C_pointwise", point},
                             {"abs_diff", diff}});
}

void cmd_zeros_validate(const RunConfig& cfg, std::ostream& log) {
  const auto zd = load_zeros(cfg.zeros, cfg.q);
  const CharacterGroup group(cfg.q);
  std::map<std::uint32_t, std::pair<std::size_t, double>> per;
  for (const auto& e : zd.entries) {
    auto& [n, top] = per[e.char_index];
    n += static_cast<std::size_t>(e.multiplicity);
    top = std::max(top, e.gamma);
  }
  log << cfg.zeros << ": modulus " << cfg.q << ", " << zd.entries.size() << " records\n";
  for (const auto& chi : group.characters()) {
    if (chi.is_principal() || !zd.covers(chi.index())) continue;
    const auto [n, top] = per[chi.index()];
    log << "  " << chi.label() << ": " << n << " zeros, largest " << format_double(top) << ", height "
        << format_double(zd.height(chi.index()));
    if (auto it = zd.central_orders.find(chi.index()); it != zd.central_orders.end()) log << ", central " << it->second;
    log << '\n';
  }
}

}  // namespace

ClassFunction weight_of(const RunConfig& cfg) {
  if (cfg.q < 3) throw UsageError("--q must be at least 3");
  if (!cfg.weights.empty()) {
    if (cfg.a || cfg.b) throw UsageError("give either --a/--b or --weights, not both");
    const CharacterGroup group(cfg.q);
    ClassFunction t(cfg.q);
    std::istringstream ss(cfg.weights);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw UsageError("weights are residue:value pairs, got '" + item + "'");
      std::uint64_t r = 0;
      double w = 0.0;
      const auto rs = item.substr(0, colon), ws = item.substr(colon + 1);
      const auto e1 = std::from_chars(rs.data(), rs.data() + rs.size(), r);
      const auto e2 = std::from_chars(ws.data(), ws.data() + ws.size(), w);
      if (e1.ec != std::errc() || e1.ptr != rs.data() + rs.size() || e2.ec != std::errc() ||
          e2.ptr != ws.data() + ws.size()) {
        throw UsageError("cannot read weight '" + item + "'");
      }
      if (!group.is_unit(r)) throw UsageError("weight residue " + rs + " is not a unit mod " + std::to_string(cfg.q));
      t.set(r, w);
    }
    return t;
  }
  if (!cfg.a || !cfg.b) throw UsageError("a race needs both --a and --b");
  try {
    return race_weight(*cfg.a, *cfg.b, cfg.q);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void validate(const RunConfig& cfg) {
  if (!kCommands.count(cfg.command)) throw UsageError("unknown command '" + cfg.command + "'");
  if (cfg.q < 3) throw UsageError("--q must be at least 3");
  if (cfg.command == "zeros-validate") {
    if (cfg.zeros.empty()) throw UsageError("zeros-validate needs --zeros");
    return;
  }
  if (cfg.x_max < 100) throw UsageError("--xmax must be at least 100");
  if (cfg.x_max >= kMaxSieveBound) throw UsageError("--xmax is beyond the sieve range");
  if (!(cfg.grid_h > 0.0 && cfg.grid_h <= 0.1)) throw UsageError("--grid-h must lie in (0, 0.1]");
  if (!(cfg.eps > 0.0)) throw UsageError("--eps must be positive");
  if (!(cfg.K >= 0.0)) throw UsageError("--K must be nonnegative");
  if (!(cfg.c_tail > 0.0 && cfg.c_tail <= 1.0)) throw UsageError("--c-tail must lie in (0, 1]");
  if (!(cfg.race_lo >= 2.0 && cfg.race_lo < static_cast<double>(cfg.x_max))) {
    throw UsageError("--race-lo must lie in [2, xmax)");
  }
  if (cfg.threads < 1) throw UsageError("--threads must be at least 1");
  if (cfg.segment_entries == 0) throw UsageError("segment size must be positive");

  const CharacterGroup group(cfg.q);
  for (const auto& [label, m] : cfg.m) {
    const Character* chi = nullptr;
    try {
      chi = &group.by_label(label);
    } catch (const std::exception& e) {
      throw UsageError(std::string("--m: ") + e.what());
    }
    if (chi->is_principal()) throw UsageError("--m: " + label + " is the principal character");
    if (m < 0) throw UsageError("--m: order of vanishing must be nonnegative");
  }

  if (needs_weight(cfg.command)) weight_of(cfg);
  if (cfg.command == "euler") {
    if (cfg.chi.empty()) throw UsageError("euler needs --chi");
    const Character* chi = nullptr;
    try {
      chi = &group.by_label(cfg.chi);
    } catch (const std::exception& e) {
      throw UsageError(std::string("--chi: ") + e.what());
    }
    if (chi->is_principal()) throw UsageError("--chi: the principal character has no central Euler limit");
  }
  if (cfg.command == "delta") {
    if (cfg.zeros.empty()) throw UsageError("delta needs --zeros");
    if (!std::filesystem::exists(cfg.zeros)) throw UsageError("zero file " + cfg.zeros + " does not exist");
    if (cfg.T.empty()) throw UsageError("delta needs at least one --T");
    for (double T : cfg.T) {
      if (!(T > 0.0)) throw UsageError("--T heights must be positive");
    }
    if (!(cfg.rms_lo < cfg.rms_hi)) throw UsageError("RMS window is empty");
  }
  if (cfg.command == "moments") {
    if (cfg.k.empty()) throw UsageError("moments needs at least one --k");
    for (int k : cfg.k) {
      if (k < 1 || k > 6) throw UsageError("--k must lie in [1, 6], got " + std::to_string(k));
    }
    for (double Y : cfg.Y) {
      if (!(Y > std::log(2.0)) || Y > std::log(static_cast<double>(cfg.x_max))) {
        throw UsageError("--Y must lie in (log 2, log xmax]");
      }
    }
  }
}

std::vector<std::pair<std::string, std::string>> metadata(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> m{{"command", cfg.command}, {"q", std::to_string(cfg.q)}};
  if (cfg.a) m.emplace_back("a", std::to_string(*cfg.a));
  if (cfg.b) m.emplace_back("b", std::to_string(*cfg.b));
  if (!cfg.weights.empty()) m.emplace_back("weights", cfg.weights);
  m.emplace_back("xmax", std::to_string(cfg.x_max));
  m.emplace_back("grid-h", format_double(cfg.grid_h));
  if (!cfg.zeros.empty()) m.emplace_back("zeros", cfg.zeros);
  std::vector<std::string> ms;
  for (const auto& [label, v] : cfg.m) ms.push_back(label + "=" + std::to_string(v));
  m.emplace_back("m", join(ms, ","));
  m.emplace_back("eps", format_double(cfg.eps));
  m.emplace_back("K", format_double(cfg.K));
  m.emplace_back("c-tail", format_double(cfg.c_tail));
  m.emplace_back("y-min", format_double(cfg.y_min));
  m.emplace_back("race-lo", format_double(cfg.race_lo));
  if (!cfg.chi.empty()) m.emplace_back("chi", cfg.chi);
  m.emplace_back("T", join_numbers(cfg.T));
  m.emplace_back("k", join_numbers(cfg.k));
  m.emplace_back("Y", join_numbers(cfg.Y));
  m.emplace_back("rms-lo", format_double(cfg.rms_lo));
  m.emplace_back("rms-hi", format_double(cfg.rms_hi));
  return m;
}

std::vector<std::string> planned_outputs(const RunConfig& cfg) {
  if (cfg.command == "zeros-validate") return {};
  std::vector<std::string> files{kCheckpointCsv, kCheckpointJson};
  const std::map<std::string, std::vector<std::string>> reports{
      {"bias", {"D_series.csv", "bias_fit.json", "bias_envelope.json", "bias_race.json"}},
      {"euler", {"F_series.csv", "euler_report.json"}},
      {"delta", {"delta_exact.csv", "delta_zerosum.csv", "delta_rms.csv"}},
      {"moments", {"moments.csv", "moments_trace.csv", "moments_fit.json"}},
      {"mean", {"mean_trace.csv", "mean_fit.json"}}};
  const auto& r = reports.at(cfg.command);
  files.insert(files.end(), r.begin(), r.end());
  return files;
}

std::string describe_plan(const RunConfig& cfg) {
  validate(cfg);
  std::ostringstream s;
  s << "plan: " << cfg.command << '\n';
  for (const auto& [k, v] : metadata(cfg)) s << "  " << k << " = " << v << '\n';
  if (cfg.command == "zeros-validate") {
    s << "  reads " << cfg.zeros << ", writes nothing\n";
    return s.str();
  }
  const auto grid = CheckpointGrid::uniform(cfg.grid_h, cfg.x_max);
  s << "  tally " << grid.size() << " checkpoints over [2, " << cfg.x_max << "] on " << cfg.threads << " thread(s)";
  if (!cfg.resume.empty()) s << ", resuming from " << cfg.resume;
  s << '\n';
  for (const auto& f : planned_outputs(cfg)) s << "  writes " << (cfg.out / f).string() << '\n';
  return s.str();
}

RunResult run(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  RunResult res;
  if (cfg.dry_run) {
    log << describe_plan(cfg);
    return res;
  }
  if (cfg.command == "zeros-validate") {
    cmd_zeros_validate(cfg, log);
    return res;
  }

  const CharacterGroup group(cfg.q);
  std::optional<std::pair<std::uint32_t, std::uint32_t>> race;
  if (cfg.command == "bias") race = as_race(weight_of(cfg));
  Outputs out(cfg.out, cfg);
  try {
    const auto tr = run_tally(cfg, group, race, log);
    if (cfg.command == "bias") cmd_bias(cfg, group, tr, out, res);
    if (cfg.command == "euler") cmd_euler(cfg, group, tr, out);
    if (cfg.command == "delta") cmd_delta(cfg, group, tr, out, res);
    if (cfg.command == "moments") cmd_moments(cfg, group, tr, out);
    if (cfg.command == "mean") cmd_mean(cfg, group, tr, out);
  } catch (...) {
    out.discard();
    throw;
  }
  res.written = {cfg.out / kCheckpointCsv, cfg.out / kCheckpointJson};
  res.written.insert(res.written.end(), out.written().begin(), out.written().end());
  for (const auto& w : res.warnings) log << "warning: " << w << '\n';
  return res;
}

}  // namespace prl
