// Acceptance run: one PASS/FAIL line per criterion. Criteria 3-10 share a
// single tally of q = 4 up to 10^8, written through the same pipeline the CLI
// uses; criterion 10 repeats it on 8 threads and compares bytes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracle.hpp"
#include "prl/analysis.hpp"
#include "prl/pipeline.hpp"
#include "prl/tally.hpp"

using namespace prl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tolerances and thresholds, as stated for each criterion.
constexpr double kExactTol = 1e-12;
constexpr double kOracleRelTol = 1e-10;
constexpr double kC1Seconds = 10.0;
constexpr double kC2Seconds = 30.0;
constexpr double kC3Seconds = 300.0;
constexpr double kEnvelopeFloor = 0.90;
constexpr double kRaceFloor = 0.99;
constexpr double kCAgreement = 0.02;
constexpr double kEulerMedianShift = 0.01;
constexpr double kEllFloor = 0.1;
constexpr double kEulerDensityFloor = 0.9;
constexpr double kRmsRatio = 0.6;
constexpr double kSineTol = 1e-3;
constexpr double kM2Variation = 0.20;
constexpr std::uint64_t kX = 100000000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  return json::parse(in);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

Outcome c1_unit_exact() {
  const auto t0 = Clock::now();
  std::size_t checks = 0;
  double worst = 0.0;
  std::string failure;
  auto note = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok && failure.empty()) failure = what;
  };

  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<std::uint32_t> full;
  for (std::uint32_t q = 3; q <= 120; ++q) full.push_back(q);
  full.push_back(256);
  full.push_back(499);
  for (auto q : full) {
    const CharacterGroup g(q);
    for (const auto& a : g.characters()) {
      for (const auto& b : g.characters()) {
        const double err = std::abs(inner_product(a, b) - cplx(a.index() == b.index() ? 1.0 : 0.0));
        worst = std::max(worst, err);
        note(err <= kExactTol, "orthogonality q=" + std::to_string(q));
      }
    }
    ClassFunction t(q);
    for (auto a : g.units()) t.set(a, cplx(nd(rng), nd(rng)));
    std::vector<cplx> coef;
    for (const auto& chi : g.characters()) coef.push_back(inner_product(t, chi));
    for (auto a : g.units()) {
      cplx rebuilt{};
      for (std::size_t k = 0; k < g.size(); ++k) rebuilt += coef[k] * g[k](a);
      const double err = std::abs(rebuilt - t(a));
      worst = std::max(worst, err);
      note(err <= kExactTol, "Fourier inversion q=" + std::to_string(q));
    }
  }

  for (std::uint32_t q = 3; q <= 500; ++q) {
    const auto r = square_root_count(q);
    std::uint64_t total = 0;
    for (auto c : r.counts) total += c;
    note(total == euler_phi(q), "sum of r(a) q=" + std::to_string(q));
  }

  auto throws = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const std::invalid_argument&) {
      return true;
    }
    return false;
  };
  note(throws([] { race_weight(3, 3, 4); }), "race_weight a == b");
  note(throws([] { race_weight(3, 7, 4); }), "race_weight a == b mod q");
  note(throws([] { race_weight(2, 1, 4); }), "race_weight non-unit");
  note(throws([] { race_weight(1, 2, 2); }), "race_weight q < 3");
  {
    const auto t = race_weight(3, 1, 4);
    note(t(3) == cplx(1.0) && t(1) == cplx(-1.0) && t(0) == cplx(0.0) && t(2) == cplx(0.0), "race_weight values");
  }

  const CharacterGroup g(8);
  auto partial = [&](std::uint64_t lo, std::uint64_t hi) {
    const std::vector<std::uint64_t> none;
    SegmentTally seg(g, lo, none);
    for (auto p : oracle::primes_td(lo, hi)) seg.add_prime(p);
    seg.close(hi);
    return seg.local;
  };
  const auto a = partial(2, 5000), b = partial(5000, 9000), c = partial(9000, 20000);
  note(merge(a, TallyPartial::zero(g, 5000)) == a, "merge right identity");
  note(merge(TallyPartial::zero(g, 2), a) == a, "merge left identity");
  note(merge(merge(a, b), c) == merge(a, merge(b, c)), "merge associativity");
  note(merge(merge(a, b), c) == partial(2, 20000), "merge matches a single pass");
  bool overlap = false;
  try {
    merge(partial(2, 6000), b);
  } catch (const RangeOverlap&) {
    overlap = true;
  }
  note(overlap, "merge overlap error");

  const double secs = seconds_since(t0);
  note(secs < kC1Seconds, "runtime");
  Outcome o;
  o.pass = failure.empty();
  o.detail = std::to_string(checks) + " checks, worst float error " + num(worst) + ", " + num(secs) + " s" +
             (failure.empty() ? "" : ", first failure: " + failure);
  return o;
}

Outcome c2_oracle() {
  const auto t0 = Clock::now();
  const std::uint64_t X = 10000;
  double worst = 0.0;
  std::size_t compared = 0;
  std::string failure;
  for (std::uint32_t q : {3u, 4u, 5u, 8u}) {
    const CharacterGroup g(q);
    const auto grid = CheckpointGrid::uniform(0.01, X);
    TallyEngine e(g, grid, {512, 1});
    e.run(X + 1);
    const auto& ck = e.checkpoints();
    for (std::size_t j = 0; j < ck.size(); j += 7) {
      const auto& c = ck[j];
      const auto bt = oracle::brute_tally(q, c.cutoff);
      auto cmp = [&](double got, double want, const std::string& what) {
        ++compared;
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        if (!close_rel(got, want, kOracleRelTol) && failure.empty()) {
          failure = what + " q=" + std::to_string(q) + " x=" + std::to_string(c.cutoff);
        }
      };
      for (const auto& cls : c.classes) {
        cmp(static_cast<double>(cls.count), static_cast<double>(bt.count[cls.residue]), "pi");
        cmp(cls.inv_sqrt, bt.inv_sqrt[cls.residue], "pi_half");
        cmp(cls.log, bt.log[cls.residue], "theta");
        cmp(cls.psi, bt.psi[cls.residue], "psi");
      }
      for (const auto& chi : g.characters()) {
        const auto bs = oracle::brute_char_sums(chi.values(), c.cutoff);
        const auto k = chi.index();
        for (const auto& [got, want, what] :
             {std::tuple{c.chi_inv_sqrt[k], bs.inv_sqrt, "character pi_half"},
              std::tuple{c.euler_log[k], bs.euler_log, "Euler log-sum"},
              std::tuple{c.chi_sq_over_p[k], bs.sq_over_p, "Mertens sum"}}) {
          cmp(got.real(), want.real(), what);
          cmp(got.imag(), want.imag(), what);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failure.empty() && secs < kC2Seconds;
  o.detail = std::to_string(compared) + " values, worst relative error " + num(worst) + ", " + num(secs) + " s" +
             (failure.empty() ? "" : ", first failure: " + failure);
  return o;
}

RunConfig base_config(const std::string& command, const fs::path& out, unsigned threads) {
  RunConfig c;
  c.command = command;
  c.q = 4;
  c.a = 3;
  c.b = 1;
  c.x_max = kX;
  c.grid_h = 0.01;
  c.race_lo = 1000;
  c.out = out;
  c.threads = threads;
  c.T = {50, 200};
  c.k = {1, 2, 3};
  c.zeros = std::string(PRL_DATA_DIR) + "/zeros_4.1.txt";
  return c;
}

// bias first (fresh tally), then the other commands continue its checkpoint.
double run_all(const fs::path& out, unsigned threads, std::ostream& log) {
  fs::remove_all(out);
  const auto t0 = Clock::now();
  run(base_config("bias", out, threads), log);
  const double tally_secs = seconds_since(t0);
  for (const char* cmd : {"euler", "delta", "moments", "mean"}) {
    auto c = base_config(cmd, out, threads);
    c.resume = out.string();
    if (std::string(cmd) == "euler") {
      c.a.reset();
      c.b.reset();
      c.chi = "4.1";
    }
    run(c, log);
  }
  return tally_secs;
}

Outcome c3_envelope(const fs::path& dir, double secs) {
  const auto env = read_json(dir / "bias_envelope.json");
  const auto& r = env.at("theorem_main");
  const double frac = r.at("point_fraction").get<double>();
  const auto& blocks = r.at("blocks");
  bool monotone = blocks.size() >= 3;
  std::string trail;
  const std::size_t first = blocks.size() >= 3 ? blocks.size() - 3 : 0;
  for (std::size_t i = first; i < blocks.size(); ++i) {
    const double m = blocks[i].at("exceedance_measure").get<double>();
    if (i > first) monotone &= m <= blocks[i - 1].at("exceedance_measure").get<double>();
    trail += (trail.empty() ? "" : " ") + num(m);
  }
  Outcome o;
  o.pass = frac >= kEnvelopeFloor && monotone && secs < kC3Seconds;
  o.detail = "C=" + num(env.at("C_used").at("re").get<double>()) + ", fraction " + num(frac) + " (floor " +
             num(kEnvelopeFloor) + "), last three block exceedances " + trail + ", tally " + num(secs) + " s";
  return o;
}

Outcome c4_race(const fs::path& dir) {
  const auto r = read_json(dir / "bias_race.json").at("report");
  const double nat = r.at("natural_density").get<double>();
  return {nat >= kRaceFloor, "natural density on [1e3, 1e8] " + num(nat) + ", logarithmic " +
                                 num(r.at("logarithmic_density").get<double>()) + " (floor " + num(kRaceFloor) + ")"};
}

Outcome c5_constants(const fs::path& dir) {
  const auto fit = read_json(dir / "bias_fit.json");
  const auto& C = fit.at("C");
  const double p = C.at("pointwise").at("re").get<double>();
  const double m = C.at("mean").at("re").get<double>();
  const double l = C.at("via_L").at("re").get<double>();
  const double dm = std::abs(p - m), dl = std::abs(p - l);
  return {dm <= kCAgreement && dl <= kCAgreement, "C_pointwise " + num(p) + ", C_mean " + num(m) + ", C_viaL " + num(l) +
                                                      "; |diff| " + num(dm) + " and " + num(dl) + " (limit " +
                                                      num(kCAgreement) + ")"};
}

Outcome c6_euler(const fs::path& dir) {
  const auto rep = read_json(dir / "euler_report.json");
  double m5 = NAN, m7 = NAN;
  for (const auto& d : rep.at("decade_medians")) {
    const double lo = d.at("x_lo").get<double>();
    if (std::abs(lo - 1e5) < 1) m5 = d.at("median").at("re").get<double>();
    if (std::abs(lo - 1e7) < 1) m7 = d.at("median").at("re").get<double>();
  }
  const double ell = rep.at("abs_ell_hat").get<double>();
  const double frac = rep.at("density").at("point_fraction").get<double>();
  const double shift = std::abs(m5 - m7);
  return {shift <= kEulerMedianShift && ell > kEllFloor && frac >= kEulerDensityFloor,
          "medians " + num(m5) + " on [1e5,1e6] and " + num(m7) + " on [1e7,1e8], shift " + num(shift) +
              "; |ell_hat| " + num(ell) + "; density fraction " + num(frac)};
}

Outcome c7_zero_sums(const fs::path& dir) {
  const auto rows = read_csv(dir / "delta_rms.csv");
  double r50 = NAN, r200 = NAN;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double T = std::stod(rows[i][0]), r = std::stod(rows[i][1]);
    if (T == 50) r50 = r;
    if (T == 200) r200 = r;
  }
  const double ratio = r200 / r50;
  return {ratio <= kRmsRatio, "RMS on y in [5,15]: " + num(r50) + " at T=50, " + num(r200) + " at T=200, ratio " +
                                  num(ratio) + " (limit " + num(kRmsRatio) + ")"};
}

Outcome c8_moments(const fs::path& dir) {
  const auto sine = sample("Delta", std::log(2.0), 0.01, 200.5, [](double y) { return std::sin(y); });
  const double m1 = moment(sine, 1, 200), m2 = moment(sine, 2, 200);
  const bool synth = std::abs(m1 - 0.5) <= kSineTol && std::abs(m2 - 0.375) <= kSineTol;

  double lo = INFINITY, hi = 0.0;
  for (const auto& r : read_csv(dir / "moments.csv")) {
    if (r[0] != "1") continue;
    const double Y = std::stod(r[1]);
    if (Y >= 14 && Y <= 18) {
      lo = std::min(lo, std::stod(r[2]));
      hi = std::max(hi, std::stod(r[2]));
    }
  }
  const double variation = (hi - lo) / lo;
  const auto fit = read_json(dir / "moments_fit.json");
  bool dominated = true;
  for (const auto& r : fit.at("rows")) dominated &= r.at("dominated").get<bool>();
  return {synth && variation < kM2Variation && dominated,
          "sin: m_2 " + num(m1) + " (|err| " + num(std::abs(m1 - 0.5)) + "), m_4 " + num(m2) + " (|err| " +
              num(std::abs(m2 - 0.375)) + ", tol " + num(kSineTol) + "); m_2 over Y in [14,18] varies " +
              num(variation) + "; dominated by (Ck)^2 with C=" + num(fit.at("C").get<double>()) + ": " +
              (dominated ? "yes" : "no")};
}

Outcome c9_lemma(const fs::path& dir) {
  const auto fit = read_json(dir / "moments_fit.json");
  const auto& g = fit.at("G_growth");
  const auto& w = fit.at("weighted_m2");
  const bool ok = g.at("ok").get<bool>() && w.at("decreasing").get<bool>();
  return {ok, "|G|/log y max " + num(g.at("first_half_max").get<double>()) + " then " +
                  num(g.at("second_half_max").get<double>()) + "; weighted m_2 " +
                  num(w.at("at_half_Y_max").get<double>()) + " at Y/2, " + num(w.at("at_Y_max").get<double>()) +
                  " at Y"};
}

Outcome c10_determinism(const fs::path& one, const fs::path& eight) {
  std::size_t files = 0;
  std::string differs;
  for (const auto& entry : fs::directory_iterator(one)) {
    const auto name = entry.path().filename();
    ++files;
    if (!fs::exists(eight / name) || slurp(entry.path()) != slurp(eight / name)) differs += " " + name.string();
  }
  return {differs.empty() && files > 0,
          std::to_string(files) + " files compared" + (differs.empty() ? ", all identical" : ", differ:" + differs)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path(PRL_ACCEPTANCE_DIR);
  std::ostringstream log;
  int failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    failed += !o.pass;
  };

  report(1, c1_unit_exact);
  report(2, c2_oracle);

  const auto one = work / "threads1", eight = work / "threads8";
  double secs = NAN;
  std::string run_error;
  try {
    secs = run_all(one, 1, log);
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto shared = [&](const std::function<Outcome()>& f) {
    return [&, f] {
      if (!run_error.empty()) throw std::runtime_error("pipeline run failed: " + run_error);
      return f();
    };
  };
  report(3, shared([&] { return c3_envelope(one, secs); }));
  report(4, shared([&] { return c4_race(one); }));
  report(5, shared([&] { return c5_constants(one); }));
  report(6, shared([&] { return c6_euler(one); }));
  report(7, shared([&] { return c7_zero_sums(one); }));
  report(8, shared([&] { return c8_moments(one); }));
  report(9, shared([&] { return c9_lemma(one); }));
  report(10, shared([&] {
    run_all(eight, 8, log);
    return c10_determinism(one, eight);
  }));

  std::cout << (10 - failed) << " of 10 criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
