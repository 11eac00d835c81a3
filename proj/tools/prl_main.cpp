#include <charconv>
#include <cmath>
#include <iostream>

#include <CLI11.hpp>

#include "prl/pipeline.hpp"

namespace {

// Accepts 100000000 as well as 1e8.
std::uint64_t parse_bound(const std::string& s) {
  std::uint64_t v = 0;
  if (auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v); ec == std::errc() && p == s.data() + s.size()) {
    return v;
  }
  double d = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc() || p != s.data() + s.size() || !(d >= 0) || d != std::floor(d) || d >= 0x1p63) {
    throw prl::UsageError("--xmax must be a whole number, got '" + s + "'");
  }
  return static_cast<std::uint64_t>(d);
}

}  // namespace

int main(int argc, char** argv) {
  prl::RunConfig cfg;
  std::string xmax = "1000000", out = cfg.out.string();
  std::vector<std::string> m_overrides;
  std::uint32_t a = 0, b = 0;

  CLI::App app{"Weighted prime races, bias constants and central Euler products"};
  app.set_config("--config", "", "key=value file; flags given on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  auto* a_opt = app.add_option("--a", a, "leading residue of the race");
  auto* b_opt = app.add_option("--b", b, "trailing residue of the race");
  app.add_option("--q", cfg.q, "modulus")->required();
  app.add_option("--weights", cfg.weights, "explicit weight as residue:value,... instead of --a/--b");
  app.add_option("--xmax", xmax, "largest integer tallied")->capture_default_str();
  app.add_option("--grid-h", cfg.grid_h, "checkpoint spacing in log x")->capture_default_str();
  app.add_option("--zeros", cfg.zeros, "zero file");
  app.add_option("--m", m_overrides, "order of vanishing at 1/2, as label=m")->delimiter(',');
  app.add_option("--eps", cfg.eps, "envelope exponent slack")->capture_default_str();
  app.add_option("--K", cfg.K, "log-envelope constant, 0 to calibrate")->capture_default_str();
  app.add_option("--c-tail", cfg.c_tail, "fraction of the y-range used for tail medians")->capture_default_str();
  app.add_option("--y-min", cfg.y_min, "start of the density window in y")->capture_default_str();
  app.add_option("--race-lo", cfg.race_lo, "start of the race window in x")->capture_default_str();
  app.add_option("--chi", cfg.chi, "character label q.k for euler");
  app.add_option("--T", cfg.T, "zero-sum heights")->delimiter(',')->capture_default_str();
  app.add_option("--k", cfg.k, "moment orders")->delimiter(',')->capture_default_str();
  app.add_option("--Y", cfg.Y, "moment horizons in y")->delimiter(',');
  app.add_option("--rms-lo", cfg.rms_lo, "RMS window start in y")->capture_default_str();
  app.add_option("--rms-hi", cfg.rms_hi, "RMS window end in y")->capture_default_str();
  app.add_option("--segment", cfg.segment_entries, "odd entries per sieve segment")->capture_default_str();
  app.add_option("--threads", cfg.threads, "worker threads")->envname("PRL_THREADS")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--resume", cfg.resume, "checkpoint sidecar or directory to continue from");
  app.add_option("--save-every", cfg.save_every, "seconds between checkpoint saves")->capture_default_str();
  app.add_flag("--dry-run", cfg.dry_run, "print the plan and exit");

  for (const char* name : {"bias", "euler", "delta", "moments", "mean", "zeros-validate"}) {
    app.add_subcommand(name)->callback([&cfg, name] { cfg.command = name; });
  }
  app.get_subcommand("bias")->description("race D(x), bias constant, C estimates, envelope and race densities");
  app.get_subcommand("euler")->description("central partial Euler product and its limit");
  app.get_subcommand("delta")->description("exact oscillation term against truncated zero sums");
  app.get_subcommand("moments")->description("even moments of the oscillation term");
  app.get_subcommand("mean")->description("mean-integral route to C");
  app.get_subcommand("zeros-validate")->description("check a zero file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*a_opt) cfg.a = a;
    if (*b_opt) cfg.b = b;
    cfg.x_max = parse_bound(xmax);
    cfg.out = out;
    for (const auto& kv : m_overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw prl::UsageError("--m expects label=m, got '" + kv + "'");
      int v = 0;
      const auto s = kv.substr(eq + 1);
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw prl::UsageError("--m: bad order '" + s + "'");
      cfg.m[kv.substr(0, eq)] = v;
    }
    if (cfg.dry_run) {
      std::cout << prl::describe_plan(cfg);
      return 0;
    }
    const auto res = prl::run(cfg, std::cerr);
    for (const auto& p : res.written) std::cout << p.string() << '\n';
    return 0;
  } catch (const prl::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
