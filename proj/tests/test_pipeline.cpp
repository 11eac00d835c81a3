#include <doctest.h>

#include <fstream>
#include <sstream>

#include <unistd.h>

#include "prl/analysis.hpp"
#include "prl/ingest.hpp"
#include "prl/persist.hpp"
#include "prl/pipeline.hpp"

using namespace prl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("prl_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig bias_config(const fs::path& out, std::uint64_t x_max) {
  RunConfig c;
  c.command = "bias";
  c.q = 4;
  c.a = 3;
  c.b = 1;
  c.x_max = x_max;
  c.out = out;
  c.race_lo = 100;
  return c;
}

RunResult run_quiet(const RunConfig& c) {
  std::ostringstream log;
  return run(c, log);
}

void expect_same_outputs(const RunConfig& c, const fs::path& a, const fs::path& b) {
  for (const auto& f : planned_outputs(c)) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

}  // namespace

TEST_CASE("configuration validation") {
  TempDir tmp("validate");
  auto c = bias_config(tmp.path, 10000);
  CHECK_NOTHROW(validate(c));

  auto bad = c;
  bad.b = 3;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.b = 2;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.q = 2;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.x_max = 99;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.grid_h = 0.2;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.grid_h = 0.0;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.weights = "1:-1,3:1";
  CHECK_THROWS_AS(validate(bad), UsageError);  // both forms given
  bad = c;
  bad.m["4.0"] = 1;
  CHECK_THROWS_AS(validate(bad), UsageError);
  bad = c;
  bad.command = "plot";
  CHECK_THROWS_AS(validate(bad), UsageError);

  auto mom = c;
  mom.command = "moments";
  mom.k = {0};
  CHECK_THROWS_AS(validate(mom), UsageError);
  mom.k = {1, 7};
  CHECK_THROWS_AS(validate(mom), UsageError);

  RunConfig eu;
  eu.command = "euler";
  eu.q = 4;
  eu.chi = "4.0";
  CHECK_THROWS_AS(validate(eu), UsageError);
  eu.chi = "5.1";
  CHECK_THROWS_AS(validate(eu), UsageError);
  eu.chi = "4.1";
  CHECK_NOTHROW(validate(eu));

  auto de = c;
  de.command = "delta";
  CHECK_THROWS_AS(validate(de), UsageError);
  de.zeros = (tmp.path / "missing.txt").string();
  CHECK_THROWS_AS(validate(de), UsageError);
}

TEST_CASE("explicit weights") {
  RunConfig c;
  c.q = 5;
  c.weights = "1:1,4:1,2:-1,3:-1";
  const auto t = weight_of(c);
  CHECK(t(4) == cplx(1.0));
  CHECK(t(3) == cplx(-1.0));
  CHECK(t(0) == cplx(0.0));
  c.weights = "5:1";
  CHECK_THROWS_AS(weight_of(c), UsageError);
  c.weights = "1=1";
  CHECK_THROWS_AS(weight_of(c), UsageError);
}

TEST_CASE("bias writes its reports with metadata and without run controls") {
  TempDir tmp("bias");
  auto c = bias_config(tmp.path, 100000);
  c.threads = 3;
  const auto res = run_quiet(c);
  CHECK(res.written.size() == 6);
  for (const auto& f : planned_outputs(c)) CHECK(fs::exists(tmp.path / f));
  const auto fit = slurp(tmp.path / "bias_fit.json");
  CHECK(fit.find("\"xmax\": \"100000\"") != std::string::npos);
  CHECK(fit.find("threads") == std::string::npos);
  CHECK(fit.find(tmp.path.string()) == std::string::npos);
  const auto d = slurp(tmp.path / "D_series.csv");
  CHECK(d.rfind("# command=bias\n", 0) == 0);
  CHECK(d.find("\ny,x,D_re,D_im,") != std::string::npos);
}

TEST_CASE("outputs do not depend on thread count or segment size") {
  TempDir a("thr1"), b("thr4");
  auto c1 = bias_config(a.path, 300000);
  auto c4 = bias_config(b.path, 300000);
  c4.threads = 4;
  c4.segment_entries = 1000;
  run_quiet(c1);
  run_quiet(c4);
  expect_same_outputs(c1, a.path, b.path);
}

TEST_CASE("resuming from a shorter run reproduces a fresh run") {
  TempDir fresh("fresh"), staged("staged");
  const auto full = bias_config(fresh.path, 1000000);
  run_quiet(full);

  run_quiet(bias_config(staged.path, 200000));
  auto resumed = bias_config(staged.path, 1000000);
  resumed.resume = staged.path.string();
  run_quiet(resumed);
  expect_same_outputs(full, fresh.path, staged.path);

  // a race with another window cannot continue that checkpoint
  auto other = resumed;
  other.race_lo = 50;
  CHECK_THROWS(run_quiet(other));
  auto shorter = bias_config(staged.path, 500000);
  shorter.resume = staged.path.string();
  CHECK_THROWS(run_quiet(shorter));
}

TEST_CASE("checkpoints saved mid-run resume to identical results") {
  const CharacterGroup g(5);
  const std::uint64_t x_max = 400000;
  const auto grid = CheckpointGrid::uniform(0.01, x_max);
  TallyEngine ref(g, grid, {4096, 1});
  ref.track_race(2, 1, 10);
  ref.run(x_max + 1);

  TempDir tmp("midrun");
  TallyEngine first(g, grid, {4096, 1});
  first.track_race(2, 1, 10);
  first.run(123457);
  save_snapshot(tmp.path, snapshot_of(first, x_max), g);

  auto snap = load_snapshot(tmp.path / kCheckpointJson, g);
  CHECK(snap.totals == first.totals());
  REQUIRE(snap.race);
  TallyEngine second(g, grid, {8192, 2});
  second.track_race(2, 1, 10);
  second.restore(snap.totals, snap.checkpoints, snap.race->state, snap.last_prime);
  second.run(x_max + 1);

  CHECK(second.totals() == ref.totals());
  CHECK(second.race()->state().d == ref.race()->state().d);
  CHECK(second.race()->measure(x_max) == ref.race()->measure(x_max));
  std::ostringstream a, b;
  write_checkpoint_csv(a, g, ref.checkpoints());
  write_checkpoint_csv(b, g, second.checkpoints());
  CHECK(a.str() == b.str());
}

TEST_CASE("checkpoint table round trip") {
  const CharacterGroup g(8);
  const auto grid = CheckpointGrid::uniform(0.05, 20000);
  TallyEngine e(g, grid);
  e.run(20001);
  std::stringstream s;
  write_checkpoint_csv(s, g, e.checkpoints());
  const auto back = read_checkpoint_csv(s, g, grid);
  REQUIRE(back.size() == e.checkpoints().size());
  for (std::size_t j = 0; j < back.size(); ++j) {
    CHECK(back[j].cutoff == e.checkpoints()[j].cutoff);
    CHECK(back[j].chi_inv_sqrt == e.checkpoints()[j].chi_inv_sqrt);
    CHECK(back[j].euler_log == e.checkpoints()[j].euler_log);
    CHECK(back[j].classes[2].psi == e.checkpoints()[j].classes[2].psi);
  }
  std::stringstream wrong;
  write_checkpoint_csv(wrong, g, e.checkpoints());
  CHECK_THROWS_AS(read_checkpoint_csv(wrong, CharacterGroup(5), grid), CheckpointFormatError);
  std::stringstream off("x,y\n");
  CHECK_THROWS_AS(read_checkpoint_csv(off, g, grid), CheckpointFormatError);
}

TEST_CASE("dry run touches nothing") {
  TempDir tmp("dry");
  auto c = bias_config(tmp.path, 1000000);
  c.dry_run = true;
  std::ostringstream log;
  run(c, log);
  CHECK_FALSE(fs::exists(tmp.path));
  CHECK(log.str().find("D_series.csv") != std::string::npos);
}

TEST_CASE("failed runs remove their partial reports") {
  TempDir tmp("fail");
  fs::create_directories(tmp.path);
  const auto zeros = tmp.path / "z.txt";
  std::ofstream(zeros) << "4.1 6.020948905 1\n";
  auto c = bias_config(tmp.path / "out", 100000);
  c.command = "delta";
  c.zeros = zeros.string();
  c.rms_lo = 20;  // beyond log(1e5), so the RMS table fails after the series are written
  c.rms_hi = 30;
  CHECK_THROWS_AS(run_quiet(c), InsufficientRange);
  CHECK_FALSE(fs::exists(tmp.path / "out" / "delta_exact.csv"));
  CHECK_FALSE(fs::exists(tmp.path / "out" / "delta_zerosum.csv"));
  CHECK(fs::exists(tmp.path / "out" / kCheckpointJson));
}

TEST_CASE("delta with an empty zero file") {
  TempDir tmp("empty");
  fs::create_directories(tmp.path);
  const auto zeros = tmp.path / "z.txt";
  std::ofstream(zeros) << "modulus 4\n";
  auto c = bias_config(tmp.path, 100000);
  c.command = "delta";
  c.zeros = zeros.string();
  const auto res = run_quiet(c);
  CHECK_FALSE(res.warnings.empty());
  std::ifstream in(tmp.path / "delta_zerosum.csv");
  std::string line;
  bool header = false;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line[0] == '#') continue;
    if (!header) {
      CHECK(line == "y,T50_re,T50_im,T100_re,T100_im");
      header = true;
      continue;
    }
    ++rows;
    CHECK(line.substr(line.find(',')) == ",0,0,0,0");
  }
  CHECK(rows > 100);
}

TEST_CASE("euler, moments and mean reuse a checkpoint") {
  TempDir tmp("reuse");
  auto c = bias_config(tmp.path, 200000);
  run_quiet(c);
  const auto before = slurp(tmp.path / kCheckpointCsv);

  RunConfig eu = c;
  eu.command = "euler";
  eu.a.reset();
  eu.b.reset();
  eu.chi = "4.1";
  eu.resume = tmp.path.string();
  run_quiet(eu);
  CHECK(fs::exists(tmp.path / "euler_report.json"));

  auto mo = c;
  mo.command = "moments";
  mo.resume = tmp.path.string();
  run_quiet(mo);
  std::ifstream in(tmp.path / "moments.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += line[0] != '#';
  CHECK(rows == 1 + 3 * 12);  // header, then k = 1..3 at Y = 2..12 and log(2e5)

  auto me = c;
  me.command = "mean";
  me.resume = tmp.path.string();
  run_quiet(me);
  CHECK(slurp(tmp.path / kCheckpointCsv) == before);
}
