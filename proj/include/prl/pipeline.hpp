#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prl/characters.hpp"

namespace prl {

// Bad flags or an inconsistent configuration; maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;  // bias, euler, delta, moments, mean, zeros-validate
  std::uint32_t q = 0;
  std::optional<std::uint32_t> a, b;
  std::string weights;  // "residue:weight,..." instead of a race pair
  std::uint64_t x_max = 1000000;
  double grid_h = 0.01;
  std::string zeros;
  std::map<std::string, int> m;  // character label -> order of vanishing at 1/2
  double eps = 0.5;
  double K = 0.0;  // 0 calibrates the log envelope
  double c_tail = 0.25;
  double y_min = 10.0;
  double race_lo = 2.0;
  std::string chi;
  std::vector<double> T{50.0, 100.0};
  std::vector<int> k{1, 2, 3};
  std::vector<double> Y;  // moment horizons; empty means every integer up to y_max, then y_max
  double rms_lo = 5.0, rms_hi = 15.0;
  std::uint64_t segment_entries = std::uint64_t{1} << 20;

  // run controls, left out of output metadata
  std::filesystem::path out = "prl_out";
  unsigned threads = 1;
  std::string resume;
  bool dry_run = false;
  double save_every = 300.0;  // seconds between checkpoint saves during a tally
};

// Throws UsageError on anything the run cannot start with.
void validate(const RunConfig& cfg);

// The weight t built from the pair (a, b) or the explicit weights.
ClassFunction weight_of(const RunConfig& cfg);

// key=value lines naming the result-determining settings, in a fixed order.
std::vector<std::pair<std::string, std::string>> metadata(const RunConfig& cfg);

// Output files of a command, relative to cfg.out.
std::vector<std::string> planned_outputs(const RunConfig& cfg);

// Human-readable plan for --dry-run.
std::string describe_plan(const RunConfig& cfg);

struct RunResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

// Runs one command. Reports written before a failure are removed; the
// checkpoint pair is kept since it is complete and resumable on its own.
RunResult run(const RunConfig& cfg, std::ostream& log);

}  // namespace prl
