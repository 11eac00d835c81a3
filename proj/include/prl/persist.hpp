#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prl/characters.hpp"
#include "prl/tally.hpp"

namespace prl {

class CheckpointFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest text that reads back to the same double.
std::string format_double(double v);

// One row per checkpoint: x, y, per class (count, sum_invsqrt, sum_log,
// psi_contrib, sum_sqrt), then per character the real and imaginary parts
// of sum chi(p)/sqrt(p), sum chi(p^2)/p and the Euler log-sum.
std::vector<std::string> checkpoint_columns(const CharacterGroup& group);
void write_checkpoint_csv(std::ostream& out, const CharacterGroup& group, std::span<const TallyCheckpoint> rows);
// Rows must sit on the leading points of `grid`; cutoffs are taken from it.
std::vector<TallyCheckpoint> read_checkpoint_csv(std::istream& in, const CharacterGroup& group,
                                                 const CheckpointGrid& grid);

struct RaceSnapshot {
  std::uint32_t a = 0, b = 0;
  double window_lo = 2.0;
  RaceMeter::State state;
};

// Everything needed to continue a tally: the exact running sums, the
// checkpoints emitted so far and the race meter.
struct TallySnapshot {
  std::uint32_t q = 0;
  double grid_h = 0.0;
  std::uint64_t x_max = 0;
  TallyPartial totals;
  std::uint64_t last_prime = 0;
  std::vector<TallyCheckpoint> checkpoints;
  std::optional<RaceSnapshot> race;
};

TallySnapshot snapshot_of(const TallyEngine& engine, std::uint64_t x_max);

inline constexpr const char* kCheckpointCsv = "checkpoints.csv";
inline constexpr const char* kCheckpointJson = "checkpoints.json";

// Writes checkpoints.csv and checkpoints.json into dir, each through a
// temporary file and a rename.
void save_snapshot(const std::filesystem::path& dir, const TallySnapshot& snap, const CharacterGroup& group);
// `where` is the sidecar JSON or the directory holding it.
TallySnapshot load_snapshot(const std::filesystem::path& where, const CharacterGroup& group);

}  // namespace prl
