#include "prl/persist.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace prl {

namespace {

using nlohmann::ordered_json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw CheckpointFormatError("checkpoint row " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

ordered_json raw_pair(const ExactComplexSum& z) { return ordered_json::array({z.re.to_string(), z.im.to_string()}); }

ExactComplexSum pair_raw(const ordered_json& j) {
  return {ExactSum::parse(j.at(0).get<std::string>()), ExactSum::parse(j.at(1).get<std::string>())};
}

ordered_json comp_json(const CompensatedSum& s) { return ordered_json::array({s.sum(), s.compensation()}); }

CompensatedSum json_comp(const ordered_json& j) {
  return CompensatedSum::from_parts(j.at(0).get<double>(), j.at(1).get<double>());
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

std::vector<std::string> checkpoint_columns(const CharacterGroup& group) {
  std::vector<std::string> cols{"x", "y"};
  for (auto a : group.units()) {
    const auto r = std::to_string(a);
    for (const char* name : {"count_", "sum_invsqrt_", "sum_log_", "psi_contrib_", "sum_sqrt_"}) cols.push_back(name + r);
  }
  for (const auto& chi : group.characters()) {
    const auto l = chi.label();
    for (const char* name : {"_invsqrt", "_sq_over_p", "_euler_log"}) {
      cols.push_back(l + name + "_re");
      cols.push_back(l + name + "_im");
    }
  }
  return cols;
}

void write_checkpoint_csv(std::ostream& out, const CharacterGroup& group, std::span<const TallyCheckpoint> rows) {
  const auto cols = checkpoint_columns(group);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& c : rows) {
    if (c.q != group.modulus()) throw ModulusMismatch("checkpoint modulus differs from the character group");
    out << format_double(c.x) << ',' << format_double(c.y);
    for (const auto& s : c.classes) {
      out << ',' << s.count << ',' << format_double(s.inv_sqrt) << ',' << format_double(s.log) << ','
          << format_double(s.psi) << ',' << format_double(s.sqrt);
    }
    for (std::size_t k = 0; k < group.size(); ++k) {
      for (const cplx z : {c.chi_inv_sqrt[k], c.chi_sq_over_p[k], c.euler_log[k]}) {
        out << ',' << format_double(z.real()) << ',' << format_double(z.imag());
      }
    }
    out << '\n';
  }
}

std::vector<TallyCheckpoint> read_checkpoint_csv(std::istream& in, const CharacterGroup& group,
                                                 const CheckpointGrid& grid) {
  const auto cols = checkpoint_columns(group);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != cols) {
    throw CheckpointFormatError("checkpoint header does not match modulus " + std::to_string(group.modulus()));
  }
  std::vector<TallyCheckpoint> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != cols.size()) throw CheckpointFormatError("checkpoint row " + std::to_string(lineno) + " is short");
    const std::size_t j = rows.size();
    TallyCheckpoint c;
    c.q = group.modulus();
    c.x = parse_number<double>(f[0], lineno);
    c.y = parse_number<double>(f[1], lineno);
    if (j >= grid.size() || c.y != grid.y()[j] || c.x != grid.x()[j]) {
      throw CheckpointFormatError("checkpoint row " + std::to_string(lineno) + " is off the grid");
    }
    c.cutoff = grid.cutoffs()[j];
    std::size_t i = 2;
    for (auto a : group.units()) {
      ClassTotals t;
      t.residue = a;
      t.count = parse_number<std::uint64_t>(f[i++], lineno);
      t.inv_sqrt = parse_number<double>(f[i++], lineno);
      t.log = parse_number<double>(f[i++], lineno);
      t.psi = parse_number<double>(f[i++], lineno);
      t.sqrt = parse_number<double>(f[i++], lineno);
      c.classes.push_back(t);
    }
    auto next = [&] {
      const double re = parse_number<double>(f[i++], lineno);
      return cplx(re, parse_number<double>(f[i++], lineno));
    };
    for (std::size_t k = 0; k < group.size(); ++k) {
      c.chi_inv_sqrt.push_back(next());
      c.chi_sq_over_p.push_back(next());
      c.euler_log.push_back(next());
    }
    rows.push_back(std::move(c));
  }
  return rows;
}

TallySnapshot snapshot_of(const TallyEngine& engine, std::uint64_t x_max) {
  TallySnapshot s;
  s.q = engine.group().modulus();
  s.grid_h = engine.grid().h();
  s.x_max = x_max;
  s.totals = engine.totals();
  s.last_prime = engine.last_prime();
  s.checkpoints = engine.checkpoints();
  if (const auto& r = engine.race()) s.race = RaceSnapshot{r->a(), r->b(), r->window_lo(), r->state()};
  return s;
}

void save_snapshot(const std::filesystem::path& dir, const TallySnapshot& snap, const CharacterGroup& group) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_checkpoint_csv(csv, group, snap.checkpoints);

  ordered_json j;
  j["format"] = "prl-tally-1";
  j["q"] = snap.q;
  j["grid"] = {{"h", snap.grid_h}, {"y0", std::log(2.0)}, {"x_max", snap.x_max}};
  j["processed_hi"] = snap.totals.hi;
  j["last_prime"] = snap.last_prime;
  j["checkpoints"] = {{"file", kCheckpointCsv}, {"rows", snap.checkpoints.size()}};
  ordered_json classes = ordered_json::array();
  for (std::size_t i = 0; i < snap.totals.classes.size(); ++i) {
    const auto& c = snap.totals.classes[i];
    classes.push_back({{"residue", group.units()[i]},
                       {"count", c.count},
                       {"sum_invsqrt", c.inv_sqrt.to_string()},
                       {"sum_log", c.log.to_string()},
                       {"psi_contrib", c.psi.to_string()},
                       {"sum_sqrt", c.sqrt.to_string()}});
  }
  ordered_json chars = ordered_json::array();
  for (std::size_t k = 0; k < snap.totals.chars.size(); ++k) {
    const auto& c = snap.totals.chars[k];
    chars.push_back({{"label", group[k].label()},
                     {"invsqrt", raw_pair(c.inv_sqrt)},
                     {"sq_over_p", raw_pair(c.sq_over_p)},
                     {"euler_log", raw_pair(c.euler_log)}});
  }
  // raw 128-bit accumulators with 64 fractional bits, as decimal integers
  j["totals"] = {{"classes", classes}, {"characters", chars}};
  if (snap.race) {
    const auto& r = *snap.race;
    j["race"] = {{"a", r.a},
                 {"b", r.b},
                 {"window_lo", r.window_lo},
                 {"d", r.state.d.to_string()},
                 {"piece_start", r.state.piece_start},
                 {"last_prime", r.state.last_prime},
                 {"length", comp_json(r.state.length)},
                 {"log_length", comp_json(r.state.log_length)}};
  } else {
    j["race"] = nullptr;
  }
  write_atomically(dir / kCheckpointCsv, csv.str());
  write_atomically(dir / kCheckpointJson, j.dump(2) + "\n");
}

TallySnapshot load_snapshot(const std::filesystem::path& where, const CharacterGroup& group) {
  const auto sidecar = std::filesystem::is_directory(where) ? where / kCheckpointJson : where;
  std::ifstream in(sidecar);
  if (!in) throw std::runtime_error("cannot open checkpoint sidecar " + sidecar.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(sidecar.string() + ": " + e.what());
  }

  TallySnapshot s;
  try {
    if (j.at("format") != "prl-tally-1") throw CheckpointFormatError("unknown checkpoint format");
    s.q = j.at("q").get<std::uint32_t>();
    if (s.q != group.modulus()) {
      throw ModulusMismatch("checkpoint is for modulus " + std::to_string(s.q) + ", run uses " +
                            std::to_string(group.modulus()));
    }
    s.grid_h = j.at("grid").at("h").get<double>();
    s.x_max = j.at("grid").at("x_max").get<std::uint64_t>();
    s.last_prime = j.at("last_prime").get<std::uint64_t>();
    s.totals = TallyPartial::zero(group, 2);
    s.totals.hi = j.at("processed_hi").get<std::uint64_t>();
    const auto& classes = j.at("totals").at("classes");
    const auto& chars = j.at("totals").at("characters");
    if (classes.size() != group.phi() || chars.size() != group.size()) {
      throw CheckpointFormatError("checkpoint totals do not match the character group");
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const auto& c = classes[i];
      if (c.at("residue").get<std::uint32_t>() != group.units()[i]) throw CheckpointFormatError("class order differs");
      auto& t = s.totals.classes[i];
      t.count = c.at("count").get<std::uint64_t>();
      t.inv_sqrt = ExactSum::parse(c.at("sum_invsqrt").get<std::string>());
      t.log = ExactSum::parse(c.at("sum_log").get<std::string>());
      t.psi = ExactSum::parse(c.at("psi_contrib").get<std::string>());
      t.sqrt = ExactSum::parse(c.at("sum_sqrt").get<std::string>());
    }
    for (std::size_t k = 0; k < chars.size(); ++k) {
      const auto& c = chars[k];
      if (c.at("label").get<std::string>() != group[k].label()) throw CheckpointFormatError("character order differs");
      auto& t = s.totals.chars[k];
      t.inv_sqrt = pair_raw(c.at("invsqrt"));
      t.sq_over_p = pair_raw(c.at("sq_over_p"));
      t.euler_log = pair_raw(c.at("euler_log"));
    }
    if (const auto& r = j.at("race"); !r.is_null()) {
      RaceSnapshot rs;
      rs.a = r.at("a").get<std::uint32_t>();
      rs.b = r.at("b").get<std::uint32_t>();
      rs.window_lo = r.at("window_lo").get<double>();
      rs.state.d = ExactSum::parse(r.at("d").get<std::string>());
      rs.state.piece_start = r.at("piece_start").get<double>();
      rs.state.last_prime = r.at("last_prime").get<std::uint64_t>();
      rs.state.length = json_comp(r.at("length"));
      rs.state.log_length = json_comp(r.at("log_length"));
      s.race = rs;
    }

    const auto grid = CheckpointGrid::uniform(s.grid_h, s.x_max);
    const auto csv_path = sidecar.parent_path() / j.at("checkpoints").at("file").get<std::string>();
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot open checkpoint table " + csv_path.string());
    s.checkpoints = read_checkpoint_csv(csv, group, grid);
    if (s.checkpoints.size() != j.at("checkpoints").at("rows").get<std::size_t>()) {
      throw CheckpointFormatError("checkpoint table has " + std::to_string(s.checkpoints.size()) +
                                  " rows, sidecar expects " + j.at("checkpoints").at("rows").dump());
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError(sidecar.string() + ": " + e.what());
  }
  return s;
}

}  // namespace prl
