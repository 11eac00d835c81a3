#include "prl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace prl {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) out.push_back(f);
  return out;
}

double parse_real(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ZeroParseError(line, "not a real number: '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ZeroParseError(line, "not an integer: '" + s + "'");
  return v;
}

std::uint32_t resolve_label(const CharacterGroup& group, const std::string& label, std::size_t line) {
  const Character* chi = nullptr;
  try {
    chi = &group.by_label(label);
  } catch (const std::exception& e) {
    throw ZeroParseError(line, e.what());
  }
  if (chi->is_principal()) throw ZeroParseError(line, "principal character " + label + " has no zero data");
  return chi->index();
}

}  // namespace

ZeroParseError::ZeroParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

bool ZeroDataset::covers(std::uint32_t char_index) const {
  if (declared_heights.count(char_index) || central_orders.count(char_index)) return true;
  return std::any_of(entries.begin(), entries.end(), [&](const ZeroEntry& e) { return e.char_index == char_index; });
}

double ZeroDataset::height(std::uint32_t char_index) const {
  if (auto it = declared_heights.find(char_index); it != declared_heights.end()) return std::stod(it->second);
  double h = 0.0;
  for (const auto& e : entries) {
    if (e.char_index == char_index) h = std::max(h, e.gamma);
  }
  return h;
}

ZeroDataset parse_zeros(std::istream& in, std::uint32_t q, const std::string& source) {
  const CharacterGroup group(q);
  ZeroDataset zd;
  zd.q = q;
  zd.source = source;
  std::map<std::uint32_t, double> last_gamma;
  std::map<std::uint32_t, std::size_t> height_line;
  bool seen_record = false;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const auto f = split_fields(raw);
    if (f.empty()) continue;

    if (f[0] == "modulus") {
      if (f.size() != 2) throw ZeroParseError(line, "expected 'modulus <q>'");
      if (seen_record) throw ZeroParseError(line, "modulus header must come first");
      const long m = parse_int(f[1], line);
      if (m != static_cast<long>(q)) {
        throw ZeroParseError(line, "file is for modulus " + f[1] + ", expected " + std::to_string(q));
      }
      seen_record = true;
      continue;
    }
    seen_record = true;

    if (f[0] == "central") {
      if (f.size() != 3) throw ZeroParseError(line, "expected 'central <label> <m>'");
      const auto k = resolve_label(group, f[1], line);
      const long m = parse_int(f[2], line);
      if (m < 0) throw ZeroParseError(line, "order of vanishing must be nonnegative");
      if (!zd.central_orders.emplace(k, static_cast<int>(m)).second) {
        throw ZeroParseError(line, "duplicate central record for " + f[1]);
      }
      continue;
    }

    if (f[0] == "height") {
      if (f.size() != 3) throw ZeroParseError(line, "expected 'height <label> <T>'");
      const auto k = resolve_label(group, f[1], line);
      if (!(parse_real(f[2], line) > 0.0)) throw ZeroParseError(line, "height must be positive");
      if (!zd.declared_heights.emplace(k, f[2]).second) throw ZeroParseError(line, "duplicate height for " + f[1]);
      height_line[k] = line;
      continue;
    }

    if (f.size() != 3) throw ZeroParseError(line, "expected '<label> <gamma> <multiplicity>'");
    ZeroEntry e;
    e.label = f[0];
    e.char_index = resolve_label(group, f[0], line);
    e.gamma_text = f[1];
    e.gamma = parse_real(f[1], line);
    if (!(e.gamma > 0.0)) throw ZeroParseError(line, "ordinate must be positive");
    const long m = parse_int(f[2], line);
    if (m < 1) throw ZeroParseError(line, "multiplicity must be a positive integer");
    e.multiplicity = static_cast<int>(m);
    auto [it, fresh] = last_gamma.emplace(e.char_index, e.gamma);
    if (!fresh) {
      if (e.gamma < it->second) throw ZeroParseError(line, "ordinates for " + e.label + " are not sorted");
      it->second = e.gamma;
    }
    zd.entries.push_back(std::move(e));
  }

  for (const auto& [k, text] : zd.declared_heights) {
    auto it = last_gamma.find(k);
    if (it != last_gamma.end() && it->second > std::stod(text)) {
      throw ZeroParseError(height_line[k], "stored ordinates exceed the declared height");
    }
  }
  return zd;
}

ZeroDataset load_zeros(const std::filesystem::path& path, std::uint32_t q) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open zero file " + path.string());
  return parse_zeros(in, q, path.string());
}

std::string serialize(const ZeroDataset& zd) {
  const CharacterGroup group(zd.q);
  std::ostringstream out;
  out << "modulus " << zd.q << '\n';
  for (const auto& [k, m] : zd.central_orders) out << "central " << group[k].label() << ' ' << m << '\n';
  for (const auto& [k, t] : zd.declared_heights) out << "height " << group[k].label() << ' ' << t << '\n';
  for (const auto& e : zd.entries) out << e.label << ' ' << e.gamma_text << ' ' << e.multiplicity << '\n';
  return out.str();
}

ExpandedZeros symmetric_expand(const ZeroDataset& zd, const CharacterGroup& group, const ClassFunction& t,
                               bool strict) {
  if (zd.q != group.modulus() || t.modulus() != group.modulus()) {
    throw ModulusMismatch("zero data, character group and weight must share a modulus");
  }
  constexpr double kZero = 1e-12;
  ExpandedZeros out;
  out.height = INFINITY;
  bool any_needed = false;
  for (const auto& chi : group.characters()) {
    if (chi.is_principal() || std::abs(inner_product(t, chi)) <= kZero) continue;
    any_needed = true;
    // zeros of L(s, chi) below the real axis are stored under conj(chi)
    for (std::uint32_t k : {chi.index(), chi.conjugate_index()}) {
      if (!zd.covers(k)) {
        const std::string msg = "zero data has no entries for " + group[k].label() + ", which the weight needs";
        if (strict) throw MissingZeroCoverage(msg);
        if (std::find(out.warnings.begin(), out.warnings.end(), msg) == out.warnings.end()) out.warnings.push_back(msg);
      }
      out.height = std::min(out.height, zd.height(k));
    }
  }
  if (!any_needed) out.height = 0.0;

  for (const auto& e : zd.entries) {
    const auto& chi = group[e.char_index];
    const cplx a = inner_product(t, chi);
    const cplx a_bar = inner_product(t, group[chi.conjugate_index()]);
    for (int m = 0; m < e.multiplicity; ++m) {
      out.terms.push_back({a, e.gamma, chi.index()});
      out.terms.push_back({a_bar, -e.gamma, chi.conjugate_index()});
    }
  }
  std::stable_sort(out.terms.begin(), out.terms.end(), [](const ExpandedZero& x, const ExpandedZero& y) {
    const double ax = std::abs(x.gamma), ay = std::abs(y.gamma);
    if (ax != ay) return ax < ay;
    if (x.char_index != y.char_index) return x.char_index < y.char_index;
    return x.gamma > y.gamma;
  });
  return out;
}

}  // namespace prl
