#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "prl/characters.hpp"

namespace prl {

class ZeroParseError : public std::runtime_error {
 public:
  ZeroParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ZeroEntry {
  std::string label;
  std::uint32_t char_index = 0;
  double gamma = 0.0;
  std::string gamma_text;  // as written, so serialization round-trips
  int multiplicity = 1;
};

// Positive ordinates of nontrivial zeros of L(s, chi) for nonprincipal chi
// mod q. Zero file format, one record per line, '#' starts a comment:
//   modulus <q>               optional, before any other record
//   <label> <gamma> <mult>    a zero 1/2 + i*gamma
//   central <label> <m>       order of vanishing at s = 1/2
//   height <label> <T>        zeros of <label> are complete up to T
struct ZeroDataset {
  std::uint32_t q = 0;
  std::vector<ZeroEntry> entries;  // file order; per character sorted by gamma
  std::map<std::uint32_t, int> central_orders;
  std::map<std::uint32_t, std::string> declared_heights;  // character index -> T as written
  std::string source;

  bool covers(std::uint32_t char_index) const;
  // Height to which zeros of a character are known: the declared height if
  // any, else the largest stored ordinate, 0 if absent.
  double height(std::uint32_t char_index) const;
};

ZeroDataset parse_zeros(std::istream& in, std::uint32_t q, const std::string& source = "<stream>");
ZeroDataset load_zeros(const std::filesystem::path& path, std::uint32_t q);

// Canonical text form. Comments are not preserved.
std::string serialize(const ZeroDataset& zd);

struct ExpandedZero {
  cplx coef;                    // <t, chi> for the L-function owning the zero
  double gamma = 0.0;           // signed ordinate
  std::uint32_t char_index = 0; // character whose L-function vanishes at 1/2 + i*gamma

  cplx rho() const { return {0.5, gamma}; }
};

struct ExpandedZeros {
  std::vector<ExpandedZero> terms;  // sorted by |gamma|, then character index, then sign
  double height = 0.0;              // every needed character is complete up to here
  std::vector<std::string> warnings;
};

class MissingZeroCoverage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each stored (chi, gamma, m) yields m copies of (<t,chi>, +gamma) and m
// copies of (<t,conj chi>, -gamma). Characters with <t,chi> != 0 must be
// present together with their conjugates; otherwise a warning is recorded,
// or MissingZeroCoverage is thrown when strict.
ExpandedZeros symmetric_expand(const ZeroDataset& zd, const CharacterGroup& group, const ClassFunction& t,
                               bool strict = false);

}  // namespace prl
