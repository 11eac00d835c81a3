#include "prl/exact_sum.hpp"

#include <algorithm>

namespace prl {

std::string ExactSum::to_string() const {
  if (raw_ == 0) return "0";
  unsigned __int128 mag = raw_ < 0 ? -static_cast<unsigned __int128>(raw_) : static_cast<unsigned __int128>(raw_);
  std::string out;
  while (mag) {
    out.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  if (raw_ < 0) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

ExactSum ExactSum::parse(std::string_view text) {
  bool neg = false;
  std::size_t i = 0;
  if (!text.empty() && (text[0] == '-' || text[0] == '+')) {
    neg = text[0] == '-';
    i = 1;
  }
  if (i == text.size()) throw std::invalid_argument("empty exact sum");
  constexpr unsigned __int128 limit = static_cast<unsigned __int128>(1) << 127;
  unsigned __int128 mag = 0;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') throw std::invalid_argument("bad exact sum: " + std::string(text));
    const unsigned d = static_cast<unsigned>(c - '0');
    if (mag > (limit - d) / 10) throw std::out_of_range("exact sum overflow: " + std::string(text));
    mag = mag * 10 + d;
  }
  if (!neg && mag == limit) throw std::out_of_range("exact sum overflow: " + std::string(text));
  ExactSum s;
  s.raw_ = neg ? -static_cast<__int128>(mag - 1) - 1 : static_cast<__int128>(mag);
  if (neg && mag == 0) s.raw_ = 0;
  return s;
}

}  // namespace prl
