#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prl {

// Fixed-point accumulator with 64 fractional bits in a signed 128-bit word.
// Each term is rounded once on entry; after that addition is exact, so sums
// are associative and independent of segmentation, merge order and thread
// count. Range is |total| < 2^63.
class ExactSum {
 public:
  static constexpr int kFracBits = 64;

  ExactSum() = default;

  void add(double x) {
    if (!std::isfinite(x) || std::abs(x) >= 0x1p62) throw std::overflow_error("ExactSum term out of range");
    raw_ += static_cast<__int128>(std::nearbyint(std::ldexp(x, kFracBits)));
  }

  ExactSum& operator+=(const ExactSum& o) {
    raw_ += o.raw_;
    return *this;
  }
  friend ExactSum operator+(ExactSum a, const ExactSum& b) { return a += b; }
  friend ExactSum operator-(ExactSum a, const ExactSum& b) {
    a.raw_ -= b.raw_;
    return a;
  }
  bool operator==(const ExactSum&) const = default;

  double value() const { return std::ldexp(static_cast<double>(raw_), -kFracBits); }
  int sign() const { return raw_ > 0 ? 1 : (raw_ < 0 ? -1 : 0); }

  __int128 raw() const { return raw_; }
  static ExactSum from_raw(__int128 r) {
    ExactSum s;
    s.raw_ = r;
    return s;
  }

  // Decimal form of the raw word, for persistence.
  std::string to_string() const;
  static ExactSum parse(std::string_view text);

 private:
  __int128 raw_ = 0;
};

struct ExactComplexSum {
  ExactSum re, im;

  void add(std::complex<double> z) {
    re.add(z.real());
    im.add(z.imag());
  }
  ExactComplexSum& operator+=(const ExactComplexSum& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  bool operator==(const ExactComplexSum&) const = default;
  std::complex<double> value() const { return {re.value(), im.value()}; }
};

// Neumaier-compensated double accumulator for sequential sums that are not
// term-quantized.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }
  double sum() const { return sum_; }
  double compensation() const { return comp_; }
  static CompensatedSum from_parts(double s, double c) {
    CompensatedSum k;
    k.sum_ = s;
    k.comp_ = c;
    return k;
  }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace prl
