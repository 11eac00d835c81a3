#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prl {

using cplx = std::complex<double>;

class InvalidModulus : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ModulusMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::uint64_t gcd_u64(std::uint64_t a, std::uint64_t b);
std::uint32_t euler_phi(std::uint32_t q);

// Dirichlet character mod q. Values are stored as exponents k in Z/N
// (chi(a) = exp(2 pi i k / N), N the exponent of the unit group), so
// products stay exact; the complex table is derived from them.
class Character {
 public:
  std::uint32_t modulus() const { return q_; }
  std::uint32_t index() const { return index_; }
  std::uint32_t conjugate_index() const { return conj_index_; }
  bool is_principal() const { return index_ == 0; }
  bool is_real() const { return index_ == conj_index_; }
  std::uint32_t order() const { return order_; }

  // Root-of-unity denominator shared by all characters of the group.
  std::uint32_t root_order() const { return root_order_; }
  // Exponent of chi(a) over root_order(); -1 on non-units.
  std::int64_t exponent(std::uint64_t a) const { return exps_[a % q_]; }

  const cplx& operator()(std::uint64_t a) const { return values_[a % q_]; }
  const std::vector<cplx>& values() const { return values_; }

  // "q.k"
  std::string label() const;

 private:
  friend class CharacterGroup;
  std::uint32_t q_ = 0;
  std::uint32_t index_ = 0;
  std::uint32_t conj_index_ = 0;
  std::uint32_t order_ = 1;
  std::uint32_t root_order_ = 1;
  std::vector<std::int64_t> exps_;
  std::vector<cplx> values_;
};

// Complex weight on (Z/qZ)^x, zero on non-units.
class ClassFunction {
 public:
  ClassFunction() = default;
  explicit ClassFunction(std::uint32_t q);
  ClassFunction(std::uint32_t q, std::vector<cplx> weights);

  std::uint32_t modulus() const { return q_; }
  const cplx& operator()(std::uint64_t a) const { return w_[a % q_]; }
  void set(std::uint64_t a, cplx value);
  const std::vector<cplx>& weights() const { return w_; }

  bool is_real(double tol = 0.0) const;

 private:
  std::uint32_t q_ = 0;
  std::vector<cplx> w_;
};

struct SquareRootCount {
  std::uint32_t modulus = 0;
  std::vector<std::uint32_t> counts;  // indexed by residue, 0 on non-units
};

struct BiasConstant {
  cplx value;
  std::map<std::uint32_t, int> vanishing_orders;  // character index -> m_chi
};

// The full character group mod q with a canonical labeling: character k
// is decoded as a mixed-radix vector (k_1, ..., k_r) over the cyclic
// factor orders n_i, first factor least significant, and
// chi_k(g_i) = exp(2 pi i k_i / n_i) for the fixed generators g_i.
class CharacterGroup {
 public:
  explicit CharacterGroup(std::uint32_t q);

  std::uint32_t modulus() const { return q_; }
  std::uint32_t phi() const { return phi_; }
  std::size_t size() const { return chars_.size(); }

  const Character& operator[](std::size_t k) const { return chars_.at(k); }
  const std::vector<Character>& characters() const { return chars_; }
  const Character& principal() const { return chars_.front(); }
  const Character& by_label(const std::string& label) const;

  bool is_unit(std::uint64_t a) const { return unit_index_[a % q_] >= 0; }
  // Dense index of a unit residue in [0, phi), or -1.
  int unit_index(std::uint64_t a) const { return unit_index_[a % q_]; }
  const std::vector<std::uint32_t>& units() const { return units_; }

  const std::vector<std::uint32_t>& generators() const { return gens_; }
  const std::vector<std::uint32_t>& generator_orders() const { return orders_; }

 private:
  std::uint32_t q_;
  std::uint32_t phi_;
  std::vector<std::uint32_t> units_;
  std::vector<int> unit_index_;
  std::vector<std::uint32_t> gens_;
  std::vector<std::uint32_t> orders_;
  std::vector<Character> chars_;
};

std::vector<Character> enumerate_characters(std::uint32_t q);

cplx inner_product(const ClassFunction& f, const ClassFunction& g);
cplx inner_product(const ClassFunction& f, const Character& chi);
cplx inner_product(const Character& chi, const Character& psi);

ClassFunction to_class_function(const Character& chi);

SquareRootCount square_root_count(std::uint32_t q);

// 1_{a} - 1_{b}
ClassFunction race_weight(std::uint64_t a, std::uint64_t b, std::uint32_t q);

// Returns {a, b} when t is exactly 1_{a} - 1_{b}.
std::optional<std::pair<std::uint32_t, std::uint32_t>> as_race(const ClassFunction& t);

class MissingVanishingOrder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// M(t) = (<t,r> + 2 sum_{chi != chi0} <t,chi> m_chi) / 2. Missing entries
// count as m_chi = 0 unless strict is set and <t,chi> != 0.
BiasConstant bias_constant(const CharacterGroup& group, const ClassFunction& t,
                           const std::map<std::uint32_t, int>& vanishing_orders = {},
                           bool strict = false);

}  // namespace prl
