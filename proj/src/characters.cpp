#include "prl/characters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace prl {

namespace {

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  base %= m;
  while (e) {
    if (e & 1) r = mulmod(r, base, m);
    base = mulmod(base, base, m);
    e >>= 1;
  }
  return r;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> factorize(std::uint32_t n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> f;
  for (std::uint32_t p = 2; static_cast<std::uint64_t>(p) * p <= n; ++p) {
    if (n % p) continue;
    std::uint32_t e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    f.emplace_back(p, e);
  }
  if (n > 1) f.emplace_back(n, 1);
  return f;
}

std::uint32_t primitive_root_prime_power(std::uint32_t p, std::uint32_t e) {
  auto fac = factorize(p - 1);
  for (std::uint32_t g = 2; g < p; ++g) {
    bool ok = true;
    for (auto [l, _] : fac) {
      if (powmod(g, (p - 1) / l, p) == 1) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (e >= 2) {
      std::uint64_t p2 = static_cast<std::uint64_t>(p) * p;
      if (powmod(g, p - 1, p2) == 1) return g + p;
    }
    return g;
  }
  return 1;  // p == 2
}

// x = r mod m, x = 1 mod n, gcd(m, n) = 1.
std::uint32_t crt_lift(std::uint32_t r, std::uint32_t m, std::uint32_t n) {
  const std::uint64_t mn = static_cast<std::uint64_t>(m) * n;
  for (std::uint64_t x = r % m; x < mn; x += m) {
    if (x % n == 1 % n) return static_cast<std::uint32_t>(x);
  }
  throw std::logic_error("crt_lift: no solution");
}

const Character& check_same_modulus(const Character& chi, std::uint32_t q) {
  if (chi.modulus() != q) throw ModulusMismatch("modulus mismatch in inner product");
  return chi;
}

}  // namespace

std::uint64_t gcd_u64(std::uint64_t a, std::uint64_t b) { return std::gcd(a, b); }

std::uint32_t euler_phi(std::uint32_t q) {
  std::uint32_t r = q;
  for (auto [p, _] : factorize(q)) r = r / p * (p - 1);
  return r;
}

std::string Character::label() const {
  return std::to_string(q_) + "." + std::to_string(index_);
}

ClassFunction::ClassFunction(std::uint32_t q) : q_(q), w_(q, cplx{}) {
  if (q < 1) throw InvalidModulus("class function modulus must be positive");
}

ClassFunction::ClassFunction(std::uint32_t q, std::vector<cplx> weights) : q_(q), w_(std::move(weights)) {
  if (w_.size() != q) throw std::invalid_argument("class function needs one weight per residue");
  for (std::uint32_t a = 0; a < q; ++a) {
    if (gcd_u64(a, q) != 1) w_[a] = 0.0;
  }
}

void ClassFunction::set(std::uint64_t a, cplx value) {
  a %= q_;
  if (gcd_u64(a, q_) != 1) throw std::invalid_argument("class function is zero off the units");
  w_[a] = value;
}

bool ClassFunction::is_real(double tol) const {
  return std::all_of(w_.begin(), w_.end(), [tol](const cplx& z) { return std::abs(z.imag()) <= tol; });
}

CharacterGroup::CharacterGroup(std::uint32_t q) : q_(q) {
  if (q < 3) throw InvalidModulus("modulus must be at least 3, got " + std::to_string(q));

  unit_index_.assign(q, -1);
  for (std::uint32_t a = 1; a < q; ++a) {
    if (gcd_u64(a, q) == 1) {
      unit_index_[a] = static_cast<int>(units_.size());
      units_.push_back(a);
    }
  }
  phi_ = static_cast<std::uint32_t>(units_.size());

  for (auto [p, e] : factorize(q)) {
    std::uint32_t pe = 1;
    for (std::uint32_t i = 0; i < e; ++i) pe *= p;
    const std::uint32_t rest = q / pe;
    if (p == 2) {
      if (e == 2) {
        gens_.push_back(crt_lift(3, 4, rest));
        orders_.push_back(2);
      } else if (e >= 3) {
        gens_.push_back(crt_lift(pe - 1, pe, rest));
        orders_.push_back(2);
        gens_.push_back(crt_lift(5, pe, rest));
        orders_.push_back(pe / 4);
      }
    } else {
      gens_.push_back(crt_lift(primitive_root_prime_power(p, e), pe, rest));
      orders_.push_back(pe / p * (p - 1));
    }
  }

  const std::size_t r = gens_.size();
  std::uint32_t lambda = 1;
  for (auto n : orders_) lambda = std::lcm(lambda, n);

  // Discrete logs of every unit on the generator set.
  std::vector<std::vector<std::uint32_t>> dlog(q);
  {
    std::vector<std::uint32_t> ev(r, 0);
    for (std::uint32_t count = 0; count < phi_; ++count) {
      std::uint64_t a = 1 % q;
      for (std::size_t i = 0; i < r; ++i) a = mulmod(a, powmod(gens_[i], ev[i], q), q);
      if (!dlog[a].empty() || (r > 0 && unit_index_[a] < 0)) throw std::logic_error("generator set is not a basis");
      dlog[a] = ev;
      for (std::size_t i = 0; i < r; ++i) {
        if (++ev[i] < orders_[i]) break;
        ev[i] = 0;
      }
    }
    if (r == 0) dlog[1 % q] = {};
  }

  // Roots of unity of order lambda, exact on quarter turns.
  std::vector<cplx> roots(lambda);
  for (std::uint32_t j = 0; j < lambda; ++j) {
    if ((4ull * j) % lambda == 0) {
      static const cplx quarter[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      roots[j] = quarter[(4ull * j / lambda) % 4];
    } else {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(j) / lambda;
      roots[j] = {std::cos(ang), std::sin(ang)};
    }
  }

  chars_.resize(phi_);
  for (std::uint32_t k = 0; k < phi_; ++k) {
    std::vector<std::uint32_t> kv(r), conj(r);
    std::uint32_t rem = k;
    std::uint32_t conj_index = 0, radix = 1;
    std::uint32_t order = 1;
    for (std::size_t i = 0; i < r; ++i) {
      kv[i] = rem % orders_[i];
      rem /= orders_[i];
      conj[i] = (orders_[i] - kv[i]) % orders_[i];
      conj_index += conj[i] * radix;
      radix *= orders_[i];
      order = std::lcm(order, orders_[i] / std::gcd(orders_[i], kv[i]));
    }
    Character& chi = chars_[k];
    chi.q_ = q;
    chi.index_ = k;
    chi.conj_index_ = conj_index;
    chi.order_ = order;
    chi.root_order_ = lambda;
    chi.exps_.assign(q, -1);
    chi.values_.assign(q, cplx{});
    for (std::uint32_t a : units_) {
      std::uint64_t ex = 0;
      for (std::size_t i = 0; i < r; ++i) ex += static_cast<std::uint64_t>(kv[i]) * dlog[a][i] * (lambda / orders_[i]);
      ex %= lambda;
      chi.exps_[a] = static_cast<std::int64_t>(ex);
      chi.values_[a] = roots[ex];
    }
  }
}

const Character& CharacterGroup::by_label(const std::string& label) const {
  const auto dot = label.find('.');
  if (dot == std::string::npos) throw std::invalid_argument("bad character label '" + label + "'");
  std::size_t used_q = 0, used_k = 0;
  unsigned long lq = 0, lk = 0;
  try {
    lq = std::stoul(label.substr(0, dot), &used_q);
    lk = std::stoul(label.substr(dot + 1), &used_k);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad character label '" + label + "'");
  }
  if (used_q != dot || used_k != label.size() - dot - 1) throw std::invalid_argument("bad character label '" + label + "'");
  if (lq != q_) throw ModulusMismatch("character label '" + label + "' does not match modulus " + std::to_string(q_));
  if (lk >= chars_.size()) throw std::invalid_argument("no character '" + label + "'");
  return chars_[lk];
}

std::vector<Character> enumerate_characters(std::uint32_t q) { return CharacterGroup(q).characters(); }

cplx inner_product(const ClassFunction& f, const ClassFunction& g) {
  if (f.modulus() != g.modulus()) throw ModulusMismatch("modulus mismatch in inner product");
  const std::uint32_t q = f.modulus();
  cplx s{};
  std::uint32_t phi = 0;
  for (std::uint32_t a = 1; a < q; ++a) {
    if (gcd_u64(a, q) != 1) continue;
    ++phi;
    s += f(a) * std::conj(g(a));
  }
  return s / static_cast<double>(phi);
}

cplx inner_product(const ClassFunction& f, const Character& chi) {
  check_same_modulus(chi, f.modulus());
  return inner_product(f, to_class_function(chi));
}

cplx inner_product(const Character& chi, const Character& psi) {
  check_same_modulus(psi, chi.modulus());
  return inner_product(to_class_function(chi), to_class_function(psi));
}

ClassFunction to_class_function(const Character& chi) { return ClassFunction(chi.modulus(), chi.values()); }

SquareRootCount square_root_count(std::uint32_t q) {
  if (q < 3) throw InvalidModulus("modulus must be at least 3, got " + std::to_string(q));
  SquareRootCount r{q, std::vector<std::uint32_t>(q, 0)};
  for (std::uint64_t x = 1; x < q; ++x) {
    if (gcd_u64(x, q) == 1) ++r.counts[(x * x) % q];
  }
  return r;
}

ClassFunction race_weight(std::uint64_t a, std::uint64_t b, std::uint32_t q) {
  if (q < 3) throw InvalidModulus("modulus must be at least 3, got " + std::to_string(q));
  a %= q;
  b %= q;
  if (a == b) throw std::invalid_argument("race residues must be distinct");
  if (gcd_u64(a, q) != 1 || gcd_u64(b, q) != 1) throw std::invalid_argument("race residues must be units mod q");
  ClassFunction t(q);
  t.set(a, 1.0);
  t.set(b, -1.0);
  return t;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> as_race(const ClassFunction& t) {
  std::optional<std::uint32_t> a, b;
  for (std::uint32_t r = 0; r < t.modulus(); ++r) {
    const cplx w = t(r);
    if (w == cplx{}) continue;
    if (w == cplx{1.0, 0.0} && !a) {
      a = r;
    } else if (w == cplx{-1.0, 0.0} && !b) {
      b = r;
    } else {
      return std::nullopt;
    }
  }
  if (!a || !b) return std::nullopt;
  return std::make_pair(*a, *b);
}

BiasConstant bias_constant(const CharacterGroup& group, const ClassFunction& t,
                           const std::map<std::uint32_t, int>& vanishing_orders, bool strict) {
  if (t.modulus() != group.modulus()) throw ModulusMismatch("class function modulus does not match the group");
  const auto roots = square_root_count(group.modulus());
  ClassFunction r(group.modulus());
  for (std::uint32_t a : group.units()) r.set(a, static_cast<double>(roots.counts[a]));

  BiasConstant out;
  cplx acc = inner_product(t, r);
  for (const Character& chi : group.characters()) {
    if (chi.is_principal()) continue;
    const cplx c = inner_product(t, chi);
    const auto it = vanishing_orders.find(chi.index());
    int m = 0;
    if (it != vanishing_orders.end()) {
      if (it->second < 0) throw std::invalid_argument("order of vanishing must be nonnegative for " + chi.label());
      m = it->second;
    } else if (strict && std::abs(c) > 1e-12) {
      throw MissingVanishingOrder("no order of vanishing supplied for " + chi.label());
    }
    out.vanishing_orders[chi.index()] = m;
    acc += 2.0 * c * static_cast<double>(m);
  }
  out.value = acc / 2.0;
  return out;
}

}  // namespace prl
