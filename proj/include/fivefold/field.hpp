#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include <gmpxx.h>

namespace fivefold {

// Prime field with a compile-time modulus. The runtime prime is dispatched
// over a small fixed set (see with_prime below).
template <std::uint32_t P>
class Zp {
  static_assert(P > 2 && P < 65536, "odd prime below 2^16 expected");

 public:
  static constexpr std::uint32_t modulus = P;

  constexpr Zp() = default;
  constexpr Zp(long long x) : v_(reduce(x)) {}

  static constexpr Zp raw(std::uint32_t v) {
    Zp z;
    z.v_ = v;
    return z;
  }

  constexpr std::uint32_t value() const { return v_; }
  constexpr bool is_zero() const { return v_ == 0; }

  constexpr Zp operator+(Zp o) const {
    std::uint32_t s = v_ + o.v_;
    return raw(s >= P ? s - P : s);
  }
  constexpr Zp operator-(Zp o) const { return raw(v_ >= o.v_ ? v_ - o.v_ : v_ + P - o.v_); }
  constexpr Zp operator-() const { return raw(v_ == 0 ? 0 : P - v_); }
  constexpr Zp operator*(Zp o) const { return raw(static_cast<std::uint32_t>((std::uint64_t{v_} * o.v_) % P)); }
  constexpr Zp operator/(Zp o) const { return *this * o.inverse(); }
  constexpr Zp& operator+=(Zp o) { return *this = *this + o; }
  constexpr Zp& operator-=(Zp o) { return *this = *this - o; }
  constexpr Zp& operator*=(Zp o) { return *this = *this * o; }
  constexpr Zp& operator/=(Zp o) { return *this = *this / o; }
  constexpr bool operator==(const Zp&) const = default;

  constexpr Zp pow(std::uint64_t e) const {
    Zp r = raw(1), b = *this;
    while (e) {
      if (e & 1) r *= b;
      b *= b;
      e >>= 1;
    }
    return r;
  }

  constexpr Zp inverse() const {
    if (v_ == 0) throw std::domain_error("division by zero in F_p");
    return pow(P - 2);
  }

 private:
  static constexpr std::uint32_t reduce(long long x) {
    long long r = x % static_cast<long long>(P);
    return static_cast<std::uint32_t>(r < 0 ? r + P : r);
  }

  std::uint32_t v_ = 0;
};

using Rational = mpq_class;

template <class T>
struct field_traits;

template <std::uint32_t P>
struct field_traits<Zp<P>> {
  using T = Zp<P>;
  static constexpr bool is_finite = true;
  static constexpr std::uint32_t characteristic = P;

  static std::string name() { return "F_" + std::to_string(P); }
  static bool is_zero(const T& a) { return a.is_zero(); }
  // Integer-representative order, which is the total order used for sorting.
  static bool less(const T& a, const T& b) { return a.value() < b.value(); }
  static std::string to_string(const T& a) { return std::to_string(a.value()); }

  static std::optional<T> sqrt(const T& a) {
    for (std::uint32_t r = 0; r < P; ++r)
      if (T::raw(r) * T::raw(r) == a) return T::raw(r);
    return std::nullopt;
  }

  // Reduction of a rational; fails when the denominator vanishes mod P.
  static std::optional<T> from_rational(const Rational& x) {
    mpz_class p = P;
    mpz_class num = x.get_num() % p, den = x.get_den() % p;
    if (den == 0) return std::nullopt;
    if (num < 0) num += p;
    return T(num.get_si()) / T(den.get_si());
  }

  template <class Rng>
  static T random(Rng& rng) {
    return T::raw(std::uniform_int_distribution<std::uint32_t>(0, P - 1)(rng));
  }
};

template <>
struct field_traits<Rational> {
  using T = Rational;
  static constexpr bool is_finite = false;
  static constexpr std::uint32_t characteristic = 0;

  static std::string name() { return "Q"; }
  static bool is_zero(const T& a) { return sgn(a) == 0; }
  static bool less(const T& a, const T& b) { return a < b; }
  static std::string to_string(const T& a) { return a.get_str(); }

  static std::optional<T> sqrt(const T& a) {
    if (sgn(a) < 0) return std::nullopt;
    mpz_class n = a.get_num(), d = a.get_den();
    if (!mpz_perfect_square_p(n.get_mpz_t()) || !mpz_perfect_square_p(d.get_mpz_t())) return std::nullopt;
    mpz_class rn, rd;
    mpz_sqrt(rn.get_mpz_t(), n.get_mpz_t());
    mpz_sqrt(rd.get_mpz_t(), d.get_mpz_t());
    T r(rn, rd);
    r.canonicalize();
    return r;
  }

  static std::optional<T> from_rational(const Rational& x) { return x; }

  // Small integers are plenty for fuzzing and keep the coefficient growth sane.
  template <class Rng>
  static T random(Rng& rng) {
    return T(std::uniform_int_distribution<int>(-9, 9)(rng));
  }
};

template <class T>
inline bool is_zero(const T& a) {
  return field_traits<T>::is_zero(a);
}

template <class T>
inline std::string to_string(const T& a) {
  return field_traits<T>::to_string(a);
}

// Parses "a", "-a" or "a/b" into a rational.
inline Rational parse_rational(const std::string& s) {
  Rational r;
  if (r.set_str(s, 10) != 0) throw std::invalid_argument("cannot parse coefficient '" + s + "'");
  if (r.get_den() == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
  r.canonicalize();
  return r;
}

class UnsupportedPrime : public std::invalid_argument {
 public:
  explicit UnsupportedPrime(long long p)
      : std::invalid_argument("unsupported prime " + std::to_string(p) + " (supported: 3, 5, 7, 11, 13)") {}
};

// Calls f(Zp<p>{}) with the matching compile-time field.
template <class F>
decltype(auto) with_prime(long long p, F&& f) {
  switch (p) {
    case 3: return f(Zp<3>{});
    case 5: return f(Zp<5>{});
    case 7: return f(Zp<7>{});
    case 11: return f(Zp<11>{});
    case 13: return f(Zp<13>{});
    default: throw UnsupportedPrime(p);
  }
}

}  // namespace fivefold
