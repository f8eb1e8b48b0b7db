#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "linalg.hpp"

namespace fivefold {

inline constexpr int kMaxDim = 8;

using Mask = std::uint32_t;

// p-subsets of {0..n-1}, listed in lexicographic order of their ascending
// index tuples, together with the inverse map mask -> position.
struct SubsetTable {
  std::array<std::vector<Mask>, kMaxDim + 1> by_grade;
  std::array<int, 1 << kMaxDim> index{};
};

namespace detail {

inline void collect_subsets(int n, int p, int start, Mask acc, std::vector<Mask>& out) {
  if (p == 0) {
    out.push_back(acc);
    return;
  }
  for (int i = start; i <= n - p; ++i) collect_subsets(n, p - 1, i + 1, acc | (Mask{1} << i), out);
}

inline std::array<SubsetTable, kMaxDim + 1> build_tables() {
  std::array<SubsetTable, kMaxDim + 1> t;
  for (int n = 0; n <= kMaxDim; ++n) {
    t[n].index.fill(-1);
    for (int p = 0; p <= n; ++p) {
      collect_subsets(n, p, 0, 0, t[n].by_grade[p]);
      for (std::size_t i = 0; i < t[n].by_grade[p].size(); ++i) t[n].index[t[n].by_grade[p][i]] = static_cast<int>(i);
    }
  }
  return t;
}

}  // namespace detail

inline const SubsetTable& subsets(int n) {
  static const auto tables = detail::build_tables();
  if (n < 0 || n > kMaxDim) throw std::invalid_argument("dimension out of range");
  return tables[n];
}

inline int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

// Parity of #{(a,b) : a in A, b in B, a > b}; this is the sign of the shuffle
// that sorts the concatenation (A, B).
inline int shuffle_parity(Mask a, Mask b) {
  int c = 0;
  while (b) {
    int i = std::countr_zero(b);
    b &= b - 1;
    c += std::popcount(a >> (i + 1));
  }
  return c & 1;
}

inline std::vector<int> mask_indices(Mask m) {
  std::vector<int> out;
  while (m) {
    out.push_back(std::countr_zero(m));
    m &= m - 1;
  }
  return out;
}

enum class Variance { Primal, Dual };

inline Variance opposite(Variance v) { return v == Variance::Primal ? Variance::Dual : Variance::Primal; }

template <class T>
class Multivector {
 public:
  Multivector() = default;
  Multivector(int n, int p, Variance v) : n_(n), p_(p), var_(v) {
    if (n < 0 || n > kMaxDim) throw std::invalid_argument("multivector dimension out of range");
    if (p < 0 || p > n) throw std::invalid_argument("multivector grade out of range");
    c_.assign(binomial(n, p), T(0));
  }

  static Multivector monomial(int n, std::initializer_list<int> idx, Variance v, T c = T(1)) {
    Mask m = 0;
    for (int i : idx) {
      if (i < 0 || i >= n || (m >> i & 1)) throw std::invalid_argument("bad monomial index");
      m |= Mask{1} << i;
    }
    // Unsorted index lists carry the sign of the sorting permutation.
    std::vector<int> seq(idx);
    int swaps = 0;
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t j = i + 1; j < seq.size(); ++j)
        if (seq[i] > seq[j]) ++swaps;
    Multivector r(n, static_cast<int>(seq.size()), v);
    r.set(m, (swaps & 1) ? T(-c) : c);
    return r;
  }

  static Multivector from_vec(const Vec<T>& x, Variance v) {
    Multivector r(static_cast<int>(x.size()), 1, v);
    for (std::size_t i = 0; i < x.size(); ++i) r.c_[i] = x[i];
    return r;
  }

  static Multivector scalar(int n, T c, Variance v = Variance::Dual) {
    Multivector r(n, 0, v);
    r.c_[0] = c;
    return r;
  }

  static Multivector top(int n, Variance v, T c = T(1)) {
    Multivector r(n, n, v);
    r.c_[0] = c;
    return r;
  }

  int dim() const { return n_; }
  int grade() const { return p_; }
  Variance variance() const { return var_; }
  int size() const { return static_cast<int>(c_.size()); }

  Mask mask_at(int i) const { return subsets(n_).by_grade[p_][i]; }
  const T& at(int i) const { return c_[i]; }
  T& at(int i) { return c_[i]; }

  T coeff(Mask m) const {
    check_mask(m);
    return c_[subsets(n_).index[m]];
  }
  void set(Mask m, const T& x) {
    check_mask(m);
    c_[subsets(n_).index[m]] = x;
  }
  void add(Mask m, const T& x) {
    check_mask(m);
    c_[subsets(n_).index[m]] += x;
  }

  bool is_zero() const {
    for (const auto& x : c_)
      if (!fivefold::is_zero(x)) return false;
    return true;
  }

  // Grade-1 coefficients as a plain vector.
  Vec<T> as_vec() const {
    if (p_ != 1) throw std::logic_error("as_vec on grade != 1");
    return c_;
  }
  T as_scalar() const {
    if (p_ != 0) throw std::logic_error("as_scalar on grade != 0");
    return c_[0];
  }

  Multivector& operator+=(const Multivector& o) {
    check_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Multivector& operator-=(const Multivector& o) {
    check_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Multivector operator+(const Multivector& o) const { return Multivector(*this) += o; }
  Multivector operator-(const Multivector& o) const { return Multivector(*this) -= o; }
  Multivector operator-() const { return scaled(T(-1)); }
  Multivector scaled(const T& s) const {
    Multivector r = *this;
    for (auto& x : r.c_) x *= s;
    return r;
  }

  bool operator==(const Multivector& o) const { return n_ == o.n_ && p_ == o.p_ && var_ == o.var_ && c_ == o.c_; }

  std::string str() const {
    std::ostringstream os;
    bool first = true;
    char sym = var_ == Variance::Dual ? 'x' : 'e';
    for (int i = 0; i < size(); ++i) {
      if (fivefold::is_zero(c_[i])) continue;
      if (!first) os << " + ";
      first = false;
      os << to_string(c_[i]) << '*' << sym;
      for (int k : mask_indices(mask_at(i))) os << k;
    }
    return first ? "0" : os.str();
  }

 private:
  void check_mask(Mask m) const {
    if (m >> n_ || std::popcount(m) != p_) throw std::invalid_argument("mask does not match grade/dimension");
  }
  void check_same(const Multivector& o) const {
    if (n_ != o.n_ || p_ != o.p_ || var_ != o.var_) throw std::invalid_argument("multivector shape mismatch");
  }

  int n_ = 0, p_ = 0;
  Variance var_ = Variance::Dual;
  std::vector<T> c_;
};

template <class T>
Multivector<T> operator*(const T& s, const Multivector<T>& m) {
  return m.scaled(s);
}

template <class T>
Multivector<T> wedge(const Multivector<T>& a, const Multivector<T>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("wedge: dimension mismatch");
  if (a.variance() != b.variance()) throw std::invalid_argument("wedge: variance mismatch");
  if (a.grade() + b.grade() > a.dim()) throw std::invalid_argument("wedge: grade overflow");
  Multivector<T> r(a.dim(), a.grade() + b.grade(), a.variance());
  for (int i = 0; i < a.size(); ++i) {
    if (is_zero(a.at(i))) continue;
    Mask ma = a.mask_at(i);
    for (int j = 0; j < b.size(); ++j) {
      Mask mb = b.mask_at(j);
      if ((ma & mb) || is_zero(b.at(j))) continue;
      T prod = a.at(i) * b.at(j);
      if (shuffle_parity(ma, mb)) prod = -prod;
      r.add(ma | mb, prod);
    }
  }
  return r;
}

// big ⌟ small: the small factor fills the leading argument slots, so on basis
// elements  t_T ⌟ s_S = sign(S, T\S) t_{T\S}  for S ⊂ T.
template <class T>
Multivector<T> contract(const Multivector<T>& big, const Multivector<T>& small) {
  if (big.dim() != small.dim()) throw std::invalid_argument("contract: dimension mismatch");
  if (big.variance() == small.variance()) throw std::invalid_argument("contract: variances must be opposite");
  if (small.grade() > big.grade()) throw std::invalid_argument("contract: grade order violated");
  Multivector<T> r(big.dim(), big.grade() - small.grade(), big.variance());
  for (int j = 0; j < small.size(); ++j) {
    if (is_zero(small.at(j))) continue;
    Mask ms = small.mask_at(j);
    for (int i = 0; i < big.size(); ++i) {
      Mask mt = big.mask_at(i);
      if ((mt & ms) != ms || is_zero(big.at(i))) continue;
      Mask rest = mt & ~ms;
      T prod = big.at(i) * small.at(j);
      if (shuffle_parity(ms, rest)) prod = -prod;
      r.add(rest, prod);
    }
  }
  return r;
}

// Contraction by a single vector (or covector) given as plain coordinates.
template <class T>
Multivector<T> contract(const Multivector<T>& big, const Vec<T>& v) {
  if (static_cast<int>(v.size()) != big.dim()) throw std::invalid_argument("contract: dimension mismatch");
  if (big.grade() < 1) throw std::invalid_argument("contract: grade order violated");
  Multivector<T> r(big.dim(), big.grade() - 1, big.variance());
  for (int i = 0; i < big.size(); ++i) {
    if (is_zero(big.at(i))) continue;
    Mask mt = big.mask_at(i);
    for (Mask rem = mt; rem; rem &= rem - 1) {
      int k = std::countr_zero(rem);
      if (is_zero(v[k])) continue;
      T prod = big.at(i) * v[k];
      if (std::popcount(mt & ((Mask{1} << k) - 1)) & 1) prod = -prod;
      r.add(mt & ~(Mask{1} << k), prod);
    }
  }
  return r;
}

template <class T>
void check_top(const Multivector<T>& eps) {
  if (eps.grade() != eps.dim()) throw std::invalid_argument("eps must have full grade");
  if (eps.is_zero()) throw std::invalid_argument("eps must be nonzero");
}

// ξ∨ = ε ⌟ ξ.
template <class T>
Multivector<T> eps_dual(const Multivector<T>& xi, const Multivector<T>& eps) {
  check_top(eps);
  if (eps.variance() == xi.variance()) throw std::invalid_argument("eps_dual: eps must have opposite variance");
  return contract(eps, xi);
}

// ε⁻¹: the top element of the opposite variance pairing to 1 with ε.
template <class T>
Multivector<T> inverse_top(const Multivector<T>& eps) {
  check_top(eps);
  return Multivector<T>::top(eps.dim(), opposite(eps.variance()), T(1) / eps.at(0));
}

// Sign relating the inverse dual to the identity: ε⁻¹⌟(ε⌟ξ) = (-1)^{p(n-p)} ξ.
inline int double_dual_sign(int n, int p) { return (p * (n - p)) % 2 ? -1 : 1; }

// Sign in ω⌟ξ = s·(ξ∨)⌟(ω∨) for ω of grade k, ξ of grade p on an n-space.
inline int duality_sign(int n, int k, int p) { return ((n - k) * (k - p)) % 2 ? -1 : 1; }

template <class T>
Multivector<T> decomposable(const std::vector<Vec<T>>& vectors, int n, Variance v) {
  Multivector<T> r = Multivector<T>::scalar(n, T(1), v);
  for (const auto& x : vectors) r = wedge(r, Multivector<T>::from_vec(x, v));
  return r;
}

// Full alternating evaluation ξ(v₁,…,v_p) as Σ_S ξ_S · det(v restricted to S).
template <class T>
T eval(const Multivector<T>& form, const std::vector<Vec<T>>& vectors) {
  int p = form.grade();
  if (static_cast<int>(vectors.size()) != p) throw std::invalid_argument("eval: arity mismatch");
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != form.dim()) throw std::invalid_argument("eval: dimension mismatch");
  T total(0);
  for (int i = 0; i < form.size(); ++i) {
    if (is_zero(form.at(i))) continue;
    auto cols = mask_indices(form.mask_at(i));
    Matrix<T> m(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) m(r, c) = vectors[r][cols[c]];
    total += form.at(i) * (p == 0 ? T(1) : det(m));
  }
  return total;
}

// Restriction of a form along the linear map F^k -> V whose columns are the
// given vectors: the result is a form on a k-space.
template <class T>
Multivector<T> pullback(const Multivector<T>& form, const std::vector<Vec<T>>& vectors) {
  int k = static_cast<int>(vectors.size());
  if (form.grade() > k) throw std::invalid_argument("pullback: grade exceeds subspace dimension");
  Multivector<T> r(k, form.grade(), form.variance());
  for (int i = 0; i < r.size(); ++i) {
    std::vector<Vec<T>> sel;
    for (int c : mask_indices(r.mask_at(i))) sel.push_back(vectors[c]);
    r.at(i) = eval(form, sel);
  }
  return r;
}

// Pushforward of a multivector on F^k along the map with the given columns.
template <class T>
Multivector<T> pushforward(const Multivector<T>& mv, const std::vector<Vec<T>>& vectors, int n) {
  Multivector<T> r(n, mv.grade(), mv.variance());
  for (int i = 0; i < mv.size(); ++i) {
    if (is_zero(mv.at(i))) continue;
    std::vector<Vec<T>> sel;
    for (int c : mask_indices(mv.mask_at(i))) sel.push_back(vectors[c]);
    r += decomposable(sel, n, mv.variance()).scaled(mv.at(i));
  }
  return r;
}

template <class T>
Matrix<T> to_skew(const Multivector<T>& m2) {
  if (m2.grade() != 2) throw std::invalid_argument("to_skew: grade must be 2");
  int n = m2.dim();
  Matrix<T> a(n, n);
  for (int i = 0; i < m2.size(); ++i) {
    auto ij = mask_indices(m2.mask_at(i));
    a(ij[0], ij[1]) = m2.at(i);
    a(ij[1], ij[0]) = -m2.at(i);
  }
  return a;
}

template <class T>
void check_skew(const Matrix<T>& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("skew matrix must be square");
  for (int i = 0; i < a.rows(); ++i) {
    if (!is_zero(a(i, i))) throw std::invalid_argument("matrix is not antisymmetric");
    for (int j = i + 1; j < a.cols(); ++j)
      if (!(a(i, j) == -a(j, i))) throw std::invalid_argument("matrix is not antisymmetric");
  }
}

template <class T>
Multivector<T> from_skew(const Matrix<T>& a, Variance v = Variance::Dual) {
  check_skew(a);
  Multivector<T> m(a.rows(), 2, v);
  for (int i = 0; i < m.size(); ++i) {
    auto ij = mask_indices(m.mask_at(i));
    m.at(i) = a(ij[0], ij[1]);
  }
  return m;
}

template <class T>
int rank_2form(const Matrix<T>& a) {
  check_skew(a);
  return rank(a);
}

template <class T>
int rank_2form(const Multivector<T>& m2) {
  return rank(to_skew(m2));
}

// Re-embeds a multivector on an n-space into an m-space (m >= n) by an index shift.
template <class T>
Multivector<T> shift_indices(const Multivector<T>& mv, int m, int offset) {
  Multivector<T> r(m, mv.grade(), mv.variance());
  for (int i = 0; i < mv.size(); ++i) {
    if (is_zero(mv.at(i))) continue;
    Mask s = mv.mask_at(i) << offset;
    if (s >> m) throw std::invalid_argument("shift_indices out of range");
    r.set(s, mv.at(i));
  }
  return r;
}

// Coefficientwise image of a rational multivector in another field.
template <class T, class F>
Multivector<T> map_coeffs(const Multivector<Rational>& mv, F&& f) {
  Multivector<T> r(mv.dim(), mv.grade(), mv.variance());
  for (int i = 0; i < mv.size(); ++i) r.at(i) = f(mv.at(i));
  return r;
}

}  // namespace fivefold
