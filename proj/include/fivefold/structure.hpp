#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exterior.hpp"

namespace fivefold {

class StructureError : public std::runtime_error {
 public:
  StructureError(std::string code, const std::string& what) : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

template <class T>
using Params6 = std::array<T, 6>;
template <class T>
using Params3 = std::array<T, 3>;

// ---------------------------------------------------------------------------
// Standard forms. On the 7-space W indices are 0..6; on the 6-space W̄ the
// vectors e₁..e₆ are stored at indices 0..5.

template <class T>
Multivector<T> standard_lambda() {
  const int n = 7;
  auto d = Variance::Dual;
  return Multivector<T>::monomial(n, {0, 1, 2, 3}, d) + Multivector<T>::monomial(n, {0, 4, 5, 6}, d) +
         Multivector<T>::monomial(n, {1, 2, 5, 6}, d) + Multivector<T>::monomial(n, {1, 3, 4, 6}, d) +
         Multivector<T>::monomial(n, {2, 3, 4, 5}, d);
}

template <class T>
Multivector<T> standard_lambda_bar() {
  auto d = Variance::Dual;
  return Multivector<T>::monomial(6, {0, 1, 2}, d) + Multivector<T>::monomial(6, {3, 4, 5}, d);
}

template <class T>
Multivector<T> standard_lambda_prime() {
  auto d = Variance::Dual;
  return Multivector<T>::monomial(6, {0, 1, 4, 5}, d) + Multivector<T>::monomial(6, {0, 2, 3, 5}, d) +
         Multivector<T>::monomial(6, {1, 2, 3, 4}, d);
}

// Positions (0-based on W̄) of the monomials carrying M₁..M₆ and K₁..K₃ in μ².
inline const std::array<Mask, 6>& m_masks() {
  static const std::array<Mask, 6> m = {0b111001, 0b111010, 0b111100, 0b001111, 0b010111, 0b100111};
  return m;
}
inline const std::array<Mask, 3>& k_masks() {
  static const std::array<Mask, 3> k = {0b011110, 0b101101, 0b110011};
  return k;
}

template <class T>
T mmk(const Params6<T>& M, const Params3<T>& K) {
  return M[0] * M[5] * K[0] + M[1] * M[4] * K[1] + M[2] * M[3] * K[2] + K[0] * K[1] * K[2];
}

// The skew matrix with the displayed upper-triangular part (6×6, on W̄).
template <class T>
Matrix<T> mu_matrix(const Params6<T>& M, const Params3<T>& K) {
  const T &M1 = M[0], &M2 = M[1], &M3 = M[2], &M4 = M[3], &M5 = M[4], &M6 = M[5];
  const T &K1 = K[0], &K2 = K[1], &K3 = K[2];
  Matrix<T> a(6, 6);
  auto put = [&](int i, int j, T v) {
    a(i - 1, j - 1) = v;
    a(j - 1, i - 1) = -v;
  };
  put(1, 2, M4 * K3);
  put(1, 3, -(M5 * K2));
  put(1, 4, M1 * M4);
  put(1, 5, M1 * M5);
  put(1, 6, K2 * K3 + M1 * M6);
  put(2, 3, M6 * K1);
  put(2, 4, M2 * M4);
  put(2, 5, K1 * K3 + M2 * M5);
  put(2, 6, M2 * M6);
  put(3, 4, K1 * K2 + M3 * M4);
  put(3, 5, M3 * M5);
  put(3, 6, M3 * M6);
  put(4, 5, M1 * K1);
  put(4, 6, -(M2 * K2));
  put(5, 6, M3 * K3);
  return a;
}

// μ² = M₁x₁₄₅₆ + … + K₃x₁₂₅₆ as a 4-form on W̄.
template <class T>
Multivector<T> mu_square_expr(const Params6<T>& M, const Params3<T>& K) {
  Multivector<T> n(6, 4, Variance::Dual);
  for (int i = 0; i < 6; ++i) n.set(m_masks()[i], M[i]);
  for (int i = 0; i < 3; ++i) n.set(k_masks()[i], K[i]);
  return n;
}

// ---------------------------------------------------------------------------
// Quadratic invariant of a 3-form on a 7-space.

// B(a,b)·eps = (t⌟a)∧(t⌟b)∧t, where eps is a top element of the same variance as t.
template <class T>
Matrix<T> quadratic_invariant(const Multivector<T>& t, const Multivector<T>& eps) {
  if (t.dim() != 7 || t.grade() != 3) throw std::invalid_argument("quadratic_invariant: expected a 3-form on a 7-space");
  check_top(eps);
  if (eps.variance() != t.variance() || eps.dim() != 7) throw std::invalid_argument("quadratic_invariant: eps must match t");
  std::vector<Multivector<T>> partial;
  for (int i = 0; i < 7; ++i) {
    Vec<T> a(7, T(0));
    a[i] = T(1);
    partial.push_back(contract(t, a));
  }
  Matrix<T> b(7, 7);
  T inv = T(1) / eps.at(0);
  for (int i = 0; i < 7; ++i)
    for (int j = i; j < 7; ++j) {
      T v = wedge(wedge(partial[i], partial[j]), t).at(0) * inv;
      b(i, j) = v;
      b(j, i) = v;
    }
  return b;
}

template <class T>
Multivector<T> eps_primal(int n = 7) {
  return Multivector<T>::top(n, Variance::Primal);
}

template <class T>
Multivector<T> eps_dual_top(int n = 7) {
  return Multivector<T>::top(n, Variance::Dual);
}

// λ∨ = ε⌟λ with ε = e₀…₆.
template <class T>
Multivector<T> lambda_dual(const Multivector<T>& lambda) {
  return eps_dual(lambda, eps_primal<T>(lambda.dim()));
}

// Quadratic invariant of a 4-form: a form on W∨ whose null cone is Q∨_λ.
template <class T>
Matrix<T> lambda_invariant(const Multivector<T>& lambda) {
  if (lambda.dim() != 7 || lambda.grade() != 4 || lambda.variance() != Variance::Dual)
    throw std::invalid_argument("expected a 4-form on a 7-space");
  return quadratic_invariant(lambda_dual(lambda), eps_primal<T>());
}

template <class T>
bool is_general_4form(const Multivector<T>& lambda) {
  return !is_zero(det(lambda_invariant(lambda)));
}

template <class T>
Matrix<T> xi_invariant(const Multivector<T>& xi) {
  return quadratic_invariant(xi, eps_dual_top<T>());
}

template <class T>
bool is_general_3form7(const Multivector<T>& xi) {
  return !is_zero(det(xi_invariant(xi)));
}

// ---------------------------------------------------------------------------
// Polynomials over the field (coefficients low to high).

template <class T>
std::vector<T> poly_mul(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> r(a.size() + b.size() - 1, T(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

template <class T>
T poly_eval(const std::vector<T>& p, const T& x) {
  T r(0);
  for (std::size_t i = p.size(); i-- > 0;) r = r * x + p[i];
  return r;
}

namespace detail {

inline std::vector<mpz_class> divisors(mpz_class n) {
  if (n < 0) n = -n;
  std::vector<mpz_class> small, large;
  for (mpz_class d = 1; d * d <= n; ++d) {
    if (n % d == 0) {
      small.push_back(d);
      if (d * d != n) large.push_back(n / d);
    }
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

}  // namespace detail

// Distinct roots lying in the field, sorted by the field's total order.
template <class T>
std::vector<T> roots_in_field(std::vector<T> p) {
  while (!p.empty() && is_zero(p.back())) p.pop_back();
  std::vector<T> roots;
  if (p.size() <= 1) return roots;
  if constexpr (field_traits<T>::is_finite) {
    for (std::uint32_t v = 0; v < field_traits<T>::characteristic; ++v)
      if (is_zero(poly_eval(p, T::raw(v)))) roots.push_back(T::raw(v));
  } else {
    // rational root theorem on the integer-cleared polynomial
    mpz_class den = 1;
    for (auto& c : p) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), c.get_den_mpz_t());
    std::vector<mpz_class> z;
    for (auto& c : p) z.push_back(mpz_class(c * den));
    std::size_t low = 0;
    while (low < z.size() && z[low] == 0) ++low;
    if (low > 0) roots.push_back(T(0));
    for (const auto& a : detail::divisors(z[low]))
      for (const auto& b : detail::divisors(z.back()))
        for (int s : {1, -1}) {
          T cand(s * a, b);
          cand.canonicalize();
          if (is_zero(poly_eval(p, cand)) && std::find(roots.begin(), roots.end(), cand) == roots.end()) roots.push_back(cand);
        }
  }
  std::sort(roots.begin(), roots.end(), [](const T& a, const T& b) { return field_traits<T>::less(a, b); });
  return roots;
}

template <class T>
struct CubicPoly {
  T c3, c2, c1, c0;

  std::vector<T> coeffs() const { return {c0, c1, c2, c3}; }
  T discriminant() const {
    const T &a = c3, &b = c2, &c = c1, &d = c0;
    return b * b * c * c - T(4) * a * c * c * c - T(4) * b * b * b * d - T(27) * a * a * d * d + T(18) * a * b * c * d;
  }
};

// ---------------------------------------------------------------------------
// The odd splitting W = k·w₀ ⊕ W̄.

template <class T>
struct OddSplit {
  Vec<T> w0;       // spans ker μ
  Vec<T> w0_dual;  // 𝐪_λ⁻¹(w₀) rescaled so that w₀∨(w₀) = 1
  T q_w0w0;        // 𝐪_λ⁻¹(w₀,w₀) before rescaling (witness)
  Matrix<T> q_inverse;
  // frame[0] = w₀, frame[1..6] a basis of W̄ = ker w₀∨; forms below are
  // written in these coordinates (so w₀ = e₀ and w₀∨ = x₀).
  std::vector<Vec<T>> frame;
  Multivector<T> lambda_frame, mu_frame;
  Multivector<T> lambda_bar, lambda_prime, mu_bar;  // on W̄ (6-dim)
  Multivector<T> lambda_bar_w;                      // λ⌟w₀ in the original coordinates
};

// Restriction to indices 1..6 of a form in frame coordinates that kills e₀.
template <class T>
Multivector<T> drop_index0(const Multivector<T>& f) {
  Multivector<T> r(f.dim() - 1, f.grade(), f.variance());
  for (int i = 0; i < f.size(); ++i) {
    Mask m = f.mask_at(i);
    if (m & 1) {
      if (!is_zero(f.at(i))) throw std::logic_error("drop_index0: form does not kill e0");
      continue;
    }
    r.set(m >> 1, f.at(i));
  }
  return r;
}

template <class T>
OddSplit<T> split_odd(const Multivector<T>& lambda, const Multivector<T>& mu) {
  if (lambda.dim() != 7 || mu.dim() != 7 || mu.grade() != 2 || lambda.grade() != 4)
    throw std::invalid_argument("split_odd: expected a 4-form and a 2-form on a 7-space");
  OddSplit<T> s;
  Matrix<T> b = lambda_invariant(lambda);
  if (is_zero(det(b))) throw StructureError("NotGeneral", "the 4-form is not general");
  Matrix<T> mum = to_skew(mu);
  int r = rank(mum);
  if (r != 6) throw StructureError("DegenerateMu", "rank of mu is " + std::to_string(r) + ", expected 6");
  s.w0 = kernel(mum).at(0);
  s.q_inverse = inverse(b);
  Vec<T> pol = s.q_inverse * s.w0;
  s.q_w0w0 = dot(pol, s.w0);
  if (is_zero(s.q_w0w0)) throw StructureError("W0OnQuadric", "the kernel of mu lies on the quadric");
  T inv = T(1) / s.q_w0w0;
  for (auto& x : pol) x *= inv;
  s.w0_dual = pol;

  Matrix<T> row(1, 7);
  for (int j = 0; j < 7; ++j) row(0, j) = s.w0_dual[j];
  s.frame.push_back(s.w0);
  for (auto& v : kernel(row)) s.frame.push_back(v);

  s.lambda_frame = pullback(lambda, s.frame);
  s.mu_frame = pullback(mu, s.frame);
  Vec<T> e0(7, T(0));
  e0[0] = T(1);
  auto lb7 = contract(s.lambda_frame, e0);
  s.lambda_bar = drop_index0(lb7);
  auto x0 = Multivector<T>::monomial(7, {0}, Variance::Dual);
  s.lambda_prime = drop_index0(s.lambda_frame - wedge(x0, lb7));
  s.mu_bar = drop_index0(s.mu_frame);
  s.lambda_bar_w = contract(lambda, s.w0);
  return s;
}

// ---------------------------------------------------------------------------
// Hitchin's operator on a 3-form of a 6-space.

template <class T>
struct HitchinSplit {
  Matrix<T> K;  // columns are K(e_i)
  T c;          // K² = c·Id
  T root;       // the chosen square root of c; A₁ is its eigenspace
  std::vector<Vec<T>> A1, A2;
};

template <class T>
Matrix<T> hitchin_operator(const Multivector<T>& lambda_bar) {
  if (lambda_bar.dim() != 6 || lambda_bar.grade() != 3) throw std::invalid_argument("hitchin: expected a 3-form on a 6-space");
  auto eps = eps_primal<T>(6);
  Matrix<T> k(6, 6);
  for (int i = 0; i < 6; ++i) {
    Vec<T> e(6, T(0));
    e[i] = T(1);
    auto v = eps_dual(wedge(contract(lambda_bar, e), lambda_bar), eps).as_vec();
    for (int j = 0; j < 6; ++j) k(j, i) = v[j];
  }
  return k;
}

template <class T>
HitchinSplit<T> hitchin_split(const Multivector<T>& lambda_bar) {
  HitchinSplit<T> h;
  h.K = hitchin_operator(lambda_bar);
  Matrix<T> k2 = h.K * h.K;
  h.c = k2(0, 0);
  if (!(k2 == Matrix<T>::identity(6).scaled(h.c))) throw StructureError("NotGeneral", "K^2 is not scalar");
  if (is_zero(h.c)) throw StructureError("NotGeneral", "K^2 = 0, the 3-form is not general");
  auto r = field_traits<T>::sqrt(h.c);
  if (!r) throw StructureError("NonSplit", "K^2 = c with c a nonsquare");
  h.root = *r;
  h.A1 = kernel(h.K - Matrix<T>::identity(6).scaled(h.root));
  h.A2 = kernel(h.K + Matrix<T>::identity(6).scaled(h.root));
  if (h.A1.size() != 3 || h.A2.size() != 3) throw StructureError("NotGeneral", "eigenspaces are not 3-dimensional");
  return h;
}

// ---------------------------------------------------------------------------
// The pencil tλ′ + μ² between ∧²A₁ and ∧²A₂.

template <class T>
struct Pencil {
  Matrix<T> P, N;  // rows: a₁a₂, a₁a₃, a₂a₃; columns: same for A₂
};

template <class T>
Pencil<T> pencil_matrices(const Multivector<T>& lambda_prime, const Multivector<T>& mu_sq, const std::vector<Vec<T>>& A1,
                          const std::vector<Vec<T>>& A2) {
  static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  Pencil<T> pc{Matrix<T>(3, 3), Matrix<T>(3, 3)};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      std::vector<Vec<T>> v = {A1[pairs[i][0]], A1[pairs[i][1]], A2[pairs[j][0]], A2[pairs[j][1]]};
      pc.P(i, j) = eval(lambda_prime, v);
      pc.N(i, j) = eval(mu_sq, v);
    }
  return pc;
}

// det(tP + N) for 3x3 matrices, by the Leibniz formula with linear polynomial entries.
template <class T>
CubicPoly<T> pencil_det3(const Matrix<T>& P, const Matrix<T>& N) {
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  static const int signs[6] = {1, -1, -1, 1, 1, -1};
  std::vector<T> acc(4, T(0));
  for (int s = 0; s < 6; ++s) {
    std::vector<T> term = {T(1)};
    for (int i = 0; i < 3; ++i) term = poly_mul(term, std::vector<T>{N(i, perms[s][i]), P(i, perms[s][i])});
    for (int d = 0; d < 4; ++d) acc[d] += signs[s] > 0 ? term[d] : T(-term[d]);
  }
  return CubicPoly<T>{acc[3], acc[2], acc[1], acc[0]};
}

template <class T>
CubicPoly<T> chi_poly(const Multivector<T>& lambda_prime, const Multivector<T>& mu_sq, const std::vector<Vec<T>>& A1,
                      const std::vector<Vec<T>>& A2) {
  auto pc = pencil_matrices(lambda_prime, mu_sq, A1, A2);
  if (is_zero(det(pc.P))) throw StructureError("PairingDegenerate", "lambda' pairs the wedge squares degenerately");
  return pencil_det3(pc.P, pc.N);
}

// ---------------------------------------------------------------------------
// Normal form of (λ̄, λ′, μ) on W̄.

template <class T>
struct NormalForm {
  std::vector<Vec<T>> basis;  // adapted basis e₁..e₆ in W̄ (frame) coordinates
  T lambda_scale;             // t with t·λ̄ = x₁₂₃+x₄₅₆ and t·λ′ standard in this basis
  Params6<T> M;
  Params3<T> K;
  T mu_scale;  // μ = mu_scale · mu_matrix(M, K) in this basis
  Multivector<T> mu_adapted;
};

namespace detail {

// Plane {v : ω∧v = 0} of a bivector ω = c₁₂a₁a₂ + c₁₃a₁a₃ + c₂₃a₂a₃ as a functional.
template <class T>
Vec<T> plane_functional(const Vec<T>& c) {
  return {c[2], -c[1], c[0]};
}

template <class T>
Vec<T> line_of(const Vec<T>& f, const Vec<T>& g) {
  Matrix<T> m = Matrix<T>::from_rows({f, g});
  auto k = kernel(m);
  if (k.size() != 1) throw StructureError("NotGeneral", "degenerate bivector planes");
  return k[0];
}

template <class T>
Vec<T> combine(const std::vector<Vec<T>>& basis, const Vec<T>& coords) {
  Vec<T> out(basis[0].size(), T(0));
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += coords[i] * basis[i][j];
  return out;
}

template <class T>
bool only_support(const Multivector<T>& f, std::initializer_list<Mask> allowed) {
  for (int i = 0; i < f.size(); ++i) {
    if (is_zero(f.at(i))) continue;
    if (std::find(allowed.begin(), allowed.end(), f.mask_at(i)) == allowed.end()) return false;
  }
  return true;
}

constexpr Mask kBar1 = 0b000111, kBar2 = 0b111000;
constexpr Mask kPrime1 = 0b110011, kPrime2 = 0b101101, kPrime3 = 0b011110;

template <class T>
struct SlotData {
  std::array<Vec<T>, 3> a1_lines, a2_lines;  // W̄ coordinates, per pencil slot
};

template <class T>
std::optional<NormalForm<T>> adapt(const SlotData<T>& slots, const std::array<int, 3>& order,
                                   const Multivector<T>& lambda_bar, const Multivector<T>& lambda_prime,
                                   const Multivector<T>& mu_bar) {
  std::vector<Vec<T>> b(6);
  for (int l = 0; l < 3; ++l) {
    b[l] = slots.a1_lines[order[l]];
    b[5 - l] = slots.a2_lines[order[l]];
  }
  auto lb = pullback(lambda_bar, b);
  auto lp = pullback(lambda_prime, b);
  if (!only_support(lb, {kBar1, kBar2}) || !only_support(lp, {kPrime1, kPrime2, kPrime3})) return std::nullopt;
  T c1 = lb.coeff(kBar1), c2 = lb.coeff(kBar2);
  T d1 = lp.coeff(kPrime1), d2 = lp.coeff(kPrime2), d3 = lp.coeff(kPrime3);
  if (is_zero(c1) || is_zero(c2) || is_zero(d1) || is_zero(d2) || is_zero(d3)) return std::nullopt;
  T t = d1 * d2 * d3 / (c1 * c1 * c2 * c2);
  // torus rescaling e_i -> s_i e_i solving the five normalization equations
  T v = T(1) / (t * c2);
  std::array<T, 6> s;
  s[0] = T(1);
  s[1] = T(1);
  s[2] = T(1) / (t * c1);
  s[3] = v * t * d1;
  s[5] = T(1) / (t * s[2] * s[3] * d2);
  s[4] = T(1) / (t * s[2] * s[3] * d3);
  for (int i = 0; i < 6; ++i)
    for (auto& x : b[i]) x *= s[i];

  auto mu_a = pullback(mu_bar, b);
  auto n = wedge(mu_a, mu_a);
  Params6<T> M;
  Params3<T> K;
  for (int i = 0; i < 6; ++i) M[i] = n.coeff(m_masks()[i]);
  for (int i = 0; i < 3; ++i) K[i] = n.coeff(k_masks()[i]);
  // the residual torus fixes M₁ = M₂ = 1 when possible
  if (!is_zero(M[0]) && !is_zero(M[1])) {
    std::array<T, 6> r = {T(1) / M[0], T(1) / M[1], M[0] * M[1], T(1) / (M[0] * M[1]), M[1], M[0]};
    for (int i = 0; i < 6; ++i)
      for (auto& x : b[i]) x *= r[i];
    mu_a = pullback(mu_bar, b);
    n = wedge(mu_a, mu_a);
    for (int i = 0; i < 6; ++i) M[i] = n.coeff(m_masks()[i]);
    for (int i = 0; i < 3; ++i) K[i] = n.coeff(k_masks()[i]);
  }
  NormalForm<T> nf;
  nf.basis = b;
  nf.lambda_scale = t;
  nf.M = M;
  nf.K = K;
  nf.mu_adapted = mu_a;
  nf.mu_scale = T(0);
  return nf;
}

}  // namespace detail

template <class T>
bool k_sorted(const Params3<T>& K) {
  return !field_traits<T>::less(K[1], K[0]) && !field_traits<T>::less(K[2], K[1]);
}

template <class T>
NormalForm<T> normal_form(const Multivector<T>& lambda_bar, const Multivector<T>& lambda_prime, const Multivector<T>& mu_bar,
                          const HitchinSplit<T>& h) {
  auto mu_sq = wedge(mu_bar, mu_bar);
  auto pc = pencil_matrices(lambda_prime, mu_sq, h.A1, h.A2);
  if (is_zero(det(pc.P))) throw StructureError("PairingDegenerate", "lambda' pairs the wedge squares degenerately");
  Matrix<T> tm = inverse(pc.P) * pc.N;
  auto chi = chi_poly(lambda_prime, mu_sq, h.A1, h.A2);
  if (is_zero(chi.discriminant())) throw StructureError("RepeatedRoots", "chi has a repeated root");
  auto roots = roots_in_field(chi.coeffs());
  if (roots.size() != 3) throw StructureError("NonSplitSpectrum", "chi does not split over the field");

  // eigenvectors y_k of P⁻¹N; X = (PY)⁻¹ gives the dual α-side combinations
  Matrix<T> y(3, 3);
  for (int k = 0; k < 3; ++k) {
    T kappa = -roots[k];
    auto ker = kernel(tm - Matrix<T>::identity(3).scaled(kappa));
    if (ker.size() != 1) throw StructureError("RepeatedRoots", "eigenspace is not a line");
    for (int i = 0; i < 3; ++i) y(i, k) = ker[0][i];
  }
  Matrix<T> x = inverse(pc.P * y);
  std::array<Vec<T>, 3> alpha, beta;
  for (int l = 0; l < 3; ++l) {
    alpha[l] = x.row(l);
    beta[l] = y.col(l);
  }
  detail::SlotData<T> slots;
  for (int l = 0; l < 3; ++l) {
    int m = (l + 1) % 3, k = (l + 2) % 3;
    auto ca = detail::line_of(detail::plane_functional(alpha[m]), detail::plane_functional(alpha[k]));
    auto cb = detail::line_of(detail::plane_functional(beta[m]), detail::plane_functional(beta[k]));
    slots.a1_lines[l] = detail::combine(h.A1, ca);
    slots.a2_lines[l] = detail::combine(h.A2, cb);
  }

  std::array<int, 3> order = {0, 1, 2};
  std::optional<NormalForm<T>> best;
  do {
    auto cand = detail::adapt(slots, order, lambda_bar, lambda_prime, mu_bar);
    if (cand && k_sorted(cand->K)) {
      best = cand;
      break;
    }
    if (cand && !best) best = cand;
  } while (std::next_permutation(order.begin(), order.end()));
  if (!best) throw StructureError("NotGeneral", "could not reach the standard forms");

  NormalForm<T> nf = *best;
  auto ref = from_skew(mu_matrix(nf.M, nf.K));
  int pivot = -1;
  for (int i = 0; i < ref.size(); ++i)
    if (!is_zero(ref.at(i))) {
      pivot = i;
      break;
    }
  if (pivot < 0 || is_zero(nf.mu_adapted.at(pivot))) throw StructureError("MuMatrixMismatch", "mu is not proportional to the mu-matrix");
  nf.mu_scale = nf.mu_adapted.at(pivot) / ref.at(pivot);
  if (!(nf.mu_adapted == ref.scaled(nf.mu_scale)))
    throw StructureError("MuMatrixMismatch", "mu is not proportional to the mu-matrix");
  return nf;
}

// ---------------------------------------------------------------------------
// Instances built from parameters.

template <class T>
struct BuiltInstance {
  Multivector<T> lambda, mu;  // on W
  Params6<T> M;
  Params3<T> K;
  T mu_square_scalar;  // μ∧μ = mu_square_scalar · μ²-expression
};

template <class T>
void check_parameters(const Params6<T>& M, const Params3<T>& K) {
  for (int i = 0; i < 6; ++i)
    if (is_zero(M[i])) throw StructureError("ZeroParameter", "M" + std::to_string(i + 1) + " is zero");
  for (int i = 0; i < 3; ++i)
    if (is_zero(K[i])) throw StructureError("ZeroParameter", "K" + std::to_string(i + 1) + " is zero");
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (K[i] == K[j]) throw StructureError("RepeatedK", "K" + std::to_string(i + 1) + " = K" + std::to_string(j + 1));
  if (is_zero(mmk(M, K))) throw StructureError("MmkZero", "M1M6K1 + M2M5K2 + M3M4K3 + K1K2K3 = 0");
}

template <class T>
BuiltInstance<T> build_instance(const Params6<T>& M, const Params3<T>& K) {
  check_parameters(M, K);
  BuiltInstance<T> inst;
  inst.M = M;
  inst.K = K;
  inst.lambda = standard_lambda<T>();
  auto mu6 = from_skew(mu_matrix(M, K));
  inst.mu = shift_indices(mu6, 7, 1);
  auto sq = wedge(mu6, mu6);
  auto expr = mu_square_expr(M, K);
  inst.mu_square_scalar = sq.coeff(k_masks()[0]) / K[0];
  if (!(sq == expr.scaled(inst.mu_square_scalar))) throw std::logic_error("mu^2 is not proportional to the expression");
  return inst;
}

// ---------------------------------------------------------------------------
// ξ = λ̄₀ + w₀∨∧μ̄ in frame coordinates, with λ̄₀ the μ-primitive part of λ̄.

template <class T>
Multivector<T> primitive_part(const Multivector<T>& lambda_bar, const Multivector<T>& mu_bar) {
  Matrix<T> pi_m = inverse(to_skew(mu_bar));
  auto pi = from_skew(pi_m, Variance::Primal);
  Matrix<T> lam_l(6, 6);
  for (int i = 0; i < 6; ++i) {
    auto f = Multivector<T>::monomial(6, {i}, Variance::Dual);
    auto col = contract(wedge(mu_bar, f), pi).as_vec();
    for (int j = 0; j < 6; ++j) lam_l(j, i) = col[j];
  }
  auto rhs = contract(lambda_bar, pi).as_vec();
  auto f = solve(lam_l, rhs);
  if (!f) throw std::logic_error("primitive projection failed");
  return lambda_bar - wedge(mu_bar, Multivector<T>::from_vec(*f, Variance::Dual));
}

template <class T>
Multivector<T> xi_build(const Multivector<T>& lambda_bar, const Multivector<T>& mu_bar) {
  auto prim = primitive_part(lambda_bar, mu_bar);
  auto x0 = Multivector<T>::monomial(7, {0}, Variance::Dual);
  return shift_indices(prim, 7, 1) + wedge(x0, shift_indices(mu_bar, 7, 1));
}

// ---------------------------------------------------------------------------
// Certification.

template <class T>
struct Certificate {
  bool a1_general_lambda = false;
  T det_q{0};
  bool a1_rank_mu = false;
  int rank_mu = 0;
  bool a1_w0_off_quadric = false;
  T q_w0w0{0};
  bool hitchin_split = false;
  std::string hitchin_status = "not evaluated";
  bool a2_distinct_roots = false;
  T disc_chi{0};
  bool normal_form = false;
  std::string normal_form_status = "not evaluated";
  bool a3_nonzero = false;
  Params6<T> M{};
  Params3<T> K{};
  bool mmk_nonzero = false;
  T mmk_value{0};
  bool a4_xi_general = false;
  T det_q_xi{0};

  bool passed() const {
    return a1_general_lambda && a1_rank_mu && a1_w0_off_quadric && hitchin_split && a2_distinct_roots && normal_form &&
           a3_nonzero && mmk_nonzero && a4_xi_general;
  }

  // Name of the first failing item, or empty.
  std::string first_failure() const {
    if (!a1_general_lambda) return "a1_general_lambda";
    if (!a1_rank_mu) return "a1_rank_mu";
    if (!a1_w0_off_quadric) return "a1_w0_off_quadric";
    if (!hitchin_split) return "hitchin_split";
    if (!a2_distinct_roots) return "a2_distinct_roots";
    if (!normal_form) return "normal_form";
    if (!a3_nonzero) return "a3_nonzero";
    if (!mmk_nonzero) return "mmk_nonzero";
    if (!a4_xi_general) return "a4_xi_general";
    return "";
  }
};

template <class T>
struct Analysis {
  Certificate<T> cert;
  std::optional<OddSplit<T>> split;
  std::optional<HitchinSplit<T>> hitchin;
  std::optional<CubicPoly<T>> chi;
  std::optional<NormalForm<T>> normal;
  std::optional<Multivector<T>> xi;  // frame coordinates
};

template <class T>
Analysis<T> certify(const Multivector<T>& lambda, const Multivector<T>& mu) {
  Analysis<T> an;
  auto& c = an.cert;
  c.det_q = det(lambda_invariant(lambda));
  c.a1_general_lambda = !is_zero(c.det_q);
  c.rank_mu = rank_2form(mu);
  c.a1_rank_mu = c.rank_mu == 6;
  if (!c.a1_general_lambda || !c.a1_rank_mu) return an;

  try {
    an.split = split_odd(lambda, mu);
  } catch (const StructureError& e) {
    if (e.code() != "W0OnQuadric") throw;
    return an;
  }
  c.q_w0w0 = an.split->q_w0w0;
  c.a1_w0_off_quadric = true;

  try {
    an.hitchin = hitchin_split(an.split->lambda_bar);
    c.hitchin_split = true;
    c.hitchin_status = "split";
  } catch (const StructureError& e) {
    c.hitchin_status = e.code();
    return an;
  }

  auto mu_sq = wedge(an.split->mu_bar, an.split->mu_bar);
  try {
    an.chi = chi_poly(an.split->lambda_prime, mu_sq, an.hitchin->A1, an.hitchin->A2);
  } catch (const StructureError& e) {
    c.normal_form_status = e.code();
    return an;
  }
  c.disc_chi = an.chi->discriminant();
  c.a2_distinct_roots = !is_zero(c.disc_chi);
  if (!c.a2_distinct_roots) return an;

  try {
    an.normal = normal_form(an.split->lambda_bar, an.split->lambda_prime, an.split->mu_bar, *an.hitchin);
    c.normal_form = true;
    c.normal_form_status = "ok";
  } catch (const StructureError& e) {
    c.normal_form_status = e.code();
    return an;
  }
  c.M = an.normal->M;
  c.K = an.normal->K;
  c.a3_nonzero = true;
  for (const auto& m : c.M) c.a3_nonzero = c.a3_nonzero && !is_zero(m);
  for (const auto& k : c.K) c.a3_nonzero = c.a3_nonzero && !is_zero(k);
  c.mmk_value = mmk(c.M, c.K);
  c.mmk_nonzero = !is_zero(c.mmk_value);

  an.xi = xi_build(an.split->lambda_bar, an.split->mu_bar);
  c.det_q_xi = det(xi_invariant(*an.xi));
  c.a4_xi_general = !is_zero(c.det_q_xi);
  return an;
}

}  // namespace fivefold
