#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "exterior.hpp"
#include "field.hpp"
#include "linalg.hpp"
#include "motive.hpp"
#include "structure.hpp"
#include "variety.hpp"

namespace fivefold {

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded() : std::runtime_error("counting budget exceeded") {}
};

struct Budget {
  std::optional<std::chrono::steady_clock::time_point> deadline;

  static Budget seconds(double s) {
    Budget b;
    if (s > 0)
      b.deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(s));
    return b;
  }
  void check() const {
    if (deadline && std::chrono::steady_clock::now() > *deadline) throw BudgetExceeded();
  }
};

struct EnumOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  Budget budget;
};

inline unsigned resolve_threads(unsigned t) {
  if (t) return t;
  unsigned h = std::thread::hardware_concurrency();
  return h ? h : 1;
}

inline std::uint64_t gaussian_binomial(int n, int k, std::uint64_t q) {
  if (k < 0 || k > n) return 0;
  // [n k] = [n-1 k-1] + q^k [n-1 k]
  std::vector<std::vector<std::uint64_t>> g(n + 1, std::vector<std::uint64_t>(n + 1, 0));
  for (int m = 0; m <= n; ++m) {
    g[m][0] = 1;
    std::uint64_t qk = 1;
    for (int j = 1; j <= m; ++j) {
      qk *= q;
      g[m][j] = g[m - 1][j - 1] + (j <= m - 1 ? qk * g[m - 1][j] : 0);
    }
  }
  return g[n][k];
}

inline std::uint64_t ipow(std::uint64_t q, int e) {
  std::uint64_t r = 1;
  while (e-- > 0) r *= q;
  return r;
}

// ---------------------------------------------------------------------------
// Subspaces as RREF matrices with entries stored as residues.

template <class F>
using Row = std::array<F, kMaxDim>;
template <class F>
using RowSet = std::array<Row<F>, kMaxDim>;

struct Subspace {
  std::uint8_t k = 0, n = 0;
  std::array<std::uint8_t, kMaxDim * kMaxDim> e{};

  int at(int i, int j) const { return e[i * n + j]; }
  auto operator<=>(const Subspace&) const = default;

  std::vector<int> pivots() const {
    std::vector<int> p;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j)
        if (at(i, j)) {
          p.push_back(j);
          break;
        }
    return p;
  }

  template <class F>
  std::vector<Vec<F>> rows() const {
    std::vector<Vec<F>> r(k, Vec<F>(n, F(0)));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) r[i][j] = F::raw(at(i, j));
    return r;
  }

  template <class F>
  static Subspace from_rowset(const RowSet<F>& rows, int k, int n) {
    Subspace s;
    s.k = static_cast<std::uint8_t>(k);
    s.n = static_cast<std::uint8_t>(n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) s.e[i * n + j] = static_cast<std::uint8_t>(rows[i][j].value());
    return s;
  }

  // Canonical representative of the span; throws if the rows are dependent.
  template <class F>
  static Subspace span(const std::vector<Vec<F>>& vectors, int n) {
    Matrix<F> m = Matrix<F>::from_rows(vectors, n);
    auto ech = rref(m);
    int k = static_cast<int>(vectors.size());
    if (static_cast<int>(ech.pivots.size()) != k) throw std::invalid_argument("Subspace::span: dependent vectors");
    Subspace s;
    s.k = static_cast<std::uint8_t>(k);
    s.n = static_cast<std::uint8_t>(n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) s.e[i * n + j] = static_cast<std::uint8_t>(ech.m(i, j).value());
    return s;
  }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < k; ++i) {
      s += i ? "; " : "";
      for (int j = 0; j < n; ++j) s += (j ? " " : "") + std::to_string(at(i, j));
    }
    return s + "]";
  }
};

inline bool is_rref(const Subspace& s) {
  int last = -1;
  auto piv = s.pivots();
  if (static_cast<int>(piv.size()) != s.k) return false;
  for (int i = 0; i < s.k; ++i) {
    if (piv[i] <= last || s.at(i, piv[i]) != 1) return false;
    for (int r = 0; r < s.k; ++r)
      if (r != i && s.at(r, piv[i]) != 0) return false;
    last = piv[i];
  }
  return true;
}

// ---------------------------------------------------------------------------
// Enumeration: pivot patterns outside, free-entry odometers inside.

struct PivotPattern {
  int k = 0, n = 0;
  std::array<int, kMaxDim> pivot{};
  std::array<std::array<int, kMaxDim>, kMaxDim> free{};
  std::array<int, kMaxDim> nfree{};
};

inline std::vector<PivotPattern> pivot_patterns(int k, int n) {
  if (k < 0 || k > n || n > 7) throw std::invalid_argument("pivot_patterns: need 0 <= k <= n <= 7");
  std::vector<PivotPattern> out;
  for (Mask m : subsets(n).by_grade[k]) {
    PivotPattern p;
    p.k = k;
    p.n = n;
    auto idx = mask_indices(m);
    for (int i = 0; i < k; ++i) {
      p.pivot[i] = idx[i];
      for (int j = idx[i] + 1; j < n; ++j)
        if (!(m >> j & 1)) p.free[i][p.nfree[i]++] = j;
    }
    out.push_back(p);
  }
  return out;
}

namespace detail {

template <class F, class V>
struct Walker {
  static constexpr std::uint32_t P = F::modulus;
  const PivotPattern* pat = nullptr;
  V* vis = nullptr;
  const Budget* budget = nullptr;
  RowSet<F> rows{};
  std::uint32_t tick = 0;

  void reset_row(int i) {
    rows[i].fill(F(0));
    rows[i][pat->pivot[i]] = F(1);
  }

  // rows[0..level-1] are fixed; runs the odometer on row `level`.
  void descend(int level) {
    reset_row(level);
    const int nf = pat->nfree[level];
    auto& row = rows[level];
    std::array<std::uint32_t, kMaxDim> dig{};
    for (;;) {
      if ((++tick & 0x3fff) == 0) budget->check();
      if (vis->visit(level, rows) && level + 1 < pat->k) descend(level + 1);
      int j = 0;
      for (; j < nf; ++j) {
        int col = pat->free[level][j];
        if (++dig[j] < P) {
          row[col] = F::raw(dig[j]);
          break;
        }
        dig[j] = 0;
        row[col] = F(0);
      }
      if (j == nf) break;
    }
  }

  void run(std::uint64_t code) {
    reset_row(0);
    for (int j = 0; j < pat->nfree[0]; ++j) {
      rows[0][pat->free[0][j]] = F::raw(static_cast<std::uint32_t>(code % P));
      code /= P;
    }
    if (vis->visit(0, rows) && pat->k > 1) descend(1);
  }
};

struct Task {
  int pattern;
  std::uint64_t begin, end;
};

}  // namespace detail

// Runs a visitor over all k-subspaces of F^n. The visitor sees each partial
// RREF basis after every completed row: visit(level, rows) returns whether to
// go deeper; at level k-1 the rows form a complete basis. Each worker owns a
// copy of `proto`; copies are merged by V::merge and then V::finish runs.
template <class F, class V>
V enumerate(int k, int n, const V& proto, const EnumOptions& opt = {}) {
  if (k < 1) throw std::invalid_argument("enumerate: k must be positive");
  auto patterns = pivot_patterns(k, n);
  constexpr std::uint64_t P = F::modulus;
  std::vector<detail::Task> tasks;
  const std::uint64_t chunk = 64;
  for (int i = 0; i < static_cast<int>(patterns.size()); ++i) {
    std::uint64_t total = ipow(P, patterns[i].nfree[0]);
    for (std::uint64_t b = 0; b < total; b += chunk) tasks.push_back({i, b, std::min(total, b + chunk)});
  }

  unsigned nthreads = std::min<unsigned>(resolve_threads(opt.threads), static_cast<unsigned>(tasks.size()));
  std::vector<V> parts(std::max(1u, nthreads), proto);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&](unsigned w) {
    detail::Walker<F, V> walker;
    walker.vis = &parts[w];
    walker.budget = &opt.budget;
    try {
      for (;;) {
        if (stop.load(std::memory_order_relaxed)) return;
        std::size_t t = next.fetch_add(1);
        if (t >= tasks.size()) return;
        walker.pat = &patterns[tasks[t].pattern];
        for (std::uint64_t c = tasks[t].begin; c < tasks[t].end; ++c) walker.run(c);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
      stop = true;
    }
  };

  if (nthreads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nthreads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  V result = std::move(parts[0]);
  for (std::size_t w = 1; w < parts.size(); ++w) result.merge(std::move(parts[w]));
  result.finish();
  return result;
}

template <class F>
using RowPrune = std::function<bool(int level, const RowSet<F>& rows)>;

namespace detail {

template <class F>
struct CollectVisitor {
  int k = 0, n = 0;
  RowPrune<F> prune;
  bool keep = true;
  std::uint64_t count = 0;
  std::vector<Subspace> found;

  bool visit(int level, const RowSet<F>& rows) {
    if (prune && !prune(level, rows)) return false;
    if (level == k - 1) {
      ++count;
      if (keep) found.push_back(Subspace::from_rowset(rows, k, n));
    }
    return true;
  }
  void merge(CollectVisitor&& o) {
    count += o.count;
    found.insert(found.end(), o.found.begin(), o.found.end());
  }
  void finish() { std::sort(found.begin(), found.end()); }
};

}  // namespace detail

// All k-subspaces of F^n surviving the (monotone) prune predicate, sorted.
template <class F>
std::vector<Subspace> enum_subspaces(int k, int n, RowPrune<F> prune = {}, const EnumOptions& opt = {}) {
  if (k == 0) {
    Subspace z;
    z.n = static_cast<std::uint8_t>(n);
    return {z};
  }
  detail::CollectVisitor<F> v{k, n, std::move(prune), true, 0, {}};
  return enumerate<F>(k, n, v, opt).found;
}

template <class F>
std::uint64_t count_subspaces(int k, int n, RowPrune<F> prune = {}, const EnumOptions& opt = {}) {
  if (k == 0) return 1;
  detail::CollectVisitor<F> v{k, n, std::move(prune), false, 0, {}};
  return enumerate<F>(k, n, v, opt).count;
}

// Runtime-q entry point; throws UnsupportedPrime.
inline std::uint64_t count_subspaces_q(int k, int n, long long q, const EnumOptions& opt = {}) {
  return with_prime(q, [&](auto f) {
    using F = decltype(f);
    return count_subspaces<F>(k, n, {}, opt);
  });
}

// ---------------------------------------------------------------------------
// Dense forms with table-driven contraction for the hot loops.

struct ContractEntry {
  std::uint8_t in, out, k;
  bool neg;
};

namespace detail {

inline std::vector<ContractEntry> build_contract_table(int n, int p) {
  std::vector<ContractEntry> t;
  const auto& st = subsets(n);
  for (std::size_t i = 0; i < st.by_grade[p].size(); ++i) {
    Mask m = st.by_grade[p][i];
    int pos = 0;
    for (int k : mask_indices(m)) {
      Mask rest = m & ~(Mask{1} << k);
      t.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(st.index[rest]), static_cast<std::uint8_t>(k),
                   (pos & 1) != 0});
      ++pos;
    }
  }
  return t;
}

}  // namespace detail

inline const std::vector<ContractEntry>& contract_table(int n, int p) {
  static const auto tables = [] {
    std::array<std::array<std::vector<ContractEntry>, kMaxDim + 1>, kMaxDim + 1> t;
    for (int n = 1; n <= kMaxDim; ++n)
      for (int p = 1; p <= n; ++p) t[n][p] = detail::build_contract_table(n, p);
    return t;
  }();
  return tables.at(n).at(p);
}

template <class F>
struct Dense {
  int n = 0, p = 0;
  std::array<F, 70> c{};

  int size() const { return binomial(n, p); }
  bool is_zero() const {
    for (int i = 0, s = size(); i < s; ++i)
      if (!c[i].is_zero()) return false;
    return true;
  }
};

template <class F>
Dense<F> to_dense(const Multivector<F>& m) {
  Dense<F> d;
  d.n = m.dim();
  d.p = m.grade();
  for (int i = 0; i < m.size(); ++i) d.c[i] = m.at(i);
  return d;
}

// out = in ⌟ v, with the same sign convention as contract(Multivector, Vec).
template <class F>
void contract_into(const Dense<F>& in, const Row<F>& v, Dense<F>& out) {
  out.n = in.n;
  out.p = in.p - 1;
  std::fill_n(out.c.begin(), binomial(in.n, in.p - 1), F(0));
  for (const auto& e : contract_table(in.n, in.p)) {
    const F& a = in.c[e.in];
    const F& b = v[e.k];
    if (a.is_zero() || b.is_zero()) continue;
    if (e.neg)
      out.c[e.out] -= a * b;
    else
      out.c[e.out] += a * b;
  }
}

template <class F>
F dot_row(const Row<F>& a, const Row<F>& b, int n) {
  F s(0);
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class F>
Row<F> covector_row(const Dense<F>& d) {
  Row<F> r{};
  for (int i = 0; i < d.n; ++i) r[i] = d.c[i];
  return r;
}

template <class F>
Row<F> to_row(const Vec<F>& v) {
  Row<F> r{};
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i];
  return r;
}

template <class F>
Vec<F> to_vec(const Row<F>& r, int n) {
  return Vec<F>(r.begin(), r.begin() + n);
}

// Skew matrix of a 2-form as rows: m[i][j] = ω(e_i, e_j).
template <class F>
std::array<Row<F>, kMaxDim> skew_rows(const Multivector<F>& w) {
  std::array<Row<F>, kMaxDim> m{};
  auto a = to_skew(w);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

// ω(u, ·) as a covector.
template <class F>
Row<F> skew_apply(const std::array<Row<F>, kMaxDim>& m, const Row<F>& u, int n) {
  Row<F> r{};
  for (int i = 0; i < n; ++i) {
    if (u[i].is_zero()) continue;
    for (int j = 0; j < n; ++j) r[j] += u[i] * m[i][j];
  }
  return r;
}

// Rank of up to 8 vectors of length n, destroying the input.
template <class F>
int small_rank(std::array<Row<F>, kMaxDim>& a, int rows, int n) {
  int r = 0;
  for (int c = 0; c < n && r < rows; ++c) {
    int piv = -1;
    for (int i = r; i < rows; ++i)
      if (!a[i][c].is_zero()) {
        piv = i;
        break;
      }
    if (piv < 0) continue;
    std::swap(a[piv], a[r]);
    F inv = a[r][c].inverse();
    for (int i = r + 1; i < rows; ++i) {
      if (a[i][c].is_zero()) continue;
      F f = a[i][c] * inv;
      for (int j = c; j < n; ++j) a[i][j] -= f * a[r][j];
    }
    ++r;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Membership predicates.

template <class F>
bool annihilated_by(const Multivector<F>& form, const std::vector<Vec<F>>& basis) {
  int k = static_cast<int>(basis.size());
  if (k > form.grade()) throw std::invalid_argument("annihilated_by: subspace dimension exceeds the degree");
  auto kv = decomposable(basis, form.dim(), opposite(form.variance()));
  return contract(form, kv).is_zero();
}

template <class F>
bool isotropic_for(const Multivector<F>& form, const std::vector<Vec<F>>& basis) {
  int k = static_cast<int>(basis.size());
  if (k < form.grade()) throw std::invalid_argument("isotropic_for: subspace dimension below the degree");
  return pullback(form, basis).is_zero();
}

template <class F>
bool annihilated_by(const Multivector<F>& form, const Subspace& U) {
  return annihilated_by(form, U.rows<F>());
}

template <class F>
bool isotropic_for(const Multivector<F>& form, const Subspace& U) {
  return isotropic_for(form, U.rows<F>());
}

template <class F>
int span_rank(const std::vector<Vec<F>>& v, int n) {
  if (v.empty()) return 0;
  return rank(Matrix<F>::from_rows(v, n));
}

// dim(U ∩ A) for subspaces given by bases in a common space.
template <class F>
int intersection_dim(const std::vector<Vec<F>>& U, const std::vector<Vec<F>>& A, int n) {
  auto all = U;
  all.insert(all.end(), A.begin(), A.end());
  return static_cast<int>(U.size() + A.size()) - span_rank(all, n);
}

// The data of a certified instance in the adapted frame: W has w₀ = e₀ and
// W̄ = span(e₁..e₆), whose vectors are written with 6 coordinates.
template <std::uint32_t P>
struct Geometry {
  using F = Zp<P>;
  Multivector<F> lambda, mu, xi;
  Multivector<F> lambda_vee;  // grade-3 polyvector, read as a 3-form on W∨
  Multivector<F> lambda_bar, lambda_prime, mu_bar, mu_sq;
  std::vector<Vec<F>> A1, A2;
  std::optional<Multivector<F>> nu;  // frame coordinates
  std::vector<Vec<F>> frame;         // frame vectors in input coordinates

  static Geometry from_analysis(const Analysis<F>& an) {
    if (!an.cert.passed()) throw std::invalid_argument("geometry needs a certified instance (failed: " + an.cert.first_failure() + ")");
    Geometry g;
    const auto& s = *an.split;
    g.frame = s.frame;
    g.lambda = s.lambda_frame;
    g.mu = s.mu_frame;
    g.xi = *an.xi;
    g.lambda_vee = lambda_dual(g.lambda);
    g.lambda_bar = s.lambda_bar;
    g.lambda_prime = s.lambda_prime;
    g.mu_bar = s.mu_bar;
    g.mu_sq = wedge(s.mu_bar, s.mu_bar);
    g.A1 = an.hitchin->A1;
    g.A2 = an.hitchin->A2;
    return g;
  }

  // ν in input coordinates.
  void set_nu(const Multivector<F>& nu_input) {
    if (nu_input.dim() != 7 || nu_input.grade() != 3) throw std::invalid_argument("nu must be a 3-form on W");
    nu = pullback(nu_input, frame);
  }
  void set_nu_frame(const Multivector<F>& nu_frame) { nu = nu_frame; }

  // ν(w₀, ·, ·) on W̄.
  Multivector<F> nu_w0_bar() const {
    if (!nu) throw std::logic_error("nu is not set");
    Vec<F> e0(7, F(0));
    e0[0] = F(1);
    return drop_index0(contract(*nu, e0));
  }
};

template <class F>
bool dlm_condition(const Multivector<F>& lambda_bar, const Multivector<F>& mu_bar, const std::vector<Vec<F>>& U) {
  auto c = contract(lambda_bar, decomposable(U, 6, Variance::Primal)).as_vec();
  std::vector<Vec<F>> rows = {contract(mu_bar, U[0]).as_vec(), contract(mu_bar, U[1]).as_vec()};
  int r = span_rank(rows, 6);
  rows.push_back(c);
  return span_rank(rows, 6) == r;
}

template <std::uint32_t P>
bool member(VarietyId v, const Subspace& U, const Geometry<P>& g) {
  using F = Zp<P>;
  auto shape = variety_shape(v);
  if (v == VarietyId::Z_scroll) throw std::invalid_argument("member: Z points are flags, use member_flag");
  if (U.k != shape.k || U.n != shape.n)
    throw std::invalid_argument("member: " + std::string(variety_name(v)) + " expects " + std::to_string(shape.k) +
                                "-subspaces of a " + std::to_string(shape.n) + "-space");
  auto B = U.rows<F>();
  switch (v) {
    case VarietyId::X5: return isotropic_for(g.mu, B) && annihilated_by(g.lambda, B);
    case VarietyId::X4:
      if (!g.nu) throw std::invalid_argument("member: X4 needs nu");
      return isotropic_for(g.mu, B) && annihilated_by(g.lambda, B) && isotropic_for(*g.nu, B);
    case VarietyId::LGr3W_odd: return isotropic_for(g.mu, B);
    case VarietyId::LGr3Wbar: return isotropic_for(g.mu_bar, B);
    case VarietyId::LGr3Wbar_lambda: return isotropic_for(g.mu_bar, B) && isotropic_for(g.lambda_bar, B);
    case VarietyId::F_flag: return isotropic_for(g.mu_bar, B) && annihilated_by(g.lambda_bar, B);
    case VarietyId::Sigma:
      if (!g.nu) throw std::invalid_argument("member: Sigma needs nu");
      return isotropic_for(g.mu_bar, B) && annihilated_by(g.lambda_bar, B) && isotropic_for(g.nu_w0_bar(), B);
    case VarietyId::S_surface:
      return isotropic_for(g.lambda_bar, B) && isotropic_for(g.lambda_prime, B) && isotropic_for(g.mu_sq, B);
    case VarietyId::GrXi2W: return annihilated_by(g.xi, B);
    case VarietyId::GrLambda5W: return isotropic_for(g.lambda, B);
    case VarietyId::Dlm: return isotropic_for(g.mu_bar, B) && dlm_condition(g.lambda_bar, g.mu_bar, B);
    case VarietyId::LGr2Wbar: return isotropic_for(g.mu_bar, B);
    case VarietyId::Qdual_lambda: return rank_2form(contract(g.lambda_vee, B[0])) < 6;
    case VarietyId::ZeroLocus_gr26: return annihilated_by(g.lambda_bar, B);
    case VarietyId::ZeroLocus_gr46: return isotropic_for(g.lambda_bar, B);
    case VarietyId::Z_scroll: break;
  }
  return false;
}

// Z as flags (U3 ⊂ U4) in W̄.
template <std::uint32_t P>
bool member_flag(const Subspace& U3, const Subspace& U4, const Geometry<P>& g) {
  using F = Zp<P>;
  if (U3.k != 3 || U4.k != 4 || U3.n != 6 || U4.n != 6) throw std::invalid_argument("member_flag: expects 3- and 4-subspaces of W̄");
  if (!member(VarietyId::S_surface, U4, g)) return false;
  auto b3 = U3.rows<F>(), b4 = U4.rows<F>();
  auto all = b4;
  all.insert(all.end(), b3.begin(), b3.end());
  if (span_rank(all, 6) != 4) return false;
  return isotropic_for(g.mu_bar, b3);
}

// ---------------------------------------------------------------------------
// λ̂ : ∧³U₄ → U₄⊥ on the hyperplane section of Gr(4,W).

template <class F>
Matrix<F> lambda_hat_matrix(const std::vector<Vec<F>>& U4, const Multivector<F>& lambda) {
  if (U4.size() != 4 || lambda.grade() != 4 || lambda.dim() != 7) throw std::invalid_argument("lambda_hat_matrix: expects U4 in a 7-space and a 4-form");
  if (span_rank(U4, 7) != 4) throw std::invalid_argument("lambda_hat_matrix: basis is dependent");
  if (!is_zero(eval(lambda, U4))) throw std::domain_error("lambda_hat_matrix: U4 is not on the hyperplane section");
  auto perp = kernel(Matrix<F>::from_rows(U4, 7));  // basis of U4⊥ in W∨
  Matrix<F> basis(7, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 7; ++i) basis(i, j) = perp[j][i];
  static const int triples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  Matrix<F> m(3, 4);
  for (int t = 0; t < 4; ++t) {
    std::vector<Vec<F>> w = {U4[triples[t][0]], U4[triples[t][1]], U4[triples[t][2]]};
    auto c = contract(lambda, decomposable(w, 7, Variance::Primal)).as_vec();
    for (const auto& u : U4)
      if (!is_zero(dot(c, u))) throw std::logic_error("lambda_hat_matrix: image does not annihilate U4");
    auto x = solve(basis, c);
    if (!x) throw std::logic_error("lambda_hat_matrix: image outside U4-perp");
    for (int j = 0; j < 3; ++j) m(j, t) = (*x)[j];
  }
  return m;
}

// U₄ = k·w₀ ⊕ Ū₃ in frame coordinates.
template <class F>
std::vector<Vec<F>> cone_over(const std::vector<Vec<F>>& U3bar) {
  std::vector<Vec<F>> U4;
  Vec<F> e0(7, F(0));
  e0[0] = F(1);
  U4.push_back(e0);
  for (const auto& u : U3bar) {
    Vec<F> v(7, F(0));
    for (int i = 0; i < 6; ++i) v[i + 1] = u[i];
    U4.push_back(v);
  }
  return U4;
}

// ---------------------------------------------------------------------------
// Visitors for the counting runs.

// 3-subspaces of W, μ-isotropy pruned row by row; counts the odd symplectic
// Grassmannian, X⁵ for the given 4-form and, with ν, X⁴.
template <std::uint32_t P>
struct IsotropicW3Visitor {
  using F = Zp<P>;
  std::array<Row<F>, kMaxDim> mu_m{};
  Dense<F> lam;
  std::optional<Dense<F>> nu;
  bool keep = false;

  std::array<Row<F>, 3> mu_u{};
  Dense<F> l1, l2, l3, n1, n2, n3;
  std::uint64_t odd = 0, x5 = 0, x4 = 0;
  std::vector<Subspace> x5_points;

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    if (level == 0) {
      mu_u[0] = skew_apply(mu_m, u, 7);
      contract_into(lam, u, l1);
      return true;
    }
    if (level == 1) {
      if (!dot_row(mu_u[0], u, 7).is_zero()) return false;
      mu_u[1] = skew_apply(mu_m, u, 7);
      contract_into(l1, u, l2);
      return true;
    }
    if (!dot_row(mu_u[0], u, 7).is_zero() || !dot_row(mu_u[1], u, 7).is_zero()) return false;
    ++odd;
    contract_into(l2, u, l3);
    if (!l3.is_zero()) return false;
    ++x5;
    if (nu) {
      contract_into(*nu, r[0], n1);
      contract_into(n1, r[1], n2);
      contract_into(n2, r[2], n3);
      if (n3.c[0].is_zero()) ++x4;
    }
    if (keep) x5_points.push_back(Subspace::from_rowset(r, 3, 7));
    return false;
  }
  void merge(IsotropicW3Visitor&& o) {
    odd += o.odd;
    x5 += o.x5;
    x4 += o.x4;
    x5_points.insert(x5_points.end(), o.x5_points.begin(), o.x5_points.end());
  }
  void finish() { std::sort(x5_points.begin(), x5_points.end()); }
};

// Lagrangian 3-subspaces of W̄ and the λ̄ hyperplane section.
template <std::uint32_t P>
struct LagrangianVisitor {
  using F = Zp<P>;
  std::array<Row<F>, kMaxDim> mu_m{};
  Dense<F> lam;
  bool keep = true;

  std::array<Row<F>, 3> mu_u{};
  Dense<F> l1, l2;
  std::uint64_t lagrangian = 0, section = 0;
  std::vector<Subspace> section_points;

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    for (int j = 0; j < level; ++j)
      if (!dot_row(mu_u[j], u, 6).is_zero()) return false;
    if (level < 2) {
      mu_u[level] = skew_apply(mu_m, u, 6);
      contract_into(level == 0 ? lam : l1, u, level == 0 ? l1 : l2);
      return true;
    }
    ++lagrangian;
    if (dot_row(covector_row(l2), u, 6).is_zero()) {
      ++section;
      if (keep) section_points.push_back(Subspace::from_rowset(r, 3, 6));
    }
    return false;
  }
  void merge(LagrangianVisitor&& o) {
    lagrangian += o.lagrangian;
    section += o.section;
    section_points.insert(section_points.end(), o.section_points.begin(), o.section_points.end());
  }
  void finish() { std::sort(section_points.begin(), section_points.end()); }
};

// All 2-subspaces of W̄: isotropic planes, F, D, the λ̄ zero locus, Σ and the
// direct count of pairs Ū₂ ⊂ Ū₃ with Ū₃ on the Lagrangian section.
template <std::uint32_t P>
struct PlaneVisitor {
  using F = Zp<P>;
  std::array<Row<F>, kMaxDim> mu_m{};
  Dense<F> lam;
  std::optional<std::array<Row<F>, kMaxDim>> nu_m;

  Row<F> mu0{};
  Dense<F> l1, l2;
  std::uint64_t isotropic = 0, flag = 0, dlm = 0, zero26 = 0, sigma = 0, pairs = 0;
  std::vector<Subspace> flag_points, dlm_points;

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    if (level == 0) {
      mu0 = skew_apply(mu_m, u, 6);
      contract_into(lam, u, l1);
      return true;
    }
    contract_into(l1, u, l2);
    const Row<F> c = covector_row(l2);
    const bool ann = l2.is_zero();
    if (ann) ++zero26;
    if (!dot_row(mu0, u, 6).is_zero()) return false;
    ++isotropic;
    const Row<F> mu1 = skew_apply(mu_m, u, 6);
    if (ann) {
      ++flag;
      flag_points.push_back(Subspace::from_rowset(r, 2, 6));
      if (nu_m && dot_row(skew_apply(*nu_m, r[0], 6), u, 6).is_zero()) ++sigma;
    }
    std::array<Row<F>, kMaxDim> a{};
    a[0] = mu0;
    a[1] = mu1;
    a[2] = c;
    if (small_rank(a, 3, 6) == 2) {
      ++dlm;
      dlm_points.push_back(Subspace::from_rowset(r, 2, 6));
    }
    pairs += lagrangian_extensions(r, mu1, c);
    return false;
  }

  // Lagrangian Ū₃ ⊃ Ū₂ = span(r0, r1) on which λ̄ vanishes, enumerated line by
  // line in the 2-dimensional quotient Ū₂⊥/Ū₂.
  std::uint64_t lagrangian_extensions(const RowSet<F>& r, const Row<F>& mu1, const Row<F>& c) const {
    Matrix<F> m(2, 6);
    for (int j = 0; j < 6; ++j) {
      m(0, j) = mu0[j];
      m(1, j) = mu1[j];
    }
    std::vector<Vec<F>> span = {to_vec(r[0], 6), to_vec(r[1], 6)};
    std::vector<Vec<F>> comp;
    for (const auto& v : kernel(m)) {
      auto trial = span;
      trial.push_back(v);
      if (span_rank(trial, 6) == static_cast<int>(trial.size())) {
        span = trial;
        comp.push_back(v);
      }
    }
    if (comp.size() != 2) throw std::logic_error("isotropic plane with unexpected orthogonal");
    const Vec<F> cv = to_vec(c, 6);
    std::uint64_t n = 0;
    auto test = [&](const Vec<F>& v) {
      if (is_zero(dot(cv, v))) ++n;
    };
    test(comp[0]);
    for (std::uint32_t a = 0; a < P; ++a) {
      Vec<F> v(6);
      for (int j = 0; j < 6; ++j) v[j] = F::raw(a) * comp[0][j] + comp[1][j];
      test(v);
    }
    return n;
  }

  void merge(PlaneVisitor&& o) {
    isotropic += o.isotropic;
    flag += o.flag;
    dlm += o.dlm;
    zero26 += o.zero26;
    sigma += o.sigma;
    pairs += o.pairs;
    flag_points.insert(flag_points.end(), o.flag_points.begin(), o.flag_points.end());
    dlm_points.insert(dlm_points.end(), o.dlm_points.begin(), o.dlm_points.end());
  }
  void finish() {
    std::sort(flag_points.begin(), flag_points.end());
    std::sort(dlm_points.begin(), dlm_points.end());
  }
};

// λ̄-isotropic 4-subspaces of W̄ and the surface S inside them.
template <std::uint32_t P>
struct FourSpaceVisitor {
  using F = Zp<P>;
  Dense<F> lam, lprime, nsq;

  Dense<F> a0, a1, c01, c02, c12, p1, p2, p3, q1, q2, q3;
  std::uint64_t zero46 = 0, surface = 0;
  std::vector<Subspace> surface_points;

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    switch (level) {
      case 0:
        contract_into(lam, u, a0);
        contract_into(lprime, u, p1);
        contract_into(nsq, u, q1);
        return true;
      case 1:
        contract_into(lam, u, a1);
        contract_into(a0, u, c01);
        contract_into(p1, u, p2);
        contract_into(q1, u, q2);
        return true;
      case 2:
        if (!dot_row(covector_row(c01), u, 6).is_zero()) return false;
        contract_into(a0, u, c02);
        contract_into(a1, u, c12);
        contract_into(p2, u, p3);
        contract_into(q2, u, q3);
        return true;
      default:
        if (!dot_row(covector_row(c01), u, 6).is_zero() || !dot_row(covector_row(c02), u, 6).is_zero() ||
            !dot_row(covector_row(c12), u, 6).is_zero())
          return false;
        ++zero46;
        if (dot_row(covector_row(p3), u, 6).is_zero() && dot_row(covector_row(q3), u, 6).is_zero()) {
          ++surface;
          surface_points.push_back(Subspace::from_rowset(r, 4, 6));
        }
        return false;
    }
  }
  void merge(FourSpaceVisitor&& o) {
    zero46 += o.zero46;
    surface += o.surface;
    surface_points.insert(surface_points.end(), o.surface_points.begin(), o.surface_points.end());
  }
  void finish() { std::sort(surface_points.begin(), surface_points.end()); }
};

// 2-subspaces of a 7-space annihilated by a 3-form (ξ on W, or λ∨ on W∨).
// The first row u₀ survives only if the 2-form ⌟u₀ has rank below 6, since
// otherwise its kernel is the line through u₀.
template <std::uint32_t P>
struct AnnihilatedPlaneVisitor {
  using F = Zp<P>;
  Dense<F> form;

  std::array<Row<F>, kMaxDim> m{};
  Dense<F> w;
  std::uint64_t count = 0;
  std::vector<Subspace> points;

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    if (level == 0) {
      contract_into(form, u, w);
      const auto& st = subsets(7).by_grade[2];
      for (auto& row : m) row.fill(F(0));
      for (int i = 0; i < 21; ++i) {
        auto ix = mask_indices(st[i]);
        m[ix[0]][ix[1]] = w.c[i];
        m[ix[1]][ix[0]] = -w.c[i];
      }
      auto a = m;
      return small_rank(a, 7, 7) < 6;
    }
    for (int j = 0; j < 7; ++j) {
      F s(0);
      for (int i = 0; i < 7; ++i) s += m[j][i] * u[i];
      if (!s.is_zero()) return false;
    }
    ++count;
    points.push_back(Subspace::from_rowset(r, 2, 7));
    return false;
  }
  void merge(AnnihilatedPlaneVisitor&& o) {
    count += o.count;
    points.insert(points.end(), o.points.begin(), o.points.end());
  }
  void finish() { std::sort(points.begin(), points.end()); }
};

// Lines w∨ in W∨ with rank(λ∨⌟w∨) < 6.
template <std::uint32_t P>
struct QuadricVisitor {
  using F = Zp<P>;
  Dense<F> lam_vee;

  Dense<F> w;
  std::uint64_t count = 0;

  bool visit(int, const RowSet<F>& r) {
    contract_into(lam_vee, r[0], w);
    std::array<Row<F>, kMaxDim> m{};
    const auto& st = subsets(7).by_grade[2];
    for (int i = 0; i < 21; ++i) {
      auto ix = mask_indices(st[i]);
      m[ix[0]][ix[1]] = w.c[i];
      m[ix[1]][ix[0]] = -w.c[i];
    }
    if (small_rank(m, 7, 7) < 6) ++count;
    return false;
  }
  void merge(QuadricVisitor&& o) { count += o.count; }
  void finish() {}
};

// Rank histogram of λ̂ over the hyperplane section of Gr(4,W).
template <std::uint32_t P>
struct SectionRankVisitor {
  using F = Zp<P>;
  Dense<F> lam;

  Dense<F> b0, b1, b01, b02, b12, b012, c013, c023, c123;
  std::uint64_t section = 0;
  std::array<std::uint64_t, 5> hist{};

  bool visit(int level, const RowSet<F>& r) {
    const auto& u = r[level];
    switch (level) {
      case 0: contract_into(lam, u, b0); return true;
      case 1:
        contract_into(lam, u, b1);
        contract_into(b0, u, b01);
        return true;
      case 2:
        contract_into(b01, u, b012);
        contract_into(b0, u, b02);
        contract_into(b1, u, b12);
        return true;
      default: {
        if (!dot_row(covector_row(b012), u, 7).is_zero()) return false;
        ++section;
        contract_into(b01, u, c013);
        contract_into(b02, u, c023);
        contract_into(b12, u, c123);
        std::array<Row<F>, kMaxDim> a{};
        a[0] = covector_row(b012);
        a[1] = covector_row(c013);
        a[2] = covector_row(c023);
        a[3] = covector_row(c123);
        ++hist[small_rank(a, 4, 7)];
        return false;
      }
    }
  }
  void merge(SectionRankVisitor&& o) {
    section += o.section;
    for (int i = 0; i < 5; ++i) hist[i] += o.hist[i];
  }
  void finish() {}
};

// ---------------------------------------------------------------------------
// Survey: lazily runs the enumerations and serves counts for every variety.

struct ZFlag {
  Subspace U3, U4;
  auto operator<=>(const ZFlag&) const = default;
};

template <std::uint32_t P>
class Survey {
 public:
  using F = Zp<P>;

  Survey(Geometry<P> g, EnumOptions opt = {}) : g_(std::move(g)), opt_(opt) {}

  const Geometry<P>& geometry() const { return g_; }
  EnumOptions& options() { return opt_; }

  const IsotropicW3Visitor<P>& isotropic_w3() {
    if (!w3_) {
      IsotropicW3Visitor<P> v;
      v.mu_m = skew_rows(g_.mu);
      v.lam = to_dense(g_.lambda);
      if (g_.nu) v.nu = to_dense(*g_.nu);
      v.keep = true;
      w3_ = timed(w3_seconds_, [&] { return enumerate<F>(3, 7, v, opt_); });
    }
    return *w3_;
  }

  const LagrangianVisitor<P>& lagrangian() {
    if (!lag_) {
      LagrangianVisitor<P> v;
      v.mu_m = skew_rows(g_.mu_bar);
      v.lam = to_dense(g_.lambda_bar);
      lag_ = timed(lag_seconds_, [&] { return enumerate<F>(3, 6, v, opt_); });
    }
    return *lag_;
  }

  const PlaneVisitor<P>& planes() {
    if (!planes_) {
      PlaneVisitor<P> v;
      v.mu_m = skew_rows(g_.mu_bar);
      v.lam = to_dense(g_.lambda_bar);
      if (g_.nu) v.nu_m = skew_rows(g_.nu_w0_bar());
      planes_ = timed(planes_seconds_, [&] { return enumerate<F>(2, 6, v, opt_); });
    }
    return *planes_;
  }

  const FourSpaceVisitor<P>& four_spaces() {
    if (!four_) {
      FourSpaceVisitor<P> v;
      v.lam = to_dense(g_.lambda_bar);
      v.lprime = to_dense(g_.lambda_prime);
      v.nsq = to_dense(g_.mu_sq);
      four_ = timed(four_seconds_, [&] { return enumerate<F>(4, 6, v, opt_); });
    }
    return *four_;
  }

  const AnnihilatedPlaneVisitor<P>& xi_planes() {
    if (!xi_) {
      AnnihilatedPlaneVisitor<P> v;
      v.form = to_dense(g_.xi);
      xi_ = timed(xi_seconds_, [&] { return enumerate<F>(2, 7, v, opt_); });
    }
    return *xi_;
  }

  // Gr_λ(5,W) through U₅ ↦ U₅⊥ ∈ Gr(2,W∨).
  const AnnihilatedPlaneVisitor<P>& lambda_dual_planes() {
    if (!ldual_) {
      AnnihilatedPlaneVisitor<P> v;
      v.form = to_dense(g_.lambda_vee);
      ldual_ = timed(ldual_seconds_, [&] { return enumerate<F>(2, 7, v, opt_); });
    }
    return *ldual_;
  }

  std::uint64_t quadric_count() {
    if (!quadric_) {
      QuadricVisitor<P> v;
      v.lam_vee = to_dense(g_.lambda_vee);
      quadric_ = timed(quadric_seconds_, [&] { return enumerate<F>(1, 7, v, opt_).count; });
    }
    return *quadric_;
  }

  // Z as flags over the points of S; fiber sizes recorded per S-point.
  const std::vector<ZFlag>& z_flags() {
    if (!z_) {
      z_ = timed(z_seconds_, [&] {
        std::vector<ZFlag> flags;
        fibers_.clear();
        const auto sub = enum_subspaces<F>(3, 4);
        auto mu_m = skew_rows(g_.mu_bar);
        for (const auto& U4 : four_spaces().surface_points) {
          opt_.budget.check();
          auto b4 = U4.template rows<F>();
          std::uint64_t fiber = 0;
          for (const auto& C : sub) {
            std::vector<Vec<F>> b3(3, Vec<F>(6, F(0)));
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 4; ++j)
                for (int c = 0; c < 6; ++c) b3[i][c] += F::raw(C.at(i, j)) * b4[j][c];
            bool iso = true;
            for (int i = 0; i < 3 && iso; ++i) {
              auto w = skew_apply(mu_m, to_row(b3[i]), 6);
              for (int j = i + 1; j < 3 && iso; ++j) iso = dot_row(w, to_row(b3[j]), 6).is_zero();
            }
            if (!iso) continue;
            ++fiber;
            flags.push_back({Subspace::span(b3, 6), U4});
          }
          fibers_.push_back(fiber);
        }
        std::sort(flags.begin(), flags.end());
        return flags;
      });
    }
    return *z_;
  }
  const std::vector<std::uint64_t>& z_fibers() {
    z_flags();
    return fibers_;
  }

  CountReport count(VarietyId v) {
    CountReport r;
    r.variety = v;
    r.q = P;
    switch (v) {
      case VarietyId::X5: r.observed = isotropic_w3().x5, r.seconds = w3_seconds_; break;
      case VarietyId::LGr3W_odd: r.observed = isotropic_w3().odd, r.seconds = w3_seconds_; break;
      case VarietyId::X4:
        if (!g_.nu) throw std::invalid_argument("count: X4 needs nu");
        r.observed = isotropic_w3().x4, r.seconds = w3_seconds_;
        break;
      case VarietyId::LGr3Wbar: r.observed = lagrangian().lagrangian, r.seconds = lag_seconds_; break;
      case VarietyId::LGr3Wbar_lambda: r.observed = lagrangian().section, r.seconds = lag_seconds_; break;
      case VarietyId::F_flag: r.observed = planes().flag, r.seconds = planes_seconds_; break;
      case VarietyId::Dlm: r.observed = planes().dlm, r.seconds = planes_seconds_; break;
      case VarietyId::LGr2Wbar: r.observed = planes().isotropic, r.seconds = planes_seconds_; break;
      case VarietyId::ZeroLocus_gr26: r.observed = planes().zero26, r.seconds = planes_seconds_; break;
      case VarietyId::Sigma:
        if (!g_.nu) throw std::invalid_argument("count: Sigma needs nu");
        r.observed = planes().sigma, r.seconds = planes_seconds_;
        break;
      case VarietyId::S_surface: r.observed = four_spaces().surface, r.seconds = four_seconds_; break;
      case VarietyId::ZeroLocus_gr46: r.observed = four_spaces().zero46, r.seconds = four_seconds_; break;
      case VarietyId::Z_scroll: r.observed = z_flags().size(), r.seconds = four_seconds_ + z_seconds_; break;
      case VarietyId::GrXi2W: r.observed = xi_planes().count, r.seconds = xi_seconds_; break;
      case VarietyId::GrLambda5W: r.observed = lambda_dual_planes().count, r.seconds = ldual_seconds_; break;
      case VarietyId::Qdual_lambda: r.observed = quadric_count(), r.seconds = quadric_seconds_; break;
    }
    if (is_lefschetz_type(v)) {
      auto p = known_motive(v);
      r.expected_poly = p.coeffs();
      r.expected = p.eval(P);
      r.pass = r.observed == *r.expected;
    }
    return r;
  }

 private:
  template <class Fn>
  static auto timed(double& sec, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  Geometry<P> g_;
  EnumOptions opt_;
  std::optional<IsotropicW3Visitor<P>> w3_;
  std::optional<LagrangianVisitor<P>> lag_;
  std::optional<PlaneVisitor<P>> planes_;
  std::optional<FourSpaceVisitor<P>> four_;
  std::optional<AnnihilatedPlaneVisitor<P>> xi_, ldual_;
  std::optional<std::uint64_t> quadric_;
  std::optional<std::vector<ZFlag>> z_;
  std::vector<std::uint64_t> fibers_;
  double w3_seconds_ = 0, lag_seconds_ = 0, planes_seconds_ = 0, four_seconds_ = 0, xi_seconds_ = 0, ldual_seconds_ = 0,
         quadric_seconds_ = 0, z_seconds_ = 0;
};

template <std::uint32_t P>
CountReport count(VarietyId v, const Geometry<P>& g, const EnumOptions& opt = {}) {
  Survey<P> s(g, opt);
  return s.count(v);
}

// ---------------------------------------------------------------------------
// Rank profiles.

struct RankProfile {
  std::map<int, std::uint64_t> histogram;
  std::uint64_t points = 0;
  std::vector<Subspace> rank2;  // LGr section only: Ū₃ with rank(λ̂) = 2
};

template <std::uint32_t P>
RankProfile rank_profile_lgr(Survey<P>& s) {
  using F = Zp<P>;
  RankProfile rp;
  for (const auto& U3 : s.lagrangian().section_points) {
    s.options().budget.check();
    int r = rank(lambda_hat_matrix(cone_over(U3.template rows<F>()), s.geometry().lambda));
    ++rp.histogram[r];
    ++rp.points;
    if (r == 2) rp.rank2.push_back(U3);
  }
  return rp;
}

template <std::uint32_t P>
RankProfile rank_profile_gr4(Survey<P>& s) {
  using F = Zp<P>;
  SectionRankVisitor<P> v;
  v.lam = to_dense(s.geometry().lambda);
  auto res = enumerate<F>(4, 7, v, s.options());
  RankProfile rp;
  rp.points = res.section;
  for (int i = 0; i < 5; ++i)
    if (res.hist[i]) rp.histogram[i] = res.hist[i];
  rp.histogram.try_emplace(0, 0);
  return rp;
}

// Expected rank-2 count on the Gr(4,W) section: the P⁴-bundle over Gr_λ(5,W)
// covers rank ≤ 2, with fibers P¹ over the rank-1 points.
inline std::uint64_t expected_gr4_rank2(std::uint64_t q, std::uint64_t grl5, std::uint64_t rank1) {
  return grl5 * (1 + q + q * q + q * q * q + q * q * q * q) - (q + 1) * rank1;
}

// ---------------------------------------------------------------------------
// Special checks.

struct SpecialReport {
  struct Shift {
    std::uint32_t t;
    std::uint64_t points;
    bool equal;
  };
  std::vector<Shift> shifts;
  bool shift_pass = false;

  std::uint64_t no21_scanned = 0, no21_violations = 0;

  std::uint64_t dual_planes = 0, samples = 0, sample_hits = 0, plane_points_off_quadric = 0;
  bool gr27_pass = false;

  std::uint64_t z_points = 0, c1 = 0, c2 = 0, c_overlap = 0, rank1 = 0, rank2 = 0, rank_other = 0;
  bool c_pass = false;

  bool pass() const { return shift_pass && no21_violations == 0 && gr27_pass && c_pass; }
};

template <std::uint32_t P>
void check_shift(Survey<P>& s, std::mt19937_64& rng, SpecialReport& rep, int trials = 3) {
  using F = Zp<P>;
  const auto& g = s.geometry();
  const auto& base = s.isotropic_w3().x5_points;
  auto musq = wedge(g.mu, g.mu);
  rep.shift_pass = true;
  // distinct nonzero t, drawn without replacement
  std::vector<std::uint32_t> ts(P - 1);
  std::iota(ts.begin(), ts.end(), 1u);
  std::shuffle(ts.begin(), ts.end(), rng);
  ts.resize(std::min<std::size_t>(trials, ts.size()));
  for (auto tv : ts) {
    F t = F::raw(tv);
    IsotropicW3Visitor<P> v;
    v.mu_m = skew_rows(g.mu);
    v.lam = to_dense(g.lambda - musq.scaled(t));
    v.keep = true;
    auto res = enumerate<F>(3, 7, v, s.options());
    bool eq = res.x5_points == base;
    rep.shifts.push_back({t.value(), res.x5, eq});
    rep.shift_pass = rep.shift_pass && eq;
  }
}

// Subspaces U_{a,A₁} ⊕ U_{b,A₂} with (a,b) = (2,1) or (1,2) that are
// μ-isotropic and annihilated by λ′. None should exist.
template <std::uint32_t P>
void check_no21(const Geometry<P>& g, SpecialReport& rep) {
  using F = Zp<P>;
  auto sub2 = enum_subspaces<F>(2, 3), sub1 = enum_subspaces<F>(1, 3);
  auto inject = [](const Subspace& c, const std::vector<Vec<F>>& A) {
    std::vector<Vec<F>> out;
    for (int i = 0; i < c.k; ++i) {
      Vec<F> v(6, F(0));
      for (int j = 0; j < 3; ++j)
        for (int x = 0; x < 6; ++x) v[x] += F::raw(c.at(i, j)) * A[j][x];
      out.push_back(v);
    }
    return out;
  };
  for (int side = 0; side < 2; ++side) {
    const auto& Abig = side == 0 ? g.A1 : g.A2;
    const auto& Asmall = side == 0 ? g.A2 : g.A1;
    for (const auto& a : sub2)
      for (const auto& b : sub1) {
        auto U = inject(a, Abig);
        auto B = inject(b, Asmall);
        U.push_back(B[0]);
        ++rep.no21_scanned;
        if (isotropic_for(g.mu_bar, U) && annihilated_by(g.lambda_prime, U)) ++rep.no21_violations;
      }
  }
}

// Covectors off the quadric lie in no 2-space of Gr_{λ∨}(2,W∨).
template <std::uint32_t P>
void check_gr27(Survey<P>& s, std::mt19937_64& rng, SpecialReport& rep, int samples = 200) {
  using F = Zp<P>;
  const auto& g = s.geometry();
  const auto& planes = s.lambda_dual_planes().points;
  rep.dual_planes = planes.size();
  auto on_quadric = [&](const Vec<F>& w) { return rank_2form(contract(g.lambda_vee, w)) < 6; };
  for (const auto& U : planes) {
    auto b = U.template rows<F>();
    if (!on_quadric(b[0])) ++rep.plane_points_off_quadric;
    for (std::uint32_t a = 0; a < P; ++a) {
      Vec<F> w(7);
      for (int j = 0; j < 7; ++j) w[j] = F::raw(a) * b[0][j] + b[1][j];
      if (!on_quadric(w)) ++rep.plane_points_off_quadric;
    }
  }
  std::uniform_int_distribution<std::uint32_t> d(0, P - 1);
  while (rep.samples < static_cast<std::uint64_t>(samples)) {
    Vec<F> w(7);
    for (auto& x : w) x = F::raw(d(rng));
    if (is_zero_vec(w) || on_quadric(w)) continue;
    ++rep.samples;
    for (const auto& U : planes) {
      auto b = U.template rows<F>();
      b.push_back(w);
      if (span_rank(b, 7) == 2) {
        ++rep.sample_hits;
        break;
      }
    }
  }
  rep.gr27_pass = rep.sample_hits == 0 && rep.plane_points_off_quadric == 0;
}

// On Z-flags, λ̄ : ∧²Ū₃ → Ū₄⊥ drops to rank 1 exactly on C₁ ⊔ C₂, where
// C_i = {Ū₃ ⊃ Ū₄ ∩ A_i}; each is a P¹.
template <std::uint32_t P>
void check_c_loci(Survey<P>& s, SpecialReport& rep) {
  using F = Zp<P>;
  const auto& g = s.geometry();
  auto lam = to_dense(g.lambda_bar);
  for (const auto& z : s.z_flags()) {
    ++rep.z_points;
    auto b = z.U3.template rows<F>();
    std::array<Row<F>, kMaxDim> a{};
    static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int p = 0; p < 3; ++p) {
      Dense<F> t1, t2;
      contract_into(lam, to_row(b[pairs[p][0]]), t1);
      contract_into(t1, to_row(b[pairs[p][1]]), t2);
      a[p] = covector_row(t2);
    }
    int r = small_rank(a, 3, 6);
    bool in1 = intersection_dim(b, g.A1, 6) >= 2, in2 = intersection_dim(b, g.A2, 6) >= 2;
    rep.c1 += in1;
    rep.c2 += in2;
    rep.c_overlap += in1 && in2;
    if (r == 1) {
      ++rep.rank1;
      if (!in1 && !in2) ++rep.rank_other;
    } else if (r == 2) {
      ++rep.rank2;
      if (in1 || in2) ++rep.rank_other;
    } else {
      ++rep.rank_other;
    }
  }
  rep.c_pass = rep.c1 == P + 1 && rep.c2 == P + 1 && rep.c_overlap == 0 && rep.rank1 == 2 * (P + 1) && rep.rank_other == 0;
}

template <std::uint32_t P>
SpecialReport special_checks(Survey<P>& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SpecialReport rep;
  check_shift(s, rng, rep);
  check_no21(s.geometry(), rep);
  check_gr27(s, rng, rep);
  check_c_loci(s, rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Structural identities that compare point sets rather than numbers.

struct ProjectionReport {
  std::uint64_t xi_points = 0, images = 0, dlm_points = 0;
  bool w0_avoided = false, injective = false, image_equal = false;
  bool pass() const { return w0_avoided && injective && image_equal; }
};

// U₂ ↦ pr(U₂) from Gr_ξ(2,W) to D_{λ̄,μ}, pr dropping the w₀ coordinate.
template <std::uint32_t P>
ProjectionReport check_projection(Survey<P>& s) {
  using F = Zp<P>;
  ProjectionReport rep;
  const auto& xi = s.xi_planes().points;
  rep.xi_points = xi.size();
  rep.w0_avoided = true;
  std::vector<Subspace> img;
  for (const auto& U : xi) {
    auto b = U.template rows<F>();
    std::vector<Vec<F>> pb;
    for (auto& v : b) pb.push_back(Vec<F>(v.begin() + 1, v.end()));
    if (span_rank(pb, 6) != 2) {
      rep.w0_avoided = false;
      continue;
    }
    img.push_back(Subspace::span(pb, 6));
  }
  std::sort(img.begin(), img.end());
  auto last = std::unique(img.begin(), img.end());
  rep.injective = rep.w0_avoided && last == img.end();
  img.erase(last, img.end());
  rep.images = img.size();
  const auto& d = s.planes().dlm_points;
  rep.dlm_points = d.size();
  rep.image_equal = img == d;
  return rep;
}

struct FiberReport {
  std::uint64_t base_points = 0, total = 0, min_fiber = 0, max_fiber = 0;
  bool pass = false;
};

template <std::uint32_t P>
FiberReport check_fibers(Survey<P>& s) {
  FiberReport r;
  const auto& f = s.z_fibers();
  r.base_points = f.size();
  if (!f.empty()) {
    r.min_fiber = *std::min_element(f.begin(), f.end());
    r.max_fiber = *std::max_element(f.begin(), f.end());
  }
  for (auto x : f) r.total += x;
  r.pass = !f.empty() && r.min_fiber == P + 1 && r.max_fiber == P + 1;
  return r;
}

// Rank-2 locus of λ̂ on the LGr section against the Z-flag images.
template <std::uint32_t P>
bool rank2_matches_z(Survey<P>& s, const RankProfile& rp) {
  std::vector<Subspace> img;
  for (const auto& z : s.z_flags()) img.push_back(z.U3);
  std::sort(img.begin(), img.end());
  img.erase(std::unique(img.begin(), img.end()), img.end());
  return img.size() == s.z_flags().size() && img == rp.rank2;
}

// ---------------------------------------------------------------------------
// Fourfold: X⁴ = X⁵ ∩ H_ν and Σ = F ∩ H_ν.

struct FourfoldReport {
  bool nu_zero = false;
  bool generic = false;  // the operator of ν(w₀,·,·) on A₁ has 3 distinct roots in F_q
  int attempts = 0;
  std::uint64_t x4 = 0, x5 = 0, sigma = 0;
  std::uint64_t sigma_expected = 0;
  bool sigma_pass = false;
};

// F ≅ {(a, b) ∈ P(A₁)×P(A₂) : μ(a,b) = 0}; ν(w₀,·,·) restricted to A₁×A₂ is
// an endomorphism of A₁ through the μ-pairing, and Σ is a split sextic del
// Pezzo surface exactly when that endomorphism has three distinct eigenvalues
// in F_q.
template <std::uint32_t P>
bool nu_is_generic(const Geometry<P>& g) {
  using F = Zp<P>;
  auto nb = g.nu_w0_bar();
  Matrix<F> M(3, 3), B(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      M(i, j) = eval(g.mu_bar, {g.A1[i], g.A2[j]});
      B(i, j) = eval(nb, {g.A1[i], g.A2[j]});
    }
  auto chi = pencil_det3(M, B.scaled(F(-1)));
  if (chi.discriminant().is_zero()) return false;
  return roots_in_field(chi.coeffs()).size() == 3;
}

template <std::uint32_t P>
Multivector<Zp<P>> random_3form(std::mt19937_64& rng) {
  using F = Zp<P>;
  Multivector<F> nu(7, 3, Variance::Dual);
  for (int i = 0; i < nu.size(); ++i) nu.at(i) = field_traits<F>::random(rng);
  return nu;
}

template <std::uint32_t P>
FourfoldReport fourfold_counts(Survey<P>& s) {
  FourfoldReport r;
  const auto& g = s.geometry();
  if (!g.nu) throw std::invalid_argument("fourfold_counts: nu is not set");
  r.nu_zero = g.nu->is_zero();
  r.generic = !r.nu_zero && nu_is_generic(g);
  r.x4 = s.count(VarietyId::X4).observed;
  r.x5 = s.count(VarietyId::X5).observed;
  r.sigma = s.count(VarietyId::Sigma).observed;
  r.sigma_expected = 1 + 4 * P + P * P;
  r.sigma_pass = !r.generic || r.sigma == r.sigma_expected;
  return r;
}

// Draws ν in frame coordinates until it is generic, at most `retries` times.
template <std::uint32_t P>
int pick_generic_nu(Geometry<P>& g, std::mt19937_64& rng, int retries = 50) {
  for (int i = 1; i <= retries; ++i) {
    g.set_nu_frame(random_3form<P>(rng));
    if (nu_is_generic(g)) return i;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Odd symplectic identity for an arbitrary corank-1 2-form on F_q^7, usable
// over F_3 where no certified instance exists.

struct OddReport {
  std::uint64_t q = 0, lgr3 = 0, odd = 0, lgr2 = 0;
  std::uint64_t lhs = 0, rhs = 0;
  bool pass = false;
};

template <std::uint32_t P>
OddReport odd_symplectic_identity(const Multivector<Zp<P>>& mu7, const EnumOptions& opt = {}) {
  using F = Zp<P>;
  auto m = to_skew(mu7);
  if (rank(m) != 6) throw std::invalid_argument("odd_symplectic_identity: mu must have rank 6");
  auto w0 = kernel(m).at(0);
  // frame with e₀ = w₀; any complement works for μ̄
  std::vector<Vec<F>> frame = {w0};
  for (int i = 0; i < 7 && frame.size() < 7; ++i) {
    Vec<F> e(7, F(0));
    e[i] = F(1);
    auto trial = frame;
    trial.push_back(e);
    if (span_rank(trial, 7) == static_cast<int>(trial.size())) frame = trial;
  }
  auto muf = pullback(mu7, frame);
  auto mubar = drop_index0(muf);

  IsotropicW3Visitor<P> vw;
  vw.mu_m = skew_rows(mu7);
  vw.lam = to_dense(Multivector<F>(7, 4, Variance::Dual));
  LagrangianVisitor<P> vl;
  vl.mu_m = skew_rows(mubar);
  vl.lam = to_dense(Multivector<F>(6, 3, Variance::Dual));
  vl.keep = false;
  detail::CollectVisitor<F> vp;
  vp.k = 2;
  vp.n = 6;
  vp.keep = false;
  auto mm = skew_rows(mubar);
  vp.prune = [&](int level, const RowSet<F>& r) {
    return level == 0 || dot_row(skew_apply(mm, r[0], 6), r[1], 6).is_zero();
  };

  OddReport rep;
  rep.q = P;
  rep.odd = enumerate<F>(3, 7, vw, opt).odd;
  rep.lgr3 = enumerate<F>(3, 6, vl, opt).lagrangian;
  rep.lgr2 = enumerate<F>(2, 6, vp, opt).count;
  const std::uint64_t q = P;
  rep.lhs = (1 + q + q * q + q * q * q) * rep.lgr3;
  rep.rhs = rep.odd + q * rep.lgr2;
  rep.pass = rep.lhs == rep.rhs && rep.lgr3 == (1 + q) * (1 + q * q) * (1 + q * q * q);
  return rep;
}

}  // namespace fivefold
