#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include <fivefold/fingeom.hpp>

using namespace fivefold;

namespace {

using F7 = Zp<7>;
using F11 = Zp<11>;
using Q = Rational;
constexpr auto D = Variance::Dual;
constexpr auto Pr = Variance::Primal;

template <class T>
Multivector<T> random_mv(int n, int p, Variance v, std::mt19937_64& rng) {
  Multivector<T> m(n, p, v);
  for (int i = 0; i < m.size(); ++i) m.at(i) = field_traits<T>::random(rng);
  return m;
}

template <class T>
Vec<T> random_vec(int n, std::mt19937_64& rng) {
  Vec<T> v(n);
  for (auto& x : v) x = field_traits<T>::random(rng);
  return v;
}

// Oracle evaluation: ξ(u₁..u_p) = Σ_σ sgn(σ) Σ_{i₁<..<i_p} ξ_I Π_r u_{σ(r)}[i_r],
// written directly from the permutation expansion.
template <class T>
T eval_oracle(const Multivector<T>& xi, const std::vector<Vec<T>>& u) {
  int p = xi.grade();
  std::vector<int> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  T total(0);
  do {
    int inv = 0;
    for (int a = 0; a < p; ++a)
      for (int b = a + 1; b < p; ++b)
        if (perm[a] > perm[b]) ++inv;
    for (int i = 0; i < xi.size(); ++i) {
      auto idx = mask_indices(xi.mask_at(i));
      T term = xi.at(i);
      for (int r = 0; r < p; ++r) term *= u[perm[r]][idx[r]];
      total += inv % 2 ? T(-term) : term;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

// Sign of sorting a sequence of distinct indices by adjacent swaps.
int sort_sign(std::vector<int> s) {
  int swaps = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j + 1 < s.size() - i; ++j)
      if (s[j] > s[j + 1]) {
        std::swap(s[j], s[j + 1]);
        ++swaps;
      }
  return swaps % 2 ? -1 : 1;
}

template <class T>
Multivector<T> mono(int n, std::initializer_list<int> idx, Variance v = D) {
  return Multivector<T>::monomial(n, idx, v);
}

}  // namespace

TEST(Wedge, Anchors) {
  EXPECT_EQ(wedge(mono<Q>(7, {0}), mono<Q>(7, {1, 2, 3})), mono<Q>(7, {0, 1, 2, 3}));
  EXPECT_TRUE(wedge(mono<Q>(7, {1, 2}, Pr), mono<Q>(7, {1, 2}, Pr)).is_zero());
  auto w = wedge(mono<Q>(7, {1, 6}), mono<Q>(7, {2, 5}));
  EXPECT_EQ(w, mono<Q>(7, {1, 2, 5, 6}));
  EXPECT_EQ(w.coeff(0b1100110), Q(1));
}

TEST(Wedge, BasisSignsAgainstSortOracle) {
  const int n = 6;
  const auto& st = subsets(n);
  for (int p = 0; p <= n; ++p)
    for (int r = 0; p + r <= n; ++r)
      for (Mask a : st.by_grade[p])
        for (Mask b : st.by_grade[r]) {
          Multivector<Q> ma(n, p, D), mb(n, r, D);
          ma.set(a, Q(1));
          mb.set(b, Q(1));
          auto w = wedge(ma, mb);
          if (a & b) {
            EXPECT_TRUE(w.is_zero());
            continue;
          }
          auto seq = mask_indices(a);
          auto tail = mask_indices(b);
          seq.insert(seq.end(), tail.begin(), tail.end());
          EXPECT_EQ(w.coeff(a | b), Q(sort_sign(seq)));
        }
}

TEST(Wedge, GradedCommutativeAndAssociative) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    int n = 4 + t % 5;
    int p = rng() % 3, r = rng() % 3, s = rng() % 3;
    if (p + r + s > n) continue;
    auto a = random_mv<F11>(n, p, D, rng), b = random_mv<F11>(n, r, D, rng), c = random_mv<F11>(n, s, D, rng);
    auto ab = wedge(a, b), ba = wedge(b, a);
    EXPECT_EQ(ab, (p * r) % 2 ? -ba : ba);
    EXPECT_EQ(wedge(ab, c), wedge(a, wedge(b, c)));
  }
}

TEST(Wedge, Errors) {
  EXPECT_THROW(wedge(mono<Q>(6, {0}), mono<Q>(7, {0})), std::invalid_argument);
  EXPECT_THROW(wedge(mono<Q>(7, {0}), mono<Q>(7, {1}, Pr)), std::invalid_argument);
  EXPECT_THROW(wedge(mono<Q>(4, {0, 1, 2}), mono<Q>(4, {2, 3})), std::invalid_argument);
}

TEST(Contract, LeadingSlotsAgainstEvaluationOracle) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    int n = 3 + t % 5;
    int p = 1 + rng() % n;
    int k = rng() % (p + 1);
    Variance var = t % 2 ? D : Pr;
    auto xi = random_mv<F11>(n, p, var, rng);
    std::vector<Vec<F11>> vs, ws, all;
    for (int i = 0; i < k; ++i) vs.push_back(random_vec<F11>(n, rng));
    for (int i = k; i < p; ++i) ws.push_back(random_vec<F11>(n, rng));
    all = vs;
    all.insert(all.end(), ws.begin(), ws.end());
    auto c = contract(xi, decomposable(vs, n, opposite(var)));
    EXPECT_EQ(eval_oracle(c, ws), eval_oracle(xi, all));
  }
}

TEST(Contract, Anchors) {
  auto lambda = standard_lambda<Q>();
  Vec<Q> e0(7, Q(0));
  e0[0] = 1;
  EXPECT_EQ(contract(lambda, e0), mono<Q>(7, {1, 2, 3}) + mono<Q>(7, {4, 5, 6}));
  auto lprime = mono<Q>(7, {1, 2, 5, 6}) + mono<Q>(7, {1, 3, 4, 6}) + mono<Q>(7, {2, 3, 4, 5});
  EXPECT_TRUE(contract(lprime, e0).is_zero());
  EXPECT_TRUE(contract(lprime, mono<Q>(7, {0}, Pr)).is_zero());
}

TEST(Contract, VectorFormMatchesGradeOneMultivector) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    int n = 2 + t % 7;
    int p = 1 + rng() % n;
    auto xi = random_mv<F7>(n, p, D, rng);
    auto v = random_vec<F7>(n, rng);
    EXPECT_EQ(contract(xi, v), contract(xi, Multivector<F7>::from_vec(v, Pr)));
  }
}

TEST(Contract, IteratedEqualsWedgeExhaustive) {
  // (ω⌟a)⌟b = ω⌟(a∧b) = (-1)^{|a||b|} ω⌟(b∧a) on all basis triples
  for (int n = 1; n <= 5; ++n) {
    const auto& st = subsets(n);
    for (int pw = 0; pw <= n; ++pw)
      for (Mask w : st.by_grade[pw])
        for (int pa = 0; pa <= pw; ++pa)
          for (int pb = 0; pa + pb <= pw; ++pb)
            for (Mask a : st.by_grade[pa])
              for (Mask b : st.by_grade[pb]) {
                Multivector<F7> mw(n, pw, Pr), ma(n, pa, D), mb(n, pb, D);
                mw.set(w, F7(1));
                ma.set(a, F7(1));
                mb.set(b, F7(1));
                auto lhs = contract(contract(mw, ma), mb);
                auto ba = contract(mw, wedge(mb, ma));
                EXPECT_EQ(lhs, contract(mw, wedge(ma, mb)));
                EXPECT_EQ(lhs, (pa * pb) % 2 ? -ba : ba);
              }
  }
}

TEST(Contract, Errors) {
  EXPECT_THROW(contract(mono<Q>(7, {0, 1}), mono<Q>(7, {0, 1})), std::invalid_argument);
  EXPECT_THROW(contract(mono<Q>(7, {0}), mono<Q>(7, {0, 1}, Pr)), std::invalid_argument);
  EXPECT_THROW(contract(mono<Q>(7, {0}), mono<Q>(6, {0}, Pr)), std::invalid_argument);
}

TEST(Contract, DenseKernelAgrees) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 500; ++t) {
    int n = 2 + t % 7;
    int p = 1 + rng() % n;
    auto xi = random_mv<F7>(n, p, D, rng);
    auto v = random_vec<F7>(n, rng);
    Dense<F7> out;
    contract_into(to_dense(xi), to_row(v), out);
    auto ref = contract(xi, v);
    ASSERT_EQ(out.p, p - 1);
    for (int i = 0; i < ref.size(); ++i) EXPECT_EQ(out.c[i], ref.at(i));
  }
}

TEST(Duality, ConvolutionIdentityFuzz) {
  // ω ∈ ∧⁴V, ξ ∈ ∧²V∨: ω⌟ξ = (ξ∨)⌟(ω∨), at least 1000 cases per dimension
  std::mt19937_64 rng(15);
  for (int n : {6, 7}) {
    int cases = 0;
    for (int t = 0; t < 1000; ++t) {
      F11 c = F11::raw(1 + rng() % 10);
      auto eps = Multivector<F11>::top(n, Pr, c);
      auto eps_inv = inverse_top(eps);
      auto omega = random_mv<F11>(n, 4, Pr, rng);
      auto xi = random_mv<F11>(n, 2, D, rng);
      auto lhs = contract(omega, xi);
      auto rhs = contract(eps_dual(xi, eps), eps_dual(omega, eps_inv));
      EXPECT_EQ(lhs, rhs);
      ++cases;
    }
    EXPECT_GE(cases, 1000);
    // the same over Q with a handful of cases
    for (int t = 0; t < 20; ++t) {
      auto eps = Multivector<Q>::top(n, Pr, Q(3, 2));
      auto omega = random_mv<Q>(n, 4, Pr, rng);
      auto xi = random_mv<Q>(n, 2, D, rng);
      EXPECT_EQ(contract(omega, xi), contract(eps_dual(xi, eps), eps_dual(omega, inverse_top(eps))));
    }
  }
}

TEST(Duality, SignForOtherGrades) {
  std::mt19937_64 rng(16);
  for (int n = 2; n <= 7; ++n)
    for (int k = 0; k <= n; ++k)
      for (int p = 0; p <= k; ++p) {
        auto eps = Multivector<F11>::top(n, Pr, F11(5));
        auto omega = random_mv<F11>(n, k, Pr, rng);
        auto xi = random_mv<F11>(n, p, D, rng);
        auto rhs = contract(eps_dual(xi, eps), eps_dual(omega, inverse_top(eps)));
        EXPECT_EQ(contract(omega, xi), duality_sign(n, k, p) == 1 ? rhs : -rhs) << n << k << p;
      }
}

TEST(Duality, StandardLambdaGolden) {
  auto eps = Multivector<Q>::top(7, Pr);
  auto lv = eps_dual(standard_lambda<Q>(), eps);
  auto expected = mono<Q>(7, {0, 1, 6}, Pr) + mono<Q>(7, {0, 2, 5}, Pr) + mono<Q>(7, {0, 3, 4}, Pr) -
                  mono<Q>(7, {1, 2, 3}, Pr) + mono<Q>(7, {4, 5, 6}, Pr);
  EXPECT_EQ(lv, expected);
}

TEST(Duality, TopAndDoubleDual) {
  auto eps = Multivector<Q>::top(7, Pr);
  auto full = Multivector<Q>::top(7, D, Q(5));
  EXPECT_EQ(eps_dual(full, eps).as_scalar(), Q(5));
  // all 35 basis triples in dim 7
  const auto& st = subsets(7);
  for (Mask m : st.by_grade[3]) {
    Multivector<Q> xi(7, 3, D);
    xi.set(m, Q(1));
    EXPECT_EQ(eps_dual(eps_dual(xi, eps), inverse_top(eps)), xi);
  }
  std::mt19937_64 rng(17);
  for (int n : {6, 7})
    for (int p = 0; p <= n; ++p) {
      auto e = Multivector<F7>::top(n, Pr, F7(3));
      auto xi = random_mv<F7>(n, p, D, rng);
      auto back = eps_dual(eps_dual(xi, e), inverse_top(e));
      EXPECT_EQ(back, double_dual_sign(n, p) == 1 ? xi : -xi);
    }
  EXPECT_THROW(eps_dual(mono<Q>(7, {0}), Multivector<Q>(7, 7, Pr)), std::invalid_argument);
  EXPECT_THROW(eps_dual(mono<Q>(7, {0}), mono<Q>(7, {0, 1}, Pr)), std::invalid_argument);
}

TEST(Eval, Anchors) {
  auto lb = mono<Q>(6, {0, 1, 2}) + mono<Q>(6, {3, 4, 5});
  auto e = [](int n, int i) {
    Vec<Q> v(n, Q(0));
    v[i] = 1;
    return v;
  };
  EXPECT_EQ(eval(lb, {e(6, 0), e(6, 1), e(6, 2)}), Q(1));
  EXPECT_EQ(eval(lb, {e(6, 0), e(6, 1), e(6, 3)}), Q(0));
  EXPECT_EQ(eval(standard_lambda<Q>(), {e(7, 0), e(7, 1), e(7, 2), e(7, 3)}), Q(1));
  EXPECT_THROW(eval(lb, {e(6, 0)}), std::invalid_argument);
}

TEST(Eval, AgreesWithIteratedContraction) {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 300; ++t) {
    int n = 1 + t % 8;
    int p = rng() % (n + 1);
    auto xi = random_mv<F11>(n, p, D, rng);
    std::vector<Vec<F11>> vs;
    auto cur = xi;
    for (int i = 0; i < p; ++i) {
      vs.push_back(random_vec<F11>(n, rng));
      cur = contract(cur, vs.back());
    }
    EXPECT_EQ(eval(xi, vs), cur.as_scalar());
    EXPECT_EQ(eval(xi, vs), eval_oracle(xi, vs));
  }
}

TEST(Pullback, RestrictionAndPushforward) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 100; ++t) {
    auto xi = random_mv<F7>(7, 3, D, rng);
    std::vector<Vec<F7>> cols;
    for (int i = 0; i < 4; ++i) cols.push_back(random_vec<F7>(7, rng));
    auto pb = pullback(xi, cols);
    ASSERT_EQ(pb.dim(), 4);
    // evaluate on images of random vectors of F^4
    std::vector<Vec<F7>> small, big;
    for (int i = 0; i < 3; ++i) {
      auto a = random_vec<F7>(4, rng);
      Vec<F7> img(7, F7(0));
      for (int j = 0; j < 4; ++j)
        for (int r = 0; r < 7; ++r) img[r] += a[j] * cols[j][r];
      small.push_back(a);
      big.push_back(img);
    }
    EXPECT_EQ(eval(pb, small), eval(xi, big));
    auto pf = pushforward(decomposable(small, 4, Pr), cols, 7);
    EXPECT_EQ(pf, decomposable(big, 7, Pr));
  }
}

TEST(SkewRank, Examples) {
  auto mu = mono<Q>(7, {1, 6}) + mono<Q>(7, {2, 5}) + mono<Q>(7, {3, 4});
  EXPECT_EQ(rank_2form(mu), 6);
  EXPECT_EQ(rank_2form(Multivector<Q>(7, 2, D)), 0);
  Matrix<Q> bad(3, 3);
  bad(0, 1) = 1;
  EXPECT_THROW(rank_2form(bad), std::invalid_argument);
  std::mt19937_64 rng(20);
  for (int t = 0; t < 100; ++t) {
    auto w = random_mv<F7>(2 + t % 7, 2, D, rng);
    EXPECT_EQ(from_skew(to_skew(w)), w);
    EXPECT_EQ(rank_2form(w) % 2, 0);
  }
}

TEST(Multivector, Construction) {
  EXPECT_THROW(Multivector<Q>(9, 1, D), std::invalid_argument);
  EXPECT_THROW(Multivector<Q>(4, 5, D), std::invalid_argument);
  EXPECT_THROW(mono<Q>(4, {1, 1}), std::invalid_argument);
  EXPECT_EQ(mono<Q>(4, {2, 1}), -mono<Q>(4, {1, 2}));
  for (int n = 0; n <= 8; ++n)
    for (int p = 0; p <= n; ++p) EXPECT_EQ(Multivector<Q>(n, p, D).size(), binomial(n, p));
  // lexicographic order of the ascending index tuples
  const auto& st = subsets(6);
  for (int p = 0; p <= 6; ++p) {
    std::vector<std::vector<int>> tuples;
    for (Mask m : st.by_grade[p]) tuples.push_back(mask_indices(m));
    EXPECT_TRUE(std::is_sorted(tuples.begin(), tuples.end()));
  }
}
