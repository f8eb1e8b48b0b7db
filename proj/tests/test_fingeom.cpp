#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <fivefold/fingeom.hpp>

using namespace fivefold;

namespace {

using F3 = Zp<3>;
using F5 = Zp<5>;
using F7 = Zp<7>;
constexpr auto D = Variance::Dual;

template <class T>
Multivector<T> mono(int n, std::initializer_list<int> idx) {
  return Multivector<T>::monomial(n, idx, D);
}

template <class F>
Vec<F> unit(int n, int i) {
  Vec<F> v(n, F(0));
  v[i] = F(1);
  return v;
}

// Product formula for the Gaussian binomial, independent of the library's recurrence.
std::uint64_t gauss_product(int n, int k, std::uint64_t q) {
  unsigned __int128 num = 1, den = 1;
  for (int i = 0; i < k; ++i) {
    unsigned __int128 a = 1, b = 1;
    for (int j = 0; j < n - i; ++j) a *= q;
    for (int j = 0; j < i + 1; ++j) b *= q;
    num *= a - 1;
    den *= b - 1;
  }
  return static_cast<std::uint64_t>(num / den);
}

template <class F>
Subspace random_subspace(int k, int n, std::mt19937_64& rng) {
  for (;;) {
    std::vector<Vec<F>> b;
    for (int i = 0; i < k; ++i) {
      Vec<F> v(n);
      for (auto& x : v) x = field_traits<F>::random(rng);
      b.push_back(v);
    }
    if (span_rank(b, n) == k) return Subspace::span<F>(b, n);
  }
}

bool contains(const std::vector<Subspace>& sorted, const Subspace& s) {
  return std::binary_search(sorted.begin(), sorted.end(), s);
}

// The certified F_5 instance with M = 1, K = (1,2,3), surveyed once.
Survey<5>& survey5() {
  static Survey<5> s = [] {
    auto inst = build_instance<F5>({1, 1, 1, 1, 1, 1}, {1, 2, 3});
    auto an = certify(inst.lambda, inst.mu);
    return Survey<5>(Geometry<5>::from_analysis(an), EnumOptions{1, {}});
  }();
  return s;
}

}  // namespace

TEST(Gaussian, Values) {
  EXPECT_EQ(gaussian_binomial(7, 3, 3), 925771u);
  EXPECT_EQ(gaussian_binomial(6, 3, 3), 33880u);
  for (int n = 0; n <= 7; ++n)
    for (int k = 0; k <= n; ++k)
      for (std::uint64_t q : {3, 5, 7, 11}) EXPECT_EQ(gaussian_binomial(n, k, q), gauss_product(n, k, q)) << n << k << q;
}

TEST(Enumerate, GaussianCountsAtQ3) {
  EXPECT_EQ(count_subspaces<F3>(3, 7), 925771u);
  EXPECT_EQ(count_subspaces<F3>(3, 6), 33880u);
  EXPECT_EQ(count_subspaces_q(3, 6, 3), 33880u);
  for (int n = 0; n <= 5; ++n) {
    auto z = enum_subspaces<F3>(0, n);
    ASSERT_EQ(z.size(), 1u);
    EXPECT_EQ(z[0].k, 0);
  }
  EXPECT_THROW(count_subspaces_q(2, 4, 17), UnsupportedPrime);
}

TEST(Enumerate, PivotPatternsSumToGaussian) {
  for (int n = 0; n <= 7; ++n)
    for (int k = 0; k <= n; ++k)
      for (std::uint64_t q : {5, 7}) {
        std::uint64_t total = 0;
        auto pats = pivot_patterns(k, n);
        EXPECT_EQ(static_cast<int>(pats.size()), binomial(n, k));
        for (const auto& p : pats) {
          int f = 0;
          for (int i = 0; i < k; ++i) f += p.nfree[i];
          total += ipow(q, f);
        }
        EXPECT_EQ(total, gauss_product(n, k, q)) << n << k << q;
      }
}

TEST(Enumerate, SmallSpacesAreCompleteAndCanonical) {
  for (int n = 1; n <= 5; ++n)
    for (int k = 1; k <= n; ++k) {
      auto all = enum_subspaces<F5>(k, n);
      EXPECT_EQ(all.size(), gauss_product(n, k, 5));
      EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
      for (const auto& s : all) EXPECT_TRUE(is_rref(s));
    }
  EXPECT_EQ(count_subspaces<F7>(2, 5), gauss_product(5, 2, 7));
}

TEST(Enumerate, PrunedEqualsFiltered) {
  std::mt19937_64 rng(1);
  for (int n = 2; n <= 6; ++n) {
    Multivector<F3> w(n, 2, D);
    for (int i = 0; i < w.size(); ++i) w.at(i) = field_traits<F3>::random(rng);
    auto m = skew_rows(w);
    RowPrune<F3> prune = [&](int level, const RowSet<F3>& r) {
      for (int i = 0; i < level; ++i)
        if (!dot_row(skew_apply(m, r[i], n), r[level], n).is_zero()) return false;
      return true;
    };
    for (int k = 1; k <= std::min(3, n); ++k) {
      auto pruned = enum_subspaces<F3>(k, n, prune);
      std::vector<Subspace> filtered;
      for (const auto& s : enum_subspaces<F3>(k, n))
        if (k < 2 || isotropic_for(w, s)) filtered.push_back(s);
      EXPECT_EQ(pruned, filtered) << k << " " << n;
    }
  }
}

TEST(Enumerate, ThreadCountDoesNotChangeResults) {
  auto one = enum_subspaces<F5>(2, 5, {}, EnumOptions{1, {}});
  auto four = enum_subspaces<F5>(2, 5, {}, EnumOptions{4, {}});
  EXPECT_EQ(one, four);
}

TEST(Enumerate, BudgetIsEnforced) {
  EXPECT_THROW(count_subspaces<F7>(3, 7, {}, EnumOptions{1, Budget::seconds(1e-4)}), BudgetExceeded);
}

TEST(Subspace, SpanIsCanonical) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    auto s = random_subspace<F7>(3, 6, rng);
    EXPECT_TRUE(is_rref(s));
    // a different basis of the same space
    auto b = s.rows<F7>();
    std::vector<Vec<F7>> mixed = {b[0], b[1], b[2]};
    for (int j = 0; j < 6; ++j) {
      mixed[0][j] += F7(3) * b[1][j];
      mixed[2][j] += b[0][j] + F7(2) * b[1][j];
    }
    EXPECT_EQ(Subspace::span<F7>(mixed, 6), s);
  }
  EXPECT_THROW(Subspace::span<F7>({unit<F7>(4, 0), unit<F7>(4, 0)}, 4), std::invalid_argument);
}

TEST(Predicates, SpecExamples) {
  using Q = Rational;
  auto lambda = standard_lambda<Q>();
  std::vector<Vec<Q>> u2 = {unit<Q>(7, 1), unit<Q>(7, 2)};
  auto c = contract(lambda, decomposable(u2, 7, Variance::Primal));
  EXPECT_EQ(c, mono<Q>(7, {0, 3}) + mono<Q>(7, {5, 6}));
  EXPECT_FALSE(annihilated_by(lambda, u2));
  EXPECT_TRUE(annihilated_by(Multivector<Q>(7, 4, D), u2));

  auto mu = mono<Q>(7, {1, 6}) + mono<Q>(7, {2, 5}) + mono<Q>(7, {3, 4});
  EXPECT_TRUE(isotropic_for(mu, {unit<Q>(7, 1), unit<Q>(7, 2), unit<Q>(7, 3)}));
  EXPECT_FALSE(isotropic_for(mu, {unit<Q>(7, 1), unit<Q>(7, 6)}));

  EXPECT_THROW(annihilated_by(mu, {unit<Q>(7, 1), unit<Q>(7, 2), unit<Q>(7, 3)}), std::invalid_argument);
  EXPECT_THROW(isotropic_for(lambda, u2), std::invalid_argument);
}

TEST(Predicates, ZeroLociOfStandardThreeFormOnSixSpace) {
  // (1+q+q^2)^2 for both the annihilated planes and the isotropic 4-spaces
  auto lb = standard_lambda_bar<F3>();
  std::uint64_t planes = 0, fours = 0;
  for (const auto& s : enum_subspaces<F3>(2, 6))
    if (annihilated_by(lb, s)) ++planes;
  for (const auto& s : enum_subspaces<F3>(4, 6))
    if (isotropic_for(lb, s)) ++fours;
  EXPECT_EQ(planes, 169u);
  EXPECT_EQ(fours, 169u);
}

TEST(Predicates, StandardXiAnnihilatesAFivefoldOfPlanes) {
  auto xi = mono<F5>(7, {1, 2, 3}) + mono<F5>(7, {4, 5, 6}) + mono<F5>(7, {0, 1, 6}) + mono<F5>(7, {0, 2, 5}) +
            mono<F5>(7, {0, 3, 4});
  AnnihilatedPlaneVisitor<5> v;
  v.form = to_dense(xi);
  auto res = enumerate<F5>(2, 7, v, EnumOptions{1, {}});
  EXPECT_EQ(res.count, 3906u);
  for (const auto& s : res.points) EXPECT_TRUE(annihilated_by(xi, s));
  std::mt19937_64 rng(3);
  for (int t = 0; t < 3000; ++t) {
    auto s = random_subspace<F5>(2, 7, rng);
    EXPECT_EQ(annihilated_by(xi, s), contains(res.points, s));
  }
}

TEST(Survey, CountsMatchMotives) {
  auto& s = survey5();
  for (VarietyId v : kAllVarieties) {
    if (v == VarietyId::X4 || v == VarietyId::Sigma) continue;
    auto r = s.count(v);
    ASSERT_TRUE(r.expected) << variety_name(v);
    EXPECT_EQ(r.observed, *r.expected) << variety_name(v);
    EXPECT_TRUE(r.pass);
  }
  EXPECT_EQ(s.count(VarietyId::X5).observed, 4356u);
  EXPECT_EQ(s.count(VarietyId::Z_scroll).observed, 276u);
}

TEST(Survey, FastVisitorsAgreeWithMember) {
  auto& s = survey5();
  const auto& g = s.geometry();
  std::mt19937_64 rng(4);
  const auto& x5 = s.isotropic_w3().x5_points;
  for (const auto& U : x5) EXPECT_TRUE(member(VarietyId::X5, U, g));
  const auto& sec = s.lagrangian().section_points;
  for (const auto& U : sec) EXPECT_TRUE(member(VarietyId::LGr3Wbar_lambda, U, g));
  const auto& fl = s.planes().flag_points;
  for (const auto& U : fl) EXPECT_TRUE(member(VarietyId::F_flag, U, g));
  const auto& dl = s.planes().dlm_points;
  for (const auto& U : dl) EXPECT_TRUE(member(VarietyId::Dlm, U, g));
  const auto& sf = s.four_spaces().surface_points;
  for (const auto& U : sf) EXPECT_TRUE(member(VarietyId::S_surface, U, g));
  for (const auto& U : s.xi_planes().points) EXPECT_TRUE(member(VarietyId::GrXi2W, U, g));
  for (const auto& z : s.z_flags()) EXPECT_TRUE(member_flag(z.U3, z.U4, g));

  // random points: membership iff listed
  for (int t = 0; t < 2000; ++t) {
    auto u3 = random_subspace<F5>(3, 6, rng);
    EXPECT_EQ(member(VarietyId::LGr3Wbar_lambda, u3, g), contains(sec, u3));
    auto u2 = random_subspace<F5>(2, 6, rng);
    EXPECT_EQ(member(VarietyId::F_flag, u2, g), contains(fl, u2));
    EXPECT_EQ(member(VarietyId::Dlm, u2, g), contains(dl, u2));
  }
  // points of the listed sets perturbed by one entry mostly leave them
  for (std::size_t i = 0; i < x5.size(); i += 37) {
    auto b = x5[i].rows<F5>();
    b[2][6] += F5(1);
    if (span_rank(b, 7) < 3) continue;
    auto U = Subspace::span<F5>(b, 7);
    EXPECT_EQ(member(VarietyId::X5, U, g), contains(x5, U));
  }
}

TEST(Survey, MemberRejectsWrongShapes) {
  auto& s = survey5();
  Subspace u = enum_subspaces<F5>(2, 6).front();
  EXPECT_THROW(member(VarietyId::X5, u, s.geometry()), std::invalid_argument);
  EXPECT_THROW(member(VarietyId::Z_scroll, u, s.geometry()), std::invalid_argument);
  EXPECT_THROW(member(VarietyId::Sigma, u, s.geometry()), std::invalid_argument);
  // a coordinate plane that is not μ-isotropic
  const auto& g = s.geometry();
  for (const auto& p : enum_subspaces<F5>(2, 6))
    if (!isotropic_for(g.mu_bar, p)) {
      EXPECT_FALSE(member(VarietyId::LGr2Wbar, p, g));
      EXPECT_FALSE(member(VarietyId::F_flag, p, g));
      break;
    }
}

TEST(LambdaHat, RanksOnSectionAndZ) {
  auto& s = survey5();
  const auto& g = s.geometry();
  auto rp = rank_profile_lgr(s);
  EXPECT_EQ(rp.points, 3906u);
  EXPECT_EQ(rp.histogram.size(), 2u);
  EXPECT_EQ(rp.histogram[2], 276u);
  EXPECT_EQ(rp.histogram[3], 3630u);
  EXPECT_TRUE(rank2_matches_z(s, rp));
  for (const auto& z : s.z_flags()) {
    auto m = lambda_hat_matrix(cone_over(z.U3.rows<F5>()), g.lambda);
    EXPECT_EQ(m.rows(), 3);
    EXPECT_EQ(m.cols(), 4);
    EXPECT_EQ(rank(m), 2);
  }
  // a 4-space off the hyperplane section
  std::mt19937_64 rng(5);
  int off = 0;
  for (int t = 0; t < 50 && off < 5; ++t) {
    auto U = random_subspace<F5>(4, 7, rng).rows<F5>();
    if (eval(g.lambda, U).is_zero()) continue;
    EXPECT_THROW(lambda_hat_matrix(U, g.lambda), std::domain_error);
    ++off;
  }
  EXPECT_GT(off, 0);
}

TEST(Structure, ProjectionAndFibers) {
  auto& s = survey5();
  auto pr = check_projection(s);
  EXPECT_TRUE(pr.pass());
  auto fb = check_fibers(s);
  EXPECT_TRUE(fb.pass);
  EXPECT_EQ(fb.base_points, 46u);
  EXPECT_EQ(fb.min_fiber, 6u);
  EXPECT_EQ(fb.total, 276u);
}

TEST(Special, ChecksPass) {
  auto& s = survey5();
  auto rep = special_checks(s, 7);
  EXPECT_TRUE(rep.shift_pass);
  EXPECT_EQ(rep.shifts.size(), 3u);
  EXPECT_EQ(rep.no21_violations, 0u);
  EXPECT_GT(rep.no21_scanned, 0u);
  EXPECT_TRUE(rep.gr27_pass);
  EXPECT_EQ(rep.c1, 6u);
  EXPECT_EQ(rep.c2, 6u);
  EXPECT_EQ(rep.c_overlap, 0u);
  EXPECT_TRUE(rep.pass());
}

TEST(Fourfold, GenericNuGivesDelPezzo) {
  auto& base = survey5();
  Geometry<5> g = base.geometry();
  std::mt19937_64 rng(6);
  ASSERT_GT(pick_generic_nu(g, rng), 0);
  Survey<5> s(g, EnumOptions{1, {}});
  auto r = fourfold_counts(s);
  EXPECT_TRUE(r.generic);
  EXPECT_EQ(r.sigma, 46u);
  EXPECT_TRUE(r.sigma_pass);
  EXPECT_LE(r.x4, r.x5);

  // ν = 0 is flagged and cuts nothing
  Geometry<5> g0 = base.geometry();
  g0.set_nu_frame(Multivector<F5>(7, 3, D));
  Survey<5> s0(g0, EnumOptions{1, {}});
  auto r0 = fourfold_counts(s0);
  EXPECT_TRUE(r0.nu_zero);
  EXPECT_FALSE(r0.generic);
  EXPECT_EQ(r0.x4, r0.x5);
}

TEST(Fourfold, SigmaCountFollowsEigenlines) {
  // #Σ = 1+q+q^2 + q·(number of rational eigenlines of the A1 endomorphism)
  auto& base = survey5();
  std::mt19937_64 rng(7);
  for (int t = 0; t < 6; ++t) {
    Geometry<5> g = base.geometry();
    g.set_nu_frame(random_3form<5>(rng));
    Survey<5> s(g, EnumOptions{1, {}});
    auto sigma = s.count(VarietyId::Sigma).observed;
    EXPECT_GE(sigma, 31u);
    EXPECT_EQ((sigma - 31) % 5, 0u) << sigma;
    if (nu_is_generic(g)) {
      EXPECT_EQ(sigma, 46u);
    }
  }
}

TEST(OddSymplectic, IdentityAtQ3) {
  auto mu = mono<F3>(7, {1, 6}) + mono<F3>(7, {2, 5}) + mono<F3>(7, {3, 4});
  auto r = odd_symplectic_identity<3>(mu, EnumOptions{1, {}});
  EXPECT_EQ(r.lgr3, 1120u);
  EXPECT_EQ(r.lgr2, 3640u);
  EXPECT_EQ(r.lhs, 40u * 1120u);
  EXPECT_TRUE(r.pass);
}
