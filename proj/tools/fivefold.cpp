#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <fivefold/fingeom.hpp>
#include <fivefold/motive.hpp>
#include <fivefold/structure.hpp>

using namespace fivefold;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.3.0";

enum Exit { kPass = 0, kMathFail = 1, kInputError = 2, kBudget = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string instance;
  std::string q_list;
  std::string variety;
  std::string level = "fast";
  std::string domain = "lgr";
  unsigned threads = 0;
  double budget = 0;
  std::string json_out;
  std::optional<std::uint64_t> seed;
  // build
  std::string M, K, field = "5", out;
  bool random = false;
  int retries = 200;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// ---------------------------------------------------------------------------
// Instance files.

struct Instance {
  std::optional<long long> prime;  // nullopt: rational
  std::optional<std::array<Rational, 6>> M;
  std::optional<std::array<Rational, 3>> K;
  std::optional<Multivector<Rational>> lambda, mu;
  std::optional<Multivector<Rational>> nu;
  std::optional<std::uint64_t> seed;
  std::string raw;
};

Rational coeff_of(const Json& j, const std::string& where) {
  if (j.is_number_integer()) return Rational(static_cast<long>(j.get<long long>()));
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  throw InputError(where + ": coefficient must be an integer or a string");
}

Multivector<Rational> parse_form(const Json& terms, int grade, const std::string& name) {
  if (!terms.is_array()) throw InputError(name + ": expected a list of terms");
  Multivector<Rational> f(7, grade, Variance::Dual);
  std::set<Mask> seen;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& term = terms[t];
    std::string where = name + "[" + std::to_string(t) + "]";
    if (!term.is_array() || static_cast<int>(term.size()) != grade + 1)
      throw InputError(where + ": expected " + std::to_string(grade) + " indices and a coefficient");
    Mask m = 0;
    int prev = -1;
    for (int i = 0; i < grade; ++i) {
      if (!term[i].is_number_integer()) throw InputError(where + ": index must be an integer");
      int x = term[i].get<int>();
      if (x < 0 || x > 6) throw InputError(where + ": index out of range 0..6");
      if (x <= prev) throw InputError(where + ": indices must be strictly increasing");
      prev = x;
      m |= Mask{1} << x;
    }
    if (!seen.insert(m).second) throw InputError(where + ": repeated monomial");
    f.set(m, coeff_of(term[grade], where));
  }
  return f;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read instance file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Instance inst;
  inst.raw = ss.str();
  Json j;
  try {
    j = Json::parse(inst.raw);
  } catch (const Json::parse_error& e) {
    throw InputError(std::string("instance is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("instance must be a JSON object");
  if (!j.contains("field")) throw InputError("instance: missing field");
  const auto& fld = j["field"];
  if (fld.is_string() && fld.get<std::string>() == "rational") {
  } else if (fld.is_number_integer()) {
    inst.prime = fld.get<long long>();
    with_prime(*inst.prime, [](auto) { return 0; });
  } else {
    throw InputError("instance: field must be \"rational\" or a supported prime");
  }
  bool has_params = j.contains("params"), has_explicit = j.contains("explicit");
  if (has_params == has_explicit) throw InputError("instance: exactly one of params/explicit must be present");
  if (has_params) {
    const auto& p = j["params"];
    if (!p.contains("M") || !p.contains("K") || !p["M"].is_array() || !p["K"].is_array() || p["M"].size() != 6 ||
        p["K"].size() != 3)
      throw InputError("params: expected M with 6 entries and K with 3 entries");
    std::array<Rational, 6> M;
    std::array<Rational, 3> K;
    for (int i = 0; i < 6; ++i) M[i] = coeff_of(p["M"][i], "M" + std::to_string(i + 1));
    for (int i = 0; i < 3; ++i) K[i] = coeff_of(p["K"][i], "K" + std::to_string(i + 1));
    inst.M = M;
    inst.K = K;
  } else {
    const auto& e = j["explicit"];
    if (!e.contains("lambda") || !e.contains("mu")) throw InputError("explicit: needs lambda and mu");
    inst.lambda = parse_form(e["lambda"], 4, "lambda");
    inst.mu = parse_form(e["mu"], 2, "mu");
  }
  if (j.contains("nu")) inst.nu = parse_form(j["nu"], 3, "nu");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw InputError("seed must be a nonnegative integer");
    inst.seed = j["seed"].get<std::uint64_t>();
  }
  return inst;
}

template <class F>
F reduce(const Rational& x, const std::string& what) {
  auto r = field_traits<F>::from_rational(x);
  if (!r) throw InputError(what + ": denominator vanishes in " + field_traits<F>::name());
  return *r;
}

template <class F>
Multivector<F> reduce_form(const Multivector<Rational>& f, const std::string& what) {
  return map_coeffs<F>(f, [&](const Rational& x) { return reduce<F>(x, what); });
}

template <class F>
struct Forms {
  Multivector<F> lambda, mu;
  std::optional<Params6<F>> M;
  std::optional<Params3<F>> K;
};

template <class F>
Forms<F> forms_over(const Instance& inst) {
  Forms<F> f;
  if (inst.M) {
    Params6<F> M;
    Params3<F> K;
    for (int i = 0; i < 6; ++i) M[i] = reduce<F>((*inst.M)[i], "M" + std::to_string(i + 1));
    for (int i = 0; i < 3; ++i) K[i] = reduce<F>((*inst.K)[i], "K" + std::to_string(i + 1));
    f.M = M;
    f.K = K;
    f.lambda = standard_lambda<F>();
    f.mu = shift_indices(from_skew(mu_matrix(M, K)), 7, 1);
  } else {
    f.lambda = reduce_form<F>(*inst.lambda, "lambda");
    f.mu = reduce_form<F>(*inst.mu, "mu");
  }
  return f;
}

std::vector<long long> parse_q_list(const std::string& s) {
  std::vector<long long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t pos = 0;
      long long q = std::stoll(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      out.push_back(q);
    } catch (const std::exception&) {
      throw InputError("cannot parse q value '" + tok + "'");
    }
  }
  return out;
}

std::vector<long long> field_list(const Instance& inst, const Options& o) {
  auto qs = parse_q_list(o.q_list);
  if (inst.prime) {
    if (qs.empty()) qs = {*inst.prime};
    for (auto q : qs)
      if (q != *inst.prime) throw InputError("instance is over F_" + std::to_string(*inst.prime) + ", cannot count over F_" + std::to_string(q));
  }
  if (qs.empty()) throw InputError("--q is required for a rational instance");
  for (auto q : qs) with_prime(q, [](auto) { return 0; });
  return qs;
}

// ---------------------------------------------------------------------------
// JSON fragments.

template <class T>
Json certificate_json(const Certificate<T>& c, const std::string& field) {
  auto s = [](const T& x) { return to_string(x); };
  Json items = Json::array();
  auto item = [&](const char* name, bool pass, Json witness) {
    items.push_back({{"name", name}, {"pass", pass}, {"witness", std::move(witness)}});
  };
  item("a1_general_lambda", c.a1_general_lambda, {{"det_q_lambda", s(c.det_q)}});
  item("a1_rank_mu", c.a1_rank_mu, {{"rank_mu", c.rank_mu}});
  item("a1_w0_off_quadric", c.a1_w0_off_quadric, {{"q_w0_w0", s(c.q_w0w0)}});
  item("hitchin_split", c.hitchin_split, {{"status", c.hitchin_status}});
  item("a2_distinct_roots", c.a2_distinct_roots, {{"discriminant", s(c.disc_chi)}});
  item("normal_form", c.normal_form, {{"status", c.normal_form_status}});
  Json mk = Json::object();
  if (c.normal_form) {
    Json m = Json::array(), k = Json::array();
    for (const auto& x : c.M) m.push_back(s(x));
    for (const auto& x : c.K) k.push_back(s(x));
    mk = {{"M", m}, {"K", k}};
  }
  item("a3_nonzero", c.a3_nonzero, mk);
  item("mmk_nonzero", c.mmk_nonzero, {{"mmk", s(c.mmk_value)}});
  item("a4_xi_general", c.a4_xi_general, {{"det_q_xi", s(c.det_q_xi)}});
  std::string ff = c.first_failure();
  return {{"field", field}, {"pass", c.passed()}, {"first_failure", ff.empty() ? Json(nullptr) : Json(ff)}, {"items", items}};
}

// Checks on the parameters themselves, reported before the certificate.
template <class F>
Json parameter_json(const Forms<F>& f, std::string& failure) {
  if (!f.M) return nullptr;
  Json j = Json::object();
  bool zero = false, repeated = false;
  for (const auto& m : *f.M) zero = zero || is_zero(m);
  for (const auto& k : *f.K) zero = zero || is_zero(k);
  for (int i = 0; i < 3; ++i)
    for (int l = i + 1; l < 3; ++l) repeated = repeated || (*f.K)[i] == (*f.K)[l];
  F v = mmk(*f.M, *f.K);
  j["nonzero"] = !zero;
  j["distinct_K"] = !repeated;
  j["mmk"] = to_string(v);
  j["mmk_nonzero"] = !is_zero(v);
  if (zero)
    failure = "ZeroParameter";
  else if (repeated)
    failure = "RepeatedK";
  else if (is_zero(v))
    failure = "mmk_nonzero";
  return j;
}

Json count_json(const CountReport& r) {
  Json j = {{"variety", std::string(variety_name(r.variety))}, {"q", r.q}, {"observed", r.observed}};
  if (r.expected_poly) {
    j["expected_poly"] = *r.expected_poly;
    j["expected"] = *r.expected;
    j["source"] = motive_source(r.variety);
  } else {
    j["expected_poly"] = nullptr;
    j["expected"] = nullptr;
  }
  j["pass"] = r.pass;
  return j;
}

Json histogram_json(const RankProfile& rp) {
  Json h = Json::object();
  for (auto [k, v] : rp.histogram) h[std::to_string(k)] = v;
  return h;
}

struct Timings {
  Json j = Json::object();
  void add(const std::string& key, double sec) { j[key] = sec; }
};

template <class Fn>
double seconds_of(Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Per-field runs.

struct RunResult {
  Json json;
  int exit = kPass;
  std::vector<std::string> summary;
};

template <class F>
Analysis<F> certify_forms(const Forms<F>& f, Json& out, std::string& param_failure) {
  out["parameters"] = parameter_json(f, param_failure);
  auto an = certify(f.lambda, f.mu);
  out["certificate"] = certificate_json(an.cert, field_traits<F>::name());
  return an;
}

template <std::uint32_t P>
void attach_nu(Geometry<P>& g, const Instance& inst, std::mt19937_64& rng, Json& out) {
  using F = Zp<P>;
  if (inst.nu) {
    g.set_nu(reduce_form<F>(*inst.nu, "nu"));
    out["nu_source"] = "instance";
  } else {
    int tries = pick_generic_nu(g, rng);
    out["nu_source"] = "random";
    out["nu_draws"] = tries;
    if (!tries) out["nu_source"] = "random (no generic draw)";
  }
}

template <std::uint32_t P>
RunResult run_count(const Instance& inst, const Options& o, VarietyId v, std::uint64_t seed, Timings& tm) {
  using F = Zp<P>;
  RunResult rr;
  rr.json["q"] = P;
  auto forms = forms_over<F>(inst);
  std::string pf;
  auto an = certify_forms(forms, rr.json, pf);
  if (!pf.empty() || !an.cert.passed()) {
    std::string why = pf.empty() ? an.cert.first_failure() : pf;
    rr.summary.push_back("F_" + std::to_string(P) + ": certification failed (" + why + "), not counting");
    rr.exit = kMathFail;
    return rr;
  }
  auto g = Geometry<P>::from_analysis(an);
  std::mt19937_64 rng(seed);
  if (v == VarietyId::X4 || v == VarietyId::Sigma) attach_nu(g, inst, rng, rr.json);
  Survey<P> s(g, {o.threads, Budget::seconds(o.budget)});
  CountReport r;
  double sec = seconds_of([&] { r = s.count(v); });
  if (v == VarietyId::Sigma && !nu_is_generic(g)) {
    // the expectation only holds for generic ν
    r.expected.reset();
    r.expected_poly.reset();
    r.pass = true;
    rr.json["nu_generic"] = false;
  }
  tm.add("q" + std::to_string(P) + "." + std::string(variety_name(v)), sec);
  rr.json["count"] = count_json(r);
  rr.exit = r.pass ? kPass : kMathFail;
  rr.summary.push_back(std::string(variety_name(v)) + " over F_" + std::to_string(P) + ": " + std::to_string(r.observed) +
                       (r.expected ? " (expected " + std::to_string(*r.expected) + ")" : " (no expectation)") +
                       (r.pass ? " PASS" : " FAIL"));
  return rr;
}

template <std::uint32_t P>
RunResult run_verify(const Instance& inst, const Options& o, std::uint64_t seed, Timings& tm) {
  using F = Zp<P>;
  const std::string tag = "q" + std::to_string(P) + ".";
  RunResult rr;
  auto& j = rr.json;
  j["q"] = P;
  auto forms = forms_over<F>(inst);
  std::string pf;
  auto an = certify_forms(forms, j, pf);
  if (!pf.empty() || !an.cert.passed()) {
    std::string why = pf.empty() ? an.cert.first_failure() : pf;
    rr.summary.push_back("F_" + std::to_string(P) + ": certification failed (" + why + "), refusing to count");
    j["pass"] = false;
    rr.exit = kMathFail;
    return rr;
  }
  const bool full = o.level == "full";
  auto g = Geometry<P>::from_analysis(an);
  std::mt19937_64 rng(seed);
  if (full) attach_nu(g, inst, rng, j);
  Survey<P> s(g, {o.threads, Budget::seconds(o.budget)});
  bool ok = true;

  std::vector<CountReport> counts;
  for (auto v : kAllVarieties) {
    if (v == VarietyId::X4 || v == VarietyId::Sigma) continue;
    CountReport r;
    double sec = seconds_of([&] { r = s.count(v); });
    tm.add(tag + std::string(variety_name(v)), sec);
    counts.push_back(r);
  }
  auto rec = reconcile(counts);
  Json cj = Json::array();
  for (const auto& r : rec.counts) {
    cj.push_back(count_json(r));
    rr.summary.push_back("  " + std::string(variety_name(r.variety)) + " = " + std::to_string(r.observed) +
                         (r.expected ? (r.pass ? " ok" : " MISMATCH, expected " + std::to_string(*r.expected)) : ""));
  }
  j["counts"] = cj;
  Json ij = Json::array();
  for (const auto& iv : rec.identities) {
    ij.push_back({{"name", iv.name}, {"formula", iv.detail}, {"lhs", iv.lhs}, {"rhs", iv.rhs}, {"pass", iv.pass}});
    rr.summary.push_back("  identity " + iv.name + ": " + std::to_string(iv.lhs) + " vs " + std::to_string(iv.rhs) +
                         (iv.pass ? " ok" : " FAIL"));
  }
  ok = ok && rec.pass;

  const std::uint64_t q = P;
  const std::uint64_t pairs_expected = (1 + q + q * q) * s.count(VarietyId::LGr3Wbar_lambda).observed;
  ij.push_back({{"name", "flag_direct"}, {"formula", "#{U2 in U3 on the section} = (1+q+q^2)#LGr_lambda"},
                {"lhs", s.planes().pairs}, {"rhs", pairs_expected}, {"pass", s.planes().pairs == pairs_expected}});
  ok = ok && s.planes().pairs == pairs_expected;
  j["identities"] = ij;

  RankProfile lgr;
  tm.add(tag + "rank_profile_lgr", seconds_of([&] { lgr = rank_profile_lgr(s); }));
  bool z_match = rank2_matches_z(s, lgr);
  bool lgr_ok = z_match && lgr.histogram.size() <= 2 && lgr.histogram.count(2) && lgr.histogram.count(3) &&
                lgr.histogram[2] == s.count(VarietyId::Z_scroll).observed;
  j["rank_profiles"]["lgr_section"] = {{"points", lgr.points}, {"histogram", histogram_json(lgr)},
                                       {"rank2_equals_z", z_match}, {"pass", lgr_ok}};
  rr.summary.push_back("  rank profile on the LGr section: " + histogram_json(lgr).dump() + (lgr_ok ? " ok" : " FAIL"));
  ok = ok && lgr_ok;

  ProjectionReport pr;
  FiberReport fr;
  tm.add(tag + "structural", seconds_of([&] {
           pr = check_projection(s);
           fr = check_fibers(s);
         }));
  j["structural"] = {
      {"projection", {{"xi_points", pr.xi_points}, {"images", pr.images}, {"dlm_points", pr.dlm_points},
                      {"w0_avoided", pr.w0_avoided}, {"injective", pr.injective}, {"image_equal", pr.image_equal},
                      {"pass", pr.pass()}}},
      {"z_fibers", {{"base_points", fr.base_points}, {"min", fr.min_fiber}, {"max", fr.max_fiber}, {"pass", fr.pass}}}};
  ok = ok && pr.pass() && fr.pass;

  SpecialReport sp;
  tm.add(tag + "special_checks", seconds_of([&] { sp = special_checks(s, seed); }));
  Json shifts = Json::array();
  for (const auto& t : sp.shifts) shifts.push_back({{"t", t.t}, {"points", t.points}, {"equal", t.equal}});
  j["special_checks"] = {
      {"shift", {{"trials", shifts}, {"pass", sp.shift_pass}}},
      {"no21", {{"scanned", sp.no21_scanned}, {"violations", sp.no21_violations}, {"pass", sp.no21_violations == 0}}},
      {"dual_quadric",
       {{"planes", sp.dual_planes}, {"samples", sp.samples}, {"hits", sp.sample_hits},
        {"plane_points_off_quadric", sp.plane_points_off_quadric}, {"pass", sp.gr27_pass}}},
      {"c_loci",
       {{"z_points", sp.z_points}, {"c1", sp.c1}, {"c2", sp.c2}, {"overlap", sp.c_overlap}, {"rank1", sp.rank1},
        {"rank2", sp.rank2}, {"misplaced", sp.rank_other}, {"pass", sp.c_pass}}}};
  rr.summary.push_back(std::string("  special checks: ") + (sp.pass() ? "ok" : "FAIL"));
  ok = ok && sp.pass();

  if (full) {
    RankProfile gr4;
    tm.add(tag + "rank_profile_gr4", seconds_of([&] { gr4 = rank_profile_gr4(s); }));
    auto rank1 = gr4.histogram.count(1) ? gr4.histogram[1] : 0;
    auto rank2 = gr4.histogram.count(2) ? gr4.histogram[2] : 0;
    auto quadric = s.count(VarietyId::Qdual_lambda).observed;
    auto d1 = expected_gr4_rank2(q, s.count(VarietyId::GrLambda5W).observed, rank1);
    bool gr4_ok = gr4.histogram[0] == 0 && rank1 == quadric && rank2 == d1;
    j["rank_profiles"]["gr4_section"] = {{"points", gr4.points}, {"histogram", histogram_json(gr4)},
                                         {"rank1_equals_quadric", rank1 == quadric}, {"rank2_expected", d1},
                                         {"pass", gr4_ok}};
    rr.summary.push_back("  rank profile on the Gr(4,7) section: " + histogram_json(gr4).dump() + (gr4_ok ? " ok" : " FAIL"));
    ok = ok && gr4_ok;

    FourfoldReport ff;
    tm.add(tag + "fourfold", seconds_of([&] { ff = fourfold_counts(s); }));
    j["fourfold"] = {{"nu_zero", ff.nu_zero}, {"nu_generic", ff.generic}, {"X5", ff.x5}, {"X4", ff.x4},
                     {"Sigma", ff.sigma}, {"Sigma_expected", ff.generic ? Json(ff.sigma_expected) : Json(nullptr)},
                     {"pass", ff.sigma_pass}};
    rr.summary.push_back("  fourfold: X4 = " + std::to_string(ff.x4) + ", Sigma = " + std::to_string(ff.sigma) +
                         (ff.generic ? (ff.sigma_pass ? " ok" : " FAIL") : " (nu not generic, no expectation)"));
    ok = ok && ff.sigma_pass;
  }
  j["pass"] = ok;
  rr.exit = ok ? kPass : kMathFail;
  return rr;
}

template <std::uint32_t P>
RunResult run_profile(const Instance& inst, const Options& o, Timings& tm) {
  using F = Zp<P>;
  RunResult rr;
  rr.json["q"] = P;
  auto forms = forms_over<F>(inst);
  std::string pf;
  auto an = certify_forms(forms, rr.json, pf);
  if (!pf.empty() || !an.cert.passed()) {
    rr.summary.push_back("certification failed, no profile");
    rr.exit = kMathFail;
    return rr;
  }
  Survey<P> s(Geometry<P>::from_analysis(an), {o.threads, Budget::seconds(o.budget)});
  RankProfile rp;
  bool ok = true;
  if (o.domain == "lgr") {
    tm.add("q" + std::to_string(P) + ".rank_profile_lgr", seconds_of([&] { rp = rank_profile_lgr(s); }));
    ok = rank2_matches_z(s, rp) && rp.histogram.size() == 2 && rp.histogram.count(2) && rp.histogram.count(3);
    rr.json["rank2_equals_z"] = rank2_matches_z(s, rp);
  } else {
    tm.add("q" + std::to_string(P) + ".rank_profile_gr4", seconds_of([&] { rp = rank_profile_gr4(s); }));
    ok = rp.histogram[0] == 0 && rp.histogram[1] == s.count(VarietyId::Qdual_lambda).observed;
  }
  rr.json["domain"] = o.domain;
  rr.json["points"] = rp.points;
  rr.json["histogram"] = histogram_json(rp);
  rr.json["pass"] = ok;
  rr.summary.push_back(o.domain + " profile over F_" + std::to_string(P) + ": " + histogram_json(rp).dump() + (ok ? " ok" : " FAIL"));
  rr.exit = ok ? kPass : kMathFail;
  return rr;
}

// ---------------------------------------------------------------------------
// Commands.

Json report_header(const std::string& cmd, const Instance* inst, std::uint64_t seed) {
  Json j;
  j["tool"] = "fivefold";
  j["version"] = kVersion;
  j["command"] = cmd;
  j["input_hash"] = inst ? Json("fnv1a64:" + hex64(fnv1a(inst->raw))) : Json(nullptr);
  j["seed"] = seed;
  return j;
}

void emit(const Json& report, const Options& o, const std::vector<std::string>& lines) {
  std::ostream& human = o.json_out == "-" ? std::cerr : std::cout;
  for (const auto& l : lines) human << l << "\n";
  if (o.json_out.empty()) return;
  if (o.json_out == "-") {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream f(o.json_out);
  if (!f) throw InputError("cannot write " + o.json_out);
  f << report.dump(2) << "\n";
}

std::uint64_t pick_seed(const Options& o, const Instance* inst) {
  if (o.seed) return *o.seed;
  if (inst && inst->seed) return *inst->seed;
  return 1;
}

int cmd_certify(const Options& o) {
  auto inst = load_instance(o.instance);
  auto seed = pick_seed(o, &inst);
  Json rep = report_header("certify", &inst, seed);
  std::vector<std::string> lines;
  Timings tm;
  int code = kPass;
  auto run = [&](auto f) {
    using F = decltype(f);
    auto forms = forms_over<F>(inst);
    std::string pf;
    Json out;
    Analysis<F> an;
    tm.add("certify", seconds_of([&] { an = certify_forms(forms, out, pf); }));
    rep["parameters"] = out["parameters"];
    rep["certificate"] = out["certificate"];
    if (!pf.empty()) lines.push_back("parameter check failed: " + pf);
    for (const auto& it : out["certificate"]["items"])
      lines.push_back((it["pass"].get<bool>() ? "  pass  " : "  FAIL  ") + it["name"].get<std::string>() + "  " +
                      it["witness"].dump());
    bool ok = pf.empty() && an.cert.passed();
    lines.push_back(ok ? "certified" : "not certified");
    code = ok ? kPass : kMathFail;
    return 0;
  };
  if (inst.prime)
    with_prime(*inst.prime, run);
  else
    run(Rational());
  rep["pass"] = code == kPass;
  rep["exit_code"] = code;
  rep["timings"] = tm.j;
  emit(rep, o, lines);
  return code;
}

int cmd_count(const Options& o) {
  auto v = parse_variety(o.variety);
  if (!v) throw InputError("unknown variety '" + o.variety + "'");
  auto inst = load_instance(o.instance);
  auto seed = pick_seed(o, &inst);
  auto qs = field_list(inst, o);
  Json rep = report_header("count", &inst, seed);
  Timings tm;
  std::vector<std::string> lines;
  Json runs = Json::array();
  int code = kPass;
  for (auto q : qs) {
    RunResult rr = with_prime(q, [&](auto f) { return run_count<decltype(f)::modulus>(inst, o, *v, seed, tm); });
    runs.push_back(rr.json);
    lines.insert(lines.end(), rr.summary.begin(), rr.summary.end());
    code = std::max(code, rr.exit);
  }
  rep["runs"] = runs;
  rep["pass"] = code == kPass;
  rep["exit_code"] = code;
  rep["timings"] = tm.j;
  emit(rep, o, lines);
  return code;
}

int cmd_verify(const Options& o) {
  if (o.level != "fast" && o.level != "full") throw InputError("--level must be fast or full");
  auto inst = load_instance(o.instance);
  auto seed = pick_seed(o, &inst);
  auto qs = field_list(inst, o);
  Json rep = report_header("verify", &inst, seed);
  rep["level"] = o.level;
  Timings tm;
  std::vector<std::string> lines;
  Json runs = Json::array();
  int code = kPass;
  for (auto q : qs) {
    if (q < 5) throw InputError("certified runs need q >= 5");
    lines.push_back("F_" + std::to_string(q) + ":");
    RunResult rr = with_prime(q, [&](auto f) { return run_verify<decltype(f)::modulus>(inst, o, seed, tm); });
    runs.push_back(rr.json);
    lines.insert(lines.end(), rr.summary.begin(), rr.summary.end());
    code = std::max(code, rr.exit);
  }
  rep["runs"] = runs;
  rep["pass"] = code == kPass;
  rep["exit_code"] = code;
  rep["timings"] = tm.j;
  lines.push_back(code == kPass ? "verify: all checks pass" : "verify: FAILED");
  emit(rep, o, lines);
  return code;
}

int cmd_profile(const Options& o) {
  if (o.domain != "lgr" && o.domain != "gr4") throw InputError("--domain must be lgr or gr4");
  auto inst = load_instance(o.instance);
  auto seed = pick_seed(o, &inst);
  auto qs = field_list(inst, o);
  Json rep = report_header("profile", &inst, seed);
  Timings tm;
  std::vector<std::string> lines;
  Json runs = Json::array();
  int code = kPass;
  for (auto q : qs) {
    RunResult rr = with_prime(q, [&](auto f) { return run_profile<decltype(f)::modulus>(inst, o, tm); });
    runs.push_back(rr.json);
    lines.insert(lines.end(), rr.summary.begin(), rr.summary.end());
    code = std::max(code, rr.exit);
  }
  rep["runs"] = runs;
  rep["pass"] = code == kPass;
  rep["exit_code"] = code;
  rep["timings"] = tm.j;
  emit(rep, o, lines);
  return code;
}

std::vector<Rational> parse_scalars(const std::string& s, std::size_t n, const char* name) {
  std::vector<Rational> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_rational(tok));
  if (out.size() != n) throw InputError(std::string(name) + ": expected " + std::to_string(n) + " comma-separated values");
  return out;
}

Json scalar_json(const Rational& x) {
  if (x.get_den() == 1 && x.get_num().fits_slong_p()) return x.get_num().get_si();
  return x.get_str();
}

void write_instance(const Options& o, const Json& field, const std::vector<Rational>& M, const std::vector<Rational>& K,
                    std::optional<std::uint64_t> seed) {
  Json j;
  j["field"] = field;
  Json m = Json::array(), k = Json::array();
  for (const auto& x : M) m.push_back(scalar_json(x));
  for (const auto& x : K) k.push_back(scalar_json(x));
  j["params"] = {{"M", m}, {"K", k}};
  if (seed) j["seed"] = *seed;
  std::string text = j.dump(2) + "\n";
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw InputError("cannot write " + o.out);
  f << text;
}

int cmd_build(const Options& o) {
  Json field;
  std::optional<long long> prime;
  if (o.field == "rational" || o.field == "Q") {
    field = "rational";
  } else {
    try {
      prime = std::stoll(o.field);
    } catch (const std::exception&) {
      throw InputError("--field must be rational or a prime");
    }
    with_prime(*prime, [](auto) { return 0; });
    field = *prime;
  }
  std::ostream& log = (o.out.empty() || o.out == "-") ? std::cerr : std::cout;

  if (!o.random) {
    if (o.M.empty() || o.K.empty()) throw InputError("build needs --M and --K, or --random");
    auto M = parse_scalars(o.M, 6, "--M"), K = parse_scalars(o.K, 3, "--K");
    auto check = [&](auto f) {
      using F = decltype(f);
      Params6<F> m;
      Params3<F> k;
      for (int i = 0; i < 6; ++i) m[i] = reduce<F>(M[i], "M" + std::to_string(i + 1));
      for (int i = 0; i < 3; ++i) k[i] = reduce<F>(K[i], "K" + std::to_string(i + 1));
      build_instance(m, k);
      return 0;
    };
    try {
      if (prime)
        with_prime(*prime, check);
      else
        check(Rational());
    } catch (const StructureError& e) {
      throw InputError(e.what());
    }
    write_instance(o, field, M, K, o.seed);
    log << "instance written\n";
    return kPass;
  }

  if (!prime) throw InputError("--random needs a prime field");
  const std::uint64_t seed = o.seed.value_or(1);
  std::mt19937_64 rng(seed);
  std::map<std::string, int> rejections;
  int code = with_prime(*prime, [&](auto f) {
    using F = decltype(f);
    std::uniform_int_distribution<std::uint32_t> d(1, F::modulus - 1);
    for (int attempt = 1; attempt <= o.retries; ++attempt) {
      Params6<F> m;
      Params3<F> k;
      for (auto& x : m) x = F::raw(d(rng));
      for (auto& x : k) x = F::raw(d(rng));
      std::string reason;
      try {
        auto inst = build_instance(m, k);
        auto an = certify(inst.lambda, inst.mu);
        if (an.cert.passed()) {
          std::vector<Rational> M, K;
          for (auto& x : m) M.emplace_back(static_cast<long>(x.value()));
          for (auto& x : k) K.emplace_back(static_cast<long>(x.value()));
          write_instance(o, field, M, K, seed);
          log << "certified instance after " << attempt << " draws";
          for (auto& [r, n] : rejections) log << ", " << r << " x" << n;
          log << "\n";
          return static_cast<int>(kPass);
        }
        reason = an.cert.first_failure();
      } catch (const StructureError& e) {
        reason = e.code();
      }
      ++rejections[reason];
    }
    log << "no certified instance in " << o.retries << " draws";
    for (auto& [r, n] : rejections) log << ", " << r << " x" << n;
    log << "\n";
    return static_cast<int>(kMathFail);
  });
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact forms, certificates and point counts for the fivefold constructions"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool with_instance) {
    if (with_instance) sub->add_option("instance", o.instance, "instance file (JSON)")->required();
    sub->add_option("--threads", o.threads, "worker threads, 0 for all cores");
    sub->add_option("--budget-seconds", o.budget, "abort counting after this many seconds, 0 for no limit");
    sub->add_option("--json-out", o.json_out, "write the JSON report to a file, or - for stdout");
    sub->add_option("--seed", seed, "seed for sampled choices");
  };

  auto* build = app.add_subcommand("build", "write an instance file from parameters or by sampling");
  common(build, false);
  build->add_option("--M", o.M, "M1..M6, comma separated");
  build->add_option("--K", o.K, "K1..K3, comma separated");
  build->add_option("--field,--q", o.field, "prime or rational");
  build->add_flag("--random", o.random, "sample parameters until certification passes");
  build->add_option("--retries", o.retries, "sampling attempts");
  build->add_option("-o,--out", o.out, "output path (default stdout)");

  auto* cert = app.add_subcommand("certify", "check the genericity assumptions");
  common(cert, true);

  auto* count = app.add_subcommand("count", "count F_q-points of one variety");
  common(count, true);
  count->add_option("--variety", o.variety, "variety id, e.g. X5")->required();
  count->add_option("--q", o.q_list, "field size (defaults to the instance field)");

  auto* verify = app.add_subcommand("verify", "all counts, identities and checks");
  common(verify, true);
  verify->add_option("--q", o.q_list, "comma separated field sizes");
  verify->add_option("--level", o.level, "fast or full");

  auto* profile = app.add_subcommand("profile", "rank histogram of the degeneracy map");
  common(profile, true);
  profile->add_option("--q", o.q_list, "comma separated field sizes");
  profile->add_option("--domain", o.domain, "lgr or gr4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : kInputError;
  }
  for (auto* sub : {build, cert, count, verify, profile})
    if (sub->count("--seed")) o.seed = seed;

  try {
    if (*build) return cmd_build(o);
    if (*cert) return cmd_certify(o);
    if (*count) return cmd_count(o);
    if (*verify) return cmd_verify(o);
    if (*profile) return cmd_profile(o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const UnsupportedPrime& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBudget;
  }
  return kInputError;
}
