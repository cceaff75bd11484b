// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kahlerlab/cli.hpp"
#include "kahlerlab/curvature.hpp"
#include "kahlerlab/families.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kl;

namespace {

constexpr int kSamples = 64;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<Point> samples(const FamilyInstance& inst) { return sample_points(inst.box, kSamples, kDefaultSeed); }

ToleranceConfig default_tol() {
  ToleranceConfig t;
  t.samples_per_box = kSamples;
  return t;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

const CheckReport& check(const std::vector<CheckReport>& rs, const std::string& name) {
  return kltest::find_check(rs, name);
}

Outcome criterion1() {
  Outcome o;
  const FamilyInstance inst = kltest::e1();
  double es = 0, ep = 0, emu = 0, ek = 0, mt = 0, cm = 0, cy = 0;
  for (const Point& q : samples(inst)) {
    const auto b = curvature_bundle(inst, q, 3);
    const RicciFormData r = ricci_form_data(*b);
    const double xi = q[0], eta = q[1], d = xi - eta;
    es = std::max(es, rel(b->s.value(), -2.0 * (xi + eta)));
    ep = std::max(ep, rel(r.p.value(), 4.0 * xi * eta));
    emu = std::max(emu, rel(r.mu->value(), -d));
    ek = std::max(ek, rel(conformal_scalar(*b).route_rescale, -4.0 / (d * d * d)));
    mt = std::max(mt, matsumoto_tanno_residual(*b));
    const CottonCodiff cc = cotton_asd_and_codiff(*b);
    cm = std::max(cm, cc.cminus_norm / b->curvature_scale);
    cy = std::max(cy, cc.difference);
  }
  o.require(es < 1e-8, "s vs -2(xi+eta): " + fmt(es));
  o.require(ep < 1e-8, "p vs 4 xi eta: " + fmt(ep));
  o.require(emu < 1e-8, "mu vs -(xi-eta): " + fmt(emu));
  o.require(ek < 1e-8, "kappa vs -4/(xi-eta)^3: " + fmt(ek));
  o.require(mt < 1e-8, "Matsumoto-Tanno residual: " + fmt(mt));
  o.require(cm < 1e-8, "|C-|: " + fmt(cm));
  o.require(cy < 1e-8, "codifferential of W- vs C-: " + fmt(cy));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const FamilyInstance sd = kltest::e1_selfdual();
  double wm = 0;
  for (const Point& q : samples(sd)) {
    const auto b = curvature_bundle(sd, q, 2);
    wm = std::max(wm, norm(*b, b->weyl_minus));
  }
  o.require(wm < 1e-9, "C1 = C2: max |W-| " + fmt(wm));
  const FamilyInstance e1 = kltest::e1();
  double gap = 0;
  for (const Point& q : samples(e1)) {
    const auto b = curvature_bundle(e1, q, 2);
    gap = std::max(gap, weyl_spectrum(*b, -1, b->fields.omega_I).gap);
  }
  o.require(gap < 1e-8, "C1 != C2: max W- double-eigenvalue gap " + fmt(gap));
  const ConstantFit f = extract_constant(e1, ConstantExpr::wminus_over_kappa, default_tol());
  o.require(f.spread < 1e-7, "simple eigenvalue / kappa = " + fmt(f.constant) + ", spread " + fmt(f.spread));
  return o;
}

Outcome criterion3() {
  Outcome o;
  ExtremalQuartics q = e1_quartics();
  q.B1 = 0.3;
  q.B2 = -0.2;
  const FamilyInstance inst = orthotoric_extremal(q, e1_box());
  const auto rs = run_suite(inst, Suite::biextremal, default_tol());
  for (const auto& r : rs) {
    if (r.name == "p_holomorphic_potential")
      o.require(r.verdict == Verdict::fail && r.max > 1e-3, "pfaffian potential fails, max " + fmt(r.max));
    else if (r.verdict == Verdict::not_applicable)
      o.require(!r.note.empty(), r.name + " not applicable: " + r.note);
    else
      o.require(r.verdict == Verdict::pass, r.name + " passes, max " + fmt(r.max));
  }
  const bool has_s = std::any_of(rs.begin(), rs.end(), [](const CheckReport& r) {
    return r.name == "s_holomorphic_potential" && r.verdict == Verdict::pass;
  });
  o.require(has_s, "extremal check for s present");
  return o;
}

Outcome criterion4() {
  Outcome o;
  const CalabiParams p = e2_params();
  const FamilyInstance e2 = calabi_type(p);
  double es = 0, emu = 0, ek = 0;
  for (const Point& q : samples(e2)) {
    const auto b = curvature_bundle(e2, q, 3);
    const double z = q[2];
    es = std::max(es, rel(b->s.value(), -2.0 * p.A1 * z - p.A2));
    emu = std::max(emu, rel(ricci_form_data(*b).mu->value(), -p.A1 * z + p.A3 / (2.0 * z * z)));
    ek = std::max(ek, rel(conformal_scalar(*b).route_rescale, -p.A3 / (z * z) - 2.0 * p.A4 / (z * z * z)));
  }
  o.require(es < 1e-8, "E2 s vs -2 A1 z - A2: " + fmt(es));
  o.require(emu < 1e-8, "E2 mu vs -A1 z + A3/(2z^2): " + fmt(emu));
  o.require(ek < 1e-8, "E2 kappa vs -A3/z^2 - 2A4/z^3: " + fmt(ek));

  const auto wsd = run_suite(e2, Suite::weak_sd, default_tol());
  o.require(check(wsd, "cotton_asd").verdict == Verdict::pass, "A3 = 0 weakly selfdual, |C-| " + fmt(check(wsd, "cotton_asd").max));
  CalabiParams n = p;
  n.A3 = 0.3;
  const auto nsd = run_suite(calabi_type(n), Suite::weak_sd, default_tol());
  o.require(check(nsd, "cotton_asd").max > 1e-3, "A3 = 0.3 not weakly selfdual, |C-| " + fmt(check(nsd, "cotton_asd").max));

  CalabiParams bf = p;
  bf.A1 = 1.0;
  bf.A2 = 2.0;
  bf.A3 = 0.5;
  bf.A4 = 0.25;
  const auto bflat = run_suite(calabi_type(bf), Suite::bach, default_tol());
  o.require(check(bflat, "bach_flat").max < 1e-8,
            "4A1A4 - A2A3 = 0: |B| " + fmt(check(bflat, "bach_flat").max));
  const auto bnot = run_suite(e2, Suite::bach, default_tol());
  o.require(check(bnot, "bach_flat").max > 1e-3, "4A1A4 - A2A3 = -4: |B| " + fmt(check(bnot, "bach_flat").max));
  return o;
}

Outcome criterion5() {
  Outcome o;
  const ToleranceConfig t = default_tol();
  const ConstantFit e1 = extract_constant(kltest::e1(), ConstantExpr::kappa_lambda3, t);
  o.require(e1.spread < 1e-7, "E1 kappa lambda^3 = " + fmt(e1.constant) + ", spread " + fmt(e1.spread));
  const ConstantFit e2 = extract_constant(calabi_type(e2_params()), ConstantExpr::kappa_lambda3, t);
  o.require(e2.spread < 1e-7, "E2 kappa lambda^3 = " + fmt(e2.constant) + ", spread " + fmt(e2.spread));
  CalabiParams c;
  c.A1 = -0.25;
  c.A4 = -0.75;
  c.box = Box{{-0.3, -0.3, 1.05, 0.0}, {0.3, 0.3, 1.68, 1.0}};
  const FamilyInstance inst = calabi_type(c);
  const ConstantFit f = extract_constant(inst, ConstantExpr::kappa_lambda3, t);
  o.require(f.spread < 1e-7, "(A1, A4) = (-1/4, -3/4) spread " + fmt(f.spread));
  o.require(std::abs(f.constant - 3.0 / 128.0) < 1e-7, "constant " + fmt(f.constant) + " vs 3/128");
  o.require(std::abs(2.0 * std::pow(c.A1, 3) * c.A4 - 3.0 / 128.0) < 1e-15, "2 A1^3 A4 = 3/128");
  double direct = 0;
  for (double z : {1.1, 1.35, 1.6}) {
    const double kappa = -c.A3 / (z * z) - 2.0 * c.A4 / (z * z * z);
    const double lambda = std::abs(-c.A1 * z + c.A3 / (2.0 * z * z));
    direct = std::max(direct, std::abs(kappa * lambda * lambda * lambda - 3.0 / 128.0));
  }
  o.require(direct < 1e-14, "closed forms at z = 1.1, 1.35, 1.6 give 3/128: " + fmt(direct));
  return o;
}

Outcome criterion6() {
  Outcome o;
  const CalabiCoefficients c = calabi_f1_coefficients(1.0, std::sqrt(3.0));
  const double ce = std::max({std::abs(c.A1 + 0.25), std::abs(c.A2), std::abs(c.A3), std::abs(c.A4 + 0.75)});
  o.require(ce < 1e-12, "coefficients (-1/4, 0, 0, -3/4): " + fmt(ce));
  const Polynomial V({c.A1, c.A2, 1.0, c.A3, c.A4});
  const auto psi = closed_form_profile(1.0);
  const HirzebruchParams hp;
  double ode = 0, smin = 1e300;
  for (int i = 0; i < 20; ++i) {
    const double t = hp.box.lo[2] + (hp.box.hi[2] - hp.box.lo[2]) * i / 19.0;
    const Jet j = (*psi)(Jet::seed(0, t, 1));
    ode = std::max(ode, std::abs(j.value() * j.partial({1, 0, 0, 0}) - V(j.value())));
    smin = std::min(smin, -2.0 * c.A1 * j.value());
  }
  o.require(ode < 1e-10, "psi psi' = V(psi) at 20 t: " + fmt(ode));
  const Jet j0 = (*psi)(Jet::seed(0, 0.0, 1));
  o.require(std::abs(j0.value() - std::sqrt(2.0)) < 1e-14, "psi(0) = sqrt 2");
  o.require(std::abs(j0.value() * j0.partial({1, 0, 0, 0}) - 0.25) < 1e-14, "psi psi'(0) = 1/4");
  const HirzebruchResult h = hirzebruch(hp);
  double es = 0;
  for (const Point& q : samples(h.instance)) {
    const double s = curvature_bundle(h.instance, q, 2)->s.value();
    smin = std::min(smin, s);
    es = std::max(es, rel(s, -2.0 * c.A1 * psi->value(q[2])));
  }
  o.require(es < 1e-8, "engine s vs -2 A1 psi: " + fmt(es));
  o.require(smin > 0.0, "s > 0, minimum " + fmt(smin));
  return o;
}

Outcome criterion7() {
  Outcome o;
  const Scenario sc = load_scenario((kltest::source_dir() / "scenarios" / "orthotoric_hamiltonian.ini").string());
  const FamilyInstance inst = build_instance(sc);
  const auto rs = run_suite(inst, Suite::hamiltonian, default_tol());
  const std::vector<std::pair<std::string, double>> limits{
      {"phi_closed", 1e-9},    {"phi0_twistor", 1e-8}, {"sigma_potential", 1e-8}, {"pi_potential", 1e-8},
      {"dxi_perp_deta", 1e-8}, {"omega_K1_K2", 1e-9},  {"dpi", 1e-8},             {"swap", 1e-8},
      {"Idsig", 1e-8}};
  for (const auto& [name, lim] : limits) {
    const CheckReport& r = check(rs, name);
    o.require(r.evaluated == kSamples && r.max < lim, name + " max " + fmt(r.max) + " over " +
                                                          std::to_string(r.evaluated) + " samples");
  }
  // The trace coefficient 1 gives a form that is not closed; 3/2 is the one used above.
  OrthotoricParams lit;
  lit.F = Polynomial({0.1, 1, 0, 0, 0, 1});
  lit.G = Polynomial({-0.2, 1, 0, 0, 0, -1});
  lit.box = inst.box;
  lit.phi_trace = 1.0;
  const FamilyInstance li = orthotoric(lit);
  const auto b = curvature_bundle(li, li.box.center(), 3);
  const T3 d = exterior_d(*b->fields.phi);
  double dphi = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) dphi = std::max(dphi, std::abs(d[i][j][k].value()));
  o.notes.push_back("info trace coefficient 1 instead of 3/2: |d phi| = " + fmt(dphi) + " at the center");
  return o;
}

Outcome criterion8() {
  Outcome o;
  const AKParams base = ak_example2();
  double ric = 0, wm = 0, dw = 0, br = 0, nmin = 1e300;
  int above = 0, total = 0;
  for (int cell = 0; cell < 3; ++cell) {
    AKParams p = base;
    const double w = (base.box.hi[0] - base.box.lo[0]) / 3.0;
    p.box.lo[0] = base.box.lo[0] + cell * w;
    p.box.hi[0] = p.box.lo[0] + w;
    const FamilyInstance inst = ak_lebrun(p);
    for (const Point& q : samples(inst)) {
      const auto b = curvature_bundle(inst, q, 3);
      ric = std::max(ric, norm(*b, b->ric));
      wm = std::max(wm, norm(*b, b->weyl_minus));
      dw = std::max(dw, closedness_residual(*b));
      br = std::max(br, bianchirho_residual(*b));
      const double n = nijenhuis_norm(*b);
      nmin = std::min(nmin, n);
      above += n > 1e-3;
      ++total;
    }
  }
  const double frac = static_cast<double>(above) / total;
  o.require(ric < 1e-6, "|Ric| " + fmt(ric));
  o.require(wm < 1e-6, "|W-| " + fmt(wm));
  o.require(dw < 1e-9, "|d omega| " + fmt(dw));
  o.require(frac >= 0.9, "Nijenhuis > 1e-3 at " + fmt(100 * frac) + "% of " + std::to_string(total) +
                             " samples (min " + fmt(nmin) + ")");
  o.require(br < 1e-6, "bianchirho residual " + fmt(br));
  const FamilyInstance flat = ak_lebrun(ak_constant_h());
  double nc = 0;
  for (const Point& q : samples(flat)) nc = std::max(nc, nijenhuis_norm(*curvature_bundle(flat, q, 2)));
  o.require(nc < 1e-9, "constant H: Nijenhuis " + fmt(nc));
  return o;
}

struct LagrangeSample {
  double spread = 0;
  bool bundle = false;
};

LagrangeSample lagrange_at(const FamilyInstance& inst, const Point& q, const ToleranceConfig& t) {
  const auto b = curvature_bundle(inst, q, 2);
  const double scale = b->curvature_scale;
  LagrangeSample s;
  s.spread = lagrangian_spread(*b, 64, kDefaultSeed).spread / scale;
  const double rj = ricci_J_anti_invariant(*b);
  const double wm = norm(*b, b->weyl_minus) / scale;
  const double ef = weyl_spectrum(*b, +1).eigenform_residual / scale;
  s.bundle = rj <= t.identity_tol && wm <= t.identity_tol && ef <= t.identity_tol;
  return s;
}

Outcome criterion9() {
  Outcome o;
  const ToleranceConfig t = default_tol();
  for (const auto& [label, inst] :
       std::vector<std::pair<std::string, FamilyInstance>>{{"ortho-toric C1 = C2", kltest::e1_selfdual()},
                                                           {"kahler_product(1,-1)", kahler_product({1.0, -1.0})}}) {
    double m = 0;
    for (const Point& q : samples(inst)) m = std::max(m, lagrange_at(inst, q, t).spread);
    o.require(m < 1e-8, label + ": max spread " + fmt(m));
  }
  const FamilyInstance e1 = kltest::e1();
  const double g = lagrange_at(e1, {1.9, 0.15, 0.3, 0.7}, t).spread;
  o.require(g > 1e-3, "E1 at (1.9, 0.15, 0.3, 0.7): spread " + fmt(g));
  int mismatched = 0, both = 0, total = 0;
  std::string where;
  for (const auto& path : kltest::shipped_scenarios()) {
    const Scenario sc = load_scenario(path.string());
    const FamilyInstance inst = build_instance(sc);
    for (const Point& q : samples(inst)) {
      const LagrangeSample s = lagrange_at(inst, q, t);
      const bool small = s.spread <= t.identity_tol;
      ++total;
      both += small && s.bundle;
      if (small != s.bundle) {
        ++mismatched;
        where = path.stem().string();
      }
    }
  }
  o.require(mismatched == 0, "bundle and small spread co-occur at " + std::to_string(total - mismatched) + " of " +
                                 std::to_string(total) + " samples (" + std::to_string(both) + " with both)" +
                                 (where.empty() ? "" : ", last mismatch in " + where));
  return o;
}

Outcome criterion10() {
  Outcome o;
  double first = 0, second = 0;
  int instances = 0;
  for (const auto& path : kltest::shipped_scenarios()) {
    const FamilyInstance inst = build_instance(load_scenario(path.string()));
    ++instances;
    for (const Point& q : samples(inst)) {
      const kltest::FdResult r = kltest::fd_metric_error(inst, q);
      first = std::max(first, r.first);
      second = std::max(second, r.second);
    }
  }
  o.require(first < 1e-5, "first partials vs central differences over " + std::to_string(instances) +
                              " instances: " + fmt(first));
  o.require(second < 1e-5, "second partials vs extrapolated central differences: " + fmt(second));
  const Polynomial F({1.0, 0.0, 0.0, 0.0, 1.0}), G({1.0, 0.0, 0.0, 0.0, -1.0});
  double metric = 0, scal = 0;
  bool hessian = true;
  for (const Point& q : sample_points(Box{{1.6, -0.4, 0.1, 0.1}, {2.4, 0.4, 0.9, 0.9}}, 20, kDefaultSeed)) {
    const kltest::ToricOracle r = kltest::toric_oracle(F, G, q);
    metric = std::max(metric, r.metric);
    scal = std::max(scal, r.scalar);
    hessian = hessian && r.hessian;
  }
  o.require(metric < 1e-9, "toric coordinate change reproduces the E1 metric: " + fmt(metric));
  o.require(scal < 1e-9, "and its scalar curvature: " + fmt(scal));
  o.require(hessian, "toric G is a Hessian");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ortho-toric weak selfduality on E1", criterion1},
      {"selfduality switch C1 = C2 versus C1 != C2", criterion2},
      {"bi-extremality boundary B1 != B2", criterion3},
      {"Calabi-type closed forms, weak selfduality and Bach flatness", criterion4},
      {"kappa lambda^3 constancy", criterion5},
      {"Hirzebruch F1 coefficients and profile", criterion6},
      {"hamiltonian 2-form of a non-extremal ortho-toric metric", criterion7},
      {"almost-Kahler Gibbons-Hawking example", criterion8},
      {"Lagrangian sectional curvature", criterion9},
      {"oracle layer: finite differences and toric coordinates", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %zu %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str());
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    failed += !o.pass;
  }
  std::printf("acceptance: %zu passed, %d failed\n", criteria.size() - failed, failed);
  return failed == 0 ? 0 : 1;
}
