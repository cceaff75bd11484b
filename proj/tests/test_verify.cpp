#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kahlerlab/cli.hpp"
#include "kahlerlab/curvature.hpp"
#include "support.hpp"

using namespace kl;

namespace {

// Least-squares fit y = a x + b; returns the largest residual.
double affine_residual(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double b = (sy - a * sx) / n;
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(a * x[i] + b - y[i]));
  return m;
}

void check_report_semantics(const CheckReport& r) {
  INFO(r.suite << "/" << r.name);
  if (r.evaluated == 0) {
    CHECK(r.verdict == Verdict::not_applicable);
    return;
  }
  if (r.bound == Bound::upper)
    CHECK((r.verdict == Verdict::pass) == (r.max <= r.tolerance));
  else
    CHECK((r.verdict == Verdict::pass) == (r.fraction >= r.required_fraction));
  CHECK(r.min <= r.mean);
  CHECK(r.mean <= r.max);
}

std::string report_text(const Scenario& sc, const FamilyInstance& inst, const ToleranceConfig& tol) {
  std::ostringstream os;
  write_report(os, sc, inst, tol, run_verify(sc, inst, tol));
  return os.str();
}

}  // namespace

TEST_CASE("sample points: corners first, inside the box, seeded") {
  const Box box = e1_box();
  const auto pts = sample_points(box, 40, 99);
  REQUIRE(pts.size() == 40);
  std::set<Point> corners;
  for (int i = 0; i < 16; ++i) {
    for (int k = 0; k < 4; ++k) CHECK((pts[i][k] == box.lo[k] || pts[i][k] == box.hi[k]));
    corners.insert(pts[i]);
  }
  CHECK(corners.size() == 16);
  for (const Point& p : pts) CHECK(box.contains(p));
  CHECK(sample_points(box, 40, 99) == pts);
  CHECK(sample_points(box, 40, 100) != pts);
}

TEST_CASE("tolerance validation") {
  ToleranceConfig t;
  CHECK_NOTHROW(t.validate());
  t.nonzero_floor = 1e-9;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = {};
  t.identity_tol = -1.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = {};
  t.samples_per_box = 4;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("suite names") {
  for (Suite s : all_suites()) CHECK(parse_suite(to_string(s)) == s);
  CHECK_THROWS_AS(parse_suite("kähler"), ConfigError);
  for (ConstantExpr e : {ConstantExpr::kappa_lambda3, ConstantExpr::p_affine_in_s, ConstantExpr::wminus_over_kappa})
    CHECK(parse_constant_expr(to_string(e)) == e);
}

TEST_CASE("E1 passes every Kahler suite") {
  const FamilyInstance inst = kltest::e1();
  const auto reports = run_suites(
      inst, {Suite::kahler, Suite::weak_sd, Suite::extremal, Suite::biextremal, Suite::bach}, kltest::quick_tol());
  for (const auto& r : reports) {
    check_report_semantics(r);
    if (r.suite == "bach" && r.name == "bach_flat") {
      CHECK(r.verdict == Verdict::fail);
      continue;
    }
    INFO(r.suite << "/" << r.name << " max=" << r.max << " note=" << r.note);
    CHECK(r.verdict != Verdict::fail);
    CHECK(!r.tag.empty());
  }
  CHECK(kltest::find_check(reports, "cotton_asd").max < 1e-8);
  CHECK(kltest::find_check(reports, "matsumoto_tanno").max < 1e-8);
}

TEST_CASE("B1 != B2 fails only the pfaffian potential check") {
  ExtremalQuartics q = e1_quartics();
  q.B1 = 0.3;
  q.B2 = -0.2;
  const FamilyInstance inst = orthotoric_extremal(q, e1_box());
  const auto reports = run_suite(inst, Suite::biextremal, kltest::quick_tol());
  for (const auto& r : reports) {
    check_report_semantics(r);
    if (r.name == "p_holomorphic_potential") {
      CHECK(r.verdict == Verdict::fail);
      CHECK(r.max > 1e-3);
    } else {
      INFO(r.name << " note=" << r.note);
      CHECK(r.verdict != Verdict::fail);
      if (r.verdict == Verdict::not_applicable) CHECK(!r.note.empty());
    }
  }
}

TEST_CASE("inapplicable suites report not-applicable") {
  const FamilyInstance ak = ak_lebrun(ak_example2());
  for (const auto& r : run_suite(ak, Suite::extremal, kltest::quick_tol())) {
    CHECK(r.verdict == Verdict::not_applicable);
    CHECK(!r.note.empty());
  }
  for (const auto& r : run_suite(kltest::e1(), Suite::almost_kahler, kltest::quick_tol())) {
    CHECK(r.verdict == Verdict::not_applicable);
    CHECK(!r.note.empty());
  }
  const auto ak_reports = run_suite(ak, Suite::almost_kahler, kltest::quick_tol());
  for (const auto& r : ak_reports) {
    check_report_semantics(r);
    CHECK(r.verdict == Verdict::pass);
  }
  CHECK(kltest::find_check(ak_reports, "nijenhuis_nonzero").bound == Bound::lower);
}

TEST_CASE("classification") {
  const ToleranceConfig tol = kltest::quick_tol();
  CHECK(classify(kahler_product({1.0, 1.0}), tol).verdict == Classification::einstein);
  CHECK(classify(kahler_product({1.0, 2.0}), tol).verdict == Classification::parallel_ricci_product);
  CHECK(classify(kahler_product({1.0, -1.0}), tol).verdict == Classification::parallel_ricci_product);
  ExtremalQuartics ke;
  ke.l = 1.0;
  ke.C1 = -1.0;
  ke.C2 = -2.0;
  CHECK(classify(orthotoric_extremal(ke, e1_box()), tol).verdict == Classification::einstein);
  const ClassifyResult e1 = classify(kltest::e1(), tol);
  CHECK(e1.verdict == Classification::degenerate_wminus);
  CHECK_FALSE(e1.ambiguous);
  bool saw_degenerate = false;
  for (const auto& ev : e1.evidence)
    if (ev.name == "wminus_degenerate") {
      saw_degenerate = true;
      CHECK(ev.fraction == 1.0);
    }
  CHECK(saw_degenerate);
  CHECK(classify(kltest::e1_selfdual(), tol).verdict == Classification::selfdual_nonconstant_s);
  CalabiParams c = e2_params();
  c.A3 = 0.3;
  const ClassifyResult nc = classify(calabi_type(c), tol);
  CHECK(nc.verdict == Classification::none);
  CHECK(nc.detail.find("not weakly selfdual") != std::string::npos);
  CHECK(std::string(to_string(Classification::parallel_ricci_product)) == "parallel-ricci-product");
  CHECK(std::string(to_string(Classification::degenerate_wminus)) == "degenerate-Wminus");
}

TEST_CASE("constants") {
  const ToleranceConfig tol = kltest::quick_tol();
  const ConstantFit e1 = extract_constant(kltest::e1(), ConstantExpr::kappa_lambda3, tol);
  CHECK(e1.verdict == Verdict::pass);
  CHECK(e1.constant == doctest::Approx(-4.0).epsilon(1e-9));
  CHECK(e1.spread < 1e-7);
  const ConstantFit wk = extract_constant(kltest::e1(), ConstantExpr::wminus_over_kappa, tol);
  CHECK(wk.constant == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wk.spread < 1e-7);

  CalabiParams c;
  c.A1 = -0.25;
  c.A4 = -0.75;
  c.box = Box{{-0.3, -0.3, 1.05, 0.0}, {0.3, 0.3, 1.68, 1.0}};
  const FamilyInstance cal = calabi_type(c);
  const ConstantFit k = extract_constant(cal, ConstantExpr::kappa_lambda3, tol);
  CHECK(k.constant == doctest::Approx(3.0 / 128.0).epsilon(1e-9));
  CHECK(k.spread < 1e-7);
  CHECK(k.constant == doctest::Approx(2.0 * std::pow(c.A1, 3) * c.A4).epsilon(1e-9));

  const ConstantFit sd = extract_constant(kltest::e1_selfdual(), ConstantExpr::kappa_lambda3, tol);
  CHECK(std::abs(sd.constant) < 1e-9);

  const ConstantFit pa = extract_constant(calabi_type(e2_params()), ConstantExpr::p_affine_in_s, tol);
  CHECK(pa.verdict == Verdict::pass);
  CHECK(pa.spread < 1e-7);

  const ConstantFit na = extract_constant(kahler_product({1.0, 1.0}), ConstantExpr::kappa_lambda3, tol);
  CHECK(na.verdict == Verdict::not_applicable);
}

TEST_CASE("round trip: s/2 +- lambda are affine in the ortho-toric coordinates") {
  std::vector<ExtremalQuartics> qs{e1_quartics()};
  ExtremalQuartics q2;
  q2.k = 1.0;
  q2.l = 0.5;
  q2.A = 0.3;
  q2.B1 = q2.B2 = 0.2;
  q2.C1 = 1.0;
  q2.C2 = -1.5;
  qs.push_back(q2);
  for (const auto& q : qs) {
    const FamilyInstance inst = orthotoric_extremal(q, e1_box());
    std::vector<double> xi, eta, xr, er;
    for (const Point& p : sample_points(inst.box, 30, 4)) {
      const auto b = curvature_bundle(inst, p, 2);
      const RicciFormData r = ricci_form_data(*b);
      xi.push_back(p[0]);
      eta.push_back(p[1]);
      xr.push_back(b->s.value() / 2.0 + r.lambda.value());
      er.push_back(b->s.value() / 2.0 - r.lambda.value());
    }
    const double direct = std::max(affine_residual(xi, xr), affine_residual(eta, er));
    const double swapped = std::max(affine_residual(eta, xr), affine_residual(xi, er));
    CHECK(std::min(direct, swapped) < 1e-6);
    CHECK(std::max(direct, swapped) > 1e-3);
  }
}

TEST_CASE("reports are deterministic across thread counts") {
  const Scenario sc = load_scenario((kltest::source_dir() / "scenarios" / "e1_weakly_selfdual.ini").string());
  const FamilyInstance inst = build_instance(sc);
  ToleranceConfig t1 = sc.tol;
  t1.samples_per_box = 24;
  t1.threads = 1;
  ToleranceConfig t4 = t1;
  t4.threads = 4;
  const std::string a = report_text(sc, inst, t1);
  CHECK(a == report_text(sc, inst, t4));
  CHECK(a == report_text(sc, inst, t1));
  ToleranceConfig other = t1;
  other.rng_seed = 7;
  CHECK(a != report_text(sc, inst, other));
}

TEST_CASE("doubling the samples never turns a pass into a fail") {
  for (const auto& path : kltest::shipped_scenarios()) {
    const Scenario sc = load_scenario(path.string());
    const FamilyInstance inst = build_instance(sc);
    ToleranceConfig t = sc.tol;
    t.samples_per_box = 32;
    const VerifyOutcome small = run_verify(sc, inst, t);
    t.samples_per_box = 64;
    const VerifyOutcome large = run_verify(sc, inst, t);
    REQUIRE(small.checks.size() == large.checks.size());
    for (std::size_t i = 0; i < small.checks.size(); ++i) {
      const CheckReport& a = small.checks[i];
      const CheckReport& b = large.checks[i];
      INFO(path.filename().string() << " " << a.suite << "/" << a.name);
      check_report_semantics(b);
      if (a.verdict == Verdict::pass) CHECK(b.verdict == Verdict::pass);
      if (a.bound == Bound::upper && a.max > 1e-10) CHECK(b.max <= 2.0 * a.max);
    }
  }
}
