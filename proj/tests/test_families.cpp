#include <cmath>
#include <numeric>

#include "doctest.h"
#include "kahlerlab/curvature.hpp"
#include "kahlerlab/families.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kl;

namespace {

struct Fraction {
  long long n, d;
  Fraction(long long num, long long den = 1) : n(num), d(den) { reduce(); }
  void reduce() {
    const long long g = std::gcd(n, d);
    n /= g;
    d /= g;
    if (d < 0) {
      n = -n;
      d = -d;
    }
  }
  double value() const { return static_cast<double>(n) / static_cast<double>(d); }
};
Fraction operator*(Fraction a, Fraction b) { return {a.n * b.n, a.d * b.d}; }
Fraction operator/(Fraction a, Fraction b) { return {a.n * b.d, a.d * b.n}; }
Fraction operator-(Fraction a, Fraction b) { return {a.n * b.d - b.n * a.d, a.d * b.d}; }
Fraction operator+(Fraction a, Fraction b) { return {a.n * b.d + b.n * a.d, a.d * b.d}; }
bool operator==(Fraction a, Fraction b) { return a.n == b.n && a.d == b.d; }

double lee_residual(const FamilyInstance& inst, const Point& p) {
  const auto b = curvature_bundle(inst, p, 3);
  const ConformalScalar cs = conformal_scalar(*b);
  const double d = p[0] - p[1];
  // theta = -d log(xi - eta) = (-dxi + deta)/(xi - eta)
  const std::array<double, 4> expected{-1.0 / d, 1.0 / d, 0.0, 0.0};
  double m = 0.0;
  for (int i = 0; i < 4; ++i) m = std::max(m, std::abs(cs.theta[i].value() - expected[i]));
  return m;
}

double engine_value(const FamilyInstance& inst, const Point& p, const std::string& what) {
  const auto b = curvature_bundle(inst, p, 3);
  if (what == "s") return b->s.value();
  const RicciFormData r = ricci_form_data(*b);
  if (what == "p") return r.p.value();
  if (what == "mu") return r.mu->value();
  return conformal_scalar(*b).route_rescale;
}

}  // namespace

TEST_CASE("jet partials of every shipped instance match finite differences") {
  for (const auto& path : kltest::shipped_scenarios()) {
    const Scenario sc = load_scenario(path.string());
    const FamilyInstance inst = build_instance(sc);
    INFO(path.filename().string());
    for (const Point& p : sample_points(inst.box, 20, 7)) {
      const kltest::FdResult r = kltest::fd_metric_error(inst, p);
      CHECK(r.first < 1e-5);
      CHECK(r.second < 1e-5);
    }
  }
}

TEST_CASE("ortho-toric metrics are toric in the momenta xi + eta and xi eta") {
  const Polynomial F({1.0, 0.0, 0.0, 0.0, 1.0}), G({1.0, 0.0, 0.0, 0.0, -1.0});
  const Polynomial F5({0.1, 1.0, 0.0, 0.0, 0.0, 1.0}), G5({-0.2, 1.0, 0.0, 0.0, 0.0, -1.0});
  for (const Point& p : sample_points(Box{{1.6, -0.4, 0.1, 0.1}, {2.4, 0.4, 0.9, 0.9}}, 20, 11)) {
    for (const auto& [f, g] : {std::pair{F, G}, std::pair{F5, G5}}) {
      const kltest::ToricOracle r = kltest::toric_oracle(f, g, p);
      CHECK(r.metric < 1e-9);
      CHECK(r.scalar < 1e-9);
      CHECK(r.hessian);
    }
  }
}

TEST_CASE("E1 closed forms at (2, 0)") {
  const FamilyInstance inst = kltest::e1();
  const Point p{2.0, 0.0, 0.5, 0.5};
  CHECK(engine_value(inst, p, "s") == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(engine_value(inst, p, "p") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(engine_value(inst, p, "mu") == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(engine_value(inst, p, "kappa") == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(lee_residual(inst, p) < 1e-12);
  CHECK(lee_residual(inst, {1.7, -0.3, 0.2, 0.8}) < 1e-12);
}

TEST_CASE("Calabi type E2 at z = 1") {
  const FamilyInstance inst = calabi_type(e2_params());
  const Point p{0.0, 0.0, 1.0, 0.5};
  CHECK(engine_value(inst, p, "kappa") == doctest::Approx(2.0).epsilon(1e-12));
  for (const char* key : {"s", "mu", "p"})
    CHECK(engine_value(inst, p, key) == doctest::Approx(inst.reference.at(key)(p)).epsilon(1e-10));
}

TEST_CASE("Calabi type on the nil chart matches the closed forms") {
  CalabiParams b = e2_params();
  b.eps = 0.0;
  b.chart = CalabiChart::bianchi_nil;
  b.box.lo[2] = 1.1;
  b.box.hi[2] = 1.5;
  const FamilyInstance nil = calabi_type(b);
  const Point p = nil.box.center();
  CHECK(engine_value(nil, p, "s") == doctest::Approx(nil.reference.at("s")(p)).epsilon(1e-10));
  CHECK(engine_value(nil, p, "kappa") == doctest::Approx(nil.reference.at("kappa")(p)).epsilon(1e-10));
}

TEST_CASE("F1 coefficients") {
  const CalabiCoefficients c = calabi_f1_coefficients(1.0, std::sqrt(3.0));
  CHECK(std::abs(c.A1 + 0.25) < 1e-12);
  CHECK(std::abs(c.A2) < 1e-12);
  CHECK(std::abs(c.A3) < 1e-12);
  CHECK(std::abs(c.A4 + 0.75) < 1e-12);

  // a = 1, b = 2 by exact rational arithmetic
  const Fraction a(1), b(2);
  const Fraction den = (b - a) * (a * a + Fraction(4) * a * b + b * b);
  const Fraction A3 = a * b * (Fraction(3) * a * a - b * b) / den;
  CHECK(A3 == Fraction(-2, 13));
  const CalabiCoefficients c2 = calabi_f1_coefficients(1.0, 2.0);
  CHECK(c2.A3 == doctest::Approx(A3.value()).epsilon(1e-15));
  CHECK(c2.A1 == doctest::Approx((Fraction(-2) * a / den).value()).epsilon(1e-15));

  for (double bb : {1.3, 2.0, 3.5}) {
    const CalabiCoefficients k1 = calabi_f1_coefficients(1.0, bb);
    const Polynomial V({k1.A1, k1.A2, 1.0, k1.A3, k1.A4});
    CHECK(std::abs(V(1.0)) < 1e-13);
    CHECK(std::abs(V(bb)) < 1e-12);
  }
  CHECK_THROWS_AS(calabi_f1_coefficients(2.0, 1.0), ConfigError);
}

TEST_CASE("F_k coefficients: formula sign versus profile sign") {
  for (int k : {1, 2, 3}) {
    const double a = 0.7, b = 1.9;
    const CalabiCoefficients lit = calabi_fk_coefficients_literal(a, b, k);
    const CalabiCoefficients fix = calabi_fk_coefficients(a, b, k);
    const Polynomial Vlit({lit.A1, lit.A2, 1.0, lit.A3, lit.A4});
    const Polynomial Vfix({fix.A1, fix.A2, 1.0, fix.A3, fix.A4});
    CHECK(std::abs(Vfix(a)) < 1e-12);
    CHECK(std::abs(Vfix(b)) < 1e-12);
    CHECK(std::abs(Vlit(a)) > 1e-2);
  }
  const CalabiCoefficients k2 = calabi_fk_coefficients_literal(1.0, 2.0, 2);
  CHECK(k2.A1 == doctest::Approx((3.0 + 2.0) / (1.0 * (1.0 + 4.0 + 8.0))).epsilon(1e-15));
  const CalabiCoefficients f1 = calabi_f1_coefficients(1.0, 2.0);
  const CalabiCoefficients p1 = calabi_fk_coefficients_literal(1.0, 2.0, 1);
  CHECK(p1.A1 == doctest::Approx(-f1.A1));
  CHECK(p1.A3 == doctest::Approx(-f1.A3));
}

TEST_CASE("Hirzebruch profile") {
  const auto psi = closed_form_profile(1.0);
  const CalabiCoefficients c = calabi_f1_coefficients(1.0, std::sqrt(3.0));
  const Polynomial V({c.A1, c.A2, 1.0, c.A3, c.A4});
  CHECK(psi->value(0.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const Jet t0 = Jet::seed(0, 0.0, 2);
  const Jet p0 = (*psi)(t0);
  CHECK(p0.value() * p0.partial({1, 0, 0, 0}) == doctest::Approx(0.25).epsilon(1e-13));
  const auto num = integrated_profile(V, 1.0, std::sqrt(3.0), -2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double t = -2.0 + 4.0 * i / 19.0;
    const Jet j = (*psi)(Jet::seed(0, t, 1));
    CHECK(std::abs(j.value() * j.partial({1, 0, 0, 0}) - V(j.value())) < 1e-10);
    CHECK(std::abs(num->value(t) - psi->value(t)) < 1e-10);
    CHECK(-2.0 * c.A1 * psi->value(t) > 0.0);
  }
  const HirzebruchResult closed = hirzebruch({});
  CHECK(closed.closed_form);
  HirzebruchParams hp;
  hp.force_numeric = true;
  const HirzebruchResult numeric = hirzebruch(hp);
  CHECK_FALSE(numeric.closed_form);
  const Point p{0.1, -0.05, 0.7, 0.3};
  const double s1 = curvature_bundle(closed.instance, p, 2)->s.value();
  const double s2 = curvature_bundle(numeric.instance, p, 2)->s.value();
  CHECK(s1 == doctest::Approx(s2).epsilon(1e-9));
  CHECK(s1 == doctest::Approx(-2.0 * c.A1 * psi->value(0.7)).epsilon(1e-10));
}

TEST_CASE("hamiltonian form of the ortho-toric family") {
  OrthotoricParams op;
  op.F = Polynomial({0.1, 1.0, 0.0, 0.0, 0.0, 1.0});
  op.G = Polynomial({-0.2, 1.0, 0.0, 0.0, 0.0, -1.0});
  op.box = Box{{1.5, -0.5, 0.0, 0.0}, {2.5, 0.5, 1.0, 1.0}};
  const FamilyInstance inst = orthotoric(op);
  const Point p{1.9, 0.2, 0.4, 0.6};
  const auto b = curvature_bundle(inst, p, 3);
  const HamiltonianFormData h = hamiltonian_analysis(*b, *b->fields.phi);
  CHECK(h.residual_closed < 1e-9);
  CHECK(h.residual_twistor < 1e-8);
  CHECK(h.dxi_deta < 1e-8);
  CHECK(h.sigma.value() == doctest::Approx(p[0] + p[1]).epsilon(1e-12));

  // Trace coefficient 1 does not give a closed form.
  op.phi_trace = 1.0;
  const FamilyInstance lit = orthotoric(op);
  const auto bl = curvature_bundle(lit, p, 3);
  Mat4 dphi_free = *bl->fields.phi;
  const T3 d = exterior_d(dphi_free);
  double m = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(d[i][j][k].value()));
  CHECK(m > 1e-2);
}

TEST_CASE("extremal p for B1 != B2: flipped signs versus p = s^2/4 - mu^2") {
  ExtremalQuartics q = e1_quartics();
  q.B1 = 0.3;
  q.B2 = -0.2;
  const FamilyInstance inst = orthotoric_extremal(q, e1_box());
  const Point p{1.8, 0.1, 0.5, 0.5};
  const double engine = engine_value(inst, p, "p");
  CHECK(engine == doctest::Approx(inst.reference.at("p")(p)).epsilon(1e-10));
  const double s = engine_value(inst, p, "s"), mu = engine_value(inst, p, "mu");
  CHECK(engine == doctest::Approx(s * s / 4.0 - mu * mu).epsilon(1e-10));
  const double d = p[0] - p[1], db = q.B1 - q.B2;
  const double flipped = 4.0 * q.k * q.k * p[0] * p[1] + q.k * q.l * (p[0] + p[1]) + q.l * q.l / 4.0 -
                         q.k * db / d + db * db / (4.0 * std::pow(d, 4));
  CHECK(std::abs(flipped - engine) > 1e-2);
}

TEST_CASE("toric presets: Hessian or not") {
  ToricParams hess;
  hess.G = [](const Jet& x1, const Jet& x2) {
    std::array<std::array<Jet, 2>, 2> G;
    G[0][0] = 0.5 / x1;
    G[1][1] = 0.5 / x2;
    G[0][1] = G[1][0] = Jet(0.0, x1.order());
    return G;
  };
  hess.box = Box{{0.5, 0.5, 0.0, 0.0}, {1.5, 1.5, 1.0, 1.0}};
  CHECK(toric_is_hessian(hess));
  const FamilyInstance k = toric(hess);
  CHECK(k.is_kahler());
  CHECK(nijenhuis_norm(*curvature_bundle(k, k.box.center(), 2)) < 1e-9);

  ToricParams non = hess;
  non.G = [](const Jet& x1, const Jet&) {
    std::array<std::array<Jet, 2>, 2> G;
    G[0][0] = Jet(1.0, x1.order());
    G[1][1] = 1.0 + x1;
    G[0][1] = G[1][0] = Jet(0.0, x1.order());
    return G;
  };
  CHECK_FALSE(toric_is_hessian(non));
  const FamilyInstance ak = toric(non);
  CHECK_FALSE(ak.is_kahler());
  const auto b = curvature_bundle(ak, {1.0, 0.8, 0.5, 0.5}, 2);
  CHECK(closedness_residual(*b) < 1e-12);
  CHECK(nijenhuis_norm(*b) > 1e-3);
}

TEST_CASE("almost-Kahler LeBrun family") {
  const FamilyInstance ex2 = ak_lebrun(ak_example2());
  const FamilyInstance flat = ak_lebrun(ak_constant_h());
  const FamilyInstance gen = ak_lebrun(ak_generic_u());
  for (const Point& p : sample_points(ex2.box, 12, 5)) {
    const auto b = curvature_bundle(ex2, p, 2);
    CHECK(closedness_residual(*b) < 1e-9);
    CHECK(nijenhuis_norm(*b) > 1e-3);
    CHECK(norm(*b, b->ric) < 1e-9);
    CHECK(norm(*b, b->weyl_minus) < 1e-9);
    CHECK(nijenhuis_norm(*curvature_bundle(flat, p, 2)) < 1e-9);
    const auto bg = curvature_bundle(gen, p, 2);
    CHECK(bg->s.value() == doctest::Approx(gen.reference.at("s")(p)).epsilon(1e-9));
  }

  AKParams q = ak_example2();
  const Jet x = Jet::seed(0, 0.3, 3), y = Jet::seed(1, -0.2, 3);
  const Jet closed = (*q.f)(x, y);
  const Jet quad = ak_quadrature_f(q, x, y);
  for (int k = 0; k < slots_for_order(3); ++k) CHECK(std::abs(closed.coeff(k) - quad.coeff(k)) < 1e-12);

  AKParams bad = ak_example2();
  bad.V = [](const Jet&, const Jet& y) { return y; };
  CHECK_THROWS_AS(ak_lebrun(bad), ConstructionError);
}

TEST_CASE("constructors reject degenerate boxes") {
  CHECK_THROWS_AS(orthotoric_extremal(e1_quartics(), Box{{0.4, -0.5, 0, 0}, {1.0, 0.5, 1, 1}}), ConstructionError);
  CalabiParams c = e2_params();
  c.box.lo[2] = -0.5;
  CHECK_THROWS_AS(calabi_type(c), ConstructionError);
  ProductParams pp;
  pp.k1 = 0.0;
  pp.k2 = 0.0;
  const FamilyInstance flat = kahler_product(pp);
  CHECK(norm(*curvature_bundle(flat, flat.box.center(), 2), curvature_bundle(flat, flat.box.center(), 2)->riem) <
        1e-15);
}
