#include "kahlerlab/families.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/numeric/odeint.hpp>

namespace kl {
namespace {

void set_form(Mat4& w, int a, int b, const Jet& v) {
  w[a][b] = v;
  w[b][a] = -v;
}

std::string point_text(const Point& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << p[0] << ", " << p[1] << ", " << p[2] << ", " << p[3] << ")";
  return os.str();
}

[[noreturn]] void invalid(const FamilyInstance& inst, const Point& p, const std::string& what) {
  throw ConstructionError(inst.label + ": " + what + " at " + point_text(p));
}

double partial_at(const PlaneFunction& f, double x, double y, int dx, int dy) {
  const Jet v = f(Jet::seed(0, x, 2), Jet::seed(1, y, 2));
  return v.partial({dx, dy, 0, 0});
}

}  // namespace

Polynomial::Polynomial(std::vector<double> descending) : c_(std::move(descending)) {
  if (c_.empty()) c_.push_back(0.0);
}

double Polynomial::operator()(double x) const {
  double r = 0.0;
  for (double c : c_) r = r * x + c;
  return r;
}

Jet Polynomial::operator()(const Jet& x) const {
  Jet r(0.0, x.order());
  for (double c : c_) {
    r *= x;
    r += c;
  }
  return r;
}

Polynomial Polynomial::derivative() const {
  std::vector<double> d;
  const int n = degree();
  for (int i = 0; i < n; ++i) d.push_back(c_[static_cast<std::size_t>(i)] * (n - i));
  return Polynomial(d);
}

void check_validity(const FamilyInstance& inst) {
  for (const Point& p : inst.box.validity_points()) {
    try {
      const Fields f = evaluate(inst, p, 2);
      Metric4 m(f.g, f.omega);
      (void)m;
    } catch (const Error& e) {
      invalid(inst, p, std::string("metric construction failed: ") + e.what());
    }
  }
}

// ---------------------------------------------------------------- ortho-toric

FamilyInstance orthotoric(const OrthotoricParams& p) {
  FamilyInstance inst;
  inst.family = "orthotoric";
  inst.label = p.label;
  inst.coords = {"xi", "eta", "t", "z"};
  inst.box = p.box;
  const Polynomial F = p.F, G = p.G;
  const double c = p.phi_trace;
  inst.fields = [F, G, c](const Vec4& x) {
    const int n = x[0].order();
    const Jet& xi = x[0];
    const Jet& eta = x[1];
    const Jet fx = F(xi), gy = G(eta);
    const Jet d = xi - eta;
    const Jet id = reciprocal(d);
    Fields out;
    out.g = zero_mat(n);
    out.g[0][0] = d / fx;
    out.g[1][1] = -d / gy;
    out.g[2][2] = (fx - gy) * id;
    out.g[2][3] = (fx * eta - gy * xi) * id;
    out.g[3][2] = out.g[2][3];
    out.g[3][3] = (fx * eta * eta - gy * xi * xi) * id;
    const Jet one(1.0, n);
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 2, one);
    set_form(out.omega, 0, 3, eta);
    set_form(out.omega, 1, 2, one);
    set_form(out.omega, 1, 3, xi);
    Mat4 wi = zero_mat(n);
    set_form(wi, 0, 2, one);
    set_form(wi, 0, 3, eta);
    set_form(wi, 1, 2, -one);
    set_form(wi, 1, 3, -xi);
    out.omega_I = wi;
    out.conformal_factor = d;
    out.phi = 0.5 * d * wi + (c * (xi + eta)) * out.omega;
    return out;
  };
  const Polynomial F1 = F.derivative(), G1 = G.derivative();
  const Polynomial F2 = F1.derivative(), G2 = G1.derivative();
  inst.reference["s"] = [F2, G2](const Point& q) {
    return -(F2(q[0]) - G2(q[1])) / (6.0 * (q[0] - q[1]));
  };
  inst.reference["mu"] = [F1, G1, F2, G2](const Point& q) {
    const double d = q[0] - q[1];
    return (F1(q[0]) - G1(q[1])) / (2.0 * d * d) - (F2(q[0]) + G2(q[1])) / (4.0 * d);
  };
  inst.reference["kappa"] = [F, G, F1, G1, F2, G2](const Point& q) {
    const double d = q[0] - q[1];
    return -(F2(q[0]) - G2(q[1])) / (6.0 * d) + (F1(q[0]) + G1(q[1])) / (d * d) -
           2.0 * (F(q[0]) - G(q[1])) / (d * d * d);
  };
  inst.reference["xi_minus_eta"] = [](const Point& q) { return q[0] - q[1]; };

  for (const Point& q : inst.box.validity_points()) {
    if (q[0] - q[1] < p.margin) invalid(inst, q, "xi - eta below the margin");
    if (F(q[0]) < p.margin) invalid(inst, q, "F(xi) not positive");
    if (G(q[1]) > -p.margin) invalid(inst, q, "G(eta) not negative");
  }
  check_validity(inst);
  return inst;
}

FamilyInstance orthotoric_extremal(const ExtremalQuartics& q, const Box& box, const std::string& label) {
  OrthotoricParams p;
  p.F = Polynomial({q.k, q.l, q.A, q.B1, q.C1});
  p.G = Polynomial({q.k, q.l, q.A, q.B2, q.C2});
  p.box = box;
  p.label = label;
  FamilyInstance inst = orthotoric(p);
  inst.params = {{"k", q.k}, {"l", q.l}, {"A", q.A}, {"B1", q.B1}, {"B2", q.B2}, {"C1", q.C1}, {"C2", q.C2}};
  inst.reference["s"] = [q](const Point& x) { return -2.0 * q.k * (x[0] + x[1]) - q.l; };
  inst.reference["mu"] = [q](const Point& x) {
    const double d = x[0] - x[1];
    return -q.k * d + (q.B1 - q.B2) / (2.0 * d * d);
  };
  inst.reference["p"] = [q](const Point& x) {
    const double d = x[0] - x[1];
    const double db = q.B1 - q.B2;
    return 4.0 * q.k * q.k * x[0] * x[1] + q.k * q.l * (x[0] + x[1]) + q.l * q.l / 4.0 + q.k * db / d -
           db * db / (4.0 * std::pow(d, 4));
  };
  if (q.B1 == q.B2)
    inst.reference["kappa_lambda3"] = [q](const Point&) {
      return -2.0 * (q.C1 - q.C2) * std::pow(std::abs(q.k), 3);
    };
  return inst;
}

ExtremalQuartics e1_quartics() {
  ExtremalQuartics q;
  q.k = 1.0;
  q.C1 = 1.0;
  q.C2 = -1.0;
  return q;
}

Box e1_box() { return Box{{1.5, -0.5, 0.0, 0.0}, {2.5, 0.5, 1.0, 1.0}}; }

// ---------------------------------------------------------------- toric

FamilyInstance toric(const ToricParams& p) {
  FamilyInstance inst;
  inst.family = "toric";
  inst.label = p.label;
  inst.coords = {"x1", "x2", "t1", "t2"};
  inst.box = p.box;
  inst.kind = toric_is_hessian(p) ? StructureKind::kahler : StructureKind::almost_kahler;
  const ToricMatrix Gf = p.G;
  inst.fields = [Gf](const Vec4& x) {
    const int n = x[0].order();
    const auto G = Gf(x[0], x[1]);
    const Jet det = G[0][0] * G[1][1] - G[0][1] * G[1][0];
    const Jet idet = reciprocal(det);
    Fields out;
    out.g = zero_mat(n);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out.g[i][j] = G[i][j];
    out.g[2][2] = G[1][1] * idet;
    out.g[3][3] = G[0][0] * idet;
    out.g[2][3] = -G[0][1] * idet;
    out.g[3][2] = out.g[2][3];
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 2, Jet(1.0, n));
    set_form(out.omega, 1, 3, Jet(1.0, n));
    return out;
  };
  check_validity(inst);
  return inst;
}

bool toric_is_hessian(const ToricParams& p, double tol) {
  for (const Point& q : p.box.validity_points()) {
    const auto G = p.G(Jet::seed(0, q[0], 1), Jet::seed(1, q[1], 1));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          MultiIndex di{0, 0, 0, 0}, dj{0, 0, 0, 0};
          di[k] = 1;
          dj[j] = 1;
          const double a = G[i][j].partial(di);
          const double b = G[i][k].partial(dj);
          if (std::abs(a - b) > tol * std::max(1.0, std::abs(a))) return false;
        }
  }
  return true;
}

// ---------------------------------------------------------------- Calabi type

namespace {

// s, mu, kappa and p of a Calabi-type metric with quartic profile.
void add_calabi_references(FamilyInstance& inst, const CalabiCoefficients& c, int zslot) {
  inst.reference["s"] = [c, zslot](const Point& q) { return -2.0 * c.A1 * q[zslot] - c.A2; };
  inst.reference["mu"] = [c, zslot](const Point& q) {
    const double z = q[zslot];
    return -c.A1 * z + c.A3 / (2.0 * z * z);
  };
  inst.reference["kappa"] = [c, zslot](const Point& q) {
    const double z = q[zslot];
    return -c.A3 / (z * z) - 2.0 * c.A4 / (z * z * z);
  };
  inst.reference["p"] = [c, zslot](const Point& q) {
    const double z = q[zslot];
    return (-2.0 * c.A1 * z - 0.5 * c.A2 + c.A3 / (2.0 * z * z)) * (-0.5 * c.A2 - c.A3 / (2.0 * z * z));
  };
  if (c.A3 == 0.0)
    inst.reference["kappa_lambda3"] = [c](const Point&) {
      return -2.0 * c.A4 * std::pow(std::abs(c.A1), 3);
    };
}

}  // namespace

Polynomial calabi_profile(const CalabiParams& p) { return Polynomial({p.A1, p.A2, p.eps, p.A3, p.A4}); }

FamilyInstance calabi_type(const CalabiParams& p) {
  if (p.chart == CalabiChart::bianchi_nil && p.eps != 0.0)
    throw ConfigError("the Nil chart requires eps = 0");
  FamilyInstance inst;
  inst.family = "calabi_type";
  inst.label = p.label;
  inst.coords = {"x", "y", "z", "t"};
  inst.box = p.box;
  inst.params = {{"A1", p.A1}, {"A2", p.A2}, {"A3", p.A3}, {"A4", p.A4}, {"eps", p.eps}};
  const Polynomial V = calabi_profile(p);
  const double eps = p.eps;
  const bool nil = p.chart == CalabiChart::bianchi_nil;
  inst.fields = [V, eps, nil](const Vec4& x) {
    const int n = x[0].order();
    const Jet& z = x[2];
    const Jet one(1.0, n);
    Jet q2 = one, ax(0.0, n), ay = x[0];
    if (!nil) {
      const Jet Q = 1.0 + (eps / 4.0) * (x[0] * x[0] + x[1] * x[1]);
      const Jet iQ = reciprocal(Q);
      q2 = iQ * iQ;
      ax = -0.5 * x[1] * iQ;
      ay = 0.5 * x[0] * iQ;
    }
    const Vec4 s3{ax, ay, Jet(0.0, n), one};
    const Jet v = V(z);
    const Jet vz = v / z;
    Fields out;
    out.g = zero_mat(n);
    out.g[0][0] = z * q2;
    out.g[1][1] = z * q2;
    out.g[2][2] = z / v;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out.g[a][b] += vz * s3[a] * s3[b];
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 1, z * q2);
    set_form(out.omega, 2, 0, s3[0]);
    set_form(out.omega, 2, 1, s3[1]);
    set_form(out.omega, 2, 3, one);
    Mat4 wi = out.omega;
    set_form(wi, 0, 1, -z * q2);
    out.omega_I = wi;
    out.conformal_factor = z;
    return out;
  };
  add_calabi_references(inst, {p.A1, p.A2, p.A3, p.A4}, 2);
  inst.extras["V"] = [V](const Point& q) { return V(q[2]); };
  for (const Point& q : inst.box.validity_points()) {
    if (q[2] < p.margin) invalid(inst, q, "z below the margin");
    if (V(q[2]) < p.margin) invalid(inst, q, "V(z) not positive");
  }
  check_validity(inst);
  return inst;
}

CalabiParams e2_params() {
  CalabiParams p;
  p.A1 = 1.0;
  p.A4 = -1.0;
  p.eps = 1.0;
  p.box = Box{{-0.3, -0.3, 0.9, 0.0}, {0.3, 0.3, 1.5, 1.0}};
  p.label = "calabi_E2";
  return p;
}

// ---------------------------------------------------------------- Hirzebruch

CalabiCoefficients calabi_f1_coefficients(double a, double b) {
  if (!(a > 0.0 && a < b)) throw ConfigError("Kahler class parameters need 0 < a < b");
  const double den = (b - a) * (a * a + 4.0 * a * b + b * b);
  return {-2.0 * a / den, (3.0 * a * a - b * b) / den, a * b * (3.0 * a * a - b * b) / den,
          -2.0 * a * a * a * b * b / den};
}

CalabiCoefficients calabi_fk_coefficients_literal(double a, double b, int k) {
  if (!(a > 0.0 && a < b)) throw ConfigError("Kahler class parameters need 0 < a < b");
  if (k < 1) throw ConfigError("Hirzebruch index must be a positive integer");
  const double den = (b - a) * (a * a + b * b + 4.0 * a * b);
  const double n1 = (k + 1) * a + (k - 1) * b;
  const double n2 = (2 - k) * b * b - (k + 2) * a * a;
  return {n1 / den, n2 / den, a * b * n2 / den, a * a * b * b * n1 / den};
}

CalabiCoefficients calabi_fk_coefficients(double a, double b, int k) {
  const CalabiCoefficients c = calabi_fk_coefficients_literal(a, b, k);
  return {-c.A1, -c.A2, -c.A3, -c.A4};
}

CalabiCoefficients boundary_coefficients_literal(double a, double b, double eps, double kb) {
  if (!(a > 0.0 && a < b)) throw ConfigError("Kahler class parameters need 0 < a < b");
  const double den = (b - a) * (a * a + 4.0 * a * b + b * b);
  const double n1 = kb * (a + b) + eps * (a - b);
  const double n2 = -kb * (a * a + b * b) + 2.0 * eps * (b * b - a * a);
  return {n1 / den, n2 / den, a * b * n2 / den, a * a * b * b * n1 / den};
}

Jet CalabiProfile::operator()(const Jet& t) const {
  // Taylor coefficients of psi at t0 from psi' = V(psi)/psi, one order at a time.
  std::array<double, kMaxOrder + 1> c{};
  c[0] = value(t.value());
  for (int n = 0; n < kMaxOrder; ++n) {
    Jet psi(c[0], n);
    const Jet h = Jet::seed(0, 0.0, n);
    Jet hk(1.0, n);
    for (int k = 1; k <= n; ++k) {
      hk *= h;
      psi += c[static_cast<std::size_t>(k)] * hk;
    }
    const Jet rhs = V_(psi) / psi;
    c[static_cast<std::size_t>(n + 1)] = rhs.coeff({n, 0, 0, 0}) / (n + 1);
  }
  std::array<double, kMaxOrder + 1> derivs{};
  double fact = 1.0;
  for (int k = 0; k <= kMaxOrder; ++k) {
    if (k > 0) fact *= k;
    derivs[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)] * fact;
  }
  return compose(t, derivs);
}

namespace {

class ClosedFormProfile final : public CalabiProfile {
 public:
  ClosedFormProfile(double a, Polynomial V) : CalabiProfile(std::move(V)), a_(a) {}
  double value(double t) const override {
    const double e = std::exp(t);
    return a_ * std::sqrt((1.0 + 3.0 * e) / (1.0 + e));
  }
  Jet evaluate(const Jet& t) const {
    const Jet e = exp(t);
    return a_ * sqrt((1.0 + 3.0 * e) / (1.0 + e));
  }

 private:
  double a_;
};

using OdeState = std::array<double, 1>;
using DenseStepper =
    boost::numeric::odeint::dense_output_runge_kutta<boost::numeric::odeint::controlled_runge_kutta<
        boost::numeric::odeint::runge_kutta_dopri5<OdeState>>>;

class IntegratedProfile final : public CalabiProfile {
 public:
  IntegratedProfile(Polynomial V, double a, double b, double t_lo, double t_hi)
      : CalabiProfile(std::move(V)), psi0_(std::sqrt(0.5 * (a * a + b * b))) {
    const double delta = 1e-3 * (b - a);
    auto rhs = [this](const OdeState& x, OdeState& dx, double) { dx[0] = V_(x[0]) / x[0]; };
    auto run = [&](double t_end, double dt, std::vector<DenseStepper>& out) {
      DenseStepper st = boost::numeric::odeint::make_dense_output(
          1e-12, 1e-12, boost::numeric::odeint::runge_kutta_dopri5<OdeState>());
      st.initialize(OdeState{psi0_}, 0.0, dt);
      auto past = [&](double t) { return dt > 0 ? t >= t_end : t <= t_end; };
      while (!past(st.current_time())) {
        st.do_step(rhs);
        const double v = st.current_state()[0];
        if (!(v > a + delta && v < b - delta)) {
          std::ostringstream os;
          os << "psi left (a + delta, b - delta) at t = " << st.current_time();
          throw IntegrationError(os.str());
        }
        out.push_back(st);
      }
    };
    if (t_hi > 0.0) run(t_hi, 1e-2, forward_);
    if (t_lo < 0.0) run(t_lo, -1e-2, backward_);
  }

  double value(double t) const override {
    if (t == 0.0) return psi0_;
    const auto& steps = t > 0 ? forward_ : backward_;
    for (const auto& st : steps) {
      const bool inside = t > 0 ? st.current_time() >= t : st.current_time() <= t;
      if (inside) {
        OdeState x{};
        st.calc_state(t, x);
        return x[0];
      }
    }
    throw IntegrationError("psi requested outside the integrated interval");
  }

 private:
  double psi0_;
  std::vector<DenseStepper> forward_, backward_;
};

}  // namespace

std::shared_ptr<const CalabiProfile> closed_form_profile(double a) {
  const CalabiCoefficients c = calabi_f1_coefficients(a, std::sqrt(3.0) * a);
  return std::make_shared<ClosedFormProfile>(a, Polynomial({c.A1, c.A2, 1.0, c.A3, c.A4}));
}

std::shared_ptr<const CalabiProfile> integrated_profile(const Polynomial& V, double a, double b,
                                                        double t_lo, double t_hi) {
  return std::make_shared<IntegratedProfile>(V, a, b, t_lo, t_hi);
}

HirzebruchResult hirzebruch(const HirzebruchParams& p) {
  HirzebruchResult r;
  r.coefficients = p.k == 1 ? calabi_f1_coefficients(p.a, p.b) : calabi_fk_coefficients(p.a, p.b, p.k);
  const CalabiCoefficients c = r.coefficients;
  const Polynomial V({c.A1, c.A2, 1.0, c.A3, c.A4});
  r.closed_form = p.k == 1 && !p.force_numeric && std::abs(p.b * p.b - 3.0 * p.a * p.a) <= 1e-12 * p.b * p.b;
  r.psi = r.closed_form ? closed_form_profile(p.a)
                        : integrated_profile(V, p.a, p.b, p.box.lo[2], p.box.hi[2]);
  const auto psi = r.psi;
  const auto* closed = dynamic_cast<const ClosedFormProfile*>(psi.get());

  FamilyInstance& inst = r.instance;
  inst.family = "hirzebruch";
  inst.label = p.label;
  inst.coords = {"x", "y", "t", "theta"};
  inst.box = p.box;
  inst.params = {{"a", p.a}, {"b", p.b}, {"hk", static_cast<double>(p.k)}, {"A1", c.A1},
                 {"A2", c.A2}, {"A3", c.A3}, {"A4", c.A4}};
  inst.fields = [psi, closed, V](const Vec4& x) {
    const int n = x[0].order();
    const Jet z = closed ? closed->evaluate(x[2]) : (*psi)(x[2]);
    const Jet Q = 1.0 + 0.25 * (x[0] * x[0] + x[1] * x[1]);
    const Jet iQ = reciprocal(Q);
    const Jet q2 = iQ * iQ;
    const Jet one(1.0, n);
    const Vec4 s3{-0.5 * x[1] * iQ, 0.5 * x[0] * iQ, Jet(0.0, n), one};
    const Jet vz = V(z) / z;
    Fields out;
    out.g = zero_mat(n);
    out.g[0][0] = z * q2;
    out.g[1][1] = z * q2;
    out.g[2][2] = vz;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out.g[a][b] += vz * s3[a] * s3[b];
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 1, z * q2);
    for (int a = 0; a < 4; ++a)
      if (a != 2) set_form(out.omega, 2, a, vz * s3[a]);
    Mat4 wi = out.omega;
    set_form(wi, 0, 1, -z * q2);
    out.omega_I = wi;
    out.conformal_factor = z;
    return out;
  };
  // References are functions of the chart point through psi(t).
  FamilyInstance tmp;
  add_calabi_references(tmp, c, 0);
  for (auto& [name, f] : tmp.reference)
    inst.reference[name] = [f, psi](const Point& q) { return f(Point{psi->value(q[2]), 0.0, 0.0, 0.0}); };
  inst.extras["psi"] = [psi](const Point& q) { return psi->value(q[2]); };
  const double delta = 1e-3 * (p.b - p.a);
  for (const Point& q : inst.box.validity_points()) {
    const double v = psi->value(q[2]);
    if (!(v > p.a + delta && v < p.b - delta)) invalid(inst, q, "psi outside (a + delta, b - delta)");
  }
  check_validity(inst);
  return r;
}

// ---------------------------------------------------------------- almost Kahler

Jet ak_quadrature_f(const AKParams& p, const Jet& x, const Jet& y) {
  using Rule = boost::math::quadrature::gauss<double, 32>;
  Jet acc(0.0, x.order());
  const auto& nodes = Rule::abscissa();
  const auto& weights = Rule::weights();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int sgn : {-1, 1}) {
      if (nodes[i] == 0.0 && sgn < 0) continue;
      const double tau = 0.5 * (1.0 + sgn * nodes[i]);
      const Jet xs = tau * x;
      acc += (0.5 * weights[i]) * (p.W(xs, y) * exp(p.U(xs, y)));
    }
  return x * acc;
}

FamilyInstance ak_lebrun(const AKParams& p) {
  FamilyInstance inst;
  inst.family = "ak_lebrun";
  inst.label = p.label;
  inst.kind = StructureKind::almost_kahler;
  inst.coords = {"x", "y", "z", "t"};
  inst.box = p.box;
  const AKParams params = p;
  inst.fields = [params](const Vec4& x) {
    const int n = x[0].order();
    const Jet& z = x[2];
    const Jet W = params.W(x[0], x[1]);
    const Jet V = params.V(x[0], x[1]);
    const Jet eU = exp(params.U(x[0], x[1]));
    const Jet f = params.f ? (*params.f)(x[0], x[1]) : ak_quadrature_f(params, x[0], x[1]);
    const Jet one(1.0, n);
    const Vec4 th{Jet(0.0, n), f, V / z, one};
    const Jet wz = W / z;
    const Jet zw = z / W;
    Fields out;
    out.g = zero_mat(n);
    out.g[0][0] = wz * z * z * eU;
    out.g[1][1] = out.g[0][0];
    out.g[2][2] = wz;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out.g[a][b] += zw * th[a] * th[b];
    const Jet area = z * W * eU;
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 1, area);
    set_form(out.omega, 2, 1, th[1]);
    set_form(out.omega, 2, 3, one);
    Mat4 wi = out.omega;
    set_form(wi, 0, 1, -area);
    out.omega_I = wi;
    out.conformal_factor = z;
    return out;
  };
  const PlaneFunction W = p.W, U = p.U;
  inst.reference["s"] = [W, U](const Point& q) {
    const double lap = partial_at(U, q[0], q[1], 2, 0) + partial_at(U, q[0], q[1], 0, 2);
    const double eU = std::exp(partial_at(U, q[0], q[1], 0, 0));
    return -(lap + 2.0 * eU) / (6.0 * q[2] * partial_at(W, q[0], q[1], 0, 0) * eU);
  };
  for (const Point& q : inst.box.validity_points()) {
    if (partial_at(p.W, q[0], q[1], 0, 0) <= 0.0) invalid(inst, q, "W not positive");
    if (q[2] <= 0.0) invalid(inst, q, "z not positive");
    const double cr1 = partial_at(p.V, q[0], q[1], 1, 0) - partial_at(p.W, q[0], q[1], 0, 1);
    const double cr2 = partial_at(p.V, q[0], q[1], 0, 1) + partial_at(p.W, q[0], q[1], 1, 0);
    if (std::hypot(cr1, cr2) > 1e-10) invalid(inst, q, "V + iW is not holomorphic");
    const Jet xj = Jet::seed(0, q[0], 1), yj = Jet::seed(1, q[1], 1);
    const Jet f = p.f ? (*p.f)(xj, yj) : ak_quadrature_f(p, xj, yj);
    const double dbeta = f.partial({1, 0, 0, 0});
    const double target = partial_at(p.W, q[0], q[1], 0, 0) * std::exp(partial_at(p.U, q[0], q[1], 0, 0));
    if (std::abs(dbeta - target) > 1e-9 * std::max(1.0, std::abs(target)))
      invalid(inst, q, "d beta differs from W omega_Sigma");
  }
  check_validity(inst);
  return inst;
}

namespace {

Jet liouville_u(const Jet& x, const Jet& y) { return std::log(4.0) - 2.0 * log(1.0 + x * x + y * y); }

Box ak_box() { return Box{{-0.5, -0.5, 1.0, 0.0}, {0.5, 0.5, 2.0, 1.0}}; }

}  // namespace

AKParams ak_example2() {
  AKParams p;
  p.W = [](const Jet& x, const Jet&) { return 2.0 + x; };
  p.V = [](const Jet&, const Jet& y) { return -y; };
  p.U = liouville_u;
  p.f = [](const Jet& x, const Jet& y) {
    const Jet c2 = 1.0 + y * y;
    const Jet c = sqrt(c2);
    const Jet r2 = x * x + c2;
    return 4.0 * x / (c2 * r2) + 4.0 * atan(x / c) / (c2 * c) - 2.0 / r2 + 2.0 / c2;
  };
  p.box = ak_box();
  p.label = "ak_example2";
  return p;
}

AKParams ak_constant_h() {
  AKParams p;
  p.W = [](const Jet& x, const Jet&) { return Jet(2.0, x.order()); };
  p.V = [](const Jet& x, const Jet&) { return Jet(0.0, x.order()); };
  p.U = liouville_u;
  p.box = ak_box();
  p.label = "ak_constant_h";
  return p;
}

AKParams ak_generic_u() {
  AKParams p = ak_example2();
  p.U = [](const Jet& x, const Jet& y) { return liouville_u(x, y) + 0.5 * x * x; };
  p.f.reset();
  p.label = "ak_generic_u";
  return p;
}

// ---------------------------------------------------------------- products

FamilyInstance kahler_product(const ProductParams& p) {
  FamilyInstance inst;
  inst.family = "kahler_product";
  inst.label = p.label;
  inst.coords = {"x1", "y1", "x2", "y2"};
  inst.box = p.box;
  inst.params = {{"k1", p.k1}, {"k2", p.k2}};
  const double k1 = p.k1, k2 = p.k2;
  inst.fields = [k1, k2](const Vec4& x) {
    const int n = x[0].order();
    const Jet q1 = reciprocal(1.0 + (k1 / 4.0) * (x[0] * x[0] + x[1] * x[1]));
    const Jet q2 = reciprocal(1.0 + (k2 / 4.0) * (x[2] * x[2] + x[3] * x[3]));
    const Jet a1 = q1 * q1, a2 = q2 * q2;
    Fields out;
    out.g = zero_mat(n);
    out.g[0][0] = a1;
    out.g[1][1] = a1;
    out.g[2][2] = a2;
    out.g[3][3] = a2;
    out.omega = zero_mat(n);
    set_form(out.omega, 0, 1, a1);
    set_form(out.omega, 2, 3, a2);
    Mat4 wi = out.omega;
    set_form(wi, 2, 3, -a2);
    out.omega_I = wi;
    return out;
  };
  inst.reference["s"] = [k1, k2](const Point&) { return (k1 + k2) / 3.0; };
  check_validity(inst);
  return inst;
}

}  // namespace kl
