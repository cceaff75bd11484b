#pragma once

// Constructors for the explicit metric families.  Each returns an immutable
// FamilyInstance whose validity box has been checked at its 16 corners and
// center.

#include <functional>
#include <memory>
#include <vector>

#include "kahlerlab/instance.hpp"

namespace kl {

/// Univariate polynomial with coefficients in descending order of degree.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> descending);

  double operator()(double x) const;
  Jet operator()(const Jet& x) const;
  Polynomial derivative() const;
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<double>& coefficients() const { return c_; }

 private:
  std::vector<double> c_;
};

inline constexpr double kDefaultMargin = 1e-2;

// ---------------------------------------------------------------- ortho-toric

struct OrthotoricParams {
  Polynomial F, G;
  Box box;  // (xi, eta, t, z)
  /// phi = 1/2 (xi - eta) omega_I + phi_trace (xi + eta) omega.
  double phi_trace = 1.5;
  double margin = kDefaultMargin;
  std::string label = "orthotoric";
};

/// Extremal quartics F = k x^4 + l x^3 + A x^2 + B1 x + C1, G likewise with B2, C2.
struct ExtremalQuartics {
  double k = 0, l = 0, A = 0, B1 = 0, B2 = 0, C1 = 0, C2 = 0;
};

FamilyInstance orthotoric(const OrthotoricParams& p);
/// Adds the closed forms of the extremal case (p, kappa lambda^3) to the references.
FamilyInstance orthotoric_extremal(const ExtremalQuartics& q, const Box& box,
                                   const std::string& label = "orthotoric");

/// Instance E1: k=1, C1=1, C2=-1 on xi in [1.5,2.5], eta in [-0.5,0.5].
ExtremalQuartics e1_quartics();
Box e1_box();

// ---------------------------------------------------------------- toric

/// G_ij as a function of (x1, x2).
using ToricMatrix = std::function<std::array<std::array<Jet, 2>, 2>(const Jet&, const Jet&)>;

struct ToricParams {
  ToricMatrix G;
  Box box;  // (x1, x2, t1, t2)
  std::string label = "toric";
};

FamilyInstance toric(const ToricParams& p);
/// Whether d_k G_ij is totally symmetric (G is a Hessian) at every validity point.
bool toric_is_hessian(const ToricParams& p, double tol = 1e-10);

// ---------------------------------------------------------------- Calabi type

enum class CalabiChart { sigma, bianchi_nil };

struct CalabiParams {
  double A1 = 0, A2 = 0, A3 = 0, A4 = 0;
  /// Curvature of the base surface, also the z^2 coefficient of V.
  double eps = 1.0;
  CalabiChart chart = CalabiChart::sigma;
  Box box;  // (x, y, z, t)
  double margin = kDefaultMargin;
  std::string label = "calabi_type";
};

Polynomial calabi_profile(const CalabiParams& p);
FamilyInstance calabi_type(const CalabiParams& p);

/// Instance E2: eps=1, A1=1, A4=-1 on z in [0.9,1.5].
CalabiParams e2_params();

// ---------------------------------------------------------------- Hirzebruch

struct CalabiCoefficients {
  double A1 = 0, A2 = 0, A3 = 0, A4 = 0;
};

/// The extremal profile coefficients on F_1 in the Kahler class (a, b).
CalabiCoefficients calabi_f1_coefficients(double a, double b);
/// The closed-form F_k coefficients for general k, in their literal sign.
CalabiCoefficients calabi_fk_coefficients_literal(double a, double b, int k);
/// The same with the sign making V(a) = V(b) = 0 for V = A1 z^4 + A2 z^3 + z^2 + A3 z + A4.
CalabiCoefficients calabi_fk_coefficients(double a, double b, int k);
/// Coefficients from the boundary conditions with curvature eps and boundary constant kb,
/// literal sign.
CalabiCoefficients boundary_coefficients_literal(double a, double b, double eps, double kb);

struct HirzebruchParams {
  double a = 1.0;
  double b = 1.7320508075688772;
  int k = 1;
  /// Box in (x, y, t, theta); t is the fiber coordinate with e^t = r^2.
  Box box{{-0.3, -0.3, -2.0, 0.0}, {0.3, 0.3, 2.0, 1.0}};
  /// Force numerical integration even when the closed form applies.
  bool force_numeric = false;
  std::string label = "hirzebruch";
};

/// psi(t) and its derivatives for the profile equation psi psi' = V(psi).
class CalabiProfile {
 public:
  virtual ~CalabiProfile() = default;
  virtual double value(double t) const = 0;
  /// Jet of psi composed with a t-jet.
  Jet operator()(const Jet& t) const;
  const Polynomial& V() const { return V_; }

 protected:
  explicit CalabiProfile(Polynomial V) : V_(std::move(V)) {}
  Polynomial V_;
};

/// a sqrt((1 + 3 e^t)/(1 + e^t)), the profile when b^2 = 3 a^2.
std::shared_ptr<const CalabiProfile> closed_form_profile(double a);
/// Adaptive Dormand-Prince integration of psi psi' = V(psi) from psi(0) over [t_lo, t_hi],
/// required to stay in (a + delta, b - delta) with delta = 1e-3 (b - a).
std::shared_ptr<const CalabiProfile> integrated_profile(const Polynomial& V, double a, double b,
                                                        double t_lo, double t_hi);

struct HirzebruchResult {
  CalabiCoefficients coefficients;
  std::shared_ptr<const CalabiProfile> psi;
  bool closed_form = false;
  FamilyInstance instance;
};

HirzebruchResult hirzebruch(const HirzebruchParams& p);

// ---------------------------------------------------------------- almost Kahler

/// Scalar function of (x, y) on the base chart.
using PlaneFunction = std::function<Jet(const Jet&, const Jet&)>;

struct AKParams {
  PlaneFunction W, V, U;
  /// f with beta = f dy and d_x f = W e^U; absent means Gauss-Legendre quadrature.
  std::optional<PlaneFunction> f;
  Box box;  // (x, y, z, t)
  std::string label = "ak_lebrun";
};

FamilyInstance ak_lebrun(const AKParams& p);
/// H = (2 + x) + i y with the round Liouville factor and closed-form beta.
AKParams ak_example2();
/// Constant H = 2: integrable control.
AKParams ak_constant_h();
/// Example-2 holomorphic data with a non-Liouville conformal factor.
AKParams ak_generic_u();
/// x int_0^1 W e^U(x tau, y) d tau by 32-node Gauss-Legendre on jets.
Jet ak_quadrature_f(const AKParams& p, const Jet& x, const Jet& y);

// ---------------------------------------------------------------- products

struct ProductParams {
  double k1 = 1.0, k2 = 1.0;
  Box box{{-0.4, -0.4, -0.4, -0.4}, {0.4, 0.4, 0.4, 0.4}};
  std::string label = "kahler_product";
};

FamilyInstance kahler_product(const ProductParams& p);

/// Runs the metric construction at the 17 validity points of the box and throws
/// ConstructionError naming the first failing point.
void check_validity(const FamilyInstance& inst);

}  // namespace kl
