#pragma once

// The curvature engine.
//
// Conventions:
//   R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
//   Rm_abcd = g(R(d_a, d_b) d_c, d_d), sectional K(X,Y) = Rm(X,Y,Y,X)/|X^Y|^2
//   Ric_bc = g^ad Rm_abcd, s = Scal/6, h = Ric0/2 + Scal/24 g
//   W = Rm - h (Kulkarni-Nomizu) g, C_abc = -(nabla_a h)_bc + (nabla_b h)_ac
// Cotton-type tensors T3 c[a][b][c] carry their 2-form slot in (a, b).
// Curvature-type tensors act on 2-forms by W(a)_ab = -1/2 W_abcd a^cd, which is
// the identity on a round unit sphere.

#include <memory>
#include <optional>
#include <random>

#include "kahlerlab/instance.hpp"

namespace kl {

using Star6 = std::array<std::array<Jet, 6>, 6>;

/// Index pairs (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
inline constexpr std::array<std::array<int, 2>, 6> kPairs{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

/// Matrix of the Hodge star on 2-forms in the pair basis.
Star6 star_matrix(const Metric4& m);

struct CurvatureBundle {
  int order = 2;
  Point point{};
  Fields fields;
  std::optional<Metric4> metric;
  Star6 star;
  Mat4 J;      // J[c][a] = J^c_a
  T3 gamma;    // gamma[k][i][j] = Gamma^k_ij
  T4 riem;     // Rm_abcd
  Mat4 ric, ric0, h;
  Jet scal, s;
  T4 weyl, weyl_plus, weyl_minus;
  double curvature_scale = 1.0;  // max(1, |Rm|)

  // order >= 3
  std::optional<T3> nabla_h;  // (nabla_a h)_bc
  std::optional<T3> cotton, cotton_plus, cotton_minus;
  std::optional<T3> codiff_wminus;

  // order >= 4
  std::optional<Mat4> bach, bach_plus_route, bach_minus_route;

  const Metric4& m() const { return *metric; }
};

/// Full curvature from a metric and orientation form given as jets.
std::unique_ptr<CurvatureBundle> compute_curvature(const Mat4& g, const Mat4& omega);

/// Bundle for an instance at a point; fields beyond the order are left empty.
std::unique_ptr<CurvatureBundle> curvature_bundle(const FamilyInstance& inst, const Point& pt,
                                                  int order);

/// Covariant derivatives.
Mat4 covd(const CurvatureBundle& b, const Vec4& alpha);  // [a][b] = (nabla_a alpha)_b
T3 covd(const CurvatureBundle& b, const Mat4& t);        // [a][b][c] = (nabla_a t)_bc
Mat4 hessian(const CurvatureBundle& b, const Jet& f);

/// Star and projections acting on the 2-form slot of a Cotton-type tensor.
T3 star_first_slot(const Star6& s, const T3& c);

/// Norms of constant terms, computed with the inverse metric.
double tensor_norm(const Eigen::Matrix4d& ginv, const std::vector<double>& t, int rank);
double norm(const CurvatureBundle& b, const Vec4& t);
double norm(const CurvatureBundle& b, const Mat4& t);
double norm(const CurvatureBundle& b, const T3& t);
double norm(const CurvatureBundle& b, const T4& t);

/// Residuals of the structure itself.
double closedness_residual(const CurvatureBundle& b);          // |d omega|
double parallel_J_residual(const CurvatureBundle& b);          // |nabla J|
double nijenhuis_norm(const CurvatureBundle& b);
double complex_structure_residual(const CurvatureBundle& b);   // |J^2 + 1|
double first_bianchi_residual(const CurvatureBundle& b);
double weyl_trace_residual(const CurvatureBundle& b);
double ricci_J_anti_invariant(const CurvatureBundle& b);       // |Ric(J.,J.) - Ric|

struct RicciFormData {
  Mat4 rho, rho0, rho_tilde;
  Jet p, lambda, xi, eta;
  std::optional<Jet> mu;
  std::optional<Mat4> omega_I;
  double anti_invariant_residual = 0.0;
};

/// Throws PreconditionError when Ric has a J-anti-invariant part above tol.
RicciFormData ricci_form_data(const CurvatureBundle& b, double tol = 1e-8);

struct CottonCodiff {
  double cminus_norm = 0.0;
  double codiff_norm = 0.0;
  double difference = 0.0;
};

CottonCodiff cotton_asd_and_codiff(const CurvatureBundle& b);

struct BachForms {
  double bach_norm = 0.0;
  double route_plus_residual = 0.0;
  double route_minus_residual = 0.0;
  double anti_invariant_norm = 0.0;
  /// B~ = Bach(J.,.) anti-selfdual part and (dJds)_0 + s rho0.
  std::optional<Mat4> btilde;
  std::optional<Mat4> btilde_reference;
  /// Least-squares ratio <B~, ref>/<ref, ref>; absent when ref vanishes.
  std::optional<double> ratio;
  double fit_residual = 0.0;
};

BachForms bach_forms(const CurvatureBundle& b, double tol = 1e-8);

/// |nabla_(a K_b)| for a vector field K given as jets.
double killing_residual(const CurvatureBundle& b, const Vec4& K);

/// |Hess f - Hess f(J.,J.)|: vanishes iff J grad f is Killing (f a holomorphic potential).
double holomorphic_potential_residual(const CurvatureBundle& b, const Jet& f);

/// J grad f as a vector field.
Vec4 hamiltonian_vector(const CurvatureBundle& b, const Jet& f);

struct HamiltonianFormData {
  Mat4 phi0;
  Jet sigma, pi, lambda, xi, eta;
  Vec4 K1, K2;
  Eigen::Vector4d beta;
  double residual_closed = 0.0;
  double residual_twistor = 0.0;
  double residual_hamiltonian = 0.0;
  double lsq_orthogonality = 0.0;
  double killing_K1 = 0.0;
  double killing_K2 = 0.0;
  double potential_sigma = 0.0;
  double potential_pi = 0.0;
  double omega_K1_K2 = 0.0;
  double dpi_residual = 0.0;
  double swap_residual = 0.0;
  std::optional<double> idsig_residual;
  double dxi_deta = 0.0;
};

/// Throws PreconditionError when phi is not J-invariant.
HamiltonianFormData hamiltonian_analysis(const CurvatureBundle& b, const Mat4& phi,
                                         double tol = 1e-8);

struct ConformalScalar {
  double route_rescale = 0.0;
  double route_lee = 0.0;
  double difference = 0.0;
  double lambda = 0.0;
  Vec4 theta;
};

/// kappa of (g, I).  lambda and omega_I come from the instance when it carries a
/// conformal factor, otherwise from rho0 = lambda_Ric omega_I.  Throws
/// PreconditionError when lambda is below the zero threshold.
ConformalScalar conformal_scalar(const CurvatureBundle& b);

/// Residuals of the Kahler identities (each relative to curvature_scale).
double bianchirho_residual(const CurvatureBundle& b);
double matsumoto_tanno_residual(const CurvatureBundle& b);
double cplus_s_residual(const CurvatureBundle& b);

struct WeylSpectrum {
  std::array<double, 3> eigenvalues{};
  double gap = 0.0;            // smallest pairwise distance
  double simple = 0.0;         // eigenvalue farthest from the other two
  double eigenform_residual = 0.0;
  double eigenform_value = 0.0;
  double norm = 0.0;
};

/// W+ (sign = +1) or W- (sign = -1) as a symmetric endomorphism of Lambda^+-
/// in an orthonormal basis; the eigenform tested is omega (resp. eta).
WeylSpectrum weyl_spectrum(const CurvatureBundle& b, int sign, const std::optional<Mat4>& eta = {});

struct LagrangianSpread {
  double min = 0.0;
  double max = 0.0;
  double spread = 0.0;
};

LagrangianSpread lagrangian_spread(const CurvatureBundle& b, int n_samples, std::uint64_t seed);

}  // namespace kl
