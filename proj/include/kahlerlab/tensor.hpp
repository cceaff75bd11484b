#pragma once

// Pointwise multilinear algebra in four dimensions over jet scalars.
//
// Index conventions: Mat4 m[i][j] is a covariant 2-tensor m_ij unless stated
// otherwise; endomorphisms are stored as E[c][a] = E^c_a so (EX)^c = E[c][a]X^a.
// 2-forms are antisymmetric Mat4, 3-forms antisymmetric T3.  The inner product
// on 2-forms is <a,b> = 1/2 a_ij b^ij, so a Kahler form has squared norm 2.

#include <array>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "kahlerlab/jet.hpp"

namespace kl {

using Vec4 = std::array<Jet, 4>;
using Mat4 = std::array<Vec4, 4>;
using T3 = std::array<Mat4, 4>;
using T4 = std::array<T3, 4>;

Vec4 zero_vec(int order);
Mat4 zero_mat(int order);
T3 zero_t3(int order);
T4 zero_t4(int order);
Mat4 identity_mat(int order);

Mat4 transpose(const Mat4& m);
Mat4 matmul(const Mat4& a, const Mat4& b);
Mat4 operator+(const Mat4& a, const Mat4& b);
Mat4 operator-(const Mat4& a, const Mat4& b);
Mat4 operator*(const Jet& s, const Mat4& m);
Mat4 operator*(double s, const Mat4& m);
Vec4 operator+(const Vec4& a, const Vec4& b);
Vec4 operator-(const Vec4& a, const Vec4& b);
Vec4 operator*(const Jet& s, const Vec4& v);
Vec4 operator*(double s, const Vec4& v);
T3 operator-(const T3& a, const T3& b);
T3 operator+(const T3& a, const T3& b);
T3 operator*(double s, const T3& t);

Jet determinant(const Mat4& m);

/// Solves A x = b by Gaussian elimination with pivoting on constant terms.
Vec4 solve(const Mat4& a, const Vec4& b);
Mat4 inverse(const Mat4& m);

/// Constant-term extraction.
Eigen::Matrix4d values(const Mat4& m);
Eigen::Vector4d values(const Vec4& v);

/// The alternating sum f01 f23 - f02 f13 + f03 f12.
Jet pfaffian_components(const Mat4& f);

class Metric4 {
 public:
  /// Orientation from sqrt(det g) in the coordinate order.
  explicit Metric4(const Mat4& g);
  /// Orientation fixed by 1/2 omega^omega: the volume density is Pf(omega).
  Metric4(const Mat4& g, const Mat4& omega);

  const Mat4& g() const { return g_; }
  const Mat4& inv() const { return ginv_; }
  /// epsilon_{0123}; equals +-sqrt(det g).
  const Jet& vol() const { return vol_; }
  int order() const { return g_[0][0].order(); }
  /// Largest |g_ij| at the base point.
  double scale() const;

  Vec4 raise(const Vec4& a) const;
  Vec4 lower(const Vec4& v) const;
  Mat4 raise_both(const Mat4& f) const;

  /// Levi-Civita symbol times the volume density.
  Jet eps(int a, int b, int c, int d) const;

 private:
  void init();
  Mat4 g_;
  Mat4 ginv_;
  Jet vol_;
};

/// Sign of the permutation (a,b,c,d) of (0,1,2,3); zero if any index repeats.
int perm_sign(int a, int b, int c, int d);

Jet inner(const Metric4& m, const Mat4& a, const Mat4& b);
Jet inner(const Metric4& m, const Vec4& a, const Vec4& b);
Jet norm2(const Metric4& m, const Mat4& f);

Mat4 hodge(const Metric4& m, const Mat4& f);
/// (f+, f-) with f+ = (f + *f)/2.
std::pair<Mat4, Mat4> sd_asd_split(const Metric4& m, const Mat4& f);
Mat4 sd_part(const Metric4& m, const Mat4& f);
Mat4 asd_part(const Metric4& m, const Mat4& f);

/// pf(f) = 2 *(f^f) = 4 Pf(f)/vol.
Jet pfaffian(const Metric4& m, const Mat4& f);

struct AsdEigen {
  Jet lambda;
  std::optional<Mat4> omega_I;
  double star_residual = 0.0;
};

/// lambda = |f|/sqrt(2) and omega_I = f/lambda for an anti-selfdual f.
/// Throws PreconditionError when *f + f is not small relative to |f|.
AsdEigen asd_eigendata(const Metric4& m, const Mat4& f, double tol = 1e-8);

/// E^c_a = f_ab g^bc, the endomorphism with f(X,Y) = g(EX,Y).
Mat4 endomorphism(const Metric4& m, const Mat4& f);
/// The 2-form associated with an endomorphism.
Mat4 form_of(const Metric4& m, const Mat4& e);

/// (E alpha) = -alpha o E on 1-forms.
Vec4 act_on_1form(const Mat4& e, const Vec4& alpha);
Vec4 act_on_vector(const Mat4& e, const Vec4& x);

Mat4 wedge(const Vec4& a, const Vec4& b);
T3 wedge(const Vec4& a, const Mat4& f);
/// Inner product of a vector with the first slot of a 2-form.
Vec4 contract(const Vec4& v, const Mat4& f);

/// Exterior derivatives by coordinate differentiation of the jets.
Vec4 grad_form(const Jet& f);
Mat4 exterior_d(const Vec4& a);
T3 exterior_d(const Mat4& f);

/// Star of a 3-form, (*T)_d = (1/6) T^{abc} eps_{abcd}.
Vec4 hodge3(const Metric4& m, const T3& t);

}  // namespace kl
