#include <cmath>
#include <random>

#include "doctest.h"
#include "kahlerlab/tensor.hpp"

using namespace kl;

namespace {

// A positive definite metric with nonconstant entries around p.
Mat4 wavy_metric(const std::array<double, 4>& p, int order = 2) {
  Vec4 x;
  for (int i = 0; i < 4; ++i) x[i] = Jet::seed(i, p[i], order);
  Mat4 g = identity_mat(order);
  for (int i = 0; i < 4; ++i) g[i][i] = g[i][i] + 0.3 * x[i] * x[i] + 0.5;
  g[0][1] = g[1][0] = 0.2 * sin(x[2]);
  g[2][3] = g[3][2] = 0.1 * x[0] * x[1];
  g[1][3] = g[3][1] = 0.15 * cos(x[0]);
  return g;
}

Mat4 random_form(std::mt19937_64& rng, int order = 2) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat4 f = zero_mat(order);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      f[a][b] = Jet(u(rng), order);
      f[b][a] = -f[a][b];
    }
  return f;
}

double max_diff(const Mat4& a, const Mat4& b) {
  double m = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < slots_for_order(a[i][j].order()); ++k)
        m = std::max(m, std::abs(a[i][j].coeff(k) - b[i][j].coeff(k)));
  return m;
}

}  // namespace

TEST_CASE("inverse and determinant") {
  const Mat4 g = wavy_metric({0.2, -0.4, 0.7, 0.1});
  CHECK(max_diff(matmul(g, inverse(g)), identity_mat(2)) < 1e-13);
  const Eigen::Matrix4d gv = values(g);
  CHECK(determinant(g).value() == doctest::Approx(gv.determinant()).epsilon(1e-13));
  Vec4 b;
  for (int i = 0; i < 4; ++i) b[i] = Jet(i + 1.0, 2);
  const Vec4 x = solve(g, b);
  const Eigen::Vector4d r = gv * values(x) - Eigen::Vector4d(1, 2, 3, 4);
  CHECK(r.norm() < 1e-13);
}

TEST_CASE("Hodge star on 2-forms is an isometric involution") {
  std::mt19937_64 rng(5);
  const Metric4 m(wavy_metric({0.1, 0.3, -0.2, 0.5}));
  for (int t = 0; t < 10; ++t) {
    const Mat4 f = random_form(rng);
    CHECK(max_diff(hodge(m, hodge(m, f)), f) < 1e-12);
    CHECK(std::abs(norm2(m, hodge(m, f)).value() - norm2(m, f).value()) < 1e-12);
    const auto [fp, fm] = sd_asd_split(m, f);
    CHECK(std::abs(inner(m, fp, fm).value()) < 1e-12);
    CHECK(max_diff(hodge(m, fp), fp) < 1e-12);
    CHECK(max_diff(hodge(m, fm), -1.0 * fm) < 1e-12);
  }
}

TEST_CASE("flat Kahler form: norm, orientation and pfaffian") {
  const Mat4 g = identity_mat(2);
  Mat4 w = zero_mat(2);
  w[0][1] = Jet(1.0, 2);
  w[1][0] = Jet(-1.0, 2);
  w[2][3] = Jet(1.0, 2);
  w[3][2] = Jet(-1.0, 2);
  const Metric4 m(g, w);
  CHECK(m.vol().value() == doctest::Approx(1.0));
  CHECK(norm2(m, w).value() == doctest::Approx(2.0));
  CHECK(max_diff(hodge(m, w), w) < 1e-15);
  CHECK(pfaffian(m, w).value() == doctest::Approx(4.0));
  Mat4 wi = w;
  wi[2][3] = Jet(-1.0, 2);
  wi[3][2] = Jet(1.0, 2);
  const AsdEigen e = asd_eigendata(m, 3.0 * wi);
  CHECK(e.lambda.value() == doctest::Approx(3.0));
  REQUIRE(e.omega_I.has_value());
  CHECK(max_diff(*e.omega_I, wi) < 1e-15);
  CHECK_THROWS_AS(asd_eigendata(m, w), PreconditionError);
  const Mat4 J = endomorphism(m, w);
  CHECK(max_diff(matmul(J, J), -1.0 * identity_mat(2)) < 1e-15);
  CHECK(max_diff(form_of(m, J), w) < 1e-15);
}

TEST_CASE("d squared vanishes") {
  const std::array<double, 4> p{0.3, 0.1, -0.6, 0.9};
  Vec4 x;
  for (int i = 0; i < 4; ++i) x[i] = Jet::seed(i, p[i], 4);
  const Jet f = exp(x[0] * x[1]) + sin(x[2]) * x[3] * x[3];
  const Mat4 ddf = exterior_d(grad_form(f));
  CHECK(max_diff(ddf, zero_mat(2)) < 1e-12);
  const Vec4 a{x[1] * x[2], cos(x[3]), x[0] * x[0] * x[3], exp(x[2])};
  const T3 dda = exterior_d(exterior_d(a));
  double m = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) m = std::max(m, dda[i][j][k].max_abs());
  CHECK(m < 1e-12);
}

TEST_CASE("wedge and contraction identities") {
  Vec4 a, b;
  for (int i = 0; i < 4; ++i) {
    a[i] = Jet(i + 1.0, 1);
    b[i] = Jet(1.0 - i, 1);
  }
  const Mat4 ab = wedge(a, b);
  CHECK(max_diff(ab, -1.0 * wedge(b, a)) < 1e-15);
  CHECK(ab[0][1].value() == doctest::Approx(a[0].value() * b[1].value() - a[1].value() * b[0].value()));
  const T3 aab = wedge(a, ab);
  double m = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(aab[i][j][k].value()));
  CHECK(m < 1e-14);
  CHECK(perm_sign(0, 1, 2, 3) == 1);
  CHECK(perm_sign(1, 0, 2, 3) == -1);
  CHECK(perm_sign(1, 2, 3, 0) == -1);
  CHECK(perm_sign(0, 0, 2, 3) == 0);
}
