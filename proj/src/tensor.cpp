#include "kahlerlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kl {

Vec4 zero_vec(int order) {
  Vec4 v;
  v.fill(Jet(0.0, order));
  return v;
}

Mat4 zero_mat(int order) {
  Mat4 m;
  m.fill(zero_vec(order));
  return m;
}

T3 zero_t3(int order) {
  T3 t;
  t.fill(zero_mat(order));
  return t;
}

T4 zero_t4(int order) {
  T4 t;
  t.fill(zero_t3(order));
  return t;
}

Mat4 identity_mat(int order) {
  Mat4 m = zero_mat(order);
  for (int i = 0; i < 4; ++i) m[i][i] = Jet(1.0, order);
  return m;
}

Mat4 transpose(const Mat4& m) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = m[j][i];
  return r;
}

Mat4 matmul(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Jet acc = a[i][0] * b[0][j];
      for (int k = 1; k < 4; ++k) acc += a[i][k] * b[k][j];
      r[i][j] = acc;
    }
  return r;
}

Mat4 operator+(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] + b[i][j];
  return r;
}

Mat4 operator-(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] - b[i][j];
  return r;
}

Mat4 operator*(const Jet& s, const Mat4& m) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = s * m[i][j];
  return r;
}

Mat4 operator*(double s, const Mat4& m) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = s * m[i][j];
  return r;
}

Vec4 operator+(const Vec4& a, const Vec4& b) {
  Vec4 r;
  for (int i = 0; i < 4; ++i) r[i] = a[i] + b[i];
  return r;
}

Vec4 operator-(const Vec4& a, const Vec4& b) {
  Vec4 r;
  for (int i = 0; i < 4; ++i) r[i] = a[i] - b[i];
  return r;
}

Vec4 operator*(const Jet& s, const Vec4& v) {
  Vec4 r;
  for (int i = 0; i < 4; ++i) r[i] = s * v[i];
  return r;
}

Vec4 operator*(double s, const Vec4& v) {
  Vec4 r;
  for (int i = 0; i < 4; ++i) r[i] = s * v[i];
  return r;
}

T3 operator-(const T3& a, const T3& b) {
  T3 r;
  for (int i = 0; i < 4; ++i) r[i] = a[i] - b[i];
  return r;
}

T3 operator+(const T3& a, const T3& b) {
  T3 r;
  for (int i = 0; i < 4; ++i) r[i] = a[i] + b[i];
  return r;
}

T3 operator*(double s, const T3& t) {
  T3 r;
  for (int i = 0; i < 4; ++i) r[i] = s * t[i];
  return r;
}

namespace {

// Row-reduces a copy of m; returns the pivots' product with sign.
struct Elimination {
  Mat4 lu;
  std::array<int, 4> perm{0, 1, 2, 3};
  int sign = 1;
  bool singular = false;

  explicit Elimination(const Mat4& m) : lu(m) {
    for (int col = 0; col < 4; ++col) {
      int piv = col;
      double best = std::abs(lu[col][col].value());
      for (int r = col + 1; r < 4; ++r)
        if (std::abs(lu[r][col].value()) > best) {
          best = std::abs(lu[r][col].value());
          piv = r;
        }
      if (best == 0.0) {
        singular = true;
        return;
      }
      if (piv != col) {
        std::swap(lu[piv], lu[col]);
        std::swap(perm[piv], perm[col]);
        sign = -sign;
      }
      const Jet inv = reciprocal(lu[col][col]);
      for (int r = col + 1; r < 4; ++r) {
        const Jet f = lu[r][col] * inv;
        lu[r][col] = f;
        for (int c = col + 1; c < 4; ++c) lu[r][c] -= f * lu[col][c];
      }
    }
  }

  Vec4 solve(const Vec4& b) const {
    Vec4 y;
    for (int i = 0; i < 4; ++i) {
      Jet acc = b[perm[i]];
      for (int k = 0; k < i; ++k) acc -= lu[i][k] * y[k];
      y[i] = acc;
    }
    Vec4 x;
    for (int i = 3; i >= 0; --i) {
      Jet acc = y[i];
      for (int k = i + 1; k < 4; ++k) acc -= lu[i][k] * x[k];
      x[i] = acc / lu[i][i];
    }
    return x;
  }
};

}  // namespace

Jet determinant(const Mat4& m) {
  Elimination e(m);
  if (e.singular) return Jet(0.0, m[0][0].order());
  Jet d = e.lu[0][0];
  for (int i = 1; i < 4; ++i) d *= e.lu[i][i];
  return e.sign > 0 ? d : -d;
}

Vec4 solve(const Mat4& a, const Vec4& b) {
  Elimination e(a);
  if (e.singular) throw SingularPointError("singular 4x4 system");
  return e.solve(b);
}

Mat4 inverse(const Mat4& m) {
  Elimination e(m);
  if (e.singular) throw SingularPointError("singular 4x4 matrix");
  const int order = m[0][0].order();
  Mat4 r;
  for (int c = 0; c < 4; ++c) {
    Vec4 unit = zero_vec(order);
    unit[c] = Jet(1.0, order);
    const Vec4 col = e.solve(unit);
    for (int i = 0; i < 4; ++i) r[i][c] = col[i];
  }
  return r;
}

Eigen::Matrix4d values(const Mat4& m) {
  Eigen::Matrix4d r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = m[i][j].value();
  return r;
}

Eigen::Vector4d values(const Vec4& v) {
  return {v[0].value(), v[1].value(), v[2].value(), v[3].value()};
}

Jet pfaffian_components(const Mat4& f) {
  return f[0][1] * f[2][3] - f[0][2] * f[1][3] + f[0][3] * f[1][2];
}

int perm_sign(int a, int b, int c, int d) {
  std::array<int, 4> p{a, b, c, d};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (p[i] == p[j]) return 0;
  int s = 1;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (p[i] > p[j]) s = -s;
  return s;
}

Metric4::Metric4(const Mat4& g) : g_(g) {
  init();
  vol_ = sqrt(determinant(g_));
}

Metric4::Metric4(const Mat4& g, const Mat4& omega) : g_(g) {
  init();
  const double pf = pfaffian_components(omega).value();
  if (pf == 0.0) throw SingularPointError("degenerate orientation form");
  vol_ = sqrt(determinant(g_));
  if (pf < 0.0) vol_ = -vol_;
}

void Metric4::init() {
  const Eigen::Matrix4d g0 = values(g_);
  if ((g0 - g0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g0.cwiseAbs().maxCoeff()))
    throw SignatureError("metric is not symmetric");
  for (int k = 1; k <= 4; ++k) {
    const double minor = g0.topLeftCorner(k, k).determinant();
    if (!(minor > 0.0))
      throw SignatureError("metric not positive definite (leading minor " + std::to_string(k) +
                           " = " + std::to_string(minor) + ")");
  }
  ginv_ = inverse(g_);
}

double Metric4::scale() const { return values(g_).cwiseAbs().maxCoeff(); }

Vec4 Metric4::raise(const Vec4& a) const {
  Vec4 r;
  for (int i = 0; i < 4; ++i) {
    Jet acc = ginv_[i][0] * a[0];
    for (int j = 1; j < 4; ++j) acc += ginv_[i][j] * a[j];
    r[i] = acc;
  }
  return r;
}

Vec4 Metric4::lower(const Vec4& v) const {
  Vec4 r;
  for (int i = 0; i < 4; ++i) {
    Jet acc = g_[i][0] * v[0];
    for (int j = 1; j < 4; ++j) acc += g_[i][j] * v[j];
    r[i] = acc;
  }
  return r;
}

Mat4 Metric4::raise_both(const Mat4& f) const { return matmul(matmul(ginv_, f), ginv_); }

Jet Metric4::eps(int a, int b, int c, int d) const {
  const int s = perm_sign(a, b, c, d);
  if (s == 0) return Jet(0.0, vol_.order());
  return s > 0 ? vol_ : -vol_;
}

Jet inner(const Metric4& m, const Mat4& a, const Mat4& b) {
  const Mat4 bu = m.raise_both(b);
  Jet acc(0.0, std::min(a[0][0].order(), bu[0][0].order()));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) acc += a[i][j] * bu[i][j];
  return acc;
}

Jet inner(const Metric4& m, const Vec4& a, const Vec4& b) {
  const Vec4 bu = m.raise(b);
  Jet acc = a[0] * bu[0];
  for (int i = 1; i < 4; ++i) acc += a[i] * bu[i];
  return acc;
}

Jet norm2(const Metric4& m, const Mat4& f) { return inner(m, f, f); }

Mat4 hodge(const Metric4& m, const Mat4& f) {
  const Mat4 fu = m.raise_both(f);
  Mat4 r = zero_mat(std::min(fu[0][0].order(), m.vol().order()));
  for (int c = 0; c < 4; ++c)
    for (int d = c + 1; d < 4; ++d) {
      Jet acc(0.0, r[0][0].order());
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          const int s = perm_sign(a, b, c, d);
          if (s > 0)
            acc += fu[a][b];
          else if (s < 0)
            acc -= fu[a][b];
        }
      acc *= m.vol();
      r[c][d] = acc;
      r[d][c] = -acc;
    }
  return r;
}

std::pair<Mat4, Mat4> sd_asd_split(const Metric4& m, const Mat4& f) {
  const Mat4 s = hodge(m, f);
  return {0.5 * (f + s), 0.5 * (f - s)};
}

Mat4 sd_part(const Metric4& m, const Mat4& f) { return 0.5 * (f + hodge(m, f)); }
Mat4 asd_part(const Metric4& m, const Mat4& f) { return 0.5 * (f - hodge(m, f)); }

Jet pfaffian(const Metric4& m, const Mat4& f) { return 4.0 * pfaffian_components(f) / m.vol(); }

AsdEigen asd_eigendata(const Metric4& m, const Mat4& f, double tol) {
  AsdEigen out;
  const Mat4 sum = f + hodge(m, f);
  const double fmax = values(f).cwiseAbs().maxCoeff();
  out.star_residual = values(sum).cwiseAbs().maxCoeff();
  if (out.star_residual > tol * std::max(1.0, fmax))
    throw PreconditionError("2-form is not anti-selfdual (|*f + f| = " +
                            std::to_string(out.star_residual) + ")");
  const Jet n2 = norm2(m, f);
  const double threshold = 1e-8 * m.scale();
  const double lam0 = std::sqrt(std::max(0.0, n2.value() / 2.0));
  if (lam0 <= threshold) {
    out.lambda = Jet(lam0, n2.order());
    return out;
  }
  out.lambda = sqrt(n2 / 2.0);
  out.omega_I = reciprocal(out.lambda) * f;
  return out;
}

Mat4 endomorphism(const Metric4& m, const Mat4& f) {
  const Mat4& gi = m.inv();
  Mat4 e;
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a) {
      Jet acc = f[a][0] * gi[0][c];
      for (int b = 1; b < 4; ++b) acc += f[a][b] * gi[b][c];
      e[c][a] = acc;
    }
  return e;
}

Mat4 form_of(const Metric4& m, const Mat4& e) {
  const Mat4& g = m.g();
  Mat4 f;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      Jet acc = e[0][a] * g[0][b];
      for (int c = 1; c < 4; ++c) acc += e[c][a] * g[c][b];
      f[a][b] = acc;
    }
  return f;
}

Vec4 act_on_1form(const Mat4& e, const Vec4& alpha) {
  Vec4 r;
  for (int a = 0; a < 4; ++a) {
    Jet acc = alpha[0] * e[0][a];
    for (int c = 1; c < 4; ++c) acc += alpha[c] * e[c][a];
    r[a] = -acc;
  }
  return r;
}

Vec4 act_on_vector(const Mat4& e, const Vec4& x) {
  Vec4 r;
  for (int c = 0; c < 4; ++c) {
    Jet acc = e[c][0] * x[0];
    for (int a = 1; a < 4; ++a) acc += e[c][a] * x[a];
    r[c] = acc;
  }
  return r;
}

Mat4 wedge(const Vec4& a, const Vec4& b) {
  Mat4 r = zero_mat(std::min(a[0].order(), b[0].order()));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      r[i][j] = a[i] * b[j] - a[j] * b[i];
      r[j][i] = -r[i][j];
    }
  return r;
}

T3 wedge(const Vec4& a, const Mat4& f) {
  T3 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j][k] = a[i] * f[j][k] + a[j] * f[k][i] + a[k] * f[i][j];
  return r;
}

Vec4 contract(const Vec4& v, const Mat4& f) {
  Vec4 r;
  for (int b = 0; b < 4; ++b) {
    Jet acc = v[0] * f[0][b];
    for (int a = 1; a < 4; ++a) acc += v[a] * f[a][b];
    r[b] = acc;
  }
  return r;
}

Vec4 grad_form(const Jet& f) {
  Vec4 r;
  for (int i = 0; i < 4; ++i) r[i] = f.derivative(i);
  return r;
}

Mat4 exterior_d(const Vec4& a) {
  Mat4 r = zero_mat(a[0].order() - 1);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      r[i][j] = a[j].derivative(i) - a[i].derivative(j);
      r[j][i] = -r[i][j];
    }
  return r;
}

T3 exterior_d(const Mat4& f) {
  std::array<Mat4, 4> partial;
  for (int v = 0; v < 4; ++v)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) partial[v][i][j] = f[i][j].derivative(v);
  T3 r;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        r[a][b][c] = partial[a][b][c] + partial[b][c][a] + partial[c][a][b];
  return r;
}

Vec4 hodge3(const Metric4& m, const T3& t) {
  const Mat4& gi = m.inv();
  // Raise one index at a time.
  T3 u1, u2, u3;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        Jet acc = gi[a][0] * t[0][b][c];
        for (int i = 1; i < 4; ++i) acc += gi[a][i] * t[i][b][c];
        u1[a][b][c] = acc;
      }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        Jet acc = gi[b][0] * u1[a][0][c];
        for (int i = 1; i < 4; ++i) acc += gi[b][i] * u1[a][i][c];
        u2[a][b][c] = acc;
      }
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        Jet acc = gi[c][0] * u2[a][b][0];
        for (int i = 1; i < 4; ++i) acc += gi[c][i] * u2[a][b][i];
        u3[a][b][c] = acc;
      }
  Vec4 r = zero_vec(std::min(u3[0][0][0].order(), m.vol().order()));
  for (int d = 0; d < 4; ++d) {
    Jet acc(0.0, r[0].order());
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        for (int c = b + 1; c < 4; ++c) {
          const int s = perm_sign(a, b, c, d);
          if (s > 0)
            acc += u3[a][b][c];
          else if (s < 0)
            acc -= u3[a][b][c];
        }
    r[d] = acc * m.vol();
  }
  return r;
}

}  // namespace kl
