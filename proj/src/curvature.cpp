#include "kahlerlab/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kl {
namespace {

constexpr double kZeroThreshold = 1e-8;
// d pi = c *(J d sigma ^ phi~) with * on 3-forms fixed by a ^ *b = <a,b> vol.
constexpr double kDpiConstant = -2.0;

std::vector<double> flat(const Vec4& v) {
  std::vector<double> r(4);
  for (int i = 0; i < 4; ++i) r[i] = v[i].value();
  return r;
}

std::vector<double> flat(const Mat4& m) {
  std::vector<double> r(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[4 * i + j] = m[i][j].value();
  return r;
}

std::vector<double> flat(const T3& t) {
  std::vector<double> r(64);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[16 * i + 4 * j + k] = t[i][j][k].value();
  return r;
}

std::vector<double> flat(const T4& t) {
  std::vector<double> r(256);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) r[64 * i + 16 * j + 4 * k + l] = t[i][j][k][l].value();
  return r;
}

using Mat6 = std::array<std::array<Jet, 6>, 6>;

Mat6 to_pairs(const T4& w) {
  Mat6 r;
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) r[p][q] = w[kPairs[p][0]][kPairs[p][1]][kPairs[q][0]][kPairs[q][1]];
  return r;
}

T4 from_pairs(const Mat6& r) {
  T4 w = zero_t4(r[0][0].order());
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) {
      const int a = kPairs[p][0], b = kPairs[p][1], c = kPairs[q][0], d = kPairs[q][1];
      const Jet& v = r[p][q];
      w[a][b][c][d] = v;
      w[b][a][c][d] = -v;
      w[a][b][d][c] = -v;
      w[b][a][d][c] = v;
    }
  return w;
}

Mat6 mul6(const Mat6& a, const Mat6& b, bool transpose_b) {
  Mat6 r;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      Jet acc = a[i][0] * (transpose_b ? b[j][0] : b[0][j]);
      for (int k = 1; k < 6; ++k) acc += a[i][k] * (transpose_b ? b[j][k] : b[k][j]);
      r[i][j] = acc;
    }
  return r;
}

Mat6 projector(const Star6& s, int sign) {
  Mat6 p;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      p[i][j] = 0.5 * sign * s[i][j];
      if (i == j) p[i][j] += 0.5;
    }
  return p;
}

T4 project_weyl(const Star6& s, const T4& w, int sign) {
  const Mat6 p = projector(s, sign);
  return from_pairs(mul6(mul6(p, to_pairs(w), false), p, true));
}

// Orthonormal, oriented frame at the base point: columns of E are frame
// vectors, so covariant components transform by E.
Eigen::Matrix4d frame(const CurvatureBundle& b) {
  const Eigen::Matrix4d g0 = values(b.m().g());
  Eigen::LLT<Eigen::Matrix4d> llt(g0);
  Eigen::Matrix4d L = llt.matrixL();
  Eigen::Matrix4d E = L.transpose().inverse();
  if (E.determinant() * b.m().vol().value() < 0.0) E.col(3) *= -1.0;
  return E;
}

Eigen::Matrix4d frame_2(const Eigen::Matrix4d& E, const Mat4& t) {
  return E.transpose() * values(t) * E;
}

using Frame4 = std::array<std::array<std::array<std::array<double, 4>, 4>, 4>, 4>;

Frame4 frame_4(const Eigen::Matrix4d& E, const T4& t) {
  std::vector<double> cur = flat(t);
  for (int slot = 0; slot < 4; ++slot) {
    std::vector<double> next(256, 0.0);
    const int stride = 1 << (2 * (3 - slot));
    for (int idx = 0; idx < 256; ++idx) {
      const int a = (idx / stride) % 4;
      const int base = idx - a * stride;
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) acc += cur[base + i * stride] * E(i, a);
      next[idx] = acc;
    }
    cur.swap(next);
  }
  Frame4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) r[i][j][k][l] = cur[64 * i + 16 * j + 4 * k + l];
  return r;
}

// Unit basis of Lambda^+ (sign=+1) or Lambda^- in an oriented orthonormal frame.
std::array<Eigen::Matrix4d, 3> lambda_basis(int sign) {
  std::array<Eigen::Matrix4d, 3> out;
  auto e = [](int a, int b) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    m(a, b) = 1.0;
    m(b, a) = -1.0;
    return m;
  };
  const double r = 1.0 / std::sqrt(2.0);
  out[0] = r * (e(0, 1) + sign * e(2, 3));
  out[1] = r * (e(0, 2) - sign * e(1, 3));
  out[2] = r * (e(0, 3) + sign * e(1, 2));
  return out;
}

double frame_inner(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b) {
  return 0.5 * (a.array() * b.array()).sum();
}

Eigen::Matrix4d apply_weyl(const Frame4& w, const Eigen::Matrix4d& alpha) {
  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double acc = 0.0;
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) acc += w[a][b][c][d] * alpha(c, d);
      r(a, b) = -0.5 * acc;
    }
  return r;
}

// Bach tensor from a Weyl-type tensor and a Cotton-type tensor:
// B_ab = -g^ij (nabla_i C)_jab - g^ij g^cd W_iacb h_jd.  The minus sign on the
// second term is the curvature operator taken positive on round spheres.
Mat4 bach_from(const CurvatureBundle& b, const T4& w, const T3& c) {
  const Mat4& gi = b.m().inv();
  const T3& G = b.gamma;
  const Mat4 hup = b.m().raise_both(b.h);
  Vec4 trace_gamma;
  for (int k = 0; k < 4; ++k) {
    Jet acc(0.0, G[0][0][0].order());
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) acc += gi[i][j] * G[k][i][j];
    trace_gamma[k] = acc;
  }
  Mat4 out = zero_mat(0);
  for (int a = 0; a < 4; ++a)
    for (int bb = 0; bb < 4; ++bb) {
      Jet div(0.0, 0);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          Jet term = c[j][a][bb].derivative(i);
          for (int k = 0; k < 4; ++k) {
            term -= G[k][i][a] * c[j][k][bb];
            term -= G[k][i][bb] * c[j][a][k];
          }
          div += gi[i][j] * term;
        }
      for (int k = 0; k < 4; ++k) div -= trace_gamma[k] * c[k][a][bb];
      Jet wh(0.0, 0);
      for (int i = 0; i < 4; ++i)
        for (int cc = 0; cc < 4; ++cc) wh += w[i][a][cc][bb] * hup[i][cc];
      out[a][bb] = -div - wh;
    }
  return out;
}

// Constant-term 2-forms T_beta(d_i) of the twistor equation for beta = e_k.
Eigen::Matrix<double, 64, 4> twistor_map(const Eigen::Matrix4d& g0, const Eigen::Matrix4d& w0,
                                         const Eigen::Matrix4d& J0) {
  Eigen::Matrix<double, 64, 4> A = Eigen::Matrix<double, 64, 4>::Zero();
  for (int k = 0; k < 4; ++k) {
    Eigen::Vector4d beta = Eigen::Vector4d::Zero();
    beta(k) = 1.0;
    Eigen::Vector4d jbeta;
    for (int a = 0; a < 4; ++a) {
      double acc = 0.0;
      for (int c = 0; c < 4; ++c) acc += beta(c) * J0(c, a);
      jbeta(a) = -acc;
    }
    for (int i = 0; i < 4; ++i)
      for (int a = 0; a < 4; ++a)
        for (int bb = 0; bb < 4; ++bb) {
          const double v = -beta(i) * w0(a, bb) + beta(a) * w0(i, bb) - beta(bb) * w0(i, a) -
                           (jbeta(a) * g0(i, bb) - jbeta(bb) * g0(i, a));
          A(16 * i + 4 * a + bb, k) = v;
        }
  }
  return A;
}

}  // namespace

Star6 star_matrix(const Metric4& m) {
  const Mat4& gi = m.inv();
  Star6 s;
  for (int p = 0; p < 6; ++p) {
    const int c = kPairs[p][0], d = kPairs[p][1];
    int a = -1, bb = -1;
    for (int x = 0; x < 4; ++x)
      if (x != c && x != d) (a < 0 ? a : bb) = x;
    const Jet e = m.eps(a, bb, c, d);
    for (int q = 0; q < 6; ++q) {
      const int i = kPairs[q][0], j = kPairs[q][1];
      s[p][q] = e * (gi[a][i] * gi[bb][j] - gi[a][j] * gi[bb][i]);
    }
  }
  return s;
}

T3 star_first_slot(const Star6& s, const T3& c) {
  T3 r = zero_t3(c[0][0][0].order());
  for (int p = 0; p < 6; ++p) {
    const int a = kPairs[p][0], b = kPairs[p][1];
    for (int k = 0; k < 4; ++k) {
      Jet acc(0.0, std::min(c[0][0][0].order(), s[0][0].order()));
      for (int q = 0; q < 6; ++q) acc += s[p][q] * c[kPairs[q][0]][kPairs[q][1]][k];
      r[a][b][k] = acc;
      r[b][a][k] = -acc;
    }
  }
  return r;
}

std::unique_ptr<CurvatureBundle> compute_curvature(const Mat4& g, const Mat4& omega) {
  auto b = std::make_unique<CurvatureBundle>();
  const int N = g[0][0].order();
  if (N < 2) throw OrderError("curvature needs a metric of jet order >= 2");
  b->order = N;
  b->fields.g = g;
  b->fields.omega = omega;
  b->metric.emplace(g, omega);
  const Metric4& m = *b->metric;
  const Mat4& gi = m.inv();
  b->star = star_matrix(m);
  b->J = endomorphism(m, omega);

  T3 dg;  // dg[i][j][l] = d_i g_jl
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int l = j; l < 4; ++l) {
        dg[i][j][l] = g[j][l].derivative(i);
        dg[i][l][j] = dg[i][j][l];
      }
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        Jet acc(0.0, N - 1);
        for (int l = 0; l < 4; ++l) acc += gi[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
        acc *= 0.5;
        b->gamma[k][i][j] = acc;
        b->gamma[k][j][i] = acc;
      }
  const T3& G = b->gamma;

  // Rup[l][k][p] = component along d_l of R(d_i, d_j) d_k with p = (i, j), i < j.
  std::array<std::array<std::array<Jet, 6>, 4>, 4> rup;
  for (int p = 0; p < 6; ++p) {
    const int i = kPairs[p][0], j = kPairs[p][1];
    for (int l = 0; l < 4; ++l)
      for (int k = 0; k < 4; ++k) {
        Jet acc = G[l][j][k].derivative(i) - G[l][i][k].derivative(j);
        for (int mm = 0; mm < 4; ++mm) acc += G[l][i][mm] * G[mm][j][k] - G[l][j][mm] * G[mm][i][k];
        rup[l][k][p] = acc;
      }
  }
  b->riem = zero_t4(N - 2);
  for (int p = 0; p < 6; ++p) {
    const int a = kPairs[p][0], bb = kPairs[p][1];
    for (int c = 0; c < 4; ++c)
      for (int d = 0; d < 4; ++d) {
        Jet acc(0.0, N - 2);
        for (int l = 0; l < 4; ++l) acc += g[d][l] * rup[l][c][p];
        b->riem[a][bb][c][d] = acc;
        b->riem[bb][a][c][d] = -acc;
      }
  }
  const T4& R = b->riem;

  b->ric = zero_mat(N - 2);
  for (int bb = 0; bb < 4; ++bb)
    for (int c = bb; c < 4; ++c) {
      Jet acc(0.0, N - 2);
      for (int a = 0; a < 4; ++a)
        for (int d = 0; d < 4; ++d) acc += gi[a][d] * R[a][bb][c][d];
      b->ric[bb][c] = acc;
      b->ric[c][bb] = acc;
    }
  b->scal = Jet(0.0, N - 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) b->scal += gi[i][j] * b->ric[i][j];
  b->s = b->scal / 6.0;
  b->ric0 = b->ric - (b->scal / 4.0) * g;
  b->h = 0.5 * b->ric0 + (b->scal / 24.0) * g;

  const Mat4& h = b->h;
  b->weyl = zero_t4(N - 2);
  for (int a = 0; a < 4; ++a)
    for (int bb = 0; bb < 4; ++bb)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          b->weyl[a][bb][c][d] = R[a][bb][c][d] - (h[bb][c] * g[a][d] + h[a][d] * g[bb][c] -
                                                   h[a][c] * g[bb][d] - h[bb][d] * g[a][c]);
  b->weyl_plus = project_weyl(b->star, b->weyl, +1);
  b->weyl_minus = project_weyl(b->star, b->weyl, -1);
  b->curvature_scale = std::max(1.0, norm(*b, b->riem));

  if (N >= 3) {
    b->nabla_h = covd(*b, h);
    const T3& dh = *b->nabla_h;
    T3 c;
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb)
        for (int k = 0; k < 4; ++k) c[a][bb][k] = -dh[a][bb][k] + dh[bb][a][k];
    const T3 sc = star_first_slot(b->star, c);
    b->cotton = c;
    b->cotton_plus = 0.5 * (c + sc);
    b->cotton_minus = 0.5 * (c - sc);

    // -(delta W-)_{ab c} = g^ij (nabla_i W-)_{ab j c}
    const T4& wm = b->weyl_minus;
    T3 dw = zero_t3(N - 3);
    for (int p = 0; p < 6; ++p) {
      const int a = kPairs[p][0], bb = kPairs[p][1];
      for (int cc = 0; cc < 4; ++cc) {
        Jet acc(0.0, N - 3);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            Jet t = wm[a][bb][j][cc].derivative(i);
            for (int k = 0; k < 4; ++k) {
              t -= G[k][i][a] * wm[k][bb][j][cc];
              t -= G[k][i][bb] * wm[a][k][j][cc];
              t -= G[k][i][j] * wm[a][bb][k][cc];
              t -= G[k][i][cc] * wm[a][bb][j][k];
            }
            acc += gi[i][j] * t;
          }
        dw[a][bb][cc] = -acc;
        dw[bb][a][cc] = acc;
      }
    }
    b->codiff_wminus = dw;
  }

  if (N >= 4) {
    b->bach = bach_from(*b, b->weyl, *b->cotton);
    b->bach_plus_route = 2.0 * bach_from(*b, b->weyl_plus, *b->cotton_plus);
    b->bach_minus_route = 2.0 * bach_from(*b, b->weyl_minus, *b->cotton_minus);
  }
  return b;
}

std::unique_ptr<CurvatureBundle> curvature_bundle(const FamilyInstance& inst, const Point& pt,
                                                  int order) {
  if (order < 2 || order > kMaxOrder)
    throw OrderError("curvature bundle order must be 2, 3 or 4");
  Fields f = evaluate(inst, pt, order);
  auto b = compute_curvature(f.g, f.omega);
  b->point = pt;
  b->fields = std::move(f);
  return b;
}

Mat4 covd(const CurvatureBundle& b, const Vec4& alpha) {
  const T3& G = b.gamma;
  const int order = std::min(alpha[0].order() - 1, G[0][0][0].order());
  Mat4 r = zero_mat(order);
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 4; ++c) {
      Jet acc = alpha[c].derivative(a);
      for (int k = 0; k < 4; ++k) acc -= G[k][a][c] * alpha[k];
      r[a][c] = acc;
    }
  return r;
}

T3 covd(const CurvatureBundle& b, const Mat4& t) {
  const T3& G = b.gamma;
  T3 r;
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        Jet acc = t[i][j].derivative(a);
        for (int k = 0; k < 4; ++k) acc -= G[k][a][i] * t[k][j] + G[k][a][j] * t[i][k];
        r[a][i][j] = acc;
      }
  return r;
}

Mat4 hessian(const CurvatureBundle& b, const Jet& f) { return covd(b, grad_form(f)); }

double tensor_norm(const Eigen::Matrix4d& ginv, const std::vector<double>& t, int rank) {
  std::vector<double> up = t;
  const int n = static_cast<int>(t.size());
  for (int slot = 0; slot < rank; ++slot) {
    std::vector<double> next(static_cast<std::size_t>(n), 0.0);
    int stride = 1;
    for (int s = slot + 1; s < rank; ++s) stride *= 4;
    for (int idx = 0; idx < n; ++idx) {
      const int a = (idx / stride) % 4;
      const int base = idx - a * stride;
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) acc += ginv(a, i) * up[static_cast<std::size_t>(base + i * stride)];
      next[static_cast<std::size_t>(idx)] = acc;
    }
    up.swap(next);
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += t[static_cast<std::size_t>(i)] * up[static_cast<std::size_t>(i)];
  return std::sqrt(std::max(0.0, s));
}

double norm(const CurvatureBundle& b, const Vec4& t) { return tensor_norm(values(b.m().inv()), flat(t), 1); }
double norm(const CurvatureBundle& b, const Mat4& t) { return tensor_norm(values(b.m().inv()), flat(t), 2); }
double norm(const CurvatureBundle& b, const T3& t) { return tensor_norm(values(b.m().inv()), flat(t), 3); }
double norm(const CurvatureBundle& b, const T4& t) { return tensor_norm(values(b.m().inv()), flat(t), 4); }

double closedness_residual(const CurvatureBundle& b) {
  return norm(b, exterior_d(b.fields.omega)) / std::max(1.0, norm(b, b.fields.omega));
}

double parallel_J_residual(const CurvatureBundle& b) { return norm(b, covd(b, b.fields.omega)); }

double nijenhuis_norm(const CurvatureBundle& b) {
  const Mat4& J = b.J;
  const Mat4& g = b.m().g();
  std::array<Mat4, 4> dJ;  // dJ[l][k][j] = d_l J^k_j
  for (int l = 0; l < 4; ++l)
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j) dJ[l][k][j] = J[k][j].derivative(l);
  T3 n;  // n[i][j][k] = N^k_ij
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        Jet acc(0.0, dJ[0][0][0].order());
        for (int l = 0; l < 4; ++l) {
          acc += J[l][i] * dJ[l][k][j] - J[l][j] * dJ[l][k][i];
          acc -= J[k][l] * (dJ[i][l][j] - dJ[j][l][i]);
        }
        n[i][j][k] = acc;
      }
  T3 low;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int mm = 0; mm < 4; ++mm) {
        Jet acc(0.0, 0);
        for (int k = 0; k < 4; ++k) acc += g[mm][k] * n[i][j][k];
        low[i][j][mm] = acc;
      }
  return norm(b, low);
}

double complex_structure_residual(const CurvatureBundle& b) {
  const Eigen::Matrix4d J = values(b.J);
  return (J * J + Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff();
}

double first_bianchi_residual(const CurvatureBundle& b) {
  const T4& R = b.riem;
  T4 s = zero_t4(0);
  for (int a = 0; a < 4; ++a)
    for (int bb = 0; bb < 4; ++bb)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
          s[a][bb][c][d] = R[a][bb][c][d] + R[bb][c][a][d] + R[c][a][bb][d];
  return norm(b, s) / b.curvature_scale;
}

double weyl_trace_residual(const CurvatureBundle& b) {
  const Mat4& gi = b.m().inv();
  Mat4 t = zero_mat(0);
  for (int bb = 0; bb < 4; ++bb)
    for (int c = 0; c < 4; ++c) {
      Jet acc(0.0, 0);
      for (int a = 0; a < 4; ++a)
        for (int d = 0; d < 4; ++d) acc += gi[a][d] * b.weyl[a][bb][c][d];
      t[bb][c] = acc;
    }
  return norm(b, t) / b.curvature_scale;
}

double ricci_J_anti_invariant(const CurvatureBundle& b) {
  const Mat4 jt = transpose(b.J);
  const Mat4 rj = matmul(matmul(jt, b.ric), b.J);
  return norm(b, rj - b.ric) / b.curvature_scale;
}

RicciFormData ricci_form_data(const CurvatureBundle& b, double tol) {
  RicciFormData d;
  d.anti_invariant_residual = ricci_J_anti_invariant(b);
  if (d.anti_invariant_residual > tol)
    throw PreconditionError("Ricci tensor is not J-invariant (residual " +
                            std::to_string(d.anti_invariant_residual) + ")");
  const Metric4& m = b.m();
  const Mat4 jt = transpose(b.J);
  d.rho = matmul(jt, b.ric);
  d.rho0 = matmul(jt, b.ric0);
  d.rho_tilde = 0.5 * d.rho0 + (b.s / 4.0) * b.fields.omega;
  d.p = pfaffian(m, d.rho_tilde);
  const AsdEigen eig = asd_eigendata(m, d.rho0, 1e-6);
  d.lambda = eig.lambda;
  d.xi = b.s / 2.0 + d.lambda;
  d.eta = b.s / 2.0 - d.lambda;
  if (b.fields.omega_I) {
    const Mat4& wi = *b.fields.omega_I;
    const Jet n = sqrt(norm2(m, wi) / 2.0);
    d.omega_I = reciprocal(n) * wi;
    d.mu = inner(m, d.rho0, *d.omega_I) / 2.0;
  } else if (eig.omega_I) {
    d.omega_I = eig.omega_I;
    d.mu = d.lambda;
  }
  return d;
}

CottonCodiff cotton_asd_and_codiff(const CurvatureBundle& b) {
  if (!b.cotton_minus) throw OrderError("Cotton-York tensor needs bundle order >= 3");
  CottonCodiff r;
  r.cminus_norm = norm(b, *b.cotton_minus);
  r.codiff_norm = norm(b, *b.codiff_wminus);
  r.difference = norm(b, *b.cotton_minus - *b.codiff_wminus) /
                 std::max({1.0, b.curvature_scale, norm(b, *b.cotton)});
  return r;
}

BachForms bach_forms(const CurvatureBundle& b, double tol) {
  if (!b.bach) throw OrderError("Bach tensor needs bundle order 4");
  BachForms r;
  const double scale = b.curvature_scale * b.curvature_scale;
  r.bach_norm = norm(b, *b.bach);
  r.route_plus_residual = norm(b, *b.bach - *b.bach_plus_route) / std::max(scale, r.bach_norm);
  r.route_minus_residual = norm(b, *b.bach - *b.bach_minus_route) / std::max(scale, r.bach_norm);
  const Metric4& m = b.m();
  const Mat4 jt = transpose(b.J);
  const Mat4 bj = matmul(matmul(jt, *b.bach), b.J);
  r.anti_invariant_norm = norm(b, bj - *b.bach);
  if (r.anti_invariant_norm > tol * std::max(scale, r.bach_norm)) return r;
  const Mat4 bt = asd_part(m, matmul(jt, *b.bach));
  const Vec4 jds = act_on_1form(b.J, grad_form(b.s));
  const Mat4 rho0 = matmul(jt, b.ric0);
  const Mat4 ref = asd_part(m, exterior_d(jds)) + b.s * rho0;
  r.btilde = bt;
  r.btilde_reference = ref;
  const double rr = inner(m, ref, ref).value();
  if (rr > 1e-20 * scale * scale) {
    r.ratio = inner(m, bt, ref).value() / rr;
    r.fit_residual = norm(b, bt - *r.ratio * ref) / std::max({1.0, norm(b, bt), norm(b, ref)});
  }
  return r;
}

double killing_residual(const CurvatureBundle& b, const Vec4& K) {
  const Mat4 dk = covd(b, b.m().lower(K));
  return norm(b, dk + transpose(dk)) / std::max(1.0, norm(b, dk));
}

double holomorphic_potential_residual(const CurvatureBundle& b, const Jet& f) {
  const Mat4 H = hessian(b, f);
  const Mat4 s = H - matmul(matmul(transpose(b.J), H), b.J);
  return norm(b, s) / std::max(1.0, norm(b, H));
}

Vec4 hamiltonian_vector(const CurvatureBundle& b, const Jet& f) {
  return act_on_vector(b.J, b.m().raise(grad_form(f)));
}

HamiltonianFormData hamiltonian_analysis(const CurvatureBundle& b, const Mat4& phi, double tol) {
  const Metric4& m = b.m();
  const Mat4& w = b.fields.omega;
  const Mat4 jt = transpose(b.J);
  const double phi_scale = std::max(1.0, norm(b, phi));
  const double jinv = norm(b, matmul(matmul(jt, phi), b.J) - phi) / phi_scale;
  if (jinv > tol) throw PreconditionError("2-form is not J-invariant (residual " + std::to_string(jinv) + ")");

  HamiltonianFormData d;
  d.residual_closed = norm(b, exterior_d(phi)) / phi_scale;
  d.sigma = inner(m, phi, w) / 3.0;
  d.phi0 = phi - (1.5 * d.sigma) * w;
  const Mat4 phit = 0.5 * d.phi0 + (d.sigma / 4.0) * w;
  d.pi = pfaffian(m, phit);
  const AsdEigen eig = asd_eigendata(m, d.phi0, 1e-6);
  d.lambda = eig.lambda;
  d.xi = d.sigma / 2.0 + d.lambda;
  d.eta = d.sigma / 2.0 - d.lambda;

  const T3 nphi = covd(b, d.phi0);
  const Eigen::Matrix<double, 64, 4> A = twistor_map(values(m.g()), values(w), values(b.J));
  Eigen::Matrix<double, 64, 1> y;
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb) y(16 * i + 4 * a + bb) = nphi[i][a][bb].value();
  d.beta = A.colPivHouseholderQr().solve(y);
  const Eigen::Matrix<double, 64, 1> res = y - A * d.beta;
  d.lsq_orthogonality = (A.transpose() * res).norm() / std::max(1.0, y.norm());
  T3 rt = zero_t3(0);
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb) rt[i][a][bb] = Jet(res(16 * i + 4 * a + bb), 0);
  d.residual_twistor = norm(b, rt) / std::max(1.0, norm(b, nphi));

  const Vec4 dsig = grad_form(d.sigma);
  Vec4 diff = zero_vec(0);
  for (int i = 0; i < 4; ++i) diff[i] = Jet(d.beta(i) - 0.5 * dsig[i].value(), 0);
  d.residual_hamiltonian = norm(b, diff) / std::max(1.0, norm(b, dsig));

  d.K1 = hamiltonian_vector(b, d.sigma);
  d.K2 = hamiltonian_vector(b, d.pi);
  d.killing_K1 = killing_residual(b, d.K1);
  d.killing_K2 = killing_residual(b, d.K2);
  d.potential_sigma = holomorphic_potential_residual(b, d.sigma);
  d.potential_pi = holomorphic_potential_residual(b, d.pi);
  double wk = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int bb = 0; bb < 4; ++bb) wk += w[a][bb].value() * d.K1[a].value() * d.K2[bb].value();
  d.omega_K1_K2 = std::abs(wk);

  const Vec4 jdsig = act_on_1form(b.J, dsig);
  const Vec4 dpi = grad_form(d.pi);
  const Vec4 star = hodge3(m, wedge(jdsig, phit));
  d.dpi_residual = norm(b, dpi - kDpiConstant * star) / std::max(1.0, norm(b, dpi));

  const Jet lam2 = norm2(m, d.phi0) / 2.0;
  const Vec4 dlam2 = grad_form(lam2);
  const Vec4 swap = dlam2 + contract(m.raise(jdsig), d.phi0);
  d.swap_residual = norm(b, swap) / std::max(1.0, norm(b, dlam2));

  if (eig.omega_I) {
    const Mat4 I = endomorphism(m, *eig.omega_I);
    const Vec4 idsig = act_on_1form(I, dsig);
    const Vec4 jdl = act_on_1form(b.J, grad_form(d.lambda));
    d.idsig_residual = norm(b, idsig - 2.0 * jdl) / std::max(1.0, norm(b, idsig));
    const Vec4 dxi = grad_form(d.xi);
    const Vec4 deta = grad_form(d.eta);
    d.dxi_deta = std::abs(inner(m, dxi, deta).value()) /
                 std::max(1.0, norm(b, dxi) * norm(b, deta));
  }
  return d;
}

ConformalScalar conformal_scalar(const CurvatureBundle& b) {
  const Metric4& m = b.m();
  const double threshold = kZeroThreshold * m.scale();
  Jet lambda;
  Mat4 wi;
  if (b.fields.conformal_factor && b.fields.omega_I) {
    lambda = *b.fields.conformal_factor;
    const Mat4& raw = *b.fields.omega_I;
    wi = reciprocal(sqrt(norm2(m, raw) / 2.0)) * raw;
  } else {
    const AsdEigen eig = asd_eigendata(m, matmul(transpose(b.J), b.ric0), 1e-6);
    if (!eig.omega_I) throw PreconditionError("lambda below the zero threshold: I is undefined");
    lambda = eig.lambda;
    wi = *eig.omega_I;
  }
  if (std::abs(lambda.value()) <= threshold)
    throw PreconditionError("lambda below the zero threshold: I is undefined");
  ConformalScalar out;
  out.lambda = std::abs(lambda.value());

  const int order = std::min(b.order, lambda.order());
  if (order < 2) throw OrderError("conformal scalar curvature needs jet order >= 4");
  const Jet inv2 = reciprocal(lambda * lambda).truncated(order);
  Mat4 gbar, wbar;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      gbar[i][j] = inv2 * b.fields.g[i][j].truncated(order);
      wbar[i][j] = inv2 * wi[i][j].truncated(std::min(order, wi[i][j].order()));
    }
  const auto bar = compute_curvature(gbar, wbar);
  out.route_rescale = bar->s.value() * inv2.value();

  // Lee form from d omega_I = -2 theta ^ omega_I, solved component-wise.
  const T3 dwi = exterior_d(wi);
  static constexpr std::array<std::array<int, 3>, 4> kTriples{{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
  Mat4 A = zero_mat(wi[0][1].order());
  Vec4 rhs = zero_vec(dwi[0][1][2].order());
  for (int r = 0; r < 4; ++r) {
    const auto [a, bb, c] = kTriples[r];
    for (int k = 0; k < 4; ++k) {
      Vec4 e = zero_vec(wi[0][1].order());
      e[k] = Jet(1.0, wi[0][1].order());
      const T3 t = wedge(e, wi);
      A[r][k] = t[a][bb][c];
    }
    rhs[r] = -0.5 * dwi[a][bb][c];
  }
  out.theta = solve(A, rhs);
  if (out.theta[0].order() < 1) throw OrderError("Lee form needs one more derivative");
  const Mat4 nt = covd(b, out.theta);
  const Mat4& gi = m.inv();
  double div = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) div += gi[i][j].value() * nt[i][j].value();
  const double th2 = inner(m, out.theta, out.theta).value();
  out.route_lee = b.s.value() - div - th2;
  out.difference = std::abs(out.route_rescale - out.route_lee) /
                   std::max(1.0, std::abs(out.route_rescale));
  return out;
}

namespace {

T3 bianchirho_lhs_minus_rhs(const CurvatureBundle& b, bool with_cotton) {
  const Metric4& m = b.m();
  const Mat4& w = b.fields.omega;
  const Mat4& g = m.g();
  const Mat4 rho0 = matmul(transpose(b.J), b.ric0);
  const T3 lhs = covd(b, rho0);
  const Vec4 ds = grad_form(b.s);
  const Vec4 jds = act_on_1form(b.J, ds);
  T3 out;
  for (int i = 0; i < 4; ++i) {
    Vec4 jx, x;
    for (int k = 0; k < 4; ++k) {
      jx[k] = w[i][k];
      x[k] = g[i][k];
    }
    Mat4 rhs = (-0.5 * ds[i]) * w + 0.5 * (wedge(ds, jx) - wedge(jds, x));
    if (with_cotton) {
      const T3& cm = *b.cotton_minus;
      for (int a = 0; a < 4; ++a)
        for (int bb = 0; bb < 4; ++bb) {
          Jet acc(0.0, 0);
          for (int c = 0; c < 4; ++c) acc += cm[a][bb][c] * b.J[c][i];
          rhs[a][bb] -= 2.0 * acc;
        }
    }
    out[i] = lhs[i] - rhs;
  }
  return out;
}

}  // namespace

double bianchirho_residual(const CurvatureBundle& b) {
  if (!b.cotton_minus) throw OrderError("identity needs bundle order >= 3");
  return norm(b, bianchirho_lhs_minus_rhs(b, true)) / b.curvature_scale;
}

double matsumoto_tanno_residual(const CurvatureBundle& b) {
  if (!b.cotton_minus) throw OrderError("identity needs bundle order >= 3");
  return norm(b, bianchirho_lhs_minus_rhs(b, false)) / b.curvature_scale;
}

double cplus_s_residual(const CurvatureBundle& b) {
  if (!b.cotton_plus) throw OrderError("identity needs bundle order >= 3");
  const Metric4& m = b.m();
  const Mat4& g = m.g();
  const Vec4 ds = grad_form(b.s);
  const Jet inv_s = reciprocal(b.s).truncated(ds[0].order());
  T3 diff;
  for (int i = 0; i < 4; ++i) {
    Vec4 x;
    for (int k = 0; k < 4; ++k) x[k] = g[i][k];
    const Mat4 alpha = m.raise_both(wedge(inv_s * ds, x));
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb) {
        Jet acc(0.0, 0);
        for (int p = 0; p < 6; ++p)
          acc += b.weyl_plus[a][bb][kPairs[p][0]][kPairs[p][1]] * alpha[kPairs[p][0]][kPairs[p][1]];
        diff[a][bb][i] = (*b.cotton_plus)[a][bb][i] - acc;
      }
  }
  return norm(b, diff) / b.curvature_scale;
}

WeylSpectrum weyl_spectrum(const CurvatureBundle& b, int sign, const std::optional<Mat4>& eta) {
  const Eigen::Matrix4d E = frame(b);
  const Frame4 w = frame_4(E, sign > 0 ? b.weyl_plus : b.weyl_minus);
  const auto basis = lambda_basis(sign > 0 ? 1 : -1);
  Eigen::Matrix3d M;
  std::array<Eigen::Matrix4d, 3> images;
  for (int B = 0; B < 3; ++B) images[B] = apply_weyl(w, basis[B]);
  for (int A = 0; A < 3; ++A)
    for (int B = 0; B < 3; ++B) M(A, B) = frame_inner(basis[A], images[B]);
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
  WeylSpectrum out;
  for (int i = 0; i < 3; ++i) out.eigenvalues[i] = es.eigenvalues()(i);
  const auto& ev = out.eigenvalues;
  const double g01 = ev[1] - ev[0], g12 = ev[2] - ev[1];
  out.gap = std::min(g01, g12);
  out.simple = g01 < g12 ? ev[2] : ev[0];
  out.norm = M.norm();

  std::optional<Mat4> form = eta;
  if (sign > 0 && !form) form = b.fields.omega;
  if (form) {
    const Eigen::Matrix4d f = frame_2(E, *form);
    Eigen::Vector3d v;
    for (int A = 0; A < 3; ++A) v(A) = frame_inner(basis[A], f);
    if (v.norm() > 0.0) {
      v.normalize();
      out.eigenform_value = v.dot(M * v);
      out.eigenform_residual = (M * v - out.eigenform_value * v).norm();
    }
  }
  return out;
}

LagrangianSpread lagrangian_spread(const CurvatureBundle& b, int n_samples, std::uint64_t seed) {
  if (n_samples < 8) throw ConfigError("lagrangian_spread needs at least 8 samples");
  const Eigen::Matrix4d E = frame(b);
  const Frame4 R = frame_4(E, b.riem);
  const Eigen::Matrix4d W = frame_2(E, b.fields.omega);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  LagrangianSpread out;
  out.min = std::numeric_limits<double>::infinity();
  out.max = -std::numeric_limits<double>::infinity();
  int got = 0;
  while (got < n_samples) {
    Eigen::Vector4d x, y;
    for (int i = 0; i < 4; ++i) x(i) = nd(rng);
    for (int i = 0; i < 4; ++i) y(i) = nd(rng);
    x.normalize();
    Eigen::Vector4d jx = W.transpose() * x;
    jx.normalize();
    y -= y.dot(x) * x;
    y -= y.dot(jx) * jx;
    if (y.norm() < 1e-3) continue;
    y.normalize();
    double k = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb)
        for (int c = 0; c < 4; ++c)
          for (int d = 0; d < 4; ++d) k += R[a][bb][c][d] * x(a) * y(bb) * y(c) * x(d);
    out.min = std::min(out.min, k);
    out.max = std::max(out.max, k);
    ++got;
  }
  out.spread = out.max - out.min;
  return out;
}

}  // namespace kl
