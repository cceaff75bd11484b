#include "kahlerlab/jet.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace kl {
namespace {

struct Tables {
  std::array<MultiIndex, kSlots> index{};
  std::array<int, kSlots> degree{};
  // Product triples (i, j, k) with index[i] + index[j] == index[k], sorted by
  // the degree of k so that a product truncated at order n uses a prefix.
  struct Triple {
    std::uint8_t i, j, k;
  };
  std::vector<Triple> mul;
  std::array<std::size_t, kMaxOrder + 1> mul_end{};
  // derivative[v][k] = slot of index[k] - e_v, or -1.
  std::array<std::array<int, kSlots>, kVars> lower{};

  Tables() {
    int s = 0;
    for (int d = 0; d <= kMaxOrder; ++d) {
      // Lexicographically descending within a degree: (d,0,0,0) first.
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b)
          for (int c = d - a - b; c >= 0; --c) {
            index[static_cast<std::size_t>(s)] = {a, b, c, d - a - b - c};
            degree[static_cast<std::size_t>(s)] = d;
            ++s;
          }
    }
    auto find = [this](const MultiIndex& mi) {
      for (int k = 0; k < kSlots; ++k)
        if (index[static_cast<std::size_t>(k)] == mi) return k;
      return -1;
    };
    for (int k = 0; k < kSlots; ++k) {
      for (int i = 0; i < kSlots; ++i) {
        const auto& a = index[static_cast<std::size_t>(i)];
        const auto& target = index[static_cast<std::size_t>(k)];
        MultiIndex rest{};
        bool ok = true;
        for (int v = 0; v < kVars; ++v) {
          rest[static_cast<std::size_t>(v)] =
              target[static_cast<std::size_t>(v)] - a[static_cast<std::size_t>(v)];
          if (rest[static_cast<std::size_t>(v)] < 0) ok = false;
        }
        if (!ok) continue;
        const int j = find(rest);
        mul.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j),
                       static_cast<std::uint8_t>(k)});
      }
    }
    std::stable_sort(mul.begin(), mul.end(), [this](const Triple& x, const Triple& y) {
      return degree[x.k] < degree[y.k];
    });
    for (int n = 0; n <= kMaxOrder; ++n) {
      mul_end[static_cast<std::size_t>(n)] = static_cast<std::size_t>(
          std::count_if(mul.begin(), mul.end(),
                        [this, n](const Triple& t) { return degree[t.k] <= n; }));
    }
    for (int v = 0; v < kVars; ++v) {
      for (int k = 0; k < kSlots; ++k) {
        MultiIndex mi = index[static_cast<std::size_t>(k)];
        if (mi[static_cast<std::size_t>(v)] == 0) {
          lower[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] = -1;
          continue;
        }
        --mi[static_cast<std::size_t>(v)];
        lower[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] = find(mi);
      }
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

void check_order(int order) {
  if (order < 0 || order > kMaxOrder)
    throw OrderError("jet order " + std::to_string(order) + " outside [0, 4]");
}

constexpr std::array<double, 5> kFactorial{1.0, 1.0, 2.0, 6.0, 24.0};

}  // namespace

int slot_of(const MultiIndex& mi) {
  int deg = 0;
  for (int v : mi) {
    if (v < 0) throw OrderError("negative multi-index entry");
    deg += v;
  }
  if (deg > kMaxOrder)
    throw OrderError("multi-index of total degree " + std::to_string(deg) +
                     " exceeds the jet order 4");
  const auto& t = tables();
  const int first = deg == 0 ? 0 : slots_for_order(deg - 1);
  for (int k = first; k < slots_for_order(deg); ++k)
    if (t.index[static_cast<std::size_t>(k)] == mi) return k;
  throw OrderError("multi-index not found");  // unreachable
}

const MultiIndex& multi_index_of(int slot) {
  return tables().index[static_cast<std::size_t>(slot)];
}

int degree_of_slot(int slot) { return tables().degree[static_cast<std::size_t>(slot)]; }

Jet::Jet(double value, int order) : order_(order) {
  check_order(order);
  c_[0] = value;
}

Jet Jet::seed(int var, double value, int order) {
  if (var < 0 || var >= kVars)
    throw ConfigError("seed variable index " + std::to_string(var) + " outside 0..3");
  Jet j(value, order);
  if (order >= 1) j.c_[static_cast<std::size_t>(1 + var)] = 1.0;
  return j;
}

double Jet::coeff(const MultiIndex& mi) const {
  const int k = slot_of(mi);
  if (degree_of_slot(k) > order_)
    throw OrderError("requested coefficient of degree " + std::to_string(degree_of_slot(k)) +
                     " from a jet of order " + std::to_string(order_));
  return c_[static_cast<std::size_t>(k)];
}

double Jet::partial(const MultiIndex& mi) const {
  double f = 1.0;
  for (int v : mi) f *= kFactorial[static_cast<std::size_t>(std::clamp(v, 0, 4))];
  return coeff(mi) * f;
}

Jet Jet::derivative(int var) const {
  if (var < 0 || var >= kVars)
    throw ConfigError("derivative variable index " + std::to_string(var) + " outside 0..3");
  if (order_ == 0) throw OrderError("cannot differentiate an order-0 jet");
  Jet r(0.0, order_ - 1);
  const auto& t = tables();
  const int n = slots_for_order(order_);
  const auto& low = t.lower[static_cast<std::size_t>(var)];
  for (int k = 1; k < n; ++k) {
    const int target = low[static_cast<std::size_t>(k)];
    if (target < 0) continue;
    const int power = t.index[static_cast<std::size_t>(k)][static_cast<std::size_t>(var)];
    r.c_[static_cast<std::size_t>(target)] += power * c_[static_cast<std::size_t>(k)];
  }
  return r;
}

Jet Jet::truncated(int order) const {
  check_order(order);
  if (order > order_)
    throw OrderError("cannot raise jet order from " + std::to_string(order_) + " to " +
                     std::to_string(order));
  Jet r = *this;
  for (int k = slots_for_order(order); k < kSlots; ++k) r.c_[static_cast<std::size_t>(k)] = 0.0;
  r.order_ = order;
  return r;
}

double Jet::max_abs() const {
  double m = 0.0;
  for (double v : coefficients()) m = std::max(m, std::abs(v));
  return m;
}

Jet& Jet::operator+=(const Jet& o) {
  order_ = std::min(order_, o.order_);
  const int n = slots_for_order(order_);
  for (int k = 0; k < n; ++k) c_[static_cast<std::size_t>(k)] += o.c_[static_cast<std::size_t>(k)];
  for (int k = n; k < kSlots; ++k) c_[static_cast<std::size_t>(k)] = 0.0;
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  order_ = std::min(order_, o.order_);
  const int n = slots_for_order(order_);
  for (int k = 0; k < n; ++k) c_[static_cast<std::size_t>(k)] -= o.c_[static_cast<std::size_t>(k)];
  for (int k = n; k < kSlots; ++k) c_[static_cast<std::size_t>(k)] = 0.0;
  return *this;
}

Jet& Jet::operator*=(const Jet& o) {
  *this = *this * o;
  return *this;
}

Jet& Jet::operator/=(const Jet& o) {
  *this = *this / o;
  return *this;
}

Jet& Jet::operator+=(double v) {
  c_[0] += v;
  return *this;
}

Jet& Jet::operator-=(double v) {
  c_[0] -= v;
  return *this;
}

Jet& Jet::operator*=(double v) {
  for (double& x : c_) x *= v;
  return *this;
}

Jet& Jet::operator/=(double v) {
  for (double& x : c_) x /= v;
  return *this;
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (double& x : r.c_) x = -x;
  return r;
}

Jet operator+(Jet a, const Jet& b) { return a += b; }
Jet operator-(Jet a, const Jet& b) { return a -= b; }

Jet operator*(const Jet& a, const Jet& b) {
  const int order = std::min(a.order(), b.order());
  Jet r(0.0, order);
  const auto& t = tables();
  const std::size_t end = t.mul_end[static_cast<std::size_t>(order)];
  for (std::size_t n = 0; n < end; ++n) {
    const auto& tr = t.mul[n];
    r.coeff(tr.k) += a.coeff(tr.i) * b.coeff(tr.j);
  }
  return r;
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
Jet operator+(Jet a, double b) { return a += b; }
Jet operator-(Jet a, double b) { return a -= b; }
Jet operator*(Jet a, double b) { return a *= b; }
Jet operator/(Jet a, double b) { return a /= b; }
Jet operator+(double a, Jet b) { return b += a; }
Jet operator-(double a, const Jet& b) { return -b + a; }
Jet operator*(double a, Jet b) { return b *= a; }
Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

Jet compose(const Jet& a, const std::array<double, kMaxOrder + 1>& derivs) {
  Jet d = a;
  d.coeff(0) = 0.0;
  Jet result(derivs[0], a.order());
  Jet power = d;
  for (int n = 1; n <= a.order(); ++n) {
    result += power * (derivs[static_cast<std::size_t>(n)] / kFactorial[static_cast<std::size_t>(n)]);
    if (n < a.order()) power = power * d;
  }
  return result;
}

Jet reciprocal(const Jet& a) {
  const double x = a.value();
  if (x == 0.0 || !std::isfinite(x))
    throw SingularPointError("division by a jet with zero constant term");
  const double r = 1.0 / x;
  return compose(a, {r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r, 24.0 * r * r * r * r * r});
}

Jet exp(const Jet& a) {
  const double e = std::exp(a.value());
  return compose(a, {e, e, e, e, e});
}

Jet log(const Jet& a) {
  const double x = a.value();
  if (!(x > 0.0)) throw DomainError("log of a jet with non-positive constant term");
  const double r = 1.0 / x;
  return compose(a, {std::log(x), r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r});
}

Jet pow(const Jet& a, double p) {
  const double x = a.value();
  if (!(x > 0.0)) throw DomainError("real power of a jet with non-positive constant term");
  std::array<double, kMaxOrder + 1> d{};
  double coef = 1.0;
  for (int n = 0; n <= kMaxOrder; ++n) {
    d[static_cast<std::size_t>(n)] = coef * std::pow(x, p - n);
    coef *= (p - n);
  }
  return compose(a, d);
}

Jet sqrt(const Jet& a) {
  if (!(a.value() > 0.0)) throw DomainError("sqrt of a jet with non-positive constant term");
  return pow(a, 0.5);
}

Jet pow(const Jet& a, int n) {
  if (n < 0) return reciprocal(pow(a, -n));
  Jet result(1.0, a.order());
  Jet base = a;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

Jet atan(const Jet& a) {
  const double x = a.value();
  const double q = 1.0 + x * x;
  return compose(a, {std::atan(x), 1.0 / q, -2.0 * x / (q * q), (6.0 * x * x - 2.0) / (q * q * q),
                     -24.0 * x * (x * x - 1.0) / (q * q * q * q)});
}

Jet sin(const Jet& a) {
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  return compose(a, {s, c, -s, -c, s});
}

Jet cos(const Jet& a) {
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  return compose(a, {c, -s, -c, s, c});
}

}  // namespace kl
