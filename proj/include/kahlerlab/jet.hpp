#pragma once

// Truncated multivariate Taylor arithmetic in four variables.
//
// A Jet stores the Taylor coefficients (partial derivative divided by the
// product of factorials of the multi-index) of a function at a base point, for
// every multi-index of total degree <= order().  Coefficients live in a dense
// array of 70 slots in graded-lexicographic order.  Arithmetic is exact to the
// carried order; differentiating lowers the order by one, so every quantity
// built from derivatives of the metric knows how many further derivatives it
// can still support.

#include <array>
#include <cstdint>
#include <span>

#include "kahlerlab/errors.hpp"

namespace kl {

inline constexpr int kVars = 4;
inline constexpr int kMaxOrder = 4;
inline constexpr int kSlots = 70;

using MultiIndex = std::array<int, kVars>;

/// Number of slots used by multi-indices of total degree <= order.
constexpr int slots_for_order(int order) {
  constexpr std::array<int, 5> counts{1, 5, 15, 35, 70};
  return counts[static_cast<std::size_t>(order)];
}

/// Slot of a multi-index in graded-lexicographic order; throws OrderError for
/// total degree > 4 or negative entries.
int slot_of(const MultiIndex& mi);
const MultiIndex& multi_index_of(int slot);
int degree_of_slot(int slot);

class Jet {
 public:
  Jet() = default;
  explicit Jet(double value, int order = kMaxOrder);

  /// The coordinate function x_var at the given value.
  static Jet seed(int var, double value, int order = kMaxOrder);

  double value() const { return c_[0]; }
  int order() const { return order_; }

  double coeff(int slot) const { return c_[static_cast<std::size_t>(slot)]; }
  double& coeff(int slot) { return c_[static_cast<std::size_t>(slot)]; }
  double coeff(const MultiIndex& mi) const;

  /// Mixed partial derivative: coefficient times the product of factorials.
  double partial(const MultiIndex& mi) const;

  /// d/dx_var; the result carries order() - 1.
  Jet derivative(int var) const;

  Jet truncated(int order) const;

  /// Largest absolute coefficient.
  double max_abs() const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator+=(double v);
  Jet& operator-=(double v);
  Jet& operator*=(double v);
  Jet& operator/=(double v);

  Jet operator-() const;

  std::span<const double> coefficients() const {
    return {c_.data(), static_cast<std::size_t>(slots_for_order(order_))};
  }

 private:
  std::array<double, kSlots> c_{};
  int order_ = kMaxOrder;
};

Jet operator+(Jet a, const Jet& b);
Jet operator-(Jet a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet operator+(Jet a, double b);
Jet operator-(Jet a, double b);
Jet operator*(Jet a, double b);
Jet operator/(Jet a, double b);
Jet operator+(double a, Jet b);
Jet operator-(double a, const Jet& b);
Jet operator*(double a, Jet b);
Jet operator/(double a, const Jet& b);

/// 1/a; throws SingularPointError when the constant term is zero.
Jet reciprocal(const Jet& a);

Jet exp(const Jet& a);
Jet log(const Jet& a);
Jet sqrt(const Jet& a);
Jet pow(const Jet& a, int n);
Jet pow(const Jet& a, double p);
Jet atan(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);

/// Composes a univariate function, given its derivatives f(a0), f'(a0), ...,
/// f''''(a0) at the constant term a0, with the jet a.
Jet compose(const Jet& a, const std::array<double, kMaxOrder + 1>& derivs);

}  // namespace kl
