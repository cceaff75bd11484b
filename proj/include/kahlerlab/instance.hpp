#pragma once

// A family instance: a coordinate chart on a box plus jet evaluators for the
// metric, the Kahler (or almost-Kahler) form and optional auxiliary fields.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kahlerlab/tensor.hpp"

namespace kl {

using Point = std::array<double, 4>;

struct Box {
  Point lo{};
  Point hi{};

  bool contains(const Point& p, double slack = 1e-12) const;
  Point center() const;
  /// The 16 corners followed by the center.
  std::vector<Point> validity_points() const;
};

struct Fields {
  Mat4 g;
  Mat4 omega;
  /// Reference anti-selfdual structure (the Kahler form of I), if known.
  std::optional<Mat4> omega_I;
  /// A function lambda with lambda^-2 omega_I closed.
  std::optional<Jet> conformal_factor;
  /// Candidate hamiltonian 2-form.
  std::optional<Mat4> phi;
};

enum class StructureKind { kahler, almost_kahler };

using ScalarField = std::function<double(const Point&)>;

struct FamilyInstance {
  std::string family;
  std::string label;
  StructureKind kind = StructureKind::kahler;
  std::array<std::string, 4> coords;
  Box box;
  std::function<Fields(const Vec4&)> fields;
  /// Closed-form reference values keyed by name (s, mu, kappa, p, ...).
  std::map<std::string, ScalarField> reference;
  /// Extra named scalar fields for tables (e.g. the Calabi profile psi).
  std::map<std::string, ScalarField> extras;
  std::map<std::string, double> params;

  bool is_kahler() const { return kind == StructureKind::kahler; }
};

/// Coordinate jets at p of the given order.
Vec4 seed_point(const Point& p, int order);

/// Evaluates the fields at p; throws DomainError outside the box.
Fields evaluate(const FamilyInstance& inst, const Point& p, int order);

}  // namespace kl
