#include "kahlerlab/instance.hpp"

#include <sstream>

namespace kl {

bool Box::contains(const Point& p, double slack) const {
  for (int i = 0; i < 4; ++i) {
    const double w = std::max(1.0, hi[i] - lo[i]) * slack;
    if (p[i] < lo[i] - w || p[i] > hi[i] + w) return false;
  }
  return true;
}

Point Box::center() const {
  Point c;
  for (int i = 0; i < 4; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

std::vector<Point> Box::validity_points() const {
  std::vector<Point> pts;
  for (int mask = 0; mask < 16; ++mask) {
    Point p;
    for (int i = 0; i < 4; ++i) p[i] = (mask >> i) & 1 ? hi[i] : lo[i];
    pts.push_back(p);
  }
  pts.push_back(center());
  return pts;
}

Vec4 seed_point(const Point& p, int order) {
  Vec4 x;
  for (int i = 0; i < 4; ++i) x[i] = Jet::seed(i, p[i], order);
  return x;
}

Fields evaluate(const FamilyInstance& inst, const Point& p, int order) {
  if (!inst.box.contains(p)) {
    std::ostringstream os;
    os << "point (" << p[0] << ", " << p[1] << ", " << p[2] << ", " << p[3]
       << ") outside the validity box of " << inst.label;
    throw DomainError(os.str());
  }
  return inst.fields(seed_point(p, order));
}

}  // namespace kl
