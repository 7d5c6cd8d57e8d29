#include "thermoray/geometry.hpp"

#include <cmath>
#include <limits>

namespace thermoray {

namespace {

constexpr double kWallTol = 1e-9;

struct ExitVisitor {
  const Vec& x;
  const Vec& v;

  std::optional<double> operator()(const Box& box) const {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < box.dim(); ++j) {
      if (v[j] > 0.0) {
        best = std::min(best, std::max(0.0, (box.hi[j] - x[j]) / v[j]));
      } else if (v[j] < 0.0) {
        best = std::min(best, std::max(0.0, (box.lo[j] - x[j]) / v[j]));
      }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return best;
  }

  std::optional<double> operator()(const Disk& disk) const {
    const Vec p = x - disk.center;
    const double a = v.squaredNorm();
    if (a == 0.0) return std::nullopt;
    const double b = p.dot(v);
    const double c = p.squaredNorm() - disk.radius * disk.radius;
    const double disc = b * b - a * c;
    if (disc < 0.0) return std::nullopt;
    // Larger root; stable form.
    const double q = -(b + std::copysign(std::sqrt(disc), b));
    double s1 = q / a;
    double s2 = (q != 0.0) ? c / q : 0.0;
    const double s = std::max(s1, s2);
    if (s < 0.0) return 0.0;
    return s;
  }
};

}  // namespace

bool Box::contains(const Vec& x, double slack) const {
  for (int j = 0; j < dim(); ++j) {
    if (x[j] < lo[j] - slack || x[j] > hi[j] + slack) return false;
  }
  return true;
}

bool Disk::contains(const Vec& x, double slack) const {
  return (x - center).norm() <= radius + slack;
}

bool domain_contains(const Domain& domain, const Vec& x, double slack) {
  return std::visit([&](const auto& d) { return d.contains(x, slack); }, domain);
}

std::optional<double> exit_time(const Domain& domain, const Vec& x, const Vec& v) {
  return std::visit(ExitVisitor{x, v}, domain);
}

Vec outward_normal(const Domain& domain, const Vec& x, bool* corner) {
  if (corner) *corner = false;
  if (const auto* disk = std::get_if<Disk>(&domain)) {
    return (x - disk->center).normalized();
  }
  const auto& box = std::get<Box>(domain);
  const double tol = kWallTol * box.max_extent();
  Vec n = Vec::Zero(box.dim());
  int walls = 0;
  for (int j = 0; j < box.dim(); ++j) {
    if (std::abs(x[j] - box.hi[j]) <= tol) {
      n[j] += 1.0;
      ++walls;
    } else if (std::abs(x[j] - box.lo[j]) <= tol) {
      n[j] -= 1.0;
      ++walls;
    }
  }
  if (walls == 0) {
    // Nearest wall.
    double best = std::numeric_limits<double>::infinity();
    int axis = 0;
    double sign = 1.0;
    for (int j = 0; j < box.dim(); ++j) {
      if (box.hi[j] - x[j] < best) { best = box.hi[j] - x[j]; axis = j; sign = 1.0; }
      if (x[j] - box.lo[j] < best) { best = x[j] - box.lo[j]; axis = j; sign = -1.0; }
    }
    n[axis] = sign;
    walls = 1;
  }
  if (corner) *corner = walls > 1;
  return n.normalized();
}

double boundary_curvature(const Domain& domain, const Vec& /*x*/) {
  if (const auto* disk = std::get_if<Disk>(&domain)) return 1.0 / disk->radius;
  return 0.0;
}

double distance_to_boundary(const Domain& domain, const Vec& x) {
  if (const auto* disk = std::get_if<Disk>(&domain)) {
    return disk->radius - (x - disk->center).norm();
  }
  const auto& box = std::get<Box>(domain);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < box.dim(); ++j) {
    best = std::min({best, box.hi[j] - x[j], x[j] - box.lo[j]});
  }
  return best;
}

}  // namespace thermoray
