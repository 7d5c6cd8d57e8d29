#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <variant>

namespace thermoray {

using cdouble = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Axis-aligned box [lo, hi].
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x, double slack = 0.0) const;
  Vec size() const { return hi - lo; }
  double max_extent() const { return (hi - lo).maxCoeff(); }
};

/// Interior of a disk in the plane.
struct Disk {
  Vec center;
  double radius = 1.0;

  bool contains(const Vec& x, double slack = 0.0) const;
};

/// Region on which rays live and reflect.
using Domain = std::variant<Box, Disk>;

bool domain_contains(const Domain& domain, const Vec& x, double slack = 0.0);

/// Smallest s >= 0 with x + s*v on the boundary (moving outward); nullopt if none.
std::optional<double> exit_time(const Domain& domain, const Vec& x, const Vec& v);

/// Outward unit normal at a boundary point. For box corners the normals of
/// both walls are summed; `corner` reports that case.
Vec outward_normal(const Domain& domain, const Vec& x, bool* corner = nullptr);

/// Signed curvature of the boundary at x, positive when the domain is convex there.
double boundary_curvature(const Domain& domain, const Vec& x);

double distance_to_boundary(const Domain& domain, const Vec& x);

}  // namespace thermoray
