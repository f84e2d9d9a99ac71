#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "kl/common.hpp"

namespace kl {

/// A point of the open configuration space of N disjoint horizontal slits in the
/// upper half-plane, stored flat as (y_1..y_N, x_1..x_N, xr_1..xr_N).
///
/// Invariants: y_j > 0, x_j < xr_j, and slits at equal heights are disjoint.
/// Instances are validated on construction and immutable afterwards.
class SlitVector {
 public:
  SlitVector() = default;

  /// Validates a raw 3N coordinate vector. Throws Error with the violated
  /// invariant and the offending slit index (1-based, as reported).
  static SlitVector validate(std::vector<double> coords) {
    if (coords.size() % 3 != 0)
      throw Error(ErrorCode::ConfigInvalid, "coordinate vector length must be 3N");
    SlitVector s;
    s.v_ = std::move(coords);
    const int n = s.count();
    for (int j = 0; j < n; ++j) {
      if (!(s.y(j) > 0.0) || !std::isfinite(s.y(j)))
        throw Error(ErrorCode::NonpositiveHeight, "slit " + std::to_string(j + 1),
                    j + 1);
      if (!(s.x(j) < s.xr(j)))
        throw Error(ErrorCode::EmptySlit, "slit " + std::to_string(j + 1), j + 1);
    }
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        if (s.y(j) == s.y(k) && !(s.xr(j) < s.x(k) || s.xr(k) < s.x(j)))
          throw Error(ErrorCode::OverlapAtEqualHeight,
                      "slits " + std::to_string(j + 1) + "," + std::to_string(k + 1),
                      j + 1, k + 1);
    return s;
  }

  static SlitVector empty() { return SlitVector{}; }

  /// True iff the raw vector satisfies all invariants (non-throwing form).
  static bool is_valid(const std::vector<double>& coords) {
    try {
      validate(coords);
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  int count() const noexcept { return static_cast<int>(v_.size() / 3); }
  const std::vector<double>& coords() const noexcept { return v_; }

  double y(int j) const { return v_[j]; }
  double x(int j) const { return v_[count() + j]; }
  double xr(int j) const { return v_[2 * count() + j]; }
  Cplx left(int j) const { return {x(j), y(j)}; }
  Cplx right(int j) const { return {xr(j), y(j)}; }

  double min_height() const {
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < count(); ++j) m = std::min(m, y(j));
    return m;
  }

  /// Distance from the boundary point xi0 to the nearest slit; +inf when N = 0.
  /// sqrt(a^2 + b^2) rather than hypot keeps the value bit-exactly homogeneous
  /// under power-of-two rescaling of the configuration.
  double distance(double xi0) const {
    double r = std::numeric_limits<double>::infinity();
    for (int j = 0; j < count(); ++j) {
      const double gap = std::max({x(j) - xi0, xi0 - xr(j), 0.0});
      r = std::min(r, std::sqrt(gap * gap + y(j) * y(j)));
    }
    return r;
  }

  /// Distance from an arbitrary point z to the nearest slit segment.
  double distance_to_point(Cplx z) const {
    double r = std::numeric_limits<double>::infinity();
    for (int j = 0; j < count(); ++j) {
      const double gap = std::max({x(j) - z.real(), z.real() - xr(j), 0.0});
      const double dy = z.imag() - y(j);
      r = std::min(r, std::sqrt(gap * gap + dy * dy));
    }
    return r;
  }

  SlitVector translated(double c) const {
    SlitVector s = *this;
    const int n = count();
    for (int j = 0; j < n; ++j) {
      s.v_[n + j] += c;
      s.v_[2 * n + j] += c;
    }
    return s;
  }

  SlitVector scaled(double c) const {
    if (!(c > 0.0)) throw Error(ErrorCode::ConfigInvalid, "scale factor must be > 0");
    SlitVector s = *this;
    for (double& u : s.v_) u *= c;
    return s;
  }

  /// Membership in the slit domain D(s): Im z > 0 and z not on any closed slit.
  bool contains(Cplx z, double eps = kEpsGeom) const {
    if (!(z.imag() > 0.0)) return false;
    for (int j = 0; j < count(); ++j)
      if (std::abs(z.imag() - y(j)) <= eps && z.real() >= x(j) - eps &&
          z.real() <= xr(j) + eps)
        return false;
    return true;
  }

  /// max |coordinate| relevant after translating xi0 to the origin; used to pick
  /// the canonical power-of-two scale.
  double frame_magnitude(double xi0) const {
    double m = 0.0;
    for (int j = 0; j < count(); ++j)
      m = std::max({m, y(j), std::abs(x(j) - xi0), std::abs(xr(j) - xi0)});
    return m;
  }

  /// Diameter of the slit configuration together with the origin-side extent;
  /// plumbing for probe-radius choices.
  double extent_radius() const {
    double m = 0.0;
    for (int j = 0; j < count(); ++j)
      m = std::max({m, std::abs(left(j)), std::abs(right(j))});
    return m;
  }

  bool operator==(const SlitVector& o) const { return v_ == o.v_; }

 private:
  std::vector<double> v_;
};

}  // namespace kl
