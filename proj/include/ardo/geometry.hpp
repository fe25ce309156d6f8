#pragma once

#include "ardo/error.hpp"
#include "ardo/random.hpp"
#include "ardo/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace ardo {

enum class FaceKind { dirichlet, neumann };

enum class Side { lower, upper };

/// One face of a hyperrectangle: the set where coordinate `axis` sits at the
/// lower or upper bound.
struct Face {
  int axis = 0;
  Side side = Side::lower;

  friend bool operator==(const Face&, const Face&) = default;
};

struct BoundaryPoint {
  Vec position;
  Vec normal;  // outward, unit length
  FaceKind kind = FaceKind::dirichlet;
};

inline std::string to_string(FaceKind kind) {
  return kind == FaceKind::dirichlet ? "dirichlet" : "neumann";
}

/// Immutable description of the spatial domain and its boundary partition.
///
/// Two shapes are supported: axis-aligned hyperrectangles, whose faces are
/// assigned individually to the Dirichlet or Neumann part, and balls, whose
/// whole sphere carries a single kind. In one dimension a face is a point and
/// its measure is 1 (counting measure).
class Domain {
 public:
  enum class Shape { box, ball };

  /// Hyperrectangle [lower, upper]. Faces listed in `neumann_faces` form the
  /// Neumann part, every other face is Dirichlet.
  static Domain box(Vec lower, Vec upper, const std::vector<Face>& neumann_faces = {}) {
    if (lower.size() == 0 || lower.size() != upper.size()) throw Error("box corners must be nonempty and of equal length");
    if (((upper - lower).array() <= 0.0).any()) throw Error("box upper corner must exceed lower corner on every axis");
    Domain d(Shape::box, static_cast<int>(lower.size()));
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    d.face_kinds_.assign(2 * static_cast<std::size_t>(d.dim_), FaceKind::dirichlet);
    for (const Face& f : neumann_faces) {
      if (f.axis < 0 || f.axis >= d.dim_) throw Error("face axis " + std::to_string(f.axis) + " out of range");
      d.face_kinds_[d.face_index(f)] = FaceKind::neumann;
    }
    return d;
  }

  static Domain cube(int dim, double lo, double hi, const std::vector<Face>& neumann_faces = {}) {
    return box(Vec::Constant(dim, lo), Vec::Constant(dim, hi), neumann_faces);
  }

  static Domain ball(Vec center, double radius, FaceKind sphere_kind = FaceKind::dirichlet) {
    if (center.size() == 0) throw Error("ball center must be nonempty");
    if (!(radius > 0.0)) throw Error("ball radius must be positive");
    Domain d(Shape::ball, static_cast<int>(center.size()));
    d.center_ = std::move(center);
    d.radius_ = radius;
    d.face_kinds_ = {sphere_kind};
    return d;
  }

  int dim() const noexcept { return dim_; }
  Shape shape() const noexcept { return shape_; }
  bool is_box() const noexcept { return shape_ == Shape::box; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Vec& center() const { return center_; }
  double radius() const noexcept { return radius_; }

  FaceKind kind_of(const Face& f) const { return face_kinds_[face_index(f)]; }
  FaceKind sphere_kind() const { return face_kinds_.front(); }

  /// Faces of a hyperrectangle carrying the given kind.
  std::vector<Face> faces(FaceKind kind) const {
    std::vector<Face> out;
    if (!is_box()) return out;
    for (int axis = 0; axis < dim_; ++axis) {
      for (Side side : {Side::lower, Side::upper}) {
        if (kind_of({axis, side}) == kind) out.push_back({axis, side});
      }
    }
    return out;
  }

  bool has_dirichlet() const { return boundary_measure(FaceKind::dirichlet) > 0.0; }

  double interior_measure() const {
    if (is_box()) return (upper_ - lower_).prod();
    return ball_volume(dim_, radius_);
  }

  /// (n-1)-dimensional measure of one hyperrectangle face.
  double face_measure(const Face& f) const {
    double m = 1.0;
    for (int k = 0; k < dim_; ++k) {
      if (k != f.axis) m *= upper_[k] - lower_[k];
    }
    return m;
  }

  double boundary_measure(FaceKind kind) const {
    if (!is_box()) return sphere_kind() == kind ? sphere_area(dim_, radius_) : 0.0;
    double m = 0.0;
    for (const Face& f : faces(kind)) m += face_measure(f);
    return m;
  }

  double total_boundary_measure() const {
    return boundary_measure(FaceKind::dirichlet) + boundary_measure(FaceKind::neumann);
  }

  double diameter() const { return is_box() ? (upper_ - lower_).norm() : 2.0 * radius_; }

  /// Signed distance to the boundary, positive inside.
  double distance_to_boundary(const Vec& x) const {
    if (!is_box()) return radius_ - (x - center_).norm();
    return std::min((x - lower_).minCoeff(), (upper_ - x).minCoeff());
  }

  bool contains(const Vec& x) const { return distance_to_boundary(x) > 0.0; }

  /// `count` i.i.d. uniform points strictly inside the domain, one per column.
  PointSet sample_interior(std::size_t count, RandomStream& rng) const {
    PointSet pts(dim_, static_cast<Eigen::Index>(count));
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      if (is_box()) {
        for (int k = 0; k < dim_; ++k) pts(k, c) = lower_[k] + (upper_[k] - lower_[k]) * rng.open_uniform();
      } else if (dim_ == 1) {
        pts(0, c) = center_[0] + radius_ * (2.0 * rng.open_uniform() - 1.0);
      } else {
        Vec dir = gaussian_direction(rng);
        const double r = radius_ * std::pow(rng.open_uniform(), 1.0 / dim_);
        pts.col(c) = center_ + r * dir;
      }
    }
    return pts;
  }

  /// `count` i.i.d. uniform points on the boundary part of the given kind.
  std::vector<BoundaryPoint> sample_boundary(FaceKind kind, std::size_t count, RandomStream& rng) const {
    const double total = boundary_measure(kind);
    if (!(total > 0.0)) throw Error("empty boundary part: the " + to_string(kind) + " boundary has zero measure");
    std::vector<BoundaryPoint> out;
    out.reserve(count);
    if (!is_box()) {
      for (std::size_t i = 0; i < count; ++i) {
        Vec dir = dim_ == 1 ? Vec::Constant(1, rng.uniform() < 0.5 ? -1.0 : 1.0) : gaussian_direction(rng);
        out.push_back({center_ + radius_ * dir, dir, kind});
      }
      return out;
    }
    const std::vector<Face> fs = faces(kind);
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const Face& f : fs) cumulative.push_back(acc += face_measure(f));
    for (std::size_t i = 0; i < count; ++i) {
      const double u = rng.uniform() * acc;
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const Face& f = fs[std::min<std::size_t>(it - cumulative.begin(), fs.size() - 1)];
      Vec pos(dim_);
      for (int k = 0; k < dim_; ++k) pos[k] = lower_[k] + (upper_[k] - lower_[k]) * rng.open_uniform();
      pos[f.axis] = f.side == Side::lower ? lower_[f.axis] : upper_[f.axis];
      out.push_back({std::move(pos), face_normal(f), kind});
    }
    return out;
  }

  Vec face_normal(const Face& f) const {
    Vec n = Vec::Zero(dim_);
    n[f.axis] = f.side == Side::lower ? -1.0 : 1.0;
    return n;
  }

  static double ball_volume(int n, double r) {
    return std::pow(std::numbers::pi, 0.5 * n) * std::pow(r, n) / std::tgamma(0.5 * n + 1.0);
  }

  static double sphere_area(int n, double r) { return n * ball_volume(n, r) / r; }

 private:
  Domain(Shape shape, int dim) : shape_(shape), dim_(dim) {}

  std::size_t face_index(const Face& f) const {
    return 2 * static_cast<std::size_t>(f.axis) + (f.side == Side::upper ? 1 : 0);
  }

  Vec gaussian_direction(RandomStream& rng) const {
    Vec v(dim_);
    double norm = 0.0;
    do {
      for (int k = 0; k < dim_; ++k) v[k] = rng.normal();
      norm = v.norm();
    } while (norm == 0.0);
    return v / norm;
  }

  Shape shape_;
  int dim_;
  Vec lower_, upper_, center_;
  double radius_ = 0.0;
  std::vector<FaceKind> face_kinds_;
};

/// Measures (|Ω|, |∂Ω_D|, |∂Ω_N|).
struct DomainMeasures {
  double interior = 0.0;
  double dirichlet = 0.0;
  double neumann = 0.0;
};

inline DomainMeasures measures(const Domain& d) {
  return {d.interior_measure(), d.boundary_measure(FaceKind::dirichlet), d.boundary_measure(FaceKind::neumann)};
}

}  // namespace ardo
