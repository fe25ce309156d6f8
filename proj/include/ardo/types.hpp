#pragma once

#include <Eigen/Dense>

#include <functional>

namespace ardo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A batch of points, one per column. In parabolic mode the last row holds
/// the time coordinate.
using PointSet = Eigen::MatrixXd;

/// Pointwise scalar field f(x, t); elliptic callers ignore t.
using ScalarField = std::function<double(const Vec& x, double t)>;

}  // namespace ardo
