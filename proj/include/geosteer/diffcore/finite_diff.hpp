#pragma once

#include "geosteer/diffcore/matrix.hpp"

#include <functional>

namespace geosteer::diff {

/// Central-difference gradient of a scalar function, one coordinate at a time.
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                         double step) {
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + step;
    const double fp = f(probe);
    probe[i] = xi - step;
    const double fm = f(probe);
    probe[i] = xi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// Central-difference Jacobian of a vector map, returned as outputs x inputs.
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                                         double step) {
  Vector probe = x;
  Matrix jac;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + step;
    const Vector fp = f(probe);
    probe[i] = xi - step;
    const Vector fm = f(probe);
    probe[i] = xi;
    if (i == 0) jac.resize(fp.size(), x.size());
    jac.col(i) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

/// max|a-b| / max(max|b|, floor): the relative error used by gradient checks.
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
  require(same_shape(a, b), "relative_error: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace geosteer::diff
