#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "fsmf/errors.hpp"

namespace fsmf {

struct EllipsoidTolerances {
  double symmetry = 1e-9;
  double pd_floor = 1e-12;
  double factor_roundtrip = 1e-8;
  double boundary = 1e-9;
};

struct IntersectionOptions {
  // Sets are reported disjoint when K_min < -margin.
  double margin = 0.0;
  double lambda_lo = 1e-6;
  double lambda_hi = 1.0 - 1e-6;
  double width = 1e-9;
  double max_condition = 1e12;
};

/// {x : (x - c)^T P^{-1} (x - c) <= 1}
template <typename Scalar>
class Ellipsoid {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Ellipsoid() = default;

  Ellipsoid(Vector center, Matrix shape, const EllipsoidTolerances& tol = {})
      : center_(std::move(center)), shape_(std::move(shape)) {
    if (shape_.rows() != shape_.cols() || shape_.rows() != center_.size() || center_.size() == 0)
      throw DimensionMismatch("ellipsoid: center has " + std::to_string(center_.size()) +
                              " entries, shape is " + std::to_string(shape_.rows()) + "x" +
                              std::to_string(shape_.cols()));
    if (!shape_.allFinite() || !center_.allFinite())
      throw NotPositiveDefinite("ellipsoid: non-finite entries");
    const Scalar asym = (shape_ - shape_.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(tol.symmetry))
      throw NotPositiveDefinite("ellipsoid: shape asymmetric by " + std::to_string(double(asym)));
    const Matrix sym = Scalar(0.5) * (shape_ + shape_.transpose());
    const Scalar lmin = Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    if (!(lmin > Scalar(tol.pd_floor)))
      throw NotPositiveDefinite("ellipsoid: min eigenvalue " + std::to_string(double(lmin)));
  }

  const Vector& center() const { return center_; }
  const Matrix& shape() const { return shape_; }
  Eigen::Index dim() const { return center_.size(); }

 private:
  Vector center_;
  Matrix shape_;
};

using EllipsoidD = Ellipsoid<double>;

template <typename Scalar>
Ellipsoid<Scalar> make_ellipsoid(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& center,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& shape,
                                 const EllipsoidTolerances& tol = {}) {
  return Ellipsoid<Scalar>(center, shape, tol);
}

inline EllipsoidD make_ellipsoid(const Eigen::VectorXd& center, const Eigen::MatrixXd& shape,
                                 const EllipsoidTolerances& tol = {}) {
  return EllipsoidD(center, shape, tol);
}

/// Lower-triangular factor with positive diagonal, L L^T = P.
template <typename Scalar>
auto shape_factor(const Ellipsoid<Scalar>& e, const EllipsoidTolerances& tol = {}) {
  using Matrix = typename Ellipsoid<Scalar>::Matrix;
  const Matrix sym = Scalar(0.5) * (e.shape() + e.shape().transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("shape_factor: Cholesky failed");
  Matrix l = llt.matrixL();
  const Scalar err = (l * l.transpose() - e.shape()).cwiseAbs().maxCoeff();
  const Scalar scale = std::max(Scalar(1), e.shape().cwiseAbs().maxCoeff());
  if (err > Scalar(tol.factor_roundtrip) * scale)
    throw NotPositiveDefinite("shape_factor: round-trip error " + std::to_string(double(err)));
  return l;
}

template <typename Scalar, typename Derived>
Scalar quadratic_form(const Ellipsoid<Scalar>& e, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != e.dim()) throw DimensionMismatch("quadratic_form: point dimension");
  using Matrix = typename Ellipsoid<Scalar>::Matrix;
  const typename Ellipsoid<Scalar>::Vector d = x - e.center();
  return d.dot(Eigen::LDLT<Matrix>(e.shape()).solve(d));
}

template <typename Scalar, typename Derived>
bool contains(const Ellipsoid<Scalar>& e, const Eigen::MatrixBase<Derived>& x,
              const EllipsoidTolerances& tol = {}) {
  return quadratic_form(e, x) <= Scalar(1) + Scalar(tol.boundary);
}

template <typename Scalar>
Scalar trace_size(const Ellipsoid<Scalar>& e) {
  return e.shape().trace();
}

template <typename Scalar>
struct OverlapResult {
  Scalar k_min;
  Scalar lambda;
};

// K(l) = 1 - l(1-l) d^T P2^{-1} X(l)^{-1} P1^{-1} d with X(l) = l P1^{-1} + (1-l) P2^{-1}.
// Evaluated through the identity P2^{-1} X^{-1} P1^{-1} = (l P2 + (1-l) P1)^{-1},
// which avoids inverting either shape.
template <typename Scalar>
Scalar overlap_function(const Ellipsoid<Scalar>& e1, const Ellipsoid<Scalar>& e2, Scalar lambda,
                        const IntersectionOptions& opt = {}) {
  using Matrix = typename Ellipsoid<Scalar>::Matrix;
  const auto d = (e2.center() - e1.center()).eval();
  const Matrix mix = lambda * e2.shape() + (Scalar(1) - lambda) * e1.shape();
  Eigen::LLT<Matrix> llt(Scalar(0.5) * (mix + mix.transpose()));
  if (llt.info() != Eigen::Success || !(llt.rcond() * Scalar(opt.max_condition) >= Scalar(1)))
    throw NumericalFailure("overlap_function: ill-conditioned inner solve");
  return Scalar(1) - lambda * (Scalar(1) - lambda) * d.dot(llt.solve(d));
}

/// Golden-section minimisation of K over [lambda_lo, lambda_hi]; K is convex there.
template <typename Scalar>
OverlapResult<Scalar> overlap_margin(const Ellipsoid<Scalar>& e1, const Ellipsoid<Scalar>& e2,
                                     const IntersectionOptions& opt = {}) {
  if (e1.dim() != e2.dim()) throw DimensionMismatch("intersects: dimension mismatch");
  const Scalar invphi = Scalar((std::sqrt(5.0) - 1.0) / 2.0);
  Scalar a = Scalar(opt.lambda_lo), b = Scalar(opt.lambda_hi);
  Scalar x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  Scalar f1 = overlap_function(e1, e2, x1, opt), f2 = overlap_function(e1, e2, x2, opt);
  const Scalar width = std::max(Scalar(opt.width), Scalar(8) * std::numeric_limits<Scalar>::epsilon());
  while (b - a > width) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = overlap_function(e1, e2, x1, opt);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = overlap_function(e1, e2, x2, opt);
    }
  }
  const Scalar mid = Scalar(0.5) * (a + b);
  const Scalar fm = overlap_function(e1, e2, mid, opt);
  OverlapResult<Scalar> best{fm, mid};
  if (f1 < best.k_min) best = {f1, x1};
  if (f2 < best.k_min) best = {f2, x2};
  return best;
}

// Tangent sets give K_min = 0 up to rounding, so a few ulps of slack are
// always granted on top of the configured margin.
template <typename Scalar>
bool intersects(const Ellipsoid<Scalar>& e1, const Ellipsoid<Scalar>& e2,
                const IntersectionOptions& opt = {}) {
  const Scalar roundoff = Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  return overlap_margin(e1, e2, opt).k_min >= -(Scalar(opt.margin) + roundoff);
}

/// Brute-force overlap check on a grid over E1's bounding box (inflated 5%).
template <typename Scalar>
bool grid_overlap_oracle(const Ellipsoid<Scalar>& e1, const Ellipsoid<Scalar>& e2,
                         int resolution) {
  if (e1.dim() != 2 || e2.dim() != 2)
    throw UnsupportedDimension("grid_overlap_oracle: 2-D only");
  if (e2.dim() != e1.dim()) throw DimensionMismatch("grid_overlap_oracle: dimension mismatch");
  if (resolution < 100) throw UnsupportedDimension("grid_overlap_oracle: resolution < 100");
  using Matrix = typename Ellipsoid<Scalar>::Matrix;
  const Matrix q1 = e1.shape().inverse(), q2 = e2.shape().inverse();
  const Scalar hx = Scalar(1.05) * std::sqrt(e1.shape()(0, 0));
  const Scalar hy = Scalar(1.05) * std::sqrt(e1.shape()(1, 1));
  const auto& c1 = e1.center();
  const auto& c2 = e2.center();
  for (int i = 0; i < resolution; ++i) {
    const Scalar x = c1(0) - hx + Scalar(2) * hx * Scalar(i) / Scalar(resolution - 1);
    for (int j = 0; j < resolution; ++j) {
      const Scalar y = c1(1) - hy + Scalar(2) * hy * Scalar(j) / Scalar(resolution - 1);
      const Eigen::Matrix<Scalar, 2, 1> d1(x - c1(0), y - c1(1));
      const Eigen::Matrix<Scalar, 2, 1> d2(x - c2(0), y - c2(1));
      if (d1.dot(q1 * d1) <= Scalar(1) && d2.dot(q2 * d2) <= Scalar(1)) return true;
    }
  }
  return false;
}

/// Boundary of the projection onto the first two coordinates.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 2> boundary_points(const Ellipsoid<Scalar>& e, int count = 256) {
  if (e.dim() < 2) throw UnsupportedDimension("boundary_points: need at least 2 coordinates");
  const Eigen::Matrix<Scalar, 2, 2> block = e.shape().template topLeftCorner<2, 2>();
  const Eigen::Matrix<Scalar, 2, 2> l = Eigen::LLT<Eigen::Matrix<Scalar, 2, 2>>(block).matrixL();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> pts(count, 2);
  for (int i = 0; i < count; ++i) {
    const Scalar t = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(i) / Scalar(count);
    const Eigen::Matrix<Scalar, 2, 1> p =
        e.center().template head<2>() + l * Eigen::Matrix<Scalar, 2, 1>(std::cos(t), std::sin(t));
    pts.row(i) = p.transpose();
  }
  return pts;
}

}  // namespace fsmf
