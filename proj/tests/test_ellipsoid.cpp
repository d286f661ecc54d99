#include <random>

#include "doctest.h"
#include "fsmf/ellipsoid.hpp"

using namespace fsmf;
using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

EllipsoidD ball(double cx, double cy, double r = 1.0) {
  return make_ellipsoid(Vector2d(cx, cy), MatrixXd(r * r * Matrix2d::Identity()));
}

MatrixXd random_spd(std::mt19937& rng, int n, double lo = 0.1, double hi = 2.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ev(lo, hi);
  MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(MatrixXd::NullaryExpr(n, n, [&] { return u(rng); }))
                   .householderQ();
  VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = ev(rng);
  MatrixXd P = Q * d.asDiagonal() * Q.transpose();
  return 0.5 * (P + P.transpose());
}

// Literal form with explicit inverses, sampled densely; independent of the
// golden-section path and of the (l P2 + (1-l) P1) identity.
double kmin_by_sampling(const EllipsoidD& e1, const EllipsoidD& e2, int samples = 20000) {
  const MatrixXd Q1 = e1.shape().inverse(), Q2 = e2.shape().inverse();
  const VectorXd d = e2.center() - e1.center();
  double best = 1.0;
  for (int s = 1; s < samples; ++s) {
    const double l = double(s) / samples;
    const MatrixXd X = l * Q1 + (1 - l) * Q2;
    const double k = 1.0 - l * (1 - l) * d.dot(Q2 * X.inverse() * Q1 * d);
    best = std::min(best, k);
  }
  return best;
}

}  // namespace

TEST_CASE("make_ellipsoid validates and stores inputs") {
  const auto e = make_ellipsoid(Vector2d(1, 1), MatrixXd(100.0 * Matrix2d::Identity()));
  CHECK(e.center() == Vector2d(1, 1));
  CHECK(e.shape() == MatrixXd(100.0 * Matrix2d::Identity()));
  CHECK(ball(0, 0).shape() == MatrixXd(Matrix2d::Identity()));

  Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(make_ellipsoid(Vector2d(0, 0), MatrixXd(indefinite)), NotPositiveDefinite);
  CHECK_THROWS_AS(make_ellipsoid(VectorXd::Zero(3), MatrixXd(Matrix2d::Identity())),
                  DimensionMismatch);
  Matrix2d skew = Matrix2d::Identity();
  skew(0, 1) = 1e-6;
  CHECK_THROWS_AS(make_ellipsoid(Vector2d(0, 0), MatrixXd(skew)), NotPositiveDefinite);
}

TEST_CASE("shape_factor examples") {
  auto factor = [](const Matrix2d& P) {
    return shape_factor(make_ellipsoid(Vector2d(0, 0), MatrixXd(P)));
  };
  CHECK((factor(100.0 * Matrix2d::Identity()) - MatrixXd(10.0 * Matrix2d::Identity())).norm() <
        1e-12);
  CHECK((factor(Matrix2d::Identity()) - MatrixXd(Matrix2d::Identity())).norm() < 1e-12);
  Matrix2d P, L;
  P << 4, 2, 2, 5;
  L << 2, 0, 1, 2;
  CHECK((L * L.transpose() - P).norm() == 0.0);
  CHECK((factor(P) - MatrixXd(L)).norm() < 1e-12);
}

TEST_CASE("shape_factor round trip on random SPD matrices") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 5;
    const auto e = make_ellipsoid(VectorXd::Zero(n), random_spd(rng, n, 1e-3, 10.0));
    const MatrixXd L = shape_factor(e);
    CHECK(L.isLowerTriangular());
    CHECK(L.diagonal().minCoeff() > 0.0);
    CHECK((L * L.transpose() - e.shape()).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("contains and trace_size") {
  const auto u = ball(0, 0);
  CHECK(contains(u, Vector2d(0, 0)));
  CHECK(contains(u, Vector2d(1, 0)));
  CHECK_FALSE(contains(u, Vector2d(1.1, 0)));
  CHECK_THROWS_AS(contains(u, VectorXd::Zero(3)), DimensionMismatch);

  CHECK(trace_size(make_ellipsoid(Vector2d(1, 1), MatrixXd(100.0 * Matrix2d::Identity()))) == 200);
  CHECK(trace_size(u) == 2);
  Matrix2d P;
  P << 4, 2, 2, 5;
  CHECK(trace_size(make_ellipsoid(Vector2d(0, 0), MatrixXd(P))) == 9);

  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + i % 4;
    const auto e = make_ellipsoid(VectorXd::Random(n), random_spd(rng, n));
    CHECK(contains(e, e.center()));
  }
}

TEST_CASE("intersects examples") {
  CHECK_FALSE(intersects(ball(0, 0), ball(3, 0)));
  CHECK(intersects(ball(0, 0), ball(0, 0)));
  CHECK(intersects(ball(0, 0), ball(2, 0)));
  CHECK(intersects(ball(2, 0), ball(0, 0)));
  CHECK_THROWS_AS(intersects(ball(0, 0), make_ellipsoid(VectorXd::Zero(3),
                                                        MatrixXd(Eigen::Matrix3d::Identity()))),
                  DimensionMismatch);
  // Unit balls at distance 3: K(l) = 1 - 9 l (1 - l), minimum -1.25 at l = 1/2.
  const auto r = overlap_margin(ball(0, 0), ball(3, 0));
  CHECK(r.k_min == doctest::Approx(-1.25).epsilon(1e-9));
  CHECK(r.lambda == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("K_min agrees with an explicit-inverse sampling oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  for (int i = 0; i < 40; ++i) {
    const auto e1 = make_ellipsoid(Vector2d(c(rng), c(rng)), random_spd(rng, 2));
    const auto e2 = make_ellipsoid(Vector2d(c(rng), c(rng)), random_spd(rng, 2));
    CHECK(overlap_margin(e1, e2).k_min == doctest::Approx(kmin_by_sampling(e1, e2)).epsilon(1e-5));
  }
}

TEST_CASE("intersects is symmetric, reflexive and monotone under inflation") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> c(-2.5, 2.5), sig(0.01, 1.0);
  for (int i = 0; i < 300; ++i) {
    const int n = 2 + i % 3;
    VectorXd c1(n), c2(n);
    for (int k = 0; k < n; ++k) {
      c1(k) = c(rng);
      c2(k) = c(rng);
    }
    const auto e1 = make_ellipsoid(c1, random_spd(rng, n));
    const auto e2 = make_ellipsoid(c2, random_spd(rng, n));
    CHECK(intersects(e1, e2) == intersects(e2, e1));
    CHECK(intersects(e1, e1));
    if (intersects(e1, e2)) {
      const auto bigger =
          make_ellipsoid(c1, MatrixXd(e1.shape() + sig(rng) * MatrixXd::Identity(n, n)));
      CHECK(intersects(bigger, e2));
    }
  }
}

TEST_CASE("intersects agrees with the grid oracle on 200 random pairs") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  int checked = 0, disjoint = 0;
  for (int i = 0; i < 200; ++i) {
    const auto e1 = make_ellipsoid(Vector2d(c(rng), c(rng)), random_spd(rng, 2, 0.05, 1.5));
    const auto e2 = make_ellipsoid(Vector2d(c(rng), c(rng)), random_spd(rng, 2, 0.05, 1.5));
    if (std::abs(overlap_margin(e1, e2).k_min) <= 1e-6) continue;
    ++checked;
    const bool fast = intersects(e1, e2);
    disjoint += !fast;
    CHECK(fast == grid_overlap_oracle(e1, e2, 400));
  }
  CHECK(checked >= 190);
  CHECK(disjoint > 20);
  CHECK(disjoint < checked - 20);
}

TEST_CASE("grid oracle examples") {
  CHECK_FALSE(grid_overlap_oracle(ball(0, 0), ball(3, 0), 400));
  CHECK(grid_overlap_oracle(ball(0, 0), ball(0, 0), 400));
  (void)grid_overlap_oracle(ball(0, 0), ball(2, 0), 400);  // either answer at exact tangency
  const auto e3 = make_ellipsoid(VectorXd::Zero(3), MatrixXd(Eigen::Matrix3d::Identity()));
  CHECK_THROWS_AS(grid_overlap_oracle(e3, e3, 400), UnsupportedDimension);
  CHECK_THROWS_AS(grid_overlap_oracle(ball(0, 0), ball(0, 0), 50), UnsupportedDimension);
}

TEST_CASE("boundary points lie on the ellipse") {
  Matrix2d P;
  P << 4, 2, 2, 5;
  const auto e = make_ellipsoid(Vector2d(1, -1), MatrixXd(P));
  const auto pts = boundary_points(e, 256);
  CHECK(pts.rows() == 256);
  for (int i = 0; i < pts.rows(); ++i)
    CHECK(quadratic_form(e, Vector2d(pts.row(i).transpose())) == doctest::Approx(1.0));
}

TEST_CASE("float scalar instantiation") {
  const Ellipsoid<float> e(Eigen::Vector2f(0, 0), Eigen::Matrix2f::Identity());
  const Ellipsoid<float> f(Eigen::Vector2f(3, 0), Eigen::Matrix2f::Identity());
  CHECK_FALSE(intersects(e, f));
  CHECK(contains(e, Eigen::Vector2f(0.5f, 0.5f)));
}
