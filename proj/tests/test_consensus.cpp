#include <random>

#include "doctest.h"
#include "fsmf/consensus.hpp"
#include "fsmf/errors.hpp"

using namespace fsmf;

namespace {

Topology two_agents(double l1 = 1, double l2 = 1) {
  Topology t;
  t.adjacency = Eigen::Matrix2d{{0, 1}, {1, 0}};
  t.pinning = Eigen::Vector2d(l1, l2);
  return t;
}

}  // namespace

TEST_CASE("pinned laplacian examples") {
  CHECK(pinned_laplacian(two_agents()) == MatrixXd(Eigen::Matrix2d{{2, -1}, {-1, 2}}));

  Topology single{MatrixXd::Zero(1, 1), VectorXd::Ones(1)};
  CHECK(pinned_laplacian(single) == MatrixXd::Ones(1, 1));

  Topology apart{MatrixXd::Zero(2, 2), Eigen::Vector2d(1, 0)};
  CHECK(pinned_laplacian(apart) == MatrixXd(Eigen::Vector2d(1, 0).asDiagonal()));

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    Topology t{MatrixXd::NullaryExpr(n, n, [&] { return u(rng); }),
               VectorXd::NullaryExpr(n, [&] { return u(rng); })};
    t.adjacency.diagonal().setZero();
    const MatrixXd L = pinned_laplacian(t);
    CHECK((L * VectorXd::Ones(n) - t.pinning).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((L - MatrixXd(t.pinning.asDiagonal())).rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("topology validation") {
  Topology t = two_agents(0, 0);
  CHECK_THROWS_AS(t.validate(), DimensionMismatch);
  t = two_agents();
  t.adjacency(0, 0) = 1;
  CHECK_THROWS_AS(t.validate(), DimensionMismatch);
  t = two_agents();
  t.adjacency(0, 1) = -1;
  CHECK_THROWS_AS(t.validate(), DimensionMismatch);
}

TEST_CASE("control input examples") {
  const Topology t = two_agents(1, 0);
  const std::vector<MatrixXd> K{MatrixXd::Identity(2, 2)};
  const VectorXd g = VectorXd::Ones(1);
  const std::vector<VectorXd> est{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0)};
  CHECK(control_input(K, g, est, Eigen::Vector2d(0, 0), 0, t) == VectorXd(Eigen::Vector2d(2, 0)));

  const VectorXd leader = Eigen::Vector2d(0.3, -0.7);
  const std::vector<VectorXd> at_leader{leader, leader};
  CHECK(control_input(K, g, at_leader, leader, 1, two_agents()).isZero(0.0));

  CHECK_THROWS_AS(control_input(K, g, {est[0]}, leader, 0, t), MissingNeighborEstimate);
  CHECK_THROWS_AS(control_input(K, g, {est[0], VectorXd()}, leader, 0, t),
                  MissingNeighborEstimate);
}

TEST_CASE("control input is translation invariant and blends rule-wise") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const Topology t = two_agents();
  for (int trial = 0; trial < 100; ++trial) {
    auto rv = [&] { return VectorXd(Eigen::Vector2d(u(rng), u(rng))); };
    const std::vector<MatrixXd> K{MatrixXd::NullaryExpr(2, 2, [&] { return u(rng); }),
                                  MatrixXd::NullaryExpr(2, 2, [&] { return u(rng); })};
    const double p = 0.5 + 0.25 * u(rng);
    const VectorXd g = Eigen::Vector2d(p, 1 - p);
    const std::vector<VectorXd> est{rv(), rv()};
    const VectorXd leader = rv(), shift = rv();
    const std::vector<VectorXd> moved{est[0] + shift, est[1] + shift};
    for (int i = 0; i < 2; ++i) {
      const VectorXd a = control_input(K, g, est, leader, i, t);
      CHECK((a - control_input(K, g, moved, leader + shift, i, t)).norm() <= 1e-12);
      const VectorXd b = consensus_bracket(est, leader, i, t);
      CHECK((a - (g(0) * K[0] * b + g(1) * K[1] * b)).norm() <= 1e-12);
    }
  }
}
