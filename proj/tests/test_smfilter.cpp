#include <cmath>

#include "doctest.h"
#include "example_models.hpp"
#include "fsmf/errors.hpp"
#include "fsmf/smfilter.hpp"

using namespace fsmf;
using namespace fsmf::testdata;

namespace {

Topology pair_topology() {
  return {Eigen::Matrix2d{{0, 1}, {1, 0}}, Eigen::Vector2d(1, 1)};
}

struct OneStep {
  TSModel model = agent_model(1);
  Topology topo = pair_topology();
  AgentRuntime rt = AgentRuntime::initial(
      model, make_ellipsoid(Eigen::Vector2d(1, 1), MatrixXd(100.0 * Matrix2d::Identity())),
      make_ellipsoid(Eigen::Vector2d(1, 1), MatrixXd(100.0 * Matrix2d::Identity())));
  PredictionRequest req;

  OneStep() {
    req.agent = 0;
    req.topology = &topo;
    req.estimates = {Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1)};
    req.leader_state = Eigen::Vector2d(1, 1);
    req.Q = scalar(1.0);
  }
};

double output(const Eigen::Vector2d& x) { return x(0) + 0.1 * x(0) * x(0) + x(1); }

}  // namespace

TEST_CASE("prediction program structure") {
  OneStep s;
  const auto prog = build_prediction_program(s.rt, s.model, s.req);
  const auto& cons = prog.problem.constraints();
  // Zero H2 and E2 make that channel vacuous, so each block is 2 + 1 + 2 + 1 + 1 + 1.
  int blocks8 = 0, scalars = 0;
  for (const auto& c : cons) {
    blocks8 += c.expr.rows() == 8;
    scalars += c.expr.rows() == 1;
  }
  CHECK(blocks8 == 6);  // r^2 prediction blocks + r leader blocks
  CHECK(scalars == 8);
  CHECK(cons.size() == 14);
  CHECK(prog.tau.size() == 10);
  CHECK(prog.K.size() == 2);

  // A nonzero H2 brings the channel back.
  TSModel wide = s.model;
  wide.bounds.H2 = col(0.1, 0);
  const auto wprog = build_prediction_program(s.rt, wide, s.req);
  CHECK(wprog.problem.constraints().size() == 16);
  CHECK(wprog.problem.constraints().back().expr.rows() == 9);

  s.req.Q = scalar(0.0);
  CHECK_THROWS_AS(build_prediction_program(s.rt, s.model, s.req), DegenerateNoiseBound);
  s.req.Q = MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(build_prediction_program(s.rt, s.model, s.req), DimensionMismatch);
}

TEST_CASE("known applied input removes the consensus gains") {
  OneStep s;
  s.req.applied_input = VectorXd(Eigen::Vector2d(0.5, -0.5));
  const auto prog = build_prediction_program(s.rt, s.model, s.req);
  CHECK(prog.K.empty());
  CHECK(prog.problem.num_scalars() == 3 + 3 + 8 + 10);
}

TEST_CASE("constraint matrices are affine in the decision variables") {
  OneStep s;
  s.req.estimates[1] = Eigen::Vector2d(0.4, -0.2);
  const auto prog = build_prediction_program(s.rt, s.model, s.req);
  UpdateRequest ureq{VectorXd::Constant(1, 0.7), scalar(0.9)};
  AgentRuntime rt = s.rt;
  Matrix2d Pp;
  Pp << 3, 1, 1, 2;
  rt.prediction = make_ellipsoid(Eigen::Vector2d(0.2, 0.4), MatrixXd(Pp));
  const auto uprog = build_update_program(rt, s.model, ureq);

  for (const SdpProblem* p : {&prog.problem, &uprog.problem}) {
    const int m = p->num_scalars();
    const VectorXd y0 = VectorXd::LinSpaced(m, -1.0, 2.0);
    for (const auto& c : p->constraints()) {
      const MatrixXd base = c.expr.evaluate(y0);
      for (int i = 0; i < m; ++i) {
        for (double h : {1e-3, 1.0, 37.0}) {
          VectorXd y1 = y0, y2 = y0;
          y1(i) += h;
          y2(i) += 2 * h;
          const MatrixXd d1 = c.expr.evaluate(y1) - base, d2 = c.expr.evaluate(y2) - base;
          const double scale = std::max(1.0, d2.cwiseAbs().maxCoeff());
          CHECK((d2 - 2 * d1).cwiseAbs().maxCoeff() <= 1e-8 * scale);
        }
      }
    }
  }
}

TEST_CASE("single exact rule reduces to linear set propagation") {
  TSModel m;
  m.memberships = MembershipFamily::single();
  const MatrixXd A = m2(0.9, 0.1, 0, 0.8);
  m.rules.push_back({A, m2(1, 0, 0, 1), col(0, 0), row(1, 0), scalar(1), A});
  m.bounds = {MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 2), MatrixXd::Zero(2, 1),
              MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 2),
              MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)};
  const Topology topo{MatrixXd::Zero(1, 1), VectorXd::Ones(1)};
  const Eigen::Vector2d x0(1, -1);
  const auto set = make_ellipsoid(x0, MatrixXd(Matrix2d::Identity()));
  AgentRuntime rt = AgentRuntime::initial(m, set, set);
  PredictionRequest req;
  req.topology = &topo;
  req.estimates = {x0};
  req.leader_state = x0;
  req.Q = scalar(1.0);
  req.applied_input = VectorXd(Eigen::Vector2d::Zero());
  const auto prog = build_prediction_program(rt, m, req);
  int blocks = 0;
  for (const auto& c : prog.problem.constraints()) blocks += c.expr.rows() > 1;
  CHECK(blocks == 2);

  const auto out = predict(rt, m, req);
  REQUIRE(out.ok());
  CHECK((out.prediction->center() - A * x0).norm() <= 1e-5);
  // Exact linear image of the unit ball: A A^T is the smallest trace bound.
  CHECK(out.prediction->shape().trace() == doctest::Approx((A * A.transpose()).trace()).epsilon(1e-5));
}

TEST_CASE("predicted output examples") {
  const TSModel m = agent_model(1);
  CHECK(predicted_output(Eigen::Vector2d(1, 0), m, Eigen::Vector2d(0.5, 0.5))(0) ==
        doctest::Approx(1.05));
  CHECK(predicted_output(Eigen::Vector2d(0, 0), m, Eigen::Vector2d(0.3, 0.7))(0) == 0.0);
  TSModel single;
  single.rules.push_back(m.rules[1]);
  CHECK(predicted_output(Eigen::Vector2d(1, 2), single, VectorXd::Ones(1))(0) ==
        doctest::Approx(3.0));
}

TEST_CASE("first attack-free step contains the true state") {
  OneStep s;
  const auto out = predict(s.rt, s.model, s.req);
  INFO(out.solution.message, " status ", to_string(out.solution.status));
  REQUIRE(out.ok());
  CHECK(out.solution.max_residual <= 1e-7);
  CHECK(out.tau(4) == 0.0);
  CHECK(out.tau(9) == 0.0);
  // Plant from the origin with no process noise at k = 0.
  const VectorXd u = out.designed_input;
  const Eigen::Vector2d x1 = drift(1, Eigen::Vector2d::Zero()) + s.model.rules[0].B * u;
  CHECK(quadratic_form(*out.prediction, VectorXd(x1)) <= 1 + 1e-6);
  CHECK(quadratic_form(*out.leader_set, VectorXd(x1)) <= 1 + 1e-6);
  CHECK(out.leader_set->center().isApprox(leader_step(s.model, s.req.leader_state)));

  // A hand-built feasible point: zero gains, fixed multipliers, and P, U the
  // sum over blocks of Gamma Theta^{-1} Gamma^T with a small margin.
  {
    const auto prog = build_prediction_program(s.rt, s.model, s.req);
    VectorXd y = VectorXd::Zero(prog.problem.num_scalars());
    const double tau[5] = {0.3, 0.3, 0.2, 0.005, 0.1};
    for (int m = 0; m < 10; ++m) y(prog.tau[m].offset) = tau[m % 5];
    MatrixXd Pf = 1e-6 * MatrixXd::Identity(2, 2), Uf = Pf;
    for (const auto& c : prog.problem.constraints()) {
      if (c.expr.rows() == 1) continue;
      const MatrixXd F = c.expr.evaluate(y);
      const Eigen::Index d = F.rows() - 2;
      const MatrixXd G = F.topRightCorner(2, d), T = -F.bottomRightCorner(d, d);
      REQUIRE(T.llt().info() == Eigen::Success);
      (c.label.rfind("leader", 0) == 0 ? Uf : Pf) += G * T.llt().solve(G.transpose());
    }
    y.segment(prog.P.offset, 3) << Pf(0, 0), Pf(1, 0), Pf(1, 1);
    y.segment(prog.U.offset, 3) << Uf(0, 0), Uf(1, 0), Uf(1, 1);
    for (double v : certify(prog.problem, y)) CHECK(v <= 1e-9);
    CHECK(out.solution.objective <= Pf.trace() + Uf.trace());
  }

  // Update with the measurement of x1.
  AgentRuntime rt = s.rt;
  rt.prediction = out.prediction;
  UpdateRequest ureq{VectorXd::Constant(1, output(x1) + 0.5 * std::sin(20.0)),
                     scalar(1.0 - 1.0 / 50)};
  const auto up = update(rt, s.model, ureq);
  INFO(up.solution.message);
  REQUIRE(up.ok());
  CHECK(quadratic_form(*up.updated, VectorXd(x1)) <= 1 + 1e-6);
  CHECK(up.updated->shape().trace() <= out.prediction->shape().trace() + 1e-7);
}

TEST_CASE("update with zero innovation keeps the centre; zero gain keeps the set") {
  OneStep s;
  AgentRuntime rt = s.rt;
  Matrix2d Pp;
  Pp << 2, 0.5, 0.5, 1;
  rt.prediction = make_ellipsoid(Eigen::Vector2d(0.4, 0.3), MatrixXd(Pp));
  const VectorXd g = premise_weights(s.model, rt.prediction->center());
  const VectorXd yhat = predicted_output(rt.prediction->center(), s.model, g);
  const auto up = update(rt, s.model, {yhat, scalar(0.5)});
  REQUIRE(up.ok());
  CHECK((up.updated->center() - rt.prediction->center()).norm() <= 1e-12);

  // With L = 0 the program admits P = prediction shape: the block collapses to
  // the prediction's own containment, feasible with tau2 = tau4 = 0.
  const auto prog = build_update_program(rt, s.model, {yhat, scalar(0.5)});
  VectorXd y = VectorXd::Zero(prog.problem.num_scalars());
  y.segment(prog.P.offset, 3) << Pp(0, 0), Pp(1, 0), Pp(1, 1);
  y(prog.tau[0].offset) = 1.0 - 1e-9;
  bool feasible = true;
  for (double v : certify(prog.problem, y)) feasible = feasible && v <= 1e-8;
  CHECK(feasible);
  CHECK(up.updated->shape().trace() <= Pp.trace() + 1e-7);
}
