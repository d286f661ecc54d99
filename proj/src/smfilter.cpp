#include "fsmf/smfilter.hpp"

#include <string>

#include <Eigen/Cholesky>

#include "fsmf/errors.hpp"

namespace fsmf {

namespace {

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols())
    throw DegenerateNoiseBound(std::string(what) + ": bound matrix is not square");
  Eigen::LLT<MatrixXd> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw DegenerateNoiseBound(std::string(what) + ": bound matrix is not positive definite");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

AffineMatrixExpr one(double v = 1.0) { return MatrixXd::Constant(1, 1, v); }

// S-procedure multiplier matrix for the block vector
//   [1, z, noise, q_a, q_b, q_c]
// with constraints |z| <= 1, noise^T W noise <= 1, |q_a| <= |E c|, |q_b| <= |E F z|,
// |q_c| <= |E_n noise|.
AffineMatrixExpr theta_block(SdpProblem& p, const std::vector<DecisionVar>& tau, int first,
                             const VectorXd& centre, const MatrixXd& factor, const MatrixXd& E,
                             const MatrixXd& W, const MatrixXd& En, Eigen::Index pc) {
  const auto t = [&](int m) { return p.expr(tau[first + m]); };
  const double ec = (E * centre).squaredNorm();
  const MatrixXd EF = E * factor;
  const Eigen::Index nx = factor.cols(), pe = E.rows();
  return blkdiag({one() - t(0) - t(1) - ec * t(2),
                  scalar_times(t(0), MatrixXd::Identity(nx, nx)) -
                      scalar_times(t(3), EF.transpose() * EF),
                  scalar_times(t(1), W) - scalar_times(t(4), En.transpose() * En),
                  scalar_times(t(2), MatrixXd::Identity(pe, pe)),
                  scalar_times(t(3), MatrixXd::Identity(pe, pe)),
                  scalar_times(t(4), MatrixXd::Identity(pc, pc))});
}

// A channel whose input and output bounds both vanish carries no uncertainty.
// Its S-procedure term is vacuous and its multiplier would only add a
// decoupled diagonal entry, leaving the optimal set unbounded along it.
bool vacuous(const MatrixXd& H, const MatrixXd& E) { return H.isZero(0.0) && E.isZero(0.0); }

MatrixXd trim_cols(const MatrixXd& H, bool drop) { return drop ? MatrixXd(H.rows(), 0) : H; }
MatrixXd trim_rows(const MatrixXd& E, bool drop) { return drop ? MatrixXd(0, E.cols()) : E; }

// Multipliers of dropped channels stay as unconstrained scalars that enter no
// constraint; the solver's presolve fixes them at zero.
std::vector<DecisionVar> add_multipliers(SdpProblem& p, int first, const std::vector<bool>& active,
                                         double weight) {
  std::vector<DecisionVar> tau;
  for (std::size_t m = 0; m < active.size(); ++m) {
    const std::string name = "tau" + std::to_string(first + static_cast<int>(m));
    if (!active[m]) {
      tau.push_back(p.add_matrix(name, 1, 1));
      continue;
    }
    tau.push_back(p.add_nonnegative(name));
    if (weight > 0.0) p.add_objective_trace(tau.back(), weight);
  }
  return tau;
}

}  // namespace

AgentRuntime AgentRuntime::initial(const TSModel& model, const EllipsoidD& estimate,
                                   const EllipsoidD& leader_set) {
  AgentRuntime rt;
  rt.estimate = estimate;
  rt.leader_set = leader_set;
  const int r = model.rule_count(), nx = model.nx(), nu = model.nu(), ny = model.ny();
  rt.gains.A_hat.assign(r, MatrixXd::Zero(nx, nx));
  rt.gains.K.assign(r, MatrixXd::Zero(nu, nx));
  rt.gains.L.assign(r, MatrixXd::Zero(nx, ny));
  return rt;
}

VectorXd leader_step(const TSModel& model, const VectorXd& leader_state) {
  const VectorXd g = premise_weights(model, leader_state);
  VectorXd next = VectorXd::Zero(leader_state.size());
  for (int l = 0; l < model.rule_count(); ++l) next += g(l) * model.rules[l].A_leader * leader_state;
  return next;
}

PredictionProgram build_prediction_program(const AgentRuntime& rt, const TSModel& model,
                                           const PredictionRequest& req) {
  model.validate();
  if (!req.topology) throw DimensionMismatch("prediction: topology missing");
  const int r = model.rule_count(), nx = model.nx(), nu = model.nu();
  const auto& bd = model.bounds;
  const VectorXd& xh = rt.estimate.center();
  const VectorXd& xl = rt.leader_set.center();
  if (xh.size() != nx || req.leader_state.size() != nx || xl.size() != nx)
    throw DimensionMismatch("prediction: state dimension");
  if (req.Q.rows() != model.nw()) throw DimensionMismatch("prediction: Q dimension");
  if (req.applied_input && req.applied_input->size() != nu)
    throw DimensionMismatch("prediction: applied input dimension");
  const MatrixXd Qinv = spd_inverse(req.Q, "prediction");
  const MatrixXd Xi = shape_factor(rt.estimate);
  const MatrixXd xi = shape_factor(rt.leader_set);

  PredictionProgram out;
  out.g_hat = premise_weights(model, xh);
  out.bracket = consensus_bracket(req.estimates, req.leader_state, req.agent, *req.topology);
  out.leader_next = leader_step(model, req.leader_state);

  auto& p = out.problem;
  out.P = p.add_symmetric("P_pred", nx);
  out.U = p.add_symmetric("U_next", nx);
  for (int j = 0; j < r; ++j) out.A_hat.push_back(p.add_matrix("A_hat" + std::to_string(j + 1), nx, nx));
  if (!req.applied_input)
    for (int j = 0; j < r; ++j) out.K.push_back(p.add_matrix("K" + std::to_string(j + 1), nu, nx));
  const bool drop1 = vacuous(bd.H1, bd.E1), drop2 = vacuous(bd.H2, bd.E2);
  const std::vector<bool> active{true, true, !drop1, !drop1, !drop2};
  std::vector<bool> both = active;
  both.insert(both.end(), active.begin(), active.end());
  out.tau = add_multipliers(p, 1, both, req.multiplier_weight);
  p.add_objective_trace(out.P);
  p.add_objective_trace(out.U);
  const MatrixXd H1 = trim_cols(bd.H1, drop1), E1 = trim_rows(bd.E1, drop1);
  const MatrixXd H2 = trim_cols(bd.H2, drop2), E2 = trim_rows(bd.E2, drop2);

  // Input reaching the plant: either designed (sum_j g_j K_j b) or known.
  AffineMatrixExpr input = req.applied_input ? AffineMatrixExpr(MatrixXd(*req.applied_input))
                                             : AffineMatrixExpr(nu, 1);
  if (!req.applied_input)
    for (int j = 0; j < r; ++j) input += out.g_hat(j) * (p.expr(out.K[j]) * MatrixXd(out.bracket));

  const AffineMatrixExpr theta1 = theta_block(p, out.tau, 0, xh, Xi, E1, Qinv, E2, H2.cols());
  const AffineMatrixExpr theta2 = theta_block(p, out.tau, 5, xl, xi, E1, Qinv, E2, H2.cols());

  for (int l = 0; l < r; ++l) {
    const auto& rule = model.rules[l];
    const AffineMatrixExpr drive = rule.B * input;
    for (int j = 0; j < r; ++j) {
      const AffineMatrixExpr centre =
          AffineMatrixExpr(MatrixXd(rule.A * xh)) - p.expr(out.A_hat[j]) * MatrixXd(xh) + drive;
      const AffineMatrixExpr gamma =
          hcat({centre, MatrixXd(rule.A * Xi), rule.M, H1, H1, H2});
      p.add_lmi(schur_embed(p.expr(out.P), gamma, theta1),
                "prediction l=" + std::to_string(l + 1) + " j=" + std::to_string(j + 1));
    }
    const AffineMatrixExpr centre =
        AffineMatrixExpr(MatrixXd(rule.A * xl - out.leader_next)) + drive;
    const AffineMatrixExpr gamma = hcat({centre, MatrixXd(rule.A * xi), rule.M, H1, H1, H2});
    p.add_lmi(schur_embed(p.expr(out.U), gamma, theta2), "leader l=" + std::to_string(l + 1));
  }
  return out;
}

PredictionOutcome predict(const AgentRuntime& rt, const TSModel& model,
                          const PredictionRequest& req, double tol, const SdpBackend& backend) {
  const PredictionProgram prog = build_prediction_program(rt, model, req);
  PredictionOutcome out;
  out.leader_next = prog.leader_next;
  out.solution = solve(prog.problem, tol, backend);
  if (!out.solution.ok()) return out;
  const auto& y = out.solution.y;
  const auto& p = prog.problem;
  VectorXd centre = VectorXd::Zero(model.nx());
  for (int j = 0; j < model.rule_count(); ++j) {
    out.A_hat.push_back(p.value(prog.A_hat[j], y));
    centre += prog.g_hat(j) * out.A_hat.back() * rt.estimate.center();
  }
  if (!prog.K.empty()) {
    out.designed_input = VectorXd::Zero(model.nu());
    for (int j = 0; j < model.rule_count(); ++j) {
      out.K.push_back(p.value(prog.K[j], y));
      out.designed_input += prog.g_hat(j) * out.K.back() * prog.bracket;
    }
  }
  out.tau.resize(10);
  for (int m = 0; m < 10; ++m) out.tau(m) = y(prog.tau[m].offset);
  try {
    out.prediction = make_ellipsoid(centre, p.value(prog.P, y));
    out.leader_set = make_ellipsoid(prog.leader_next, p.value(prog.U, y));
  } catch (const NotPositiveDefinite& e) {
    out.prediction.reset();
    out.leader_set.reset();
    out.solution.status = SdpStatus::NumericalTrouble;
    out.solution.message = e.what();
  }
  return out;
}

VectorXd predicted_output(const VectorXd& prediction_center, const TSModel& model,
                          const VectorXd& g) {
  VectorXd y = VectorXd::Zero(model.ny());
  for (int l = 0; l < model.rule_count(); ++l) y += g(l) * model.rules[l].C * prediction_center;
  return y;
}

UpdateProgram build_update_program(const AgentRuntime& rt, const TSModel& model,
                                   const UpdateRequest& req) {
  model.validate();
  if (!rt.prediction) throw DimensionMismatch("update: no prediction available");
  const int r = model.rule_count(), nx = model.nx(), ny = model.ny();
  const auto& bd = model.bounds;
  if (req.y.size() != ny) throw DimensionMismatch("update: measurement dimension");
  if (req.R.rows() != model.nv()) throw DimensionMismatch("update: R dimension");
  const MatrixXd Rinv = spd_inverse(req.R, "update");
  const VectorXd& xp = rt.prediction->center();
  const MatrixXd Xp = shape_factor(*rt.prediction);

  UpdateProgram out;
  out.g_hat = premise_weights(model, xp);
  auto& p = out.problem;
  out.P = p.add_symmetric("P_upd", nx);
  for (int j = 0; j < r; ++j) out.L.push_back(p.add_matrix("L" + std::to_string(j + 1), nx, ny));
  const bool drop3 = vacuous(bd.H3, bd.E3), drop4 = vacuous(bd.H4, bd.E4);
  const MatrixXd H3 = trim_cols(bd.H3, drop3), E3 = trim_rows(bd.E3, drop3);
  const MatrixXd H4 = trim_cols(bd.H4, drop4), E4 = trim_rows(bd.E4, drop4);
  const Eigen::Index dim = 1 + nx + model.nv() + 2 * H3.cols() + H4.cols();
  out.Z = p.add_matrix("Z", ny, static_cast<int>(dim));
  out.tau = add_multipliers(p, 11, {true, true, !drop3, !drop3, !drop4}, req.multiplier_weight);
  p.add_objective_trace(out.P);

  const AffineMatrixExpr theta3 =
      theta_block(p, out.tau, 0, xp, Xp, E3, Rinv, E4, H4.cols());
  const AffineMatrixExpr Z = p.expr(out.Z);
  for (int l = 0; l < r; ++l) {
    const auto& rule = model.rules[l];
    MatrixXd gy(ny, dim);
    gy << rule.C * xp - req.y, rule.C * Xp, rule.D, H3, H3, H4;
    const AffineMatrixExpr theta4 = theta3 - Z.transpose() * gy - MatrixXd(gy.transpose()) * Z;
    for (int j = 0; j < r; ++j) {
      const AffineMatrixExpr Lj = p.expr(out.L[j]);
      const AffineMatrixExpr gamma =
          hcat({AffineMatrixExpr(nx, 1), Xp - Lj * MatrixXd(rule.C * Xp), -(Lj * rule.D),
                -(Lj * H3), -(Lj * H3), -(Lj * H4)});
      p.add_lmi(schur_embed(p.expr(out.P), gamma, theta4),
                "update l=" + std::to_string(l + 1) + " j=" + std::to_string(j + 1));
    }
  }
  return out;
}

UpdateOutcome update(const AgentRuntime& rt, const TSModel& model, const UpdateRequest& req,
                     double tol, const SdpBackend& backend) {
  const UpdateProgram prog = build_update_program(rt, model, req);
  UpdateOutcome out;
  const VectorXd& xp = rt.prediction->center();
  out.y_hat = predicted_output(xp, model, prog.g_hat);
  out.solution = solve(prog.problem, tol, backend);
  if (!out.solution.ok()) return out;
  const auto& y = out.solution.y;
  const auto& p = prog.problem;
  VectorXd centre = xp;
  for (int j = 0; j < model.rule_count(); ++j) {
    out.L.push_back(p.value(prog.L[j], y));
    centre += prog.g_hat(j) * out.L.back() * (req.y - out.y_hat);
  }
  out.Z = p.value(prog.Z, y);
  out.tau.resize(5);
  for (int m = 0; m < 5; ++m) out.tau(m) = y(prog.tau[m].offset);
  try {
    out.updated = make_ellipsoid(centre, p.value(prog.P, y));
  } catch (const NotPositiveDefinite& e) {
    out.updated.reset();
    out.solution.status = SdpStatus::NumericalTrouble;
    out.solution.message = e.what();
  }
  return out;
}

}  // namespace fsmf
