#pragma once

#include <optional>
#include <vector>

#include "fsmf/consensus.hpp"
#include "fsmf/ellipsoid.hpp"
#include "fsmf/fuzzy.hpp"
#include "fsmf/lmi.hpp"
#include "fsmf/sdp_solver.hpp"

namespace fsmf {

struct FilterGains {
  std::vector<MatrixXd> A_hat;  // prediction matrices, one per rule
  std::vector<MatrixXd> K;      // consensus gains, one per rule
  std::vector<MatrixXd> L;      // update gains, one per rule
};

struct AgentRuntime {
  EllipsoidD estimate;                   // X(k|k)
  std::optional<EllipsoidD> prediction;  // X(k+1|k)
  EllipsoidD leader_set;                 // U(k), centred on the leader state
  FilterGains gains;
  VectorXd multipliers = VectorXd::Zero(15);
  MatrixXd finsler;

  /// Zero gains sized for the model.
  static AgentRuntime initial(const TSModel& model, const EllipsoidD& estimate,
                              const EllipsoidD& leader_set);
};

struct PredictionRequest {
  int agent = 0;
  const Topology* topology = nullptr;
  std::vector<VectorXd> estimates;  // as received by this agent; own estimate at `agent`
  VectorXd leader_state;            // x^l(k)
  MatrixXd Q;
  /// Input known to reach the plant. When set, the program does not design K.
  std::optional<VectorXd> applied_input;
  /// Weight on the S-procedure multipliers in the objective (0 = pure trace).
  double multiplier_weight = 0.0;
};

struct PredictionProgram {
  SdpProblem problem;
  DecisionVar P, U;
  std::vector<DecisionVar> A_hat, K, tau;
  VectorXd g_hat;        // filter premise weights
  VectorXd bracket;      // consensus bracket
  VectorXd leader_next;  // x^l(k+1)
};

struct PredictionOutcome {
  std::optional<EllipsoidD> prediction;
  std::optional<EllipsoidD> leader_set;
  std::vector<MatrixXd> A_hat, K;
  VectorXd tau;
  VectorXd designed_input;  // sum_j g_j K_j b, empty when K was not designed
  VectorXd leader_next;
  SdpSolution solution;

  bool ok() const { return solution.ok() && prediction && leader_set; }
};

/// x^l(k+1) = sum_l g_l(theta) A^l_l x^l(k), premise taken from the leader state.
VectorXd leader_step(const TSModel& model, const VectorXd& leader_state);

PredictionProgram build_prediction_program(const AgentRuntime& rt, const TSModel& model,
                                           const PredictionRequest& req);
PredictionOutcome predict(const AgentRuntime& rt, const TSModel& model,
                          const PredictionRequest& req, double tol = 1e-7,
                          const SdpBackend& backend = default_backend());

/// sum_l g_l C_l xhat(k+1|k)
VectorXd predicted_output(const VectorXd& prediction_center, const TSModel& model,
                          const VectorXd& g);

struct UpdateRequest {
  VectorXd y;  // measurement fed to the filter
  MatrixXd R;
  double multiplier_weight = 0.0;
};

struct UpdateProgram {
  SdpProblem problem;
  DecisionVar P, Z;
  std::vector<DecisionVar> L, tau;
  VectorXd g_hat;
};

struct UpdateOutcome {
  std::optional<EllipsoidD> updated;
  std::vector<MatrixXd> L;
  MatrixXd Z;
  VectorXd tau;
  VectorXd y_hat;
  SdpSolution solution;

  bool ok() const { return solution.ok() && updated.has_value(); }
};

/// Requires rt.prediction.
UpdateProgram build_update_program(const AgentRuntime& rt, const TSModel& model,
                                   const UpdateRequest& req);
UpdateOutcome update(const AgentRuntime& rt, const TSModel& model, const UpdateRequest& req,
                     double tol = 1e-7, const SdpBackend& backend = default_backend());

}  // namespace fsmf
