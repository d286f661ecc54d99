#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsmf/scenario.hpp"
#include "fsmf/smfilter.hpp"

namespace fsmf {

enum class Recovery { None, PredictionRollback, UpdateRollback, Both };
std::string to_string(Recovery r);

struct DetectionRecord {
  int k = 0;
  int agent = 0;
  bool step3_alarm = false;
  bool step6_alarm = false;
  Recovery recovery = Recovery::None;
  int solver_fallbacks = 0;
  std::vector<std::string> events;  // solver_fallback, update_infeasible, ...
};

struct StepRecord {
  int k = 0;
  int agent = 0;
  VectorXd x;           // x(k)
  VectorXd leader;      // x^l(k)
  VectorXd estimate;    // xhat(k|k)
  VectorXd prediction;  // xhat(k+1|k) after any rollback
  VectorXd updated;     // xhat(k+1|k+1) after any rollback
  double tr_estimate = 0, tr_prediction = 0, tr_updated = 0, tr_leader_set = 0;
  VectorXd designed_input, applied_input;
  VectorXd y_raw, y_attacked, y_filter;  // at k+1
  bool step3_alarm = false, step6_alarm = false;
  Recovery recovery = Recovery::None;
  int solver_fallbacks = 0;
  double consensus_error = 0;  // |x(k) - x^l(k)|
  // Quadratic forms of x(k+1) in X(k+1|k), X(k+1|k+1) and U(k+1).
  double q_prediction = 0, q_updated = 0, q_leader = 0;
  double residual_prediction = 0, residual_update = 0;
};

struct SetSnapshot {
  int k = 0;
  int agent = 0;
  EllipsoidD estimate, prediction, updated, leader_set;  // X(k|k), X(k+1|k), X(k+1|k+1), U(k)
};

/// Receives records as the loop produces them.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void step(const StepRecord&) {}
  virtual void detection(const DetectionRecord&) {}
  virtual void flush() {}
};

struct RunResult {
  std::vector<StepRecord> steps;
  std::vector<DetectionRecord> detections;
  std::vector<SetSnapshot> sets;
  std::vector<VectorXd> final_states;
  VectorXd final_leader;
  int completed_steps = 0;
  int solves = 0;
  int fallbacks = 0;
  double max_residual = -1e300;  // over accepted solves
  bool aborted = false;
  std::string abort_reason;
};

struct RunOptions {
  std::optional<std::filesystem::path> dump_dir;  // SDPA files per solve
  RecordSink* sink = nullptr;
  /// Called with every accepted solve and the program it solved.
  std::function<void(const SdpProblem&, const SdpSolution&)> on_solve;
};

/// Step-3 criterion: alarm when X(k|k) and X(k+1|k) do not intersect.
bool detect_control_or_comm(const EllipsoidD& estimate, const EllipsoidD& prediction,
                            double margin = 0.0);
/// Step-6 criterion: alarm when X(k+1|k+1) and X(k+1|k) do not intersect.
bool detect_sensor(const EllipsoidD& updated, const EllipsoidD& prediction, double margin = 0.0);

/// X(k+1|k) <- X(k|k); U(k+1) <- U(k); u(k) <- u(k-1). The leader set is left as is.
void recover_prediction(AgentRuntime& rt, const VectorXd& last_input, VectorXd& applied_input);
/// X(k+1|k+1) <- X(k+1|k); y(k+1) <- y(k) on the filter path.
void recover_update(EllipsoidD& updated, const EllipsoidD& prediction,
                    const VectorXd& last_measurement, VectorXd& filter_measurement);

/// Runs the recursive estimation and detection loop. Solver failures beyond
/// the fallback budget stop the run with aborted = true and partial records.
RunResult run_detection(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace fsmf
