#include <algorithm>

#include "doctest.h"
#include "fsmf/detector.hpp"
#include "fsmf/errors.hpp"

using namespace fsmf;

namespace {

ScenarioConfig bundled(const std::string& name, int horizon = 50) {
  auto cfg = load_scenario(std::filesystem::path(FSMF_SCENARIO_DIR) / (name + ".cfg"));
  cfg.horizon = horizon;
  return cfg;
}

EllipsoidD ball(double x, double y, double r = 1.0) {
  return make_ellipsoid(Eigen::Vector2d(x, y), MatrixXd(r * r * MatrixXd::Identity(2, 2)));
}

struct Collect final : RecordSink {
  std::vector<StepRecord> steps;
  std::vector<DetectionRecord> detections;
  int flushes = 0;
  void step(const StepRecord& r) override { steps.push_back(r); }
  void detection(const DetectionRecord& d) override { detections.push_back(d); }
  void flush() override { ++flushes; }
};

}  // namespace

TEST_CASE("detection criteria") {
  CHECK_FALSE(detect_control_or_comm(ball(0, 0), ball(0, 0)));
  CHECK(detect_control_or_comm(ball(0, 0), ball(3, 0)));
  CHECK_FALSE(detect_sensor(ball(0, 0), ball(0, 0)));
  CHECK(detect_sensor(ball(0, 0), ball(3, 0)));
  CHECK_FALSE(detect_sensor(ball(0, 0), ball(2, 0)));  // tangent
  // A positive margin tolerates a small gap.
  CHECK_FALSE(detect_sensor(ball(0, 0), ball(2.01, 0), 0.1));
}

TEST_CASE("rollbacks copy sets and signals exactly and are idempotent") {
  AgentRuntime rt;
  rt.estimate = make_ellipsoid(Eigen::Vector2d(0.3, -0.2), MatrixXd(MatrixXd{{2, 0.5}, {0.5, 1}}));
  rt.prediction = ball(5, 5);
  const VectorXd last = Eigen::Vector2d(0.1, -0.7);
  VectorXd u = Eigen::Vector2d(4, 4);
  recover_prediction(rt, last, u);
  REQUIRE(rt.prediction);
  CHECK(rt.prediction->center() == rt.estimate.center());
  CHECK(rt.prediction->shape() == rt.estimate.shape());
  CHECK(u == last);
  const EllipsoidD once = *rt.prediction;
  recover_prediction(rt, last, u);
  CHECK(rt.prediction->shape() == once.shape());
  CHECK(u == last);

  EllipsoidD updated = ball(9, 9);
  const EllipsoidD prediction = ball(0.5, 0.5, 2);
  VectorXd y = VectorXd::Constant(1, 3.0);
  recover_update(updated, prediction, VectorXd::Constant(1, -0.25), y);
  CHECK(updated.center() == prediction.center());
  CHECK(updated.shape() == prediction.shape());
  CHECK(y(0) == -0.25);
}

TEST_CASE("record completeness and determinism on a short attack-free run") {
  const auto cfg = bundled("attack_free", 8);
  Collect sink;
  RunOptions opt;
  opt.sink = &sink;
  const RunResult a = run_detection(cfg, opt);
  const RunResult b = run_detection(cfg);
  CHECK_FALSE(a.aborted);
  CHECK(a.completed_steps == 8);
  REQUIRE(a.steps.size() == 8 * 2);
  CHECK(sink.steps.size() == a.steps.size());
  CHECK(sink.flushes == 1);
  for (std::size_t n = 0; n < a.steps.size(); ++n) {
    CHECK(a.steps[n].k == static_cast<int>(n / 2));
    CHECK(a.steps[n].agent == static_cast<int>(n % 2));
    CHECK(a.steps[n].x == b.steps[n].x);
    CHECK(a.steps[n].updated == b.steps[n].updated);
    CHECK(a.steps[n].tr_updated == b.steps[n].tr_updated);
  }
  CHECK(a.fallbacks == 0);
  CHECK(a.solves == 4 * 8);
  CHECK(a.max_residual <= 1e-6);
  for (const auto& s : a.steps) {
    CHECK_FALSE(s.step3_alarm);
    CHECK_FALSE(s.step6_alarm);
    CHECK(s.q_prediction <= 1 + 1e-6);
    CHECK(s.q_updated <= 1 + 1e-6);
    CHECK(s.q_leader <= 1 + 1e-6);
    // Sets shrink monotonically through an update.
    CHECK(s.tr_updated <= s.tr_prediction + 1e-7);
  }
  // Step 3 of the next step compares against the set this step produced.
  for (std::size_t n = 2; n < a.steps.size(); ++n)
    CHECK(a.steps[n].estimate == a.steps[n - 2].updated);
}

TEST_CASE("control injection: alarms, rollback and frozen input") {
  const auto cfg = bundled("fdi_control", 28);
  const RunResult r = run_detection(cfg);
  REQUIRE_FALSE(r.aborted);
  for (const auto& d : r.detections) {
    CAPTURE(d.k);
    if (d.recovery == Recovery::PredictionRollback || d.recovery == Recovery::Both)
      CHECK(d.step3_alarm);
    if (d.recovery == Recovery::UpdateRollback || d.recovery == Recovery::Both)
      CHECK(d.step6_alarm);
    // Every alarm has a matching step record.
    const auto it = std::find_if(r.steps.begin(), r.steps.end(),
                                 [&](const StepRecord& s) { return s.k == d.k && s.agent == d.agent; });
    REQUIRE(it != r.steps.end());
    CHECK(it->step3_alarm == d.step3_alarm);
    CHECK(it->step6_alarm == d.step6_alarm);
  }
  for (int agent = 0; agent < 2; ++agent) {
    VectorXd before;
    for (const auto& s : r.steps) {
      if (s.agent != agent) continue;
      if (s.k == 19) before = s.designed_input;
      if (s.k < 20 || s.k > 25) continue;
      CAPTURE(s.k);
      CHECK(s.step3_alarm);
      // Rolled back to u(19) for the whole window.
      CHECK(s.applied_input == before);
      CHECK(s.estimate.size() == 2);
    }
  }
}

TEST_CASE("recovery at the first step falls back to a zero input") {
  auto cfg = bundled("fdi_control", 2);
  cfg.attack.active = {0, 0};
  const RunResult r = run_detection(cfg);
  for (const auto& s : r.steps) {
    if (s.k != 0 || !s.step3_alarm) continue;
    CHECK(s.applied_input == VectorXd::Zero(2));
  }
}

TEST_CASE("fallback budget aborts with partial records") {
  auto cfg = bundled("attack_free", 40);
  cfg.tol = 1e-10;
  cfg.fallback_budget = 0;
  Collect sink;
  RunOptions opt;
  opt.sink = &sink;
  const RunResult r = run_detection(cfg, opt);
  if (r.fallbacks > 0) {
    CHECK(r.aborted);
    CHECK(r.abort_reason.find("budget") != std::string::npos);
    CHECK(static_cast<int>(sink.steps.size()) == 2 * r.completed_steps);
    CHECK(sink.flushes == 1);
  } else {
    CHECK_FALSE(r.aborted);
  }
}
