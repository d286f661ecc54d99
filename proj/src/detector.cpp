#include "fsmf/detector.hpp"

#include <fstream>
#include <sstream>

#include "fsmf/errors.hpp"

namespace fsmf {

std::string to_string(Recovery r) {
  switch (r) {
    case Recovery::None:
      return "none";
    case Recovery::PredictionRollback:
      return "prediction_rollback";
    case Recovery::UpdateRollback:
      return "update_rollback";
    case Recovery::Both:
      return "both";
  }
  return "none";
}

bool detect_control_or_comm(const EllipsoidD& estimate, const EllipsoidD& prediction,
                            double margin) {
  return !intersects(estimate, prediction, IntersectionOptions{.margin = margin});
}

bool detect_sensor(const EllipsoidD& updated, const EllipsoidD& prediction, double margin) {
  return !intersects(updated, prediction, IntersectionOptions{.margin = margin});
}

void recover_prediction(AgentRuntime& rt, const VectorXd& last_input, VectorXd& applied_input) {
  rt.prediction = rt.estimate;
  applied_input = last_input;
}

void recover_update(EllipsoidD& updated, const EllipsoidD& prediction,
                    const VectorXd& last_measurement, VectorXd& filter_measurement) {
  updated = prediction;
  filter_measurement = last_measurement;
}

namespace {

struct AgentLoop {
  AgentRuntime rt;
  VectorXd x;
  VectorXd last_input;        // u(k-1) as designed
  VectorXd last_measurement;  // y(k) on the filter path
  std::vector<VectorXd> outputs;  // genuine y(t)
  NoiseSource noise;
};

EllipsoidD inflated(const VectorXd& centre, const EllipsoidD& e) {
  return make_ellipsoid(centre, MatrixXd(1.1 * e.shape()));
}

void dump(const std::optional<std::filesystem::path>& dir, const SdpProblem& p, int k, int agent,
          const char* stage) {
  if (!dir) return;
  std::ostringstream name;
  name << "k" << k << "_agent" << agent + 1 << "_" << stage << ".dat-s";
  std::ofstream out(*dir / name.str());
  if (!out) throw IoFailure("cannot write " + (*dir / name.str()).string());
  p.write_sdpa(out);
}

}  // namespace

RunResult run_detection(const ScenarioConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const SdpBackend& backend = backend_by_name(cfg.backend);
  const int n = static_cast<int>(cfg.agents.size());
  if (opt.dump_dir) std::filesystem::create_directories(*opt.dump_dir);

  std::vector<AgentLoop> agents;
  for (int i = 0; i < n; ++i) {
    const auto& a = cfg.agents[i];
    AgentLoop s{AgentRuntime::initial(a.model, a.estimate, a.leader_set),
                a.x0,
                VectorXd::Zero(a.model.nu()),
                {},
                {},
                NoiseSource(cfg.noise_mode, cfg.process_noise, cfg.measurement_noise, cfg.Q,
                            cfg.R, cfg.seed + static_cast<std::uint64_t>(i))};
    const double v0 = s.noise.measurement(0);
    if (!noise_admissible(v0, cfg.R.at(0)))
      throw NumericalFailure("measurement noise outside its bound at k = 0");
    s.outputs.push_back(VectorXd::Constant(1, a.plant.measure(a.x0, v0)));
    s.last_measurement = s.outputs.back();
    agents.push_back(std::move(s));
  }
  VectorXd leader = cfg.leader_x0;

  RunResult res;
  auto emit_detection = [&](const DetectionRecord& d) {
    res.detections.push_back(d);
    if (opt.sink) opt.sink->detection(d);
  };
  auto accept = [&](const SdpSolution& s) {
    ++res.solves;
    res.max_residual = std::max(res.max_residual, s.max_residual);
  };
  auto finish = [&](bool aborted, std::string why) {
    res.aborted = aborted;
    res.abort_reason = std::move(why);
    for (const auto& a : agents) res.final_states.push_back(a.x);
    res.final_leader = leader;
    if (opt.sink) opt.sink->flush();
    return res;
  };

  for (int k = 0; k < cfg.horizon; ++k) {
    const MatrixXd Qk = cfg.Q.matrix(k, 1), Rk1 = cfg.R.matrix(k + 1, 1);
    std::vector<VectorXd> estimates;
    for (const auto& a : agents) estimates.push_back(a.rt.estimate.center());

    std::vector<StepRecord> recs(n);
    std::vector<DetectionRecord> dets(n);
    std::vector<VectorXd> applied(n);
    std::vector<EllipsoidD> leader_before(n);

    // Prediction and step-3 detection for every agent before any measurement.
    for (int i = 0; i < n; ++i) {
      auto& s = agents[i];
      const TSModel& model = cfg.agents[i].model;
      auto& rec = recs[i];
      auto& det = dets[i];
      rec.k = det.k = k;
      rec.agent = det.agent = i;
      rec.x = s.x;
      rec.leader = leader;
      rec.estimate = s.rt.estimate.center();
      rec.tr_estimate = trace_size(s.rt.estimate);
      rec.tr_leader_set = trace_size(s.rt.leader_set);
      rec.consensus_error = (s.x - leader).norm();
      leader_before[i] = s.rt.leader_set;

      PredictionRequest req;
      req.agent = i;
      req.topology = &cfg.topology;
      for (int j = 0; j < n; ++j)
        req.estimates.push_back(j == i ? estimates[j]
                                       : apply_channel_attack(cfg.attack, k, j, i, estimates[j]));
      req.leader_state = leader;
      req.Q = Qk;
      req.multiplier_weight = cfg.multiplier_weight;
      if (opt.dump_dir) dump(opt.dump_dir, build_prediction_program(s.rt, model, req).problem, k, i, "predict");

      auto solve_prediction = [&](const PredictionRequest& r) {
        PredictionOutcome out = predict(s.rt, model, r, cfg.tol, backend);
        if (!out.ok() && cfg.tol * 10 <= 1e-4) {
          det.events.push_back("solver_retry");
          out = predict(s.rt, model, r, cfg.tol * 10, backend);
        }
        return out;
      };

      PredictionOutcome out = solve_prediction(req);
      std::vector<MatrixXd> A_hat, K;
      EllipsoidD prediction, leader_next_set;
      VectorXd designed;
      const VectorXd g = premise_weights(model, s.rt.estimate.center());
      if (out.ok()) {
        accept(out.solution);
        if (opt.on_solve) opt.on_solve(build_prediction_program(s.rt, model, req).problem, out.solution);
        rec.residual_prediction = out.solution.max_residual;
        A_hat = out.A_hat;
        K = out.K;
        designed = out.designed_input;
        prediction = *out.prediction;
        leader_next_set = *out.leader_set;
        s.rt.multipliers.head(10) = out.tau;
      } else {
        // Held gains, sets inflated by 10 %.
        det.events.push_back("solver_fallback");
        ++det.solver_fallbacks;
        A_hat = s.rt.gains.A_hat;
        K = s.rt.gains.K;
        designed = control_input(K, g, req.estimates, leader, i, cfg.topology);
        prediction = inflated(blend(A_hat, g) * s.rt.estimate.center(), s.rt.estimate);
        leader_next_set = inflated(leader_step(model, leader), s.rt.leader_set);
      }

      VectorXd u = apply_control_attack(cfg.attack, i, k, designed);
      if (out.ok() && u != designed) {
        // The input reaching the plant differs from the designed one: propagate
        // with the input actually applied.
        PredictionRequest known = req;
        known.applied_input = u;
        const PredictionOutcome again = solve_prediction(known);
        if (again.ok()) {
          accept(again.solution);
          if (opt.on_solve)
            opt.on_solve(build_prediction_program(s.rt, model, known).problem, again.solution);
          rec.residual_prediction = std::max(rec.residual_prediction, again.solution.max_residual);
          A_hat = again.A_hat;
          prediction = *again.prediction;
          leader_next_set = *again.leader_set;
          s.rt.multipliers.head(10) = again.tau;
        } else {
          det.events.push_back("solver_fallback");
          ++det.solver_fallbacks;
          prediction = inflated(blend(A_hat, g) * s.rt.estimate.center(), s.rt.estimate);
          leader_next_set = inflated(leader_step(model, leader), s.rt.leader_set);
        }
      }
      rec.designed_input = designed;

      det.step3_alarm = detect_control_or_comm(s.rt.estimate, prediction, cfg.intersect_margin);
      s.rt.prediction = prediction;
      if (det.step3_alarm && cfg.recovery) {
        recover_prediction(s.rt, s.last_input, u);
        det.recovery = Recovery::PredictionRollback;
      } else {
        s.rt.gains.A_hat = A_hat;
        s.rt.gains.K = K;
        s.rt.leader_set = leader_next_set;
        s.last_input = designed;
      }
      applied[i] = u;
      rec.applied_input = u;
      rec.prediction = s.rt.prediction->center();
      rec.tr_prediction = trace_size(*s.rt.prediction);
      res.fallbacks += det.solver_fallbacks;
    }

    // Plant, measurement, update and step-6 detection.
    for (int i = 0; i < n; ++i) {
      auto& s = agents[i];
      const auto& acfg = cfg.agents[i];
      auto& rec = recs[i];
      auto& det = dets[i];
      const double w = s.noise.process(k);
      const double v = s.noise.measurement(k + 1);
      if (!noise_admissible(w, cfg.Q.at(k)) || !noise_admissible(v, cfg.R.at(k + 1)))
        throw NumericalFailure("noise outside its bound at k = " + std::to_string(k));
      s.x = acfg.plant.step(s.x, applied[i], w);
      const VectorXd y = VectorXd::Constant(1, acfg.plant.measure(s.x, v));
      s.outputs.push_back(y);
      const VectorXd y_att = apply_sensor_attack(cfg.attack, i, k + 1, y, s.outputs);
      rec.y_raw = y;
      rec.y_attacked = y_att;

      const EllipsoidD prediction = *s.rt.prediction;
      UpdateRequest ureq{y_att, Rk1, cfg.multiplier_weight};
      if (opt.dump_dir) dump(opt.dump_dir, build_update_program(s.rt, acfg.model, ureq).problem, k, i, "update");
      UpdateOutcome up = update(s.rt, acfg.model, ureq, cfg.tol, backend);
      if (!up.ok() && cfg.tol * 10 <= 1e-4) {
        det.events.push_back("solver_retry");
        up = update(s.rt, acfg.model, ureq, cfg.tol * 10, backend);
      }
      EllipsoidD updated = prediction;
      VectorXd y_filter = y_att;
      if (up.ok()) {
        accept(up.solution);
        if (opt.on_solve) opt.on_solve(build_update_program(s.rt, acfg.model, ureq).problem, up.solution);
        rec.residual_update = up.solution.max_residual;
        updated = *up.updated;
        s.rt.gains.L = up.L;
        s.rt.finsler = up.Z;
        s.rt.multipliers.tail(5) = up.tau;
        det.step6_alarm = detect_sensor(updated, prediction, cfg.intersect_margin);
        if (det.step6_alarm && cfg.recovery) {
          recover_update(updated, prediction, s.last_measurement, y_filter);
          det.recovery =
              det.recovery == Recovery::None ? Recovery::UpdateRollback : Recovery::Both;
        }
      } else {
        // Treated as a rejected measurement.
        det.events.push_back("update_infeasible");
        ++det.solver_fallbacks;
        ++res.fallbacks;
        y_filter = s.last_measurement;
      }
      s.last_measurement = y_filter;
      rec.y_filter = y_filter;
      rec.updated = updated.center();
      rec.tr_updated = trace_size(updated);
      rec.q_prediction = quadratic_form(prediction, s.x);
      rec.q_updated = quadratic_form(updated, s.x);
      rec.q_leader = quadratic_form(s.rt.leader_set, s.x);
      rec.step3_alarm = det.step3_alarm;
      rec.step6_alarm = det.step6_alarm;
      rec.recovery = det.recovery;
      rec.solver_fallbacks = det.solver_fallbacks;
      res.sets.push_back({k, i, s.rt.estimate, prediction, updated, leader_before[i]});
      s.rt.estimate = updated;
      s.rt.prediction.reset();
    }

    leader = leader_step(cfg.agents.front().model, leader);
    for (int i = 0; i < n; ++i) {
      res.steps.push_back(recs[i]);
      if (opt.sink) opt.sink->step(recs[i]);
      const auto& d = dets[i];
      if (d.step3_alarm || d.step6_alarm || !d.events.empty()) emit_detection(d);
    }
    res.completed_steps = k + 1;
    if (res.fallbacks > cfg.fallback_budget)
      return finish(true, "solver fallback budget exceeded at k = " + std::to_string(k));
  }
  return finish(false, {});
}

}  // namespace fsmf
