#include "fsmf/output.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "json.hpp"

#include "fsmf/errors.hpp"

namespace fsmf {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kContainmentSlack = 1e-6;

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + file.string());
  return out;
}

void put_vec(std::ostream& os, const VectorXd& v, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) os << ',' << (i < v.size() ? format_double(v(i)) : "");
}

void put_names(std::ostream& os, const char* base, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) os << ',' << base << '_' << i + 1;
}

std::string join_events(const std::vector<std::string>& events) {
  std::string s;
  for (const auto& e : events) s += (s.empty() ? "" : ";") + e;
  return s;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvRunWriter::CsvRunWriter(const std::filesystem::path& dir) : dir_(dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
  steps_ = open_out(dir / "steps.csv");
  detections_ = open_out(dir / "detections.csv");
  detections_ << "k,agent,step3_alarm,step6_alarm,recovery,solver_fallbacks,events\n";
}

CsvRunWriter::~CsvRunWriter() {
  steps_.flush();
  detections_.flush();
}

// Vector columns take their width from the first record.
void CsvRunWriter::step(const StepRecord& r) {
  const Eigen::Index nx = r.x.size(), nu = r.applied_input.size(), ny = r.y_raw.size();
  if (!header_written_) {
    steps_ << "k,agent";
    put_names(steps_, "x", nx);
    put_names(steps_, "leader", nx);
    put_names(steps_, "estimate", nx);
    put_names(steps_, "prediction", nx);
    put_names(steps_, "updated", nx);
    steps_ << ",tr_estimate,tr_prediction,tr_updated,tr_leader_set";
    put_names(steps_, "u_designed", nu);
    put_names(steps_, "u_applied", nu);
    put_names(steps_, "y_raw", ny);
    put_names(steps_, "y_attacked", ny);
    put_names(steps_, "y_filter", ny);
    steps_ << ",step3_alarm,step6_alarm,recovery,solver_fallbacks,consensus_error"
              ",q_prediction,q_updated,q_leader,residual_prediction,residual_update\n";
    header_written_ = true;
  }
  steps_ << r.k << ',' << r.agent + 1;
  put_vec(steps_, r.x, nx);
  put_vec(steps_, r.leader, nx);
  put_vec(steps_, r.estimate, nx);
  put_vec(steps_, r.prediction, nx);
  put_vec(steps_, r.updated, nx);
  for (double v : {r.tr_estimate, r.tr_prediction, r.tr_updated, r.tr_leader_set})
    steps_ << ',' << format_double(v);
  put_vec(steps_, r.designed_input, nu);
  put_vec(steps_, r.applied_input, nu);
  put_vec(steps_, r.y_raw, ny);
  put_vec(steps_, r.y_attacked, ny);
  put_vec(steps_, r.y_filter, ny);
  steps_ << ',' << int(r.step3_alarm) << ',' << int(r.step6_alarm) << ',' << to_string(r.recovery)
         << ',' << r.solver_fallbacks;
  for (double v : {r.consensus_error, r.q_prediction, r.q_updated, r.q_leader,
                   r.residual_prediction, r.residual_update})
    steps_ << ',' << format_double(v);
  steps_ << '\n';
}

void CsvRunWriter::detection(const DetectionRecord& d) {
  detections_ << d.k << ',' << d.agent + 1 << ',' << int(d.step3_alarm) << ','
              << int(d.step6_alarm) << ',' << to_string(d.recovery) << ',' << d.solver_fallbacks
              << ',' << join_events(d.events) << '\n';
}

void CsvRunWriter::flush() {
  steps_.flush();
  detections_.flush();
  if (!steps_ || !detections_) throw IoFailure("write failed in " + dir_.string());
}

void write_summary(const std::filesystem::path& file, const SummaryInfo& info, const RunResult& r) {
  ojson j;
  j["scenario"] = info.scenario;
  j["config"] = info.config_path;
  j["horizon"] = info.horizon;
  j["agents"] = info.agents;
  j["recovery"] = info.recovery;
  j["tol"] = info.tol;
  j["completed_steps"] = r.completed_steps;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  j["exit_code"] = info.exit_code;

  int step3 = 0, step6 = 0;
  std::vector<std::vector<int>> a3(info.agents), a6(info.agents);
  std::vector<int> violations(info.agents, 0), leader_violations(info.agents, 0);
  std::vector<double> max_error(info.agents, 0.0);
  for (const auto& s : r.steps) {
    if (s.step3_alarm) a3[s.agent].push_back(s.k), ++step3;
    if (s.step6_alarm) a6[s.agent].push_back(s.k), ++step6;
    violations[s.agent] += s.q_prediction > 1 + kContainmentSlack ||
                           s.q_updated > 1 + kContainmentSlack;
    leader_violations[s.agent] += s.q_leader > 1 + kContainmentSlack;
    max_error[s.agent] = std::max(max_error[s.agent], s.consensus_error);
  }
  j["alarms_total"] = step3 + step6;
  j["step3_alarms"] = step3;
  j["step6_alarms"] = step6;
  j["solves"] = r.solves;
  j["solver_fallbacks"] = r.fallbacks;
  j["max_certificate_residual"] = r.solves > 0 ? ojson(r.max_residual) : ojson(nullptr);

  ojson agents = ojson::array();
  for (int i = 0; i < info.agents; ++i) {
    ojson a;
    a["agent"] = i + 1;
    a["step3_alarm_steps"] = a3[i];
    a["step6_alarm_steps"] = a6[i];
    a["containment_violations"] = violations[i];
    a["leader_set_violations"] = leader_violations[i];
    a["max_consensus_error"] = max_error[i];
    const StepRecord* first = nullptr;
    for (const auto& s : r.steps)
      if (s.agent == i) {
        first = &s;
        break;
      }
    a["initial_consensus_error"] = first ? ojson(first->consensus_error) : ojson(nullptr);
    a["final_consensus_error"] = i < static_cast<int>(r.final_states.size())
                                     ? ojson((r.final_states[i] - r.final_leader).norm())
                                     : ojson(nullptr);
    agents.push_back(std::move(a));
  }
  j["per_agent"] = std::move(agents);

  auto out = open_out(file);
  out << j.dump(2) << '\n';
  if (!out) throw IoFailure("write failed: " + file.string());
}

std::set<int> snapshot_steps(const std::vector<int>& requested, const RunResult& r) {
  std::set<int> steps(requested.begin(), requested.end());
  for (const auto& s : r.steps)
    if (s.step3_alarm || s.step6_alarm) steps.insert(s.k);
  return steps;
}

void write_ellipses(const std::filesystem::path& file, const std::set<int>& steps,
                    const RunResult& r, int points) {
  auto out = open_out(file);
  out << "k,agent,set,point,x,y\n";
  for (const auto& snap : r.sets) {
    if (!steps.count(snap.k) || snap.estimate.dim() < 2) continue;
    const std::pair<const char*, const EllipsoidD*> sets[] = {{"estimate", &snap.estimate},
                                                              {"prediction", &snap.prediction},
                                                              {"updated", &snap.updated},
                                                              {"leader", &snap.leader_set}};
    for (const auto& [name, e] : sets) {
      const auto pts = boundary_points(*e, points);
      for (int p = 0; p < points; ++p)
        out << snap.k << ',' << snap.agent + 1 << ',' << name << ',' << p << ','
            << format_double(pts(p, 0)) << ',' << format_double(pts(p, 1)) << '\n';
    }
  }
  if (!out) throw IoFailure("write failed: " + file.string());
}

void write_consensus(const std::filesystem::path& file, const RunResult& r) {
  auto out = open_out(file);
  out << "k,agent,consensus_error,tr_leader_set,q_leader\n";
  for (const auto& s : r.steps)
    out << s.k << ',' << s.agent + 1 << ',' << format_double(s.consensus_error) << ','
        << format_double(s.tr_leader_set) << ',' << format_double(s.q_leader) << '\n';
  // Closing row: state after the last step.
  for (std::size_t i = 0; i < r.final_states.size(); ++i)
    out << r.completed_steps << ',' << i + 1 << ','
        << format_double((r.final_states[i] - r.final_leader).norm()) << ",,\n";
  if (!out) throw IoFailure("write failed: " + file.string());
}

}  // namespace fsmf
