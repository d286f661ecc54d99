#include "fsmf/scenario.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fsmf/errors.hpp"
#include "json.hpp"

namespace fsmf {

using nlohmann::json;

namespace {

// YAML is read into the same tree the JSON mirror produces so that a single
// decoder serves both.
json scalar_value(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "~" || s == "null" || s.empty()) return nullptr;
  long long i = 0;
  auto [pi, ei] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ei == std::errc() && pi == s.data() + s.size()) return i;
  double d = 0;
  auto [pd, ed] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ed == std::errc() && pd == s.data() + s.size()) return d;
  return s;
}

json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_value(n);
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigParse(path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path, "missing key '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<int>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

bool flag(const json& j, const std::string& path) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  return j.get<bool>();
}

VectorXd vec(const json& j, const std::string& path) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) bad(path, "expected a list of numbers");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

// Row-major list of rows; a bare number is 1x1.
MatrixXd mat(const json& j, const std::string& path) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_array()) bad(path, "expected a list of rows");
  const auto rows = j.size(), cols = j[0].size();
  MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) bad(path, "ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

template <typename T, typename F>
T optional(const json& j, const std::string& key, T fallback, F read) {
  return j.is_object() && j.contains(key) ? read(j.at(key)) : fallback;
}

StepWindow window(const json& j, const std::string& path) {
  const VectorXd v = vec(j, path);
  if (v.size() != 2) bad(path, "expected [first, last]");
  return {static_cast<int>(v(0)), static_cast<int>(v(1))};
}

EllipsoidD ellipsoid(const json& j, const std::string& path) {
  try {
    return make_ellipsoid(vec(need(j, "center", path), path + ".center"),
                          mat(need(j, "shape", path), path + ".shape"));
  } catch (const ConfigParse&) {
    throw;
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

BoundSchedule schedule(const json& j, const std::string& path) {
  BoundSchedule s;
  s.start = optional(j, "start", s.start, [&](const json& v) { return number(v, path + ".start"); });
  s.slope = optional(j, "slope", s.slope, [&](const json& v) { return number(v, path + ".slope"); });
  s.floor = optional(j, "floor", s.floor, [&](const json& v) { return number(v, path + ".floor"); });
  return s;
}

Sinusoid sinusoid(const json& j, const std::string& path, Sinusoid s) {
  s.amplitude = number(need(j, "amplitude", path), path + ".amplitude");
  s.frequency = number(need(j, "frequency", path), path + ".frequency");
  return s;
}

MembershipFamily membership(const json& j, const std::string& path) {
  const std::string type = text(need(j, "type", path), path + ".type");
  const int premise =
      optional(j, "premise", 0, [&](const json& v) { return integer(v, path + ".premise"); });
  if (type == "clamp_ramp") {
    const double lo = optional(j, "lo", 0.0, [&](const json& v) { return number(v, path + ".lo"); });
    const double hi = optional(j, "hi", 1.0, [&](const json& v) { return number(v, path + ".hi"); });
    if (!(hi > lo)) bad(path, "clamp_ramp needs hi > lo");
    return MembershipFamily::clamp_ramp(lo, hi, premise);
  }
  if (type == "trapezoids") {
    MembershipFamily f;
    f.premise_index = premise;
    const json& shapes = need(j, "shapes", path);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const VectorXd c = vec(shapes[i], path + ".shapes[" + std::to_string(i) + "]");
      if (c.size() != 4 || !(c(0) <= c(1) && c(1) <= c(2) && c(2) <= c(3)))
        bad(path, "trapezoid needs four ordered corners");
      f.shapes.push_back({c(0), c(1), c(2), c(3)});
    }
    return f;
  }
  bad(path + ".type", "unknown membership type '" + type + "'");
}

AgentConfig agent(const json& j, const std::string& path, const MembershipFamily& family,
                  const std::vector<MatrixXd>& leader_rules) {
  AgentConfig a;
  a.name = optional(j, "name", path, [&](const json& v) { return text(v, path + ".name"); });
  a.x0 = vec(need(j, "x0", path), path + ".x0");
  a.estimate = ellipsoid(need(j, "estimate", path), path + ".estimate");
  a.leader_set = ellipsoid(need(j, "leader_set", path), path + ".leader_set");

  const json& p = need(j, "plant", path);
  const std::string pp = path + ".plant";
  const VectorXd drift = vec(need(p, "drift", pp), pp + ".drift");
  if (drift.size() != 4) bad(pp + ".drift", "expected four coefficients");
  a.plant.drift = drift;
  a.plant.input = mat(need(p, "input", pp), pp + ".input");
  a.plant.noise_gain = vec(need(p, "noise_gain", pp), pp + ".noise_gain");
  const json& out = need(p, "output", pp);
  const VectorXd lin = vec(need(out, "linear", pp + ".output"), pp + ".output.linear");
  if (lin.size() != 2) bad(pp + ".output.linear", "expected two coefficients");
  a.plant.output_linear = lin;
  a.plant.output_quadratic = number(need(out, "quadratic", pp + ".output"), pp + ".output.quadratic");

  a.model.memberships = family;
  const json& rules = need(j, "rules", path);
  if (!rules.is_array() || rules.empty()) bad(path + ".rules", "expected a non-empty list");
  if (rules.size() != leader_rules.size())
    bad(path + ".rules", "rule count differs from the leader rule count");
  for (std::size_t l = 0; l < rules.size(); ++l) {
    const std::string rp = path + ".rules[" + std::to_string(l) + "]";
    const json& r = rules[l];
    a.model.rules.push_back({mat(need(r, "A", rp), rp + ".A"), mat(need(r, "B", rp), rp + ".B"),
                             mat(need(r, "M", rp), rp + ".M"), mat(need(r, "C", rp), rp + ".C"),
                             mat(need(r, "D", rp), rp + ".D"), leader_rules[l]});
  }
  const json& b = need(j, "bounds", path);
  const std::string bp = path + ".bounds";
  auto& e = a.model.bounds;
  e.H1 = mat(need(b, "H1", bp), bp + ".H1");
  e.E1 = mat(need(b, "E1", bp), bp + ".E1");
  e.H2 = mat(need(b, "H2", bp), bp + ".H2");
  e.E2 = mat(need(b, "E2", bp), bp + ".E2");
  e.H3 = mat(need(b, "H3", bp), bp + ".H3");
  e.E3 = mat(need(b, "E3", bp), bp + ".E3");
  e.H4 = mat(need(b, "H4", bp), bp + ".H4");
  e.E4 = mat(need(b, "E4", bp), bp + ".E4");
  try {
    a.model.validate();
    a.plant.validate(a.model.nu());
  } catch (const Error& err) {
    bad(path, err.what());
  }
  return a;
}

AttackScenario attack(const json& j, const std::string& path, int nx, int nu) {
  AttackScenario s;
  s.kind = attack_kind_from_string(text(need(j, "kind", path), path + ".kind"));
  if (s.kind == AttackKind::None) return s;
  s.active = window(need(j, "active", path), path + ".active");
  if (j.contains("targets"))
    for (int t : vec(j.at("targets"), path + ".targets")) s.targets.push_back(t - 1);
  switch (s.kind) {
    case AttackKind::Replay:
      s.record = window(need(j, "record", path), path + ".record");
      break;
    case AttackKind::FdiControl:
      s.injection = vec(need(j, "injection", path), path + ".injection");
      if (s.injection.size() != nu) bad(path + ".injection", "dimension differs from the input");
      break;
    case AttackKind::FdiChannel: {
      s.injection = vec(need(j, "injection", path), path + ".injection");
      if (s.injection.size() != nx) bad(path + ".injection", "dimension differs from the state");
      const VectorXd e = vec(need(j, "edge", path), path + ".edge");
      if (e.size() != 2) bad(path + ".edge", "expected [from, to]");
      s.edge_from = static_cast<int>(e(0)) - 1;
      s.edge_to = static_cast<int>(e(1)) - 1;
      const std::string mode =
          optional(j, "channel_mode", std::string("replace"),
                   [&](const json& v) { return text(v, path + ".channel_mode"); });
      if (mode == "replace")
        s.channel_mode = ChannelMode::Replace;
      else if (mode == "add")
        s.channel_mode = ChannelMode::Add;
      else
        bad(path + ".channel_mode", "expected replace or add");
      break;
    }
    case AttackKind::None:
      break;
  }
  return s;
}

void reject_unknown(const json& j, const std::string& path, std::set<std::string> known) {
  if (!j.is_object()) bad(path, "expected a table");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) bad(path, "unknown key '" + k + "'");
}

ScenarioConfig decode(const json& root) {
  reject_unknown(root, "config",
                 {"name", "horizon", "solver", "noise", "topology", "leader", "membership",
                  "agents", "attack", "detector", "output"});
  ScenarioConfig c;
  c.name = optional(root, "name", std::string("scenario"),
                    [](const json& v) { return text(v, "name"); });
  c.horizon = integer(need(root, "horizon", "config"), "horizon");

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    reject_unknown(s, "solver", {"backend", "tol", "multiplier_weight", "fallback_budget"});
    c.backend = optional(s, "backend", c.backend, [](const json& v) { return text(v, "solver.backend"); });
    c.tol = optional(s, "tol", c.tol, [](const json& v) { return number(v, "solver.tol"); });
    c.multiplier_weight = optional(s, "multiplier_weight", c.multiplier_weight,
                                   [](const json& v) { return number(v, "solver.multiplier_weight"); });
    c.fallback_budget = optional(s, "fallback_budget", c.fallback_budget,
                                 [](const json& v) { return integer(v, "solver.fallback_budget"); });
  }

  const json& noise = need(root, "noise", "config");
  reject_unknown(noise, "noise", {"mode", "seed", "process", "measurement", "Q", "R"});
  const std::string mode =
      optional(noise, "mode", std::string("sinusoid"), [](const json& v) { return text(v, "noise.mode"); });
  if (mode == "sinusoid")
    c.noise_mode = NoiseMode::Sinusoid;
  else if (mode == "uniform")
    c.noise_mode = NoiseMode::Uniform;
  else
    bad("noise.mode", "expected sinusoid or uniform");
  c.seed = optional(noise, "seed", c.seed, [](const json& v) {
    if (!v.is_number_unsigned()) bad("noise.seed", "expected a non-negative integer");
    return v.get<std::uint64_t>();
  });
  c.process_noise = sinusoid(need(noise, "process", "noise"), "noise.process", c.process_noise);
  c.measurement_noise =
      sinusoid(need(noise, "measurement", "noise"), "noise.measurement", c.measurement_noise);
  c.Q = schedule(need(noise, "Q", "noise"), "noise.Q");
  c.R = schedule(need(noise, "R", "noise"), "noise.R");

  const json& topo = need(root, "topology", "config");
  c.topology.adjacency = mat(need(topo, "adjacency", "topology"), "topology.adjacency");
  c.topology.pinning = vec(need(topo, "pinning", "topology"), "topology.pinning");

  const json& leader = need(root, "leader", "config");
  c.leader_x0 = vec(need(leader, "x0", "leader"), "leader.x0");
  std::vector<MatrixXd> leader_rules;
  const json& lr = need(leader, "rules", "leader");
  if (!lr.is_array() || lr.empty()) bad("leader.rules", "expected a non-empty list of matrices");
  for (std::size_t l = 0; l < lr.size(); ++l)
    leader_rules.push_back(mat(lr[l], "leader.rules[" + std::to_string(l) + "]"));

  const MembershipFamily family = membership(need(root, "membership", "config"), "membership");
  const json& agents = need(root, "agents", "config");
  if (!agents.is_array() || agents.empty()) bad("agents", "expected a non-empty list");
  for (std::size_t i = 0; i < agents.size(); ++i)
    c.agents.push_back(agent(agents[i], "agents[" + std::to_string(i) + "]", family, leader_rules));

  const int nx = c.agents.front().model.nx(), nu = c.agents.front().model.nu();
  c.attack = root.contains("attack") ? attack(root.at("attack"), "attack", nx, nu) : AttackScenario{};

  if (root.contains("detector")) {
    const json& d = root.at("detector");
    reject_unknown(d, "detector", {"recovery", "intersect_margin"});
    c.recovery = optional(d, "recovery", c.recovery, [](const json& v) { return flag(v, "detector.recovery"); });
    c.intersect_margin = optional(d, "intersect_margin", c.intersect_margin,
                                  [](const json& v) { return number(v, "detector.intersect_margin"); });
  }
  if (root.contains("output")) {
    const json& o = root.at("output");
    reject_unknown(o, "output", {"dir", "snapshots"});
    c.output_dir = optional(o, "dir", c.output_dir, [](const json& v) { return text(v, "output.dir"); });
    if (o.contains("snapshots")) {
      c.snapshots.clear();
      for (double k : vec(o.at("snapshots"), "output.snapshots")) c.snapshots.push_back(static_cast<int>(k));
    }
  }
  c.validate();
  return c;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (horizon < 1) bad("horizon", "must be at least 1");
  if (agents.empty()) bad("agents", "no agents");
  try {
    topology.validate();
  } catch (const Error& e) {
    bad("topology", e.what());
  }
  if (topology.size() != static_cast<int>(agents.size()))
    bad("topology", "size differs from the number of agents");
  const TSModel& m0 = agents.front().model;
  if (leader_x0.size() != m0.nx()) bad("leader.x0", "dimension differs from the state");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string path = "agents[" + std::to_string(i) + "]";
    const TSModel& m = a.model;
    if (m.nx() != m0.nx() || m.nu() != m0.nu() || m.ny() != m0.ny())
      bad(path, "agents must share state, input and output dimensions");
    if (m.nx() != 2 || m.ny() != 1 || m.nw() != 1 || m.nv() != 1)
      bad(path, "the built-in plant has two states, one output and scalar noises");
    if (a.x0.size() != m.nx()) bad(path + ".x0", "dimension differs from the state");
    if (a.estimate.dim() != m.nx() || a.leader_set.dim() != m.nx())
      bad(path, "initial set dimension differs from the state");
  }
  for (const auto& [s, p] : {std::pair{Q, "noise.Q"}, std::pair{R, "noise.R"}})
    if (!(s.floor > 0.0) || !(s.start > 0.0))
      bad(p, "schedule must stay positive (floor and start > 0)");
  if (!(tol >= 1e-10 && tol <= 1e-4)) bad("solver.tol", "must lie in [1e-10, 1e-4]");
  if (backend != "ipm" && backend != "barrier") bad("solver.backend", "expected ipm or barrier");
  if (multiplier_weight < 0.0) bad("solver.multiplier_weight", "must be non-negative");
  if (fallback_budget < 0) bad("solver.fallback_budget", "must be non-negative");
  if (intersect_margin < 0.0) bad("detector.intersect_margin", "must be non-negative");
  attack.validate(horizon, static_cast<int>(agents.size()));
}

ScenarioConfig parse_scenario(const std::string& text, bool is_json) {
  json root;
  try {
    root = is_json ? json::parse(text) : to_json(YAML::Load(text));
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("JSON: ") + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigParse(std::string("YAML: ") + e.what());
  }
  return decode(root);
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(slurp(path), path.extension() == ".json");
}

EllipsoidD load_ellipsoid_json(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw ConfigParse(path.string() + ": " + e.what());
  }
  return ellipsoid(j, path.string());
}

}  // namespace fsmf
