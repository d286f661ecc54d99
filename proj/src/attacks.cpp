#include "fsmf/attacks.hpp"

#include <algorithm>

#include "fsmf/errors.hpp"

namespace fsmf {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None:
      return "none";
    case AttackKind::Replay:
      return "replay";
    case AttackKind::FdiControl:
      return "fdi_control";
    case AttackKind::FdiChannel:
      return "fdi_channel";
  }
  return "none";
}

AttackKind attack_kind_from_string(const std::string& s) {
  for (auto k : {AttackKind::None, AttackKind::Replay, AttackKind::FdiControl,
                 AttackKind::FdiChannel})
    if (to_string(k) == s) return k;
  throw ConfigParse("unknown attack kind '" + s + "'");
}

bool AttackScenario::targets_agent(int agent) const {
  return targets.empty() || std::find(targets.begin(), targets.end(), agent) != targets.end();
}

void AttackScenario::validate(int horizon, int agents) const {
  if (kind == AttackKind::None) return;
  auto fail = [](const std::string& msg) { throw ConfigParse("attack: " + msg); };
  if (active.length() == 0) fail("empty active window");
  if (active.first < 0 || active.last > horizon) fail("active window outside the horizon");
  for (int t : targets)
    if (t < 0 || t >= agents) fail("target agent out of range");
  switch (kind) {
    case AttackKind::Replay:
      if (record.length() == 0 || record.first < 0) fail("replay needs a record window");
      if (active.first - record.last < 1) fail("replay must start after the record window");
      break;
    case AttackKind::FdiControl:
      if (injection.size() == 0) fail("control injection missing");
      break;
    case AttackKind::FdiChannel:
      if (injection.size() == 0) fail("channel payload missing");
      if (edge_from < 0 || edge_from >= agents || edge_to < 0 || edge_to >= agents ||
          edge_from == edge_to)
        fail("channel edge out of range");
      break;
    case AttackKind::None:
      break;
  }
}

int replay_source(const AttackScenario& s, int k) {
  return s.record.first + (k - s.active.first) % s.record.length();
}

VectorXd apply_sensor_attack(const AttackScenario& s, int agent, int k, const VectorXd& y_true,
                             const std::vector<VectorXd>& history) {
  if (s.kind != AttackKind::Replay || !s.active.contains(k) || !s.targets_agent(agent))
    return y_true;
  const int src = replay_source(s, k);
  if (src < 0 || src >= static_cast<int>(history.size()) || history[src].size() == 0)
    throw MissingHistory("replay at step " + std::to_string(k) + " needs y(" +
                         std::to_string(src) + ")");
  return history[src];
}

VectorXd apply_control_attack(const AttackScenario& s, int agent, int k, const VectorXd& u) {
  if (s.kind != AttackKind::FdiControl || !s.active.contains(k) || !s.targets_agent(agent))
    return u;
  if (s.injection.size() != u.size()) throw DimensionMismatch("control injection dimension");
  return u + s.injection;
}

VectorXd apply_channel_attack(const AttackScenario& s, int k, int from, int to,
                              const VectorXd& xbar) {
  if (s.kind != AttackKind::FdiChannel || !s.active.contains(k) || from != s.edge_from ||
      to != s.edge_to)
    return xbar;
  if (s.injection.size() != xbar.size()) throw DimensionMismatch("channel payload dimension");
  return s.channel_mode == ChannelMode::Replace ? VectorXd(s.injection) : VectorXd(xbar + s.injection);
}

}  // namespace fsmf
