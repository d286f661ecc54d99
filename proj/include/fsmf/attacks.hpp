#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace fsmf {

using Eigen::VectorXd;

enum class AttackKind { None, Replay, FdiControl, FdiChannel };
enum class ChannelMode { Replace, Add };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);

struct StepWindow {
  int first = 0;
  int last = -1;  // inclusive; empty when last < first

  bool contains(int k) const { return k >= first && k <= last; }
  int length() const { return last >= first ? last - first + 1 : 0; }
};

struct AttackScenario {
  AttackKind kind = AttackKind::None;
  StepWindow record;          // replay: recorded outputs
  StepWindow active;          // steps at which the corrupted signal is used
  VectorXd injection;         // FDI payload
  std::vector<int> targets;   // attacked agents (replay, control); empty means all
  int edge_from = -1;         // channel: transmitting agent
  int edge_to = -1;           // channel: receiving agent
  ChannelMode channel_mode = ChannelMode::Replace;

  bool targets_agent(int agent) const;
  /// Throws ConfigParse when windows or payloads are inconsistent.
  void validate(int horizon, int agents) const;
};

/// Recorded output index replayed at step k; repeats the record cyclically.
int replay_source(const AttackScenario& s, int k);

/// history[t] is the genuine output y(t). Throws MissingHistory when the
/// replayed entry has not been recorded.
VectorXd apply_sensor_attack(const AttackScenario& s, int agent, int k, const VectorXd& y_true,
                             const std::vector<VectorXd>& history);
VectorXd apply_control_attack(const AttackScenario& s, int agent, int k, const VectorXd& u);
VectorXd apply_channel_attack(const AttackScenario& s, int k, int from, int to,
                              const VectorXd& xbar);

}  // namespace fsmf
