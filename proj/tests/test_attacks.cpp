#include "doctest.h"
#include "fsmf/attacks.hpp"
#include "fsmf/errors.hpp"

using namespace fsmf;

namespace {

AttackScenario replay_scenario() {
  AttackScenario s;
  s.kind = AttackKind::Replay;
  s.record = {5, 10};
  s.active = {20, 25};
  return s;
}

std::vector<VectorXd> outputs(int n) {
  std::vector<VectorXd> h;
  for (int t = 0; t < n; ++t) h.push_back(VectorXd::Constant(1, 0.1 * t + 0.01));
  return h;
}

}  // namespace

TEST_CASE("replay substitutes recorded outputs index by index") {
  const auto s = replay_scenario();
  const auto h = outputs(30);
  for (int k = 20; k <= 25; ++k) {
    CHECK(replay_source(s, k) == k - 15);
    CHECK(apply_sensor_attack(s, 0, k, h[k], h) == h[k - 15]);
  }
  CHECK(apply_sensor_attack(s, 1, 19, h[19], h) == h[19]);
  CHECK(apply_sensor_attack(s, 1, 26, h[26], h) == h[26]);
}

TEST_CASE("replay repeats a short record cyclically") {
  AttackScenario s = replay_scenario();
  s.record = {5, 7};
  const auto h = outputs(30);
  const int expect[] = {5, 6, 7, 5, 6, 7};
  for (int k = 20; k <= 25; ++k) CHECK(apply_sensor_attack(s, 0, k, h[k], h) == h[expect[k - 20]]);
}

TEST_CASE("replay of an unrecorded output is an error") {
  const auto s = replay_scenario();
  const auto h = outputs(8);
  CHECK_THROWS_AS(apply_sensor_attack(s, 0, 24, VectorXd::Zero(1), h), MissingHistory);
}

TEST_CASE("replay honours the target list") {
  AttackScenario s = replay_scenario();
  s.targets = {1};
  const auto h = outputs(30);
  CHECK(apply_sensor_attack(s, 0, 22, h[22], h) == h[22]);
  CHECK(apply_sensor_attack(s, 1, 22, h[22], h) == h[7]);
}

TEST_CASE("control injection is exactly additive inside the window") {
  AttackScenario s;
  s.kind = AttackKind::FdiControl;
  s.active = {20, 25};
  s.injection = Eigen::Vector2d(4, 4);
  const VectorXd u = Eigen::Vector2d(0.123456789, -3.5e-7);
  for (int k = 0; k < 50; ++k) {
    const VectorXd uc = apply_control_attack(s, 0, k, u);
    if (k >= 20 && k <= 25)
      CHECK(uc == u + s.injection);
    else
      CHECK(uc == u);
  }
  s.injection = VectorXd::Zero(2);
  CHECK(apply_control_attack(s, 1, 22, u) == u);
  s.injection = VectorXd::Ones(3);
  CHECK_THROWS_AS(apply_control_attack(s, 1, 22, u), DimensionMismatch);
}

TEST_CASE("channel attack hits only the targeted edge") {
  AttackScenario s;
  s.kind = AttackKind::FdiChannel;
  s.active = {20, 25};
  s.injection = Eigen::Vector2d(5, 5);
  s.edge_from = 1;
  s.edge_to = 0;
  const VectorXd xbar = Eigen::Vector2d(0.2, -0.1);
  CHECK(apply_channel_attack(s, 22, 1, 0, xbar) == s.injection);
  CHECK(apply_channel_attack(s, 22, 0, 1, xbar) == xbar);
  CHECK(apply_channel_attack(s, 19, 1, 0, xbar) == xbar);
  CHECK(apply_channel_attack(s, 26, 1, 0, xbar) == xbar);
  s.channel_mode = ChannelMode::Add;
  CHECK(apply_channel_attack(s, 22, 1, 0, xbar) == VectorXd(xbar + s.injection));
}

TEST_CASE("no attack leaves every signal bit-identical") {
  AttackScenario none;
  const VectorXd v = Eigen::Vector2d(1.0 / 3.0, -2.0 / 7.0);
  const std::vector<VectorXd> h(30, v);
  for (int k = 0; k < 30; ++k) {
    CHECK(apply_sensor_attack(none, 0, k, v, h) == v);
    CHECK(apply_control_attack(none, 0, k, v) == v);
    CHECK(apply_channel_attack(none, k, 1, 0, v) == v);
  }
}

TEST_CASE("scenario validation") {
  auto s = replay_scenario();
  CHECK_NOTHROW(s.validate(50, 2));
  s.active = {8, 12};
  CHECK_THROWS_AS(s.validate(50, 2), ConfigParse);
  s = replay_scenario();
  s.active = {20, 60};
  CHECK_THROWS_AS(s.validate(50, 2), ConfigParse);

  AttackScenario c;
  c.kind = AttackKind::FdiChannel;
  c.active = {20, 25};
  c.injection = Eigen::Vector2d(5, 5);
  c.edge_from = c.edge_to = 0;
  CHECK_THROWS_AS(c.validate(50, 2), ConfigParse);
  c.edge_from = 1;
  CHECK_NOTHROW(c.validate(50, 2));

  CHECK(attack_kind_from_string("fdi_control") == AttackKind::FdiControl);
  CHECK_THROWS_AS(attack_kind_from_string("dos"), ConfigParse);
}
