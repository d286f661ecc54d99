#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

namespace fsmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FuzzyRule {
  MatrixXd A;         // n_x x n_x
  MatrixXd B;         // n_x x n_u
  MatrixXd M;         // n_x x n_w
  MatrixXd C;         // n_y x n_x
  MatrixXd D;         // n_y x n_v
  MatrixXd A_leader;  // n_x x n_x
};

/// Trapezoid with corners a <= b <= c <= d; infinite corners give shoulders.
struct Trapezoid {
  double a, b, c, d;
  double operator()(double t) const;
};

struct MembershipFamily {
  int premise_index = 0;
  std::vector<Trapezoid> shapes;

  /// g_1 = clamp((t - lo) / (hi - lo), 0, 1), g_2 = 1 - g_1.
  static MembershipFamily clamp_ramp(double lo = 0.0, double hi = 1.0, int premise = 0);
  static MembershipFamily single(int premise = 0);
};

struct ErrorBounds {
  MatrixXd H1, E1;  // state channel
  MatrixXd H2, E2;  // process-noise channel
  MatrixXd H3, E3;  // output channel
  MatrixXd H4, E4;  // measurement-noise channel
};

struct TSModel {
  std::vector<FuzzyRule> rules;
  MembershipFamily memberships;
  ErrorBounds bounds;

  int rule_count() const { return static_cast<int>(rules.size()); }
  int nx() const { return static_cast<int>(rules.front().A.rows()); }
  int nu() const { return static_cast<int>(rules.front().B.cols()); }
  int nw() const { return static_cast<int>(rules.front().M.cols()); }
  int ny() const { return static_cast<int>(rules.front().C.rows()); }
  int nv() const { return static_cast<int>(rules.front().D.cols()); }

  /// Throws DimensionMismatch on any inconsistency.
  void validate() const;
};

struct BlendedModel {
  MatrixXd A, B, M, C, D, A_leader;
};

VectorXd memberships(const MembershipFamily& family, double theta);
VectorXd memberships(const TSModel& model, double theta);
/// Weights evaluated at the premise coordinate of x.
VectorXd premise_weights(const TSModel& model, const VectorXd& x);

/// sum_l g_l * mats[l]
MatrixXd blend(const std::vector<MatrixXd>& mats, const VectorXd& g);
BlendedModel blend(const TSModel& model, const VectorXd& g);

}  // namespace fsmf
