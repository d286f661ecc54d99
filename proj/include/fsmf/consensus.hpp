#pragma once

#include <vector>

#include <Eigen/Core>

namespace fsmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Topology {
  MatrixXd adjacency;  // a_ij >= 0, zero diagonal
  VectorXd pinning;    // leader gains lambda_i >= 0

  int size() const { return static_cast<int>(adjacency.rows()); }
  /// Throws DimensionMismatch on malformed data.
  void validate() const;
};

/// L + diag(pinning), L = D - A.
MatrixXd pinned_laplacian(const Topology& t);

/// sum_j a_ij (xhat_i - xhat_j) + lambda_i (xhat_i - x_leader)
VectorXd consensus_bracket(const std::vector<VectorXd>& estimates, const VectorXd& leader,
                           int agent, const Topology& t);

/// (sum_l g_l K_l) * consensus_bracket(...)
VectorXd control_input(const std::vector<MatrixXd>& gains, const VectorXd& g,
                       const std::vector<VectorXd>& estimates, const VectorXd& leader, int agent,
                       const Topology& t);

}  // namespace fsmf
