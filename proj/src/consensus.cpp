#include "fsmf/consensus.hpp"

#include <string>

#include "fsmf/errors.hpp"
#include "fsmf/fuzzy.hpp"

namespace fsmf {

void Topology::validate() const {
  const auto n = adjacency.rows();
  if (n == 0 || adjacency.cols() != n || pinning.size() != n)
    throw DimensionMismatch("topology: adjacency " + std::to_string(adjacency.rows()) + "x" +
                            std::to_string(adjacency.cols()) + ", pinning " +
                            std::to_string(pinning.size()));
  if (adjacency.minCoeff() < 0.0 || pinning.minCoeff() < 0.0)
    throw DimensionMismatch("topology: negative weights");
  if (adjacency.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw DimensionMismatch("topology: self loops");
  if (!(pinning.maxCoeff() > 0.0)) throw DimensionMismatch("topology: no agent hears the leader");
}

MatrixXd pinned_laplacian(const Topology& t) {
  t.validate();
  MatrixXd L = -t.adjacency;
  L.diagonal() = t.adjacency.rowwise().sum() + t.pinning;
  return L;
}

VectorXd consensus_bracket(const std::vector<VectorXd>& estimates, const VectorXd& leader,
                           int agent, const Topology& t) {
  if (static_cast<int>(estimates.size()) != t.size() || agent < 0 || agent >= t.size())
    throw MissingNeighborEstimate("consensus: " + std::to_string(estimates.size()) +
                                  " estimates for " + std::to_string(t.size()) + " agents");
  const VectorXd& own = estimates[agent];
  if (own.size() != leader.size())
    throw MissingNeighborEstimate("consensus: own estimate missing for agent " +
                                  std::to_string(agent));
  VectorXd b = t.pinning(agent) * (own - leader);
  for (int j = 0; j < t.size(); ++j) {
    const double a = t.adjacency(agent, j);
    if (a == 0.0) continue;
    if (estimates[j].size() != own.size())
      throw MissingNeighborEstimate("consensus: no estimate from agent " + std::to_string(j));
    b += a * (own - estimates[j]);
  }
  return b;
}

VectorXd control_input(const std::vector<MatrixXd>& gains, const VectorXd& g,
                       const std::vector<VectorXd>& estimates, const VectorXd& leader, int agent,
                       const Topology& t) {
  return blend(gains, g) * consensus_bracket(estimates, leader, agent, t);
}

}  // namespace fsmf
