#pragma once

#include <string>
#include <vector>

#include "fsmf/lmi.hpp"

namespace fsmf {

enum class SdpStatus { Optimal, Infeasible, NumericalTrouble };

std::string to_string(SdpStatus s);

struct SolverOptions {
  double tol = 1e-7;
  int max_iterations = 200;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalTrouble;
  VectorXd y;
  double objective = 0.0;
  // Largest eigenvalue of every constraint block at y, computed outside the solver.
  std::vector<double> certificate;
  double max_residual = 0.0;
  int iterations = 0;
  double gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  std::string backend;
  std::string message;

  bool ok() const { return status == SdpStatus::Optimal; }
};

class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual std::string name() const = 0;
  /// Fills status, y, iteration counts and residuals; certification is done by solve().
  virtual SdpSolution run(const SdpProblem& problem, const SolverOptions& opt) const = 0;
};

/// Infeasible-start primal-dual path following (Nesterov-Todd scaling, Mehrotra
/// predictor-corrector) on dense blocks.
class InteriorPointBackend final : public SdpBackend {
 public:
  std::string name() const override { return "ipm"; }
  SdpSolution run(const SdpProblem& problem, const SolverOptions& opt) const override;
};

/// Phase-I / phase-II log-barrier method with damped Newton steps. Needs a
/// bounded optimal set; kept as an independent cross-check.
class BarrierBackend final : public SdpBackend {
 public:
  std::string name() const override { return "barrier"; }
  SdpSolution run(const SdpProblem& problem, const SolverOptions& opt) const override;
};

const SdpBackend& default_backend();
/// "ipm" or "barrier"; throws ConfigParse otherwise.
const SdpBackend& backend_by_name(const std::string& name);

/// Max eigenvalue of each constraint block evaluated at y.
std::vector<double> certify(const SdpProblem& problem, const VectorXd& y);

/// Solves, certifies, and downgrades Optimal to NumericalTrouble when the
/// independent residual check exceeds tol.
SdpSolution solve(const SdpProblem& problem, double tol = 1e-7,
                  const SdpBackend& backend = default_backend(), int max_iterations = 200);

}  // namespace fsmf
