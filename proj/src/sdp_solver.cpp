#include "fsmf/sdp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "fsmf/errors.hpp"

namespace fsmf {

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal:
      return "optimal";
    case SdpStatus::Infeasible:
      return "infeasible";
    case SdpStatus::NumericalTrouble:
      return "numerical_trouble";
  }
  return "unknown";
}

std::vector<double> certify(const SdpProblem& problem, const VectorXd& y) {
  std::vector<double> out;
  out.reserve(problem.constraints().size());
  for (const auto& c : problem.constraints()) {
    const MatrixXd F = c.expr.evaluate(y);
    const MatrixXd Fs = 0.5 * (F + F.transpose());
    out.push_back(Eigen::SelfAdjointEigenSolver<MatrixXd>(Fs, Eigen::EigenvaluesOnly)
                      .eigenvalues()
                      .maxCoeff());
  }
  return out;
}

const SdpBackend& default_backend() {
  static const InteriorPointBackend ipm;
  return ipm;
}

const SdpBackend& backend_by_name(const std::string& name) {
  static const BarrierBackend barrier;
  if (name == "ipm") return default_backend();
  if (name == "barrier") return barrier;
  throw ConfigParse("unknown solver backend '" + name + "'");
}

namespace {

// Decision directions the constraints cannot see (for example a gain that only
// ever multiplies a zero vector) leave the Newton systems singular. The
// backend works in coordinates of the row space; y = map * z is then the
// minimum (column-scaled) norm representative.
struct Prepared {
  SdpProblem problem;
  MatrixXd map;
  bool unbounded = false;
};

Prepared prepare(const SdpProblem& problem) {
  const int m = problem.num_scalars();
  Eigen::Index rows = 0;
  for (const auto& c : problem.constraints()) rows += c.expr.rows() * (c.expr.rows() + 1) / 2;

  MatrixXd V = MatrixXd::Zero(rows, m);
  Eigen::Index r0 = 0;
  for (const auto& c : problem.constraints()) {
    const Eigen::Index n = c.expr.rows();
    for (const auto& [slot, coef] : c.expr.terms()) {
      Eigen::Index r = r0;
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) V(r++, slot) = coef(i, j);
    }
    r0 += n * (n + 1) / 2;
  }
  VectorXd scale = V.colwise().norm().transpose();
  for (auto& s : scale) s = s > 0.0 ? 1.0 / s : 0.0;
  const Eigen::JacobiSVD<MatrixXd> svd(V * scale.asDiagonal(), Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * std::max(1.0, sv(0))) ++rank;

  Prepared out;
  const VectorXd cs = scale.asDiagonal() * problem.objective();
  if (rank == m) {
    out.map = scale.asDiagonal();
  } else {
    const MatrixXd W = svd.matrixV();
    out.map = scale.asDiagonal() * W.leftCols(rank);
    out.unbounded =
        (W.rightCols(m - rank).transpose() * cs).norm() > 1e-9 * std::max(1.0, cs.norm());
  }

  auto& p = out.problem;
  p.add_matrix("z", static_cast<int>(rank), 1);
  for (const auto& c : problem.constraints()) {
    const auto& e = c.expr;
    AffineMatrixExpr z(e.constant());
    for (Eigen::Index k = 0; k < rank; ++k) {
      MatrixXd coef = MatrixXd::Zero(e.rows(), e.cols());
      for (const auto& [slot, f] : e.terms()) coef += out.map(slot, k) * f;
      z.add_term(static_cast<int>(k), coef);
    }
    p.add_lmi(std::move(z), c.label);
  }
  const VectorXd cz = out.map.transpose() * problem.objective();
  for (Eigen::Index k = 0; k < rank; ++k) p.add_objective_slot(static_cast<int>(k), cz(k));
  p.set_objective_constant(problem.objective_constant());
  return out;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, double tol, const SdpBackend& backend,
                  int max_iterations) {
  if (!(tol >= 1e-10 && tol <= 1e-4))
    throw std::invalid_argument("solve: tolerance must lie in [1e-10, 1e-4]");
  SdpSolution sol;
  const Prepared prep = prepare(problem);
  if (prep.unbounded) {
    sol.backend = backend.name();
    sol.status = SdpStatus::NumericalTrouble;
    sol.message = "objective unbounded along a direction the constraints ignore";
  } else {
    sol = backend.run(prep.problem, {tol, max_iterations});
    if (sol.y.size() == prep.map.cols()) sol.y = prep.map * sol.y;
  }
  if (sol.y.size() != problem.num_scalars()) sol.y = VectorXd::Zero(problem.num_scalars());
  sol.certificate = certify(problem, sol.y);
  sol.max_residual = sol.certificate.empty()
                         ? -std::numeric_limits<double>::infinity()
                         : *std::max_element(sol.certificate.begin(), sol.certificate.end());
  sol.objective = problem.objective_value(sol.y);
  if (sol.status == SdpStatus::Optimal && !(sol.max_residual <= tol)) {
    sol.status = SdpStatus::NumericalTrouble;
    sol.message = "residual check failed: " + std::to_string(sol.max_residual);
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Log-barrier backend.

namespace {

struct BarrierData {
  std::vector<MatrixXd> F0;
  std::vector<std::vector<std::pair<int, MatrixXd>>> F;
  int m = 0;
  int nu = 0;
};

BarrierData barrier_data(const SdpProblem& problem) {
  BarrierData d;
  d.m = problem.num_scalars();
  for (const auto& c : problem.constraints()) {
    d.F0.push_back(c.expr.constant());
    std::vector<std::pair<int, MatrixXd>> terms;
    for (const auto& [slot, coef] : c.expr.terms())
      if (coef.cwiseAbs().maxCoeff() != 0.0) terms.emplace_back(slot, coef);
    d.F.push_back(std::move(terms));
    d.nu += static_cast<int>(c.expr.rows());
  }
  return d;
}

// Factors every slack S_b = -F_b(y); false when one is not positive definite.
bool slacks(const BarrierData& d, const VectorXd& y, std::vector<Eigen::LLT<MatrixXd>>& out) {
  out.clear();
  for (std::size_t b = 0; b < d.F0.size(); ++b) {
    MatrixXd S = -d.F0[b];
    for (const auto& [slot, coef] : d.F[b]) S -= y(slot) * coef;
    out.emplace_back(0.5 * (S + S.transpose()));
    if (out.back().info() != Eigen::Success) return false;
  }
  return true;
}

// Newton centring for t c^T y - sum log det S_b(y). Returns false when the
// Newton iteration cannot make progress.
template <typename Stop>
bool centre(const BarrierData& d, const VectorXd& c, double t, VectorXd& y, int& budget,
            Stop stop) {
  std::vector<Eigen::LLT<MatrixXd>> f;
  if (!slacks(d, y, f)) return false;
  const int m = d.m;
  while (budget-- > 0) {
    VectorXd g = t * c;
    MatrixXd H = MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < d.F0.size(); ++b) {
      const auto& terms = d.F[b];
      std::vector<MatrixXd> W(terms.size());
      for (std::size_t k = 0; k < terms.size(); ++k) {
        W[k] = f[b].solve(terms[k].second);
        g(terms[k].first) += W[k].trace();
      }
      for (std::size_t k = 0; k < terms.size(); ++k)
        for (std::size_t l = k; l < terms.size(); ++l) {
          const double v = W[k].cwiseProduct(W[l].transpose()).sum();
          H(terms[k].first, terms[l].first) += v;
          if (l != k) H(terms[l].first, terms[k].first) += v;
        }
    }
    H.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    const VectorXd dy = -H.ldlt().solve(g);
    const double dec = -g.dot(dy);
    if (!std::isfinite(dec)) return false;
    if (dec / 2.0 <= 1e-10) return true;
    // Damped Newton step; for a self-concordant barrier 1/(1+lambda) keeps
    // the slacks positive definite, the halving only guards rounding.
    const double lambda = std::sqrt(std::max(dec, 0.0));
    double a = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
    std::vector<Eigen::LLT<MatrixXd>> trial;
    for (;;) {
      const VectorXd yn = y + a * dy;
      if (slacks(d, yn, trial)) {
        y = yn;
        f = std::move(trial);
        if (stop(y)) return true;
        break;
      }
      a *= 0.5;
      if (a < 1e-12) return false;
    }
  }
  return false;
}

}  // namespace

SdpSolution BarrierBackend::run(const SdpProblem& problem, const SolverOptions& opt) const {
  SdpSolution sol;
  sol.backend = name();
  const BarrierData base = barrier_data(problem);
  const int m = base.m;
  int budget = 50 * opt.max_iterations;
  sol.y = VectorXd::Zero(m);

  // Phase I: min s subject to F_b(y) - s I <= 0, s >= -1 and a box on y that
  // keeps the centring problems bounded. Stops at the first strictly feasible y.
  std::vector<Eigen::LLT<MatrixXd>> f;
  if (!slacks(base, sol.y, f)) {
    BarrierData aug = base;
    aug.m = m + 1;
    double s0 = 0.0;
    for (std::size_t b = 0; b < base.F0.size(); ++b) {
      const MatrixXd& F0 = base.F0[b];
      s0 = std::max(s0, Eigen::SelfAdjointEigenSolver<MatrixXd>(F0, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff());
      aug.F[b].emplace_back(m, -MatrixXd::Identity(F0.rows(), F0.cols()));
    }
    aug.F0.push_back(MatrixXd::Constant(1, 1, -1.0));
    aug.F.push_back({{m, MatrixXd::Constant(1, 1, -1.0)}});
    aug.nu += 1;
    constexpr double box = 1e6;
    for (int i = 0; i < m; ++i) {
      aug.F0.push_back(MatrixXd::Constant(1, 1, -box));
      aug.F.push_back({{i, MatrixXd::Constant(1, 1, 1.0)}});
      aug.F0.push_back(MatrixXd::Constant(1, 1, -box));
      aug.F.push_back({{i, MatrixXd::Constant(1, 1, -1.0)}});
      aug.nu += 2;
    }
    auto feasible = [&](const VectorXd& z) {
      std::vector<Eigen::LLT<MatrixXd>> probe;
      return z(m) < 0.0 && slacks(base, z.head(m), probe);
    };
    VectorXd z = VectorXd::Zero(m + 1);
    z(m) = s0 + 1.0;
    VectorXd c = VectorXd::Zero(m + 1);
    c(m) = 1.0;
    double t = 1.0;
    bool found = false;
    while (budget > 0) {
      const bool centred = centre(aug, c, t, z, budget, feasible);
      if (feasible(z)) {
        found = true;
        break;
      }
      if (!centred || aug.nu / t < 1e-3 * opt.tol) break;
      t *= 10.0;
    }
    sol.y = z.head(m);
    if (!found) {
      sol.status = z(m) > opt.tol ? SdpStatus::Infeasible : SdpStatus::NumericalTrouble;
      sol.message = "phase I ended at s = " + std::to_string(z(m));
      return sol;
    }
  }

  // Phase II.
  const VectorXd& c = problem.objective();
  double t = 1.0;
  for (int outer = 0; budget > 0; ++outer) {
    if (!centre(base, c, t, sol.y, budget, [](const VectorXd&) { return false; })) {
      sol.status = SdpStatus::NumericalTrouble;
      sol.message = "centring failed";
      return sol;
    }
    sol.iterations = outer + 1;
    const double obj = c.dot(sol.y);
    sol.gap = base.nu / t / (1.0 + std::abs(obj));
    if (sol.gap <= opt.tol) {
      sol.status = SdpStatus::Optimal;
      return sol;
    }
    t *= 8.0;
  }
  sol.status = SdpStatus::NumericalTrouble;
  sol.message = "Newton budget exhausted";
  return sol;
}

}  // namespace fsmf
