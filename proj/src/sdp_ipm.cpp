#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "fsmf/sdp_solver.hpp"

namespace fsmf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dual-form data: maximise b^T y subject to C - sum_i y_i A_i = S >= 0.
struct Block {
  int n = 0;
  MatrixXd C;
  std::vector<int> slots;
  std::vector<MatrixXd> A;
};

std::vector<Block> to_blocks(const SdpProblem& problem) {
  std::vector<Block> blocks;
  blocks.reserve(problem.constraints().size());
  for (const auto& c : problem.constraints()) {
    Block b;
    b.n = static_cast<int>(c.expr.rows());
    b.C = -c.expr.constant();
    for (const auto& [slot, coef] : c.expr.terms()) {
      if (coef.cwiseAbs().maxCoeff() == 0.0) continue;
      b.slots.push_back(slot);
      b.A.push_back(coef);
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct Iterate {
  std::vector<MatrixXd> X, S;
  VectorXd y;
};

}  // namespace

SdpSolution InteriorPointBackend::run(const SdpProblem& problem, const SolverOptions& opt) const {
  SdpSolution sol;
  sol.backend = name();
  const int m = problem.num_scalars();
  const VectorXd bvec = -problem.objective();
  std::vector<Block> blocks = to_blocks(problem);
  const int nb = static_cast<int>(blocks.size());
  int ntot = 0;
  double normC = 0.0;
  for (const auto& b : blocks) {
    ntot += b.n;
    normC += b.C.squaredNorm();
  }
  normC = std::sqrt(normC);
  const double normb = bvec.norm();

  if (nb == 0) {
    sol.y = VectorXd::Zero(m);
    sol.message = "no constraints";
    sol.status = bvec.cwiseAbs().maxCoeff() > 0.0 ? SdpStatus::NumericalTrouble : SdpStatus::Optimal;
    return sol;
  }

  Iterate it;
  it.y = VectorXd::Zero(m);
  for (const auto& b : blocks) {
    double ax = std::max(10.0, std::sqrt(double(b.n)));
    double as = ax;
    for (std::size_t k = 0; k < b.A.size(); ++k) {
      const double na = b.A[k].norm();
      ax = std::max(ax, b.n * (1.0 + std::abs(bvec(b.slots[k]))) / (1.0 + na));
      as = std::max(as, na);
    }
    as = std::max(as, b.C.norm());
    it.X.push_back(ax * MatrixXd::Identity(b.n, b.n));
    it.S.push_back(as * MatrixXd::Identity(b.n, b.n));
  }

  struct Scaling {
    MatrixXd G;
    VectorXd d;
  };
  std::vector<Scaling> scale(nb);
  std::vector<MatrixXd> Rd(nb);
  int stall = 0;
  double prev_pinf = kInf;

  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    // Residuals.
    VectorXd AX = VectorXd::Zero(m);
    double pobj = 0.0, xs = 0.0, rd2 = 0.0;
    for (int k = 0; k < nb; ++k) {
      const auto& b = blocks[k];
      for (std::size_t t = 0; t < b.A.size(); ++t) AX(b.slots[t]) += inner(b.A[t], it.X[k]);
      Rd[k] = b.C - it.S[k];
      for (std::size_t t = 0; t < b.A.size(); ++t) Rd[k] -= it.y(b.slots[t]) * b.A[t];
      pobj += inner(b.C, it.X[k]);
      xs += inner(it.X[k], it.S[k]);
      rd2 += Rd[k].squaredNorm();
    }
    const VectorXd Rp = bvec - AX;
    const double dobj = bvec.dot(it.y);
    const double mu = xs / ntot;
    sol.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.primal_infeasibility = Rp.norm() / (1.0 + normb);
    sol.dual_infeasibility = std::sqrt(rd2) / (1.0 + normC);
    sol.iterations = iter;
    sol.y = it.y;

    // For any feasible y', <C, X> - b^T y' = <S', X> - y'^T Rp, so the residual
    // of the equality side only weakens the bound by about |y^T Rp|. Near a
    // degenerate optimum that residual stalls in directions the objective
    // cannot see, so the test charges it to the gap instead of requiring it
    // to vanish on its own.
    const double bound_gap = std::abs(pobj - dobj) + std::abs(it.y.dot(Rp));
    if (sol.dual_infeasibility <= opt.tol && bound_gap <= opt.tol * (1.0 + std::abs(dobj)) &&
        sol.primal_infeasibility <= std::sqrt(opt.tol)) {
      sol.status = SdpStatus::Optimal;
      return sol;
    }
    // Farkas ray for the LMI: X >= 0, A(X) = 0, <C, X> < 0.
    if (pobj < 0.0 && AX.norm() / -pobj < opt.tol) {
      sol.status = SdpStatus::Infeasible;
      sol.message = "infeasibility certificate";
      return sol;
    }
    // Ray along which the objective decreases without bound.
    if (dobj > 0.0 && (normC + std::sqrt(rd2)) / dobj < opt.tol) {
      sol.status = SdpStatus::NumericalTrouble;
      sol.message = "objective unbounded";
      return sol;
    }
    if (iter == opt.max_iterations) break;

    // Nesterov-Todd scaling per block: W = G G^T with W S W = X and
    // G^{-1} X G^{-T} = G^T S G = diag(d).
    bool factor_ok = true;
    for (int k = 0; k < nb && factor_ok; ++k) {
      Eigen::LLT<MatrixXd> lx(it.X[k]), ls(it.S[k]);
      if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) {
        factor_ok = false;
        break;
      }
      const MatrixXd LX = lx.matrixL(), LS = ls.matrixL();
      const Eigen::JacobiSVD<MatrixXd> svd(LS.transpose() * LX, Eigen::ComputeFullV);
      const VectorXd d = svd.singularValues();
      if (!(d.minCoeff() > 0.0)) {
        factor_ok = false;
        break;
      }
      auto& sc = scale[k];
      sc.d = d;
      sc.G = LX * svd.matrixV() * d.cwiseSqrt().cwiseInverse().asDiagonal();
    }
    if (!factor_ok) {
      sol.status = SdpStatus::NumericalTrouble;
      sol.message = "iterate lost definiteness";
      return sol;
    }

    // Everything below lives in the scaled space, where X~ = S~ = diag(d) is
    // balanced; forming dX = G a G^T - W dS W directly cancels badly once the
    // iterates approach a degenerate optimum.
    //   A~_i = G^T A_i G,  M_ij = sum_b <A~_i, A~_j> = (B^T B)_ij
    // with column i of B the stacked svec(A~_i). Factoring B by QR instead of
    // forming M keeps the Schur solve accurate when M itself is close to
    // singular, which is the normal situation near a non-unique optimum.
    std::vector<std::vector<MatrixXd>> At(nb);
    std::vector<MatrixXd> Rdt(nb);
    Eigen::Index brows = 0;
    for (const auto& b : blocks) brows += b.n * (b.n + 1) / 2;
    MatrixXd B = MatrixXd::Zero(brows + m, m);
    Eigen::Index r0 = 0;
    for (int k = 0; k < nb; ++k) {
      const auto& b = blocks[k];
      const MatrixXd& G = scale[k].G;
      At[k].resize(b.A.size());
      for (std::size_t t = 0; t < b.A.size(); ++t) {
        At[k][t] = sym(G.transpose() * b.A[t] * G);
        Eigen::Index r = r0;
        for (int j = 0; j < b.n; ++j) {
          B(r++, b.slots[t]) += At[k][t](j, j);
          for (int i = j + 1; i < b.n; ++i) B(r++, b.slots[t]) += std::sqrt(2.0) * At[k][t](i, j);
        }
      }
      Rdt[k] = sym(G.transpose() * Rd[k] * G);
      r0 += b.n * (b.n + 1) / 2;
    }
    // Column equilibration, then a tiny Tikhonov row block so that slots
    // without any coefficient and dependent slot combinations still factor;
    // refinement against the unshifted system removes its bias elsewhere.
    VectorXd jac(m);
    for (int i = 0; i < m; ++i) {
      const double nrm = B.col(i).head(brows).norm();
      jac(i) = nrm > 0.0 ? 1.0 / nrm : 1.0;
    }
    B.topRows(brows) = B.topRows(brows) * jac.asDiagonal();
    B.bottomRows(m) = 1e-12 * MatrixXd::Identity(m, m);
    const Eigen::HouseholderQR<MatrixXd> qr(B);
    const MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    if (!R.diagonal().allFinite()) {
      sol.status = SdpStatus::NumericalTrouble;
      sol.message = "Schur factorisation failed";
      return sol;
    }
    const auto Bs = B.topRows(brows);
    const auto Q = qr.householderQ();
    auto rsolve_t = [&](VectorXd v) {
      R.triangularView<Eigen::Upper>().transpose().solveInPlace(v);
      return v;
    };
    auto rsolve = [&](VectorXd v) {
      R.triangularView<Eigen::Upper>().solveInPlace(v);
      return v;
    };
    // Q1 v and Q1^T v, Q1 being the part of Q that spans the columns of Bs.
    auto q1 = [&](const VectorXd& v) -> VectorXd {
      VectorXd full = VectorXd::Zero(brows + m);
      full.head(m) = v;
      return (Q * full).head(brows);
    };
    auto q1t = [&](const VectorXd& v) -> VectorXd {
      VectorXd full = VectorXd::Zero(brows + m);
      full.head(brows) = v;
      return (Q.transpose() * full).head(m);
    };
    auto svec = [&](const std::vector<MatrixXd>& mats) {
      VectorXd v(brows);
      Eigen::Index r = 0;
      for (int k = 0; k < nb; ++k)
        for (int j = 0; j < blocks[k].n; ++j) {
          v(r++) = mats[k](j, j);
          for (int i = j + 1; i < blocks[k].n; ++i) v(r++) = std::sqrt(2.0) * mats[k](i, j);
        }
      return v;
    };
    auto smat = [&](const VectorXd& v, std::vector<MatrixXd>& mats) {
      Eigen::Index r = 0;
      for (int k = 0; k < nb; ++k) {
        mats[k].resize(blocks[k].n, blocks[k].n);
        for (int j = 0; j < blocks[k].n; ++j) {
          mats[k](j, j) = v(r++);
          for (int i = j + 1; i < blocks[k].n; ++i)
            mats[k](i, j) = mats[k](j, i) = v(r++) / std::sqrt(2.0);
        }
      }
    };
    const VectorXd JRp = jac.asDiagonal() * Rp;

    // Linearised complementarity d o (dX~ + dS~) = Rc with a o b = (ab + ba) / 2.
    // With h = svec(a - Rd~) the step is dX~ = h + Bs dz, dS~ = Rd~ - Bs dz,
    // and dz must make Bs^T dX~ = J Rp. Building dX~ from the orthogonal
    // factor keeps that equality exact to rounding even when the normal
    // matrix is nearly singular.
    auto direction = [&](const std::vector<MatrixXd>& Rc, std::vector<MatrixXd>& dXt,
                         std::vector<MatrixXd>& dSt, VectorXd& dy) {
      std::vector<MatrixXd> a(nb);
      for (int k = 0; k < nb; ++k) {
        const VectorXd& d = scale[k].d;
        a[k] = Rc[k];
        for (Eigen::Index i = 0; i < d.size(); ++i)
          for (Eigen::Index j = 0; j < d.size(); ++j) a[k](i, j) *= 2.0 / (d(i) + d(j));
        a[k] -= Rdt[k];
      }
      const VectorXd h = svec(a);
      VectorXd w = rsolve_t(JRp) - q1t(h);
      VectorXd dz = rsolve(w);
      VectorXd dx = h + q1(w);
      double last = kInf;
      for (int r = 0; r < 4; ++r) {
        const VectorXd res = JRp - Bs.transpose() * dx;
        const double nr = res.norm();
        if (!(nr < 0.5 * last)) break;
        last = nr;
        const VectorXd w2 = rsolve_t(res);
        dz += rsolve(w2);
        dx += q1(w2);
      }
      dy = jac.asDiagonal() * dz;
      smat(dx, dXt);
      for (int k = 0; k < nb; ++k) {
        const auto& b = blocks[k];
        dSt[k] = Rdt[k];
        for (std::size_t t = 0; t < b.A.size(); ++t) dSt[k] -= dy(b.slots[t]) * At[k][t];
      }
    };
    // Largest steps keeping diag(d) + a dX~ and diag(d) + a dS~ definite.
    auto step_lengths = [&](const std::vector<MatrixXd>& dXt, const std::vector<MatrixXd>& dSt) {
      double ap = kInf, ad = kInf;
      for (int k = 0; k < nb; ++k) {
        const VectorXd r = scale[k].d.cwiseSqrt().cwiseInverse();
        auto lmin = [&](const MatrixXd& dm) {
          return Eigen::SelfAdjointEigenSolver<MatrixXd>(sym(r.asDiagonal() * dm * r.asDiagonal()),
                                                         Eigen::EigenvaluesOnly)
              .eigenvalues()(0);
        };
        const double lx = lmin(dXt[k]), ls = lmin(dSt[k]);
        if (lx < 0.0) ap = std::min(ap, -1.0 / lx);
        if (ls < 0.0) ad = std::min(ad, -1.0 / ls);
      }
      return std::pair{ap, ad};
    };

    std::vector<MatrixXd> Rc(nb), dXp(nb), dSp(nb), dXt(nb), dSt(nb);
    VectorXd dyp, dy;
    for (int k = 0; k < nb; ++k) Rc[k] = -MatrixXd(scale[k].d.array().square().matrix().asDiagonal());
    direction(Rc, dXp, dSp, dyp);
    auto [app, adp] = step_lengths(dXp, dSp);
    app = std::min(1.0, app);
    adp = std::min(1.0, adp);
    double xs_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      const MatrixXd D = scale[k].d.asDiagonal();
      xs_aff += inner(D + app * dXp[k], D + adp * dSp[k]);
    }
    const double ratio = std::max(0.0, xs_aff / xs);
    const double sigma = std::min(1.0, std::pow(ratio, std::max(1.0, 3.0 * std::min(app, adp))));

    for (int k = 0; k < nb; ++k)
      Rc[k] = sigma * mu * MatrixXd::Identity(blocks[k].n, blocks[k].n) -
              MatrixXd(scale[k].d.array().square().matrix().asDiagonal()) - sym(dXp[k] * dSp[k]);
    direction(Rc, dXt, dSt, dy);
    auto [ap, ad] = step_lengths(dXt, dSt);
    const double gamma = 0.9 + 0.09 * std::min(app, adp);
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    std::vector<MatrixXd> dX(nb), dS(nb);
    for (int k = 0; k < nb; ++k) {
      const auto& b = blocks[k];
      dX[k] = sym(scale[k].G * dXt[k] * scale[k].G.transpose());
      dS[k] = Rd[k];
      for (std::size_t t = 0; t < b.A.size(); ++t) dS[k] -= dy(b.slots[t]) * b.A[t];
    }

    // Rounding can push a near-singular block across the boundary; shorten
    // the step until both iterates factor.
    std::vector<MatrixXd> Xn(nb), Sn(nb);
    for (int tries = 0;; ++tries) {
      bool ok = true;
      for (int k = 0; k < nb && ok; ++k) {
        Xn[k] = sym(it.X[k] + ap * dX[k]);
        Sn[k] = sym(it.S[k] + ad * dS[k]);
        ok = Eigen::LLT<MatrixXd>(Xn[k]).info() == Eigen::Success &&
             Eigen::LLT<MatrixXd>(Sn[k]).info() == Eigen::Success;
      }
      if (ok) break;
      if (tries == 30) {
        sol.status = SdpStatus::NumericalTrouble;
        sol.message = "iterate lost definiteness";
        return sol;
      }
      ap *= 0.7;
      ad *= 0.7;
    }
    it.X.swap(Xn);
    it.S.swap(Sn);
    it.y += ad * dy;

    if (std::min(ap, ad) < 1e-8 && sol.primal_infeasibility >= 0.99 * prev_pinf) {
      if (++stall >= 5) break;
    } else {
      stall = 0;
    }
    prev_pinf = sol.primal_infeasibility;
  }

  sol.status = sol.dual_infeasibility > 1e2 * opt.tol ? SdpStatus::Infeasible
                                                      : SdpStatus::NumericalTrouble;
  sol.message = stall >= 5 ? "stalled" : "iteration limit";
  return sol;
}

}  // namespace fsmf
