#include "fsmf/lmi.hpp"

#include <iomanip>
#include <ostream>

#include "fsmf/errors.hpp"

namespace fsmf {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_same_shape(const AffineMatrixExpr& a, const AffineMatrixExpr& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch(std::string(op) + ": " + dims(a.rows(), a.cols()) + " vs " +
                            dims(b.rows(), b.cols()));
}

}  // namespace

AffineMatrixExpr::AffineMatrixExpr(Eigen::Index rows, Eigen::Index cols)
    : constant_(MatrixXd::Zero(rows, cols)) {}

AffineMatrixExpr::AffineMatrixExpr(MatrixXd constant) : constant_(std::move(constant)) {}

void AffineMatrixExpr::add_term(int slot, const MatrixXd& coef) {
  if (coef.rows() != rows() || coef.cols() != cols())
    throw DimensionMismatch("add_term: coefficient " + dims(coef.rows(), coef.cols()) +
                            " for expression " + dims(rows(), cols()));
  auto [it, fresh] = terms_.try_emplace(slot, coef);
  if (!fresh) it->second += coef;
}

MatrixXd AffineMatrixExpr::evaluate(const VectorXd& y) const {
  MatrixXd out = constant_;
  for (const auto& [slot, coef] : terms_) {
    if (slot >= y.size()) throw DimensionMismatch("evaluate: assignment too short");
    out += y(slot) * coef;
  }
  return out;
}

AffineMatrixExpr AffineMatrixExpr::transpose() const {
  AffineMatrixExpr out(constant_.transpose());
  for (const auto& [slot, coef] : terms_) out.terms_.emplace(slot, coef.transpose());
  return out;
}

bool AffineMatrixExpr::is_symmetric(double tol) const {
  if (rows() != cols()) return false;
  auto sym = [tol](const MatrixXd& m) {
    return m.size() == 0 || (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
  };
  if (!sym(constant_)) return false;
  for (const auto& [slot, coef] : terms_)
    if (!sym(coef)) return false;
  return true;
}

AffineMatrixExpr& AffineMatrixExpr::operator+=(const AffineMatrixExpr& rhs) {
  require_same_shape(*this, rhs, "operator+");
  constant_ += rhs.constant_;
  for (const auto& [slot, coef] : rhs.terms_) add_term(slot, coef);
  return *this;
}

AffineMatrixExpr& AffineMatrixExpr::operator-=(const AffineMatrixExpr& rhs) {
  return *this += -rhs;
}

AffineMatrixExpr AffineMatrixExpr::scaled(double s, const AffineMatrixExpr& a) {
  AffineMatrixExpr out(MatrixXd(s * a.constant()));
  for (const auto& [slot, coef] : a.terms()) out.add_term(slot, s * coef);
  return out;
}

AffineMatrixExpr AffineMatrixExpr::left_multiply(const MatrixXd& m, const AffineMatrixExpr& a) {
  if (m.cols() != a.rows())
    throw DimensionMismatch("left multiply: " + dims(m.rows(), m.cols()) + " * " +
                            dims(a.rows(), a.cols()));
  AffineMatrixExpr out(MatrixXd(m * a.constant()));
  for (const auto& [slot, coef] : a.terms()) out.add_term(slot, m * coef);
  return out;
}

AffineMatrixExpr AffineMatrixExpr::right_multiply(const AffineMatrixExpr& a, const MatrixXd& m) {
  if (a.cols() != m.rows())
    throw DimensionMismatch("right multiply: " + dims(a.rows(), a.cols()) + " * " +
                            dims(m.rows(), m.cols()));
  AffineMatrixExpr out(MatrixXd(a.constant() * m));
  for (const auto& [slot, coef] : a.terms()) out.add_term(slot, coef * m);
  return out;
}

namespace {

// Places each part at (row_off, col_off) of a zero expression.
AffineMatrixExpr place(const std::vector<AffineMatrixExpr>& parts, Eigen::Index rows,
                       Eigen::Index cols, const std::vector<Eigen::Index>& r0,
                       const std::vector<Eigen::Index>& c0) {
  MatrixXd constant = MatrixXd::Zero(rows, cols);
  std::map<int, MatrixXd> terms;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    constant.block(r0[p], c0[p], part.rows(), part.cols()) = part.constant();
    for (const auto& [slot, coef] : part.terms()) {
      auto [it, fresh] = terms.try_emplace(slot, MatrixXd::Zero(rows, cols));
      it->second.block(r0[p], c0[p], part.rows(), part.cols()) += coef;
    }
  }
  AffineMatrixExpr out(std::move(constant));
  for (auto& [slot, coef] : terms) out.add_term(slot, coef);
  return out;
}

}  // namespace

AffineMatrixExpr hcat(const std::vector<AffineMatrixExpr>& parts) {
  if (parts.empty()) return {};
  const auto rows = parts.front().rows();
  std::vector<Eigen::Index> r0, c0;
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw DimensionMismatch("hcat: row count " + std::to_string(p.rows()) + " vs " +
                              std::to_string(rows));
    r0.push_back(0);
    c0.push_back(cols);
    cols += p.cols();
  }
  return place(parts, rows, cols, r0, c0);
}

AffineMatrixExpr vcat(const std::vector<AffineMatrixExpr>& parts) {
  if (parts.empty()) return {};
  const auto cols = parts.front().cols();
  std::vector<Eigen::Index> r0, c0;
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw DimensionMismatch("vcat: column count " + std::to_string(p.cols()) + " vs " +
                              std::to_string(cols));
    r0.push_back(rows);
    c0.push_back(0);
    rows += p.rows();
  }
  return place(parts, rows, cols, r0, c0);
}

AffineMatrixExpr blkdiag(const std::vector<AffineMatrixExpr>& parts) {
  std::vector<Eigen::Index> r0, c0;
  Eigen::Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    r0.push_back(rows);
    c0.push_back(cols);
    rows += p.rows();
    cols += p.cols();
  }
  return place(parts, rows, cols, r0, c0);
}

AffineMatrixExpr scalar_times(const AffineMatrixExpr& s, const MatrixXd& m) {
  if (s.rows() != 1 || s.cols() != 1)
    throw DimensionMismatch("scalar_times: expected 1x1, got " + dims(s.rows(), s.cols()));
  AffineMatrixExpr out(MatrixXd(s.constant()(0, 0) * m));
  for (const auto& [slot, coef] : s.terms()) out.add_term(slot, coef(0, 0) * m);
  return out;
}

AffineMatrixExpr schur_embed(const AffineMatrixExpr& P, const AffineMatrixExpr& Gamma,
                             const AffineMatrixExpr& Theta) {
  if (P.rows() != P.cols() || Theta.rows() != Theta.cols() || Gamma.rows() != P.rows() ||
      Gamma.cols() != Theta.rows())
    throw DimensionMismatch("schur_embed: P " + dims(P.rows(), P.cols()) + ", Gamma " +
                            dims(Gamma.rows(), Gamma.cols()) + ", Theta " +
                            dims(Theta.rows(), Theta.cols()));
  return vcat({hcat({-P, Gamma}), hcat({Gamma.transpose(), -Theta})});
}

DecisionVar& SdpProblem::push(VarKind kind, const std::string& name, int rows, int cols, int size) {
  for (const auto& v : vars_)
    if (v.name == name) throw DimensionMismatch("duplicate variable name '" + name + "'");
  DecisionVar v;
  v.id = static_cast<int>(vars_.size());
  v.kind = kind;
  v.rows = rows;
  v.cols = cols;
  v.name = name;
  v.offset = num_scalars_;
  v.size = size;
  num_scalars_ += size;
  objective_.conservativeResize(num_scalars_);
  objective_.tail(size).setZero();
  vars_.push_back(v);
  return vars_.back();
}

DecisionVar SdpProblem::add_symmetric(const std::string& name, int n) {
  return push(VarKind::Symmetric, name, n, n, n * (n + 1) / 2);
}

DecisionVar SdpProblem::add_matrix(const std::string& name, int rows, int cols) {
  return push(VarKind::Rectangular, name, rows, cols, rows * cols);
}

DecisionVar SdpProblem::add_nonnegative(const std::string& name) {
  DecisionVar v = push(VarKind::Nonnegative, name, 1, 1, 1);
  add_lmi(-expr(v), name + ">=0");
  return v;
}

// Symmetric slots run over the lower triangle column by column; rectangular
// slots are column-major.
AffineMatrixExpr SdpProblem::expr(const DecisionVar& v) const {
  if (v.id < 0 || v.id >= static_cast<int>(vars_.size()) || vars_[v.id].name != v.name)
    throw DimensionMismatch("expr: unregistered variable '" + v.name + "'");
  AffineMatrixExpr out(v.rows, v.cols);
  int slot = v.offset;
  if (v.kind == VarKind::Symmetric) {
    for (int j = 0; j < v.cols; ++j)
      for (int i = j; i < v.rows; ++i) {
        MatrixXd e = MatrixXd::Zero(v.rows, v.cols);
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        out.add_term(slot++, e);
      }
  } else {
    for (int j = 0; j < v.cols; ++j)
      for (int i = 0; i < v.rows; ++i) {
        MatrixXd e = MatrixXd::Zero(v.rows, v.cols);
        e(i, j) = 1.0;
        out.add_term(slot++, e);
      }
  }
  return out;
}

void SdpProblem::add_lmi(AffineMatrixExpr e, std::string label) {
  if (!e.is_symmetric(1e-12))
    throw DimensionMismatch("add_lmi: block '" + label + "' is not symmetric");
  for (const auto& [slot, coef] : e.terms())
    if (slot < 0 || slot >= num_scalars_)
      throw DimensionMismatch("add_lmi: block '" + label + "' references an unregistered slot");
  constraints_.push_back({std::move(e), std::move(label)});
}

void SdpProblem::add_objective_trace(const DecisionVar& v, double weight) {
  if (v.rows != v.cols) throw DimensionMismatch("add_objective_trace: non-square variable");
  const AffineMatrixExpr e = expr(v);
  for (const auto& [slot, coef] : e.terms()) objective_(slot) += weight * coef.trace();
}

void SdpProblem::add_objective_slot(int slot, double weight) {
  if (slot < 0 || slot >= num_scalars_) throw DimensionMismatch("objective slot out of range");
  objective_(slot) += weight;
}

const DecisionVar& SdpProblem::variable(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return v;
  throw DimensionMismatch("unknown variable '" + name + "'");
}

MatrixXd SdpProblem::value(const DecisionVar& v, const VectorXd& y) const {
  return expr(v).evaluate(y);
}

double SdpProblem::objective_value(const VectorXd& y) const {
  return objective_.dot(y) + objective_constant_;
}

// SDPA primal: min c^T x  s.t.  sum_i x_i G_i - G_0 >= 0.  With F(y) <= 0 this
// is G_0 = F_0 and G_i = -F_i.
void SdpProblem::write_sdpa(std::ostream& os) const {
  os << "\"fsmf problem: " << constraints_.size() << " blocks\"\n";
  os << num_scalars_ << "\n" << constraints_.size() << "\n";
  for (std::size_t b = 0; b < constraints_.size(); ++b)
    os << (b ? " " : "") << constraints_[b].expr.rows();
  os << "\n";
  os << std::setprecision(17);
  for (int i = 0; i < num_scalars_; ++i) os << (i ? " " : "") << objective_(i);
  os << "\n";
  auto emit = [&os](int mat, std::size_t blk, const MatrixXd& m, double sign) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i; j < m.cols(); ++j)
        if (m(i, j) != 0.0)
          os << mat << " " << blk + 1 << " " << i + 1 << " " << j + 1 << " " << sign * m(i, j)
             << "\n";
  };
  for (std::size_t b = 0; b < constraints_.size(); ++b) {
    emit(0, b, constraints_[b].expr.constant(), 1.0);
    for (const auto& [slot, coef] : constraints_[b].expr.terms()) emit(slot + 1, b, coef, -1.0);
  }
}

}  // namespace fsmf
