#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fsmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class VarKind { Symmetric, Rectangular, Nonnegative };

struct DecisionVar {
  int id = -1;
  VarKind kind = VarKind::Rectangular;
  int rows = 0;
  int cols = 0;
  std::string name;
  int offset = 0;  // first scalar slot
  int size = 0;    // number of scalar slots
};

/// Matrix-valued affine function of the stacked scalar decision vector:
/// F(y) = F0 + sum_s y_s F_s.
class AffineMatrixExpr {
 public:
  AffineMatrixExpr() = default;
  AffineMatrixExpr(Eigen::Index rows, Eigen::Index cols);
  // Implicit lift of constant matrices and Eigen expressions.
  AffineMatrixExpr(MatrixXd constant);  // NOLINT
  template <typename Derived>
  AffineMatrixExpr(const Eigen::MatrixBase<Derived>& constant)  // NOLINT
      : constant_(constant) {}

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const MatrixXd& constant() const { return constant_; }
  const std::map<int, MatrixXd>& terms() const { return terms_; }

  /// Adds coef * y_slot.
  void add_term(int slot, const MatrixXd& coef);
  MatrixXd evaluate(const VectorXd& y) const;
  AffineMatrixExpr transpose() const;
  bool is_symmetric(double tol = 1e-12) const;

  AffineMatrixExpr& operator+=(const AffineMatrixExpr& rhs);
  AffineMatrixExpr& operator-=(const AffineMatrixExpr& rhs);

  // Hidden friends: found only when an operand already is an expression, so
  // plain Eigen arithmetic never sees them.
  friend AffineMatrixExpr operator+(AffineMatrixExpr a, const AffineMatrixExpr& b) { return a += b; }
  friend AffineMatrixExpr operator-(AffineMatrixExpr a, const AffineMatrixExpr& b) { return a -= b; }
  friend AffineMatrixExpr operator-(const AffineMatrixExpr& a) { return scaled(-1.0, a); }
  friend AffineMatrixExpr operator*(double s, const AffineMatrixExpr& a) { return scaled(s, a); }
  friend AffineMatrixExpr operator*(const MatrixXd& m, const AffineMatrixExpr& a) {
    return left_multiply(m, a);
  }
  friend AffineMatrixExpr operator*(const AffineMatrixExpr& a, const MatrixXd& m) {
    return right_multiply(a, m);
  }

  static AffineMatrixExpr scaled(double s, const AffineMatrixExpr& a);
  static AffineMatrixExpr left_multiply(const MatrixXd& m, const AffineMatrixExpr& a);
  static AffineMatrixExpr right_multiply(const AffineMatrixExpr& a, const MatrixXd& m);

 private:
  MatrixXd constant_;
  std::map<int, MatrixXd> terms_;
};


AffineMatrixExpr hcat(const std::vector<AffineMatrixExpr>& parts);
AffineMatrixExpr vcat(const std::vector<AffineMatrixExpr>& parts);
AffineMatrixExpr blkdiag(const std::vector<AffineMatrixExpr>& parts);

/// s * M for a 1x1 expression s.
AffineMatrixExpr scalar_times(const AffineMatrixExpr& s, const MatrixXd& m);

/// [[-P, G], [G^T, -T]]
AffineMatrixExpr schur_embed(const AffineMatrixExpr& P, const AffineMatrixExpr& Gamma,
                             const AffineMatrixExpr& Theta);

struct LmiConstraint {
  AffineMatrixExpr expr;  // required negative semidefinite
  std::string label;
};

/// min c^T y + c0 subject to F_b(y) <= 0 for every block b.
class SdpProblem {
 public:
  DecisionVar add_symmetric(const std::string& name, int n);
  DecisionVar add_matrix(const std::string& name, int rows, int cols);
  /// Registers the scalar and the 1x1 block -t <= 0.
  DecisionVar add_nonnegative(const std::string& name);

  AffineMatrixExpr expr(const DecisionVar& v) const;
  void add_lmi(AffineMatrixExpr expr, std::string label = {});

  void add_objective_trace(const DecisionVar& v, double weight = 1.0);
  void add_objective_slot(int slot, double weight);
  void set_objective_constant(double c0) { objective_constant_ = c0; }

  int num_scalars() const { return num_scalars_; }
  const std::vector<DecisionVar>& variables() const { return vars_; }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  const VectorXd& objective() const { return objective_; }
  double objective_constant() const { return objective_constant_; }
  const DecisionVar& variable(const std::string& name) const;

  MatrixXd value(const DecisionVar& v, const VectorXd& y) const;
  double objective_value(const VectorXd& y) const;

  /// Sparse SDPA text form of the problem.
  void write_sdpa(std::ostream& os) const;

 private:
  DecisionVar& push(VarKind kind, const std::string& name, int rows, int cols, int size);

  std::vector<DecisionVar> vars_;
  std::vector<LmiConstraint> constraints_;
  VectorXd objective_;
  double objective_constant_ = 0.0;
  int num_scalars_ = 0;
};

}  // namespace fsmf
