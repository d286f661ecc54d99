#include "fsmf/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsmf/errors.hpp"

namespace fsmf {

namespace {

void expect_dims(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
}

}  // namespace

double Trapezoid::operator()(double t) const {
  if (t < a || t > d) return 0.0;
  if (t < b) return (t - a) / (b - a);
  if (t > c) return (d - t) / (d - c);
  return 1.0;
}

MembershipFamily MembershipFamily::clamp_ramp(double lo, double hi, int premise) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {premise, {{lo, hi, inf, inf}, {-inf, -inf, lo, hi}}};
}

MembershipFamily MembershipFamily::single(int premise) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {premise, {{-inf, -inf, inf, inf}}};
}

void TSModel::validate() const {
  if (rules.empty()) throw DimensionMismatch("model: no rules");
  if (memberships.shapes.size() != rules.size())
    throw DimensionMismatch("model: " + std::to_string(rules.size()) + " rules but " +
                            std::to_string(memberships.shapes.size()) + " memberships");
  const auto& r0 = rules.front();
  const auto n = r0.A.rows(), nu_ = r0.B.cols(), nw_ = r0.M.cols(), ny_ = r0.C.rows(),
             nv_ = r0.D.cols();
  if (n == 0) throw DimensionMismatch("model: empty state");
  if (memberships.premise_index < 0 || memberships.premise_index >= n)
    throw DimensionMismatch("model: premise index out of range");
  for (const auto& r : rules) {
    expect_dims(r.A, n, n, "A");
    expect_dims(r.B, n, nu_, "B");
    expect_dims(r.M, n, nw_, "M");
    expect_dims(r.C, ny_, n, "C");
    expect_dims(r.D, ny_, nv_, "D");
    expect_dims(r.A_leader, n, n, "A_leader");
  }
  const auto& b = bounds;
  expect_dims(b.H1, n, b.H1.cols(), "H1");
  expect_dims(b.E1, b.H1.cols(), n, "E1");
  expect_dims(b.H2, n, b.H2.cols(), "H2");
  expect_dims(b.E2, b.H2.cols(), nw_, "E2");
  expect_dims(b.H3, ny_, b.H3.cols(), "H3");
  expect_dims(b.E3, b.H3.cols(), n, "E3");
  expect_dims(b.H4, ny_, b.H4.cols(), "H4");
  expect_dims(b.E4, b.H4.cols(), nv_, "E4");
}

VectorXd memberships(const MembershipFamily& family, double theta) {
  if (!std::isfinite(theta)) throw DegenerateMembership("memberships: non-finite premise");
  VectorXd mu(family.shapes.size());
  for (std::size_t l = 0; l < family.shapes.size(); ++l)
    mu(static_cast<Eigen::Index>(l)) = std::max(0.0, family.shapes[l](theta));
  const double total = mu.sum();
  if (!(total > 0.0))
    throw DegenerateMembership("memberships: all activations vanish at " + std::to_string(theta));
  return mu / total;
}

VectorXd memberships(const TSModel& model, double theta) {
  return memberships(model.memberships, theta);
}

VectorXd premise_weights(const TSModel& model, const VectorXd& x) {
  return memberships(model.memberships, x(model.memberships.premise_index));
}

MatrixXd blend(const std::vector<MatrixXd>& mats, const VectorXd& g) {
  if (mats.empty() || static_cast<Eigen::Index>(mats.size()) != g.size())
    throw WeightDimensionMismatch("blend: " + std::to_string(g.size()) + " weights for " +
                                  std::to_string(mats.size()) + " matrices");
  MatrixXd out = g(0) * mats[0];
  for (std::size_t l = 1; l < mats.size(); ++l) out += g(static_cast<Eigen::Index>(l)) * mats[l];
  return out;
}

BlendedModel blend(const TSModel& model, const VectorXd& g) {
  auto pick = [&](auto member) {
    std::vector<MatrixXd> v;
    v.reserve(model.rules.size());
    for (const auto& r : model.rules) v.push_back(r.*member);
    return blend(v, g);
  };
  return {pick(&FuzzyRule::A), pick(&FuzzyRule::B), pick(&FuzzyRule::M),
          pick(&FuzzyRule::C), pick(&FuzzyRule::D), pick(&FuzzyRule::A_leader)};
}

}  // namespace fsmf
