#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace fsmf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Two-state plant with a quadratic coupling s = x2 - x1^2:
///   x+ = [c0 x1 + c1 s, c2 x1 + c3 s] + G u + m w
///   y  = l0 x1 + q x1^2 + l1 x2 + v
struct QuadraticPlant {
  Eigen::Vector4d drift = Eigen::Vector4d::Zero();
  MatrixXd input;      // 2 x n_u
  VectorXd noise_gain; // 2
  Eigen::Vector2d output_linear = Eigen::Vector2d::Zero();
  double output_quadratic = 0.0;

  VectorXd step(const VectorXd& x, const VectorXd& u, double w) const;
  double measure(const VectorXd& x, double v) const;
  /// Throws DimensionMismatch.
  void validate(int nu) const;
};

/// max(start - slope k, floor)
struct BoundSchedule {
  double start = 1.0;
  double slope = 1.0 / 50.0;
  double floor = 0.25;

  double at(int k) const;
  MatrixXd matrix(int k, int n) const { return at(k) * MatrixXd::Identity(n, n); }
};

/// amplitude * sin(frequency * k)
struct Sinusoid {
  double amplitude = 0.5;
  double frequency = 1.0;

  double at(int k) const;
};

enum class NoiseMode { Sinusoid, Uniform };

/// Scalar process and measurement noise. Uniform mode draws from the interval
/// allowed by the bound schedules with a seeded engine.
class NoiseSource {
 public:
  NoiseSource(NoiseMode mode, Sinusoid process, Sinusoid measurement, BoundSchedule q,
              BoundSchedule r, std::uint64_t seed);

  double process(int k);
  double measurement(int k);

 private:
  double uniform(double bound);

  NoiseMode mode_;
  Sinusoid process_, measurement_;
  BoundSchedule q_, r_;
  std::mt19937_64 rng_;
};

/// w^2 / Q <= 1 with a small rounding allowance.
bool noise_admissible(double w, double bound);

}  // namespace fsmf
