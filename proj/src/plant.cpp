#include "fsmf/plant.hpp"

#include <algorithm>
#include <cmath>

#include "fsmf/errors.hpp"

namespace fsmf {

VectorXd QuadraticPlant::step(const VectorXd& x, const VectorXd& u, double w) const {
  if (x.size() != 2 || u.size() != input.cols()) throw DimensionMismatch("plant step");
  const double s = x(1) - x(0) * x(0);
  VectorXd next(2);
  next << drift(0) * x(0) + drift(1) * s, drift(2) * x(0) + drift(3) * s;
  return next + input * u + noise_gain * w;
}

double QuadraticPlant::measure(const VectorXd& x, double v) const {
  if (x.size() != 2) throw DimensionMismatch("plant output");
  return output_linear(0) * x(0) + output_quadratic * x(0) * x(0) + output_linear(1) * x(1) + v;
}

void QuadraticPlant::validate(int nu) const {
  if (input.rows() != 2 || input.cols() != nu || noise_gain.size() != 2)
    throw DimensionMismatch("plant: input must be 2 x " + std::to_string(nu) +
                            " and the noise gain of length 2");
}

double BoundSchedule::at(int k) const { return std::max(start - slope * k, floor); }

double Sinusoid::at(int k) const { return amplitude * std::sin(frequency * k); }

NoiseSource::NoiseSource(NoiseMode mode, Sinusoid process, Sinusoid measurement, BoundSchedule q,
                         BoundSchedule r, std::uint64_t seed)
    : mode_(mode), process_(process), measurement_(measurement), q_(q), r_(r), rng_(seed) {}

double NoiseSource::uniform(double bound) {
  // 53 random bits mapped to [-1, 1]; avoids the unspecified algorithm of
  // uniform_real_distribution so runs match across standard libraries.
  const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return std::sqrt(bound) * (2.0 * unit - 1.0);
}

double NoiseSource::process(int k) {
  return mode_ == NoiseMode::Sinusoid ? process_.at(k) : uniform(q_.at(k));
}

double NoiseSource::measurement(int k) {
  return mode_ == NoiseMode::Sinusoid ? measurement_.at(k) : uniform(r_.at(k));
}

bool noise_admissible(double w, double bound) { return w * w <= bound * (1.0 + 1e-12); }

}  // namespace fsmf
