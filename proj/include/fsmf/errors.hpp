#pragma once

#include <stdexcept>
#include <string>

namespace fsmf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define FSMF_ERROR(Name)                                  \
  struct Name : Error {                                   \
    explicit Name(const std::string& what) : Error(what) {} \
  }

FSMF_ERROR(DimensionMismatch);
FSMF_ERROR(NotPositiveDefinite);
FSMF_ERROR(NumericalFailure);
FSMF_ERROR(UnsupportedDimension);
FSMF_ERROR(DegenerateMembership);
FSMF_ERROR(WeightDimensionMismatch);
FSMF_ERROR(MissingNeighborEstimate);
FSMF_ERROR(DegenerateNoiseBound);
FSMF_ERROR(SolverInfeasible);
FSMF_ERROR(MissingHistory);
FSMF_ERROR(ConfigParse);
FSMF_ERROR(IoFailure);

#undef FSMF_ERROR

}  // namespace fsmf
