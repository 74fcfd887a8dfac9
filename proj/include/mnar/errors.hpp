#pragma once

#include <stdexcept>
#include <string>

namespace mnar {

/// Broad failure class; the CLI maps these onto process exit codes.
enum class ErrorCategory {
  kInvalidInput,
  kNumerical,
  kAssumptionViolation,
  kNonConvergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define MNAR_DEFINE_ERROR(Name, Category)                     \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what)                    \
        : Error(ErrorCategory::Category, #Name ": " + what) {} \
  }

MNAR_DEFINE_ERROR(InvalidArgument, kInvalidInput);
MNAR_DEFINE_ERROR(SchemaError, kInvalidInput);
MNAR_DEFINE_ERROR(InvalidBeta, kInvalidInput);
MNAR_DEFINE_ERROR(NotPositiveDefinite, kNumerical);
MNAR_DEFINE_ERROR(SingularBlock, kNumerical);
MNAR_DEFINE_ERROR(GridTooCoarse, kNumerical);
MNAR_DEFINE_ERROR(MassTooLow, kAssumptionViolation);
MNAR_DEFINE_ERROR(PairStarved, kAssumptionViolation);
MNAR_DEFINE_ERROR(BlockStarved, kAssumptionViolation);
MNAR_DEFINE_ERROR(AnchorViolated, kAssumptionViolation);
MNAR_DEFINE_ERROR(EmptyFeasible, kAssumptionViolation);
MNAR_DEFINE_ERROR(InsufficientStream, kAssumptionViolation);
MNAR_DEFINE_ERROR(SubsetMassZero, kAssumptionViolation);
MNAR_DEFINE_ERROR(NonConvergent, kNonConvergence);
MNAR_DEFINE_ERROR(NoConvergence, kNonConvergence);

#undef MNAR_DEFINE_ERROR

}  // namespace mnar
