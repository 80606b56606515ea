#pragma once

#include <stdexcept>
#include <string>

namespace mapfluct {

// Base of every error thrown by the library. Derived types mirror the
// failure classes callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MAPFLUCT_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

MAPFLUCT_DEFINE_ERROR(PoleError);
MAPFLUCT_DEFINE_ERROR(DomainError);
MAPFLUCT_DEFINE_ERROR(DegenerateError);
MAPFLUCT_DEFINE_ERROR(SingularError);
MAPFLUCT_DEFINE_ERROR(MultiplicityError);
MAPFLUCT_DEFINE_ERROR(CountError);
MAPFLUCT_DEFINE_ERROR(IllConditionedError);
MAPFLUCT_DEFINE_ERROR(ConvergenceError);
MAPFLUCT_DEFINE_ERROR(DriftError);
MAPFLUCT_DEFINE_ERROR(NearSingularError);
MAPFLUCT_DEFINE_ERROR(ClassError);
MAPFLUCT_DEFINE_ERROR(UnsupportedError);
MAPFLUCT_DEFINE_ERROR(InsufficientSamples);
MAPFLUCT_DEFINE_ERROR(ParseError);
MAPFLUCT_DEFINE_ERROR(ValidationError);

#undef MAPFLUCT_DEFINE_ERROR

}  // namespace mapfluct
