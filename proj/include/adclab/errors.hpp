#pragma once

#include <stdexcept>
#include <string>

namespace adclab {

// Every failure raised by the library derives from Error so callers can catch
// the family at once; the concrete type names the failed precondition.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADCLAB_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

// tabular
ADCLAB_DEFINE_ERROR(InvalidTable);
ADCLAB_DEFINE_ERROR(AbsoluteContinuityViolation);
ADCLAB_DEFINE_ERROR(UndefinedRow);
ADCLAB_DEFINE_ERROR(UndefinedPair);
ADCLAB_DEFINE_ERROR(EmptyFamily);

// autodiff
ADCLAB_DEFINE_ERROR(ShapeMismatch);
ADCLAB_DEFINE_ERROR(NonScalarOutput);
ADCLAB_DEFINE_ERROR(NonFinite);

// nn / objectives
ADCLAB_DEFINE_ERROR(LabelOutOfRange);
ADCLAB_DEFINE_ERROR(InvalidSpec);

// synthdata / eval
ADCLAB_DEFINE_ERROR(DegenerateGrid);
ADCLAB_DEFINE_ERROR(GridMismatch);
ADCLAB_DEFINE_ERROR(EmptyClass);

// runner
ADCLAB_DEFINE_ERROR(NonFiniteGradient);
ADCLAB_DEFINE_ERROR(ConfigError);
ADCLAB_DEFINE_ERROR(CheckpointError);
ADCLAB_DEFINE_ERROR(MissingData);

#undef ADCLAB_DEFINE_ERROR

}  // namespace adclab
