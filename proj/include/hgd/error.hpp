#pragma once

#include <stdexcept>
#include <string>

namespace hgd {

// Every failure raised by the library derives from Error so callers (the CLI,
// the benchmark sweeps) can catch one type and still dispatch on the kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HGD_DEFINE_ERROR(Name)         \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

HGD_DEFINE_ERROR(ShapeMismatch);
HGD_DEFINE_ERROR(NonFiniteValue);
HGD_DEFINE_ERROR(IterationLimit);
HGD_DEFINE_ERROR(ResampleLimit);
HGD_DEFINE_ERROR(DomainViolation);
HGD_DEFINE_ERROR(NonFiniteIterate);
HGD_DEFINE_ERROR(NotSeparable);
HGD_DEFINE_ERROR(DerivativeVanished);
HGD_DEFINE_ERROR(MissingRecording);
HGD_DEFINE_ERROR(ParseError);
HGD_DEFINE_ERROR(ValidationError);
HGD_DEFINE_ERROR(IoError);

#undef HGD_DEFINE_ERROR

}  // namespace hgd
