#pragma once

#include <stdexcept>
#include <string>

namespace stancefusion {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STANCEFUSION_DEFINE_ERROR(name) \
  class name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

// corpus loading / interchange
STANCEFUSION_DEFINE_ERROR(MissingLabelFile);
STANCEFUSION_DEFINE_ERROR(OrphanReply);
STANCEFUSION_DEFINE_ERROR(MalformedPostFile);
STANCEFUSION_DEFINE_ERROR(ParseError);
STANCEFUSION_DEFINE_ERROR(InvariantViolation);
STANCEFUSION_DEFINE_ERROR(UnlabeledPost);

// text preparation
STANCEFUSION_DEFINE_ERROR(PostNotInThread);

// features
STANCEFUSION_DEFINE_ERROR(EmptyCorpus);

// models
STANCEFUSION_DEFINE_ERROR(ZeroFraction);
STANCEFUSION_DEFINE_ERROR(DimensionMismatch);
STANCEFUSION_DEFINE_ERROR(MissingClass);
STANCEFUSION_DEFINE_ERROR(MissingSubmodel);
STANCEFUSION_DEFINE_ERROR(NonFiniteLoss);

// encoders
STANCEFUSION_DEFINE_ERROR(BackendUnavailable);

// evaluation
STANCEFUSION_DEFINE_ERROR(LengthMismatch);
STANCEFUSION_DEFINE_ERROR(EmptyInput);

// configuration / artifacts
STANCEFUSION_DEFINE_ERROR(ConfigError);
STANCEFUSION_DEFINE_ERROR(IoError);

#undef STANCEFUSION_DEFINE_ERROR

}  // namespace stancefusion
