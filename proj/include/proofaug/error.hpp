#pragma once

#include <stdexcept>
#include <string>

namespace proofaug {

// Base class for every error the toolkit throws. Callers that only want to
// report and continue can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PROOFAUG_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

PROOFAUG_DEFINE_ERROR(UnbalancedBlocks);
PROOFAUG_DEFINE_ERROR(SessionClosed);
PROOFAUG_DEFINE_ERROR(UnknownCheckpoint);
PROOFAUG_DEFINE_ERROR(ItpUnavailable);
PROOFAUG_DEFINE_ERROR(CombinatorialLimit);
PROOFAUG_DEFINE_ERROR(BudgetExhausted);
PROOFAUG_DEFINE_ERROR(SamplerUnavailable);
PROOFAUG_DEFINE_ERROR(BackendTimeout);
PROOFAUG_DEFINE_ERROR(BackendError);
PROOFAUG_DEFINE_ERROR(MissingPlaceholderValue);
PROOFAUG_DEFINE_ERROR(PoolTooSmall);
PROOFAUG_DEFINE_ERROR(ConfigError);

#undef PROOFAUG_DEFINE_ERROR

}  // namespace proofaug
