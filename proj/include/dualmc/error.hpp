#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualmc {

// Root of every error the library throws. Callers that only care about
// "something in dualmc failed" catch this; tests match the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DUALMC_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

// core
DUALMC_DEFINE_ERROR(EmptyDataset);
DUALMC_DEFINE_ERROR(IdOutOfRange);
DUALMC_DEFINE_ERROR(KTooLarge);
DUALMC_DEFINE_ERROR(InvalidRecord);
DUALMC_DEFINE_ERROR(DuplicateSymptom);

// diagnosis
DUALMC_DEFINE_ERROR(NonPositiveTemperature);
DUALMC_DEFINE_ERROR(EmptyVector);
DUALMC_DEFINE_ERROR(InvalidEpsilon);
DUALMC_DEFINE_ERROR(LengthMismatch);
DUALMC_DEFINE_ERROR(ZeroPrediction);

// policy
DUALMC_DEFINE_ERROR(AllMasked);
DUALMC_DEFINE_ERROR(EmptyRollout);

// environment
DUALMC_DEFINE_ERROR(TerminationNotScoredHere);
DUALMC_DEFINE_ERROR(DuplicateQuery);
DUALMC_DEFINE_ERROR(DisabledAction);
DUALMC_DEFINE_ERROR(EpisodeDone);

// inquiry / orchestrator
DUALMC_DEFINE_ERROR(EmptyCandidates);
DUALMC_DEFINE_ERROR(ComponentShapeMismatch);
DUALMC_DEFINE_ERROR(EmptySuite);
DUALMC_DEFINE_ERROR(InvalidConfig);

// harness
DUALMC_DEFINE_ERROR(UnknownSymbol);
DUALMC_DEFINE_ERROR(ImpossibleEvidence);
DUALMC_DEFINE_ERROR(Timeout);
DUALMC_DEFINE_ERROR(BadResponse);
DUALMC_DEFINE_ERROR(ServerError);
DUALMC_DEFINE_ERROR(UsageError);
DUALMC_DEFINE_ERROR(IoError);

#undef DUALMC_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dualmc
