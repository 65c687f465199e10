#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rvar {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit codes and the service onto HTTP statuses.
enum class ErrorCode {
  kIo,
  kParse,
  kSchema,
  kCyclicPlan,
  kInvalidPlan,
  kNoHistory,
  kNoFuture,
  kInsufficientSamples,
  kEmptySample,
  kNonPositiveMedian,
  kConfig,
  kTooFewGroups,
  kSpecMismatch,
  kSchemaMismatch,
  kDegenerateLabels,
  kEmptySplit,
  kEmptyTest,
  kTooManyFeatures,
  kUnknownFeature,
  kInvalidFraction,
  kEmptyJobSet,
  kFingerprintMismatch,
  kInvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures remember the 1-based input line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rvar
