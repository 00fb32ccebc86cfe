#pragma once

#include <stdexcept>
#include <string>

namespace sqdr {

// Every failure the library reports carries one of these kinds so callers
// (notably the CLI) can map them onto stable exit codes.
enum class ErrorKind {
  kNotAWav,
  kUnsupportedEncoding,
  kTruncatedFile,
  kIo,
  kSampleRateMismatch,
  kZeroEnergy,
  kWindowTooLong,
  kClipTooShort,
  kShapeMismatch,
  kIndivisibleChannels,
  kDegenerateBatch,
  kBackwardBeforeForward,
  kOutOfRange,
  kInvalidConfig,
  kEmptyInput,
  kBadMagic,
  kVersionMismatch,
  kSingleClass,
  kScoreOutOfRange,
  kNumericAbort,
  kData,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sqdr
