#include "sqdr/error.h"

namespace sqdr {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotAWav: return "not-a-wav";
    case ErrorKind::kUnsupportedEncoding: return "unsupported-encoding";
    case ErrorKind::kTruncatedFile: return "truncated-file";
    case ErrorKind::kIo: return "io-failure";
    case ErrorKind::kSampleRateMismatch: return "sample-rate-mismatch";
    case ErrorKind::kZeroEnergy: return "zero-energy";
    case ErrorKind::kWindowTooLong: return "window-longer-than-clip";
    case ErrorKind::kClipTooShort: return "clip-too-short";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kIndivisibleChannels: return "indivisible-channels";
    case ErrorKind::kDegenerateBatch: return "degenerate-batch";
    case ErrorKind::kBackwardBeforeForward: return "backward-before-forward";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kBadMagic: return "bad-magic";
    case ErrorKind::kVersionMismatch: return "version-mismatch";
    case ErrorKind::kSingleClass: return "single-class";
    case ErrorKind::kScoreOutOfRange: return "score-out-of-range";
    case ErrorKind::kNumericAbort: return "numeric-abort";
    case ErrorKind::kData: return "data-error";
  }
  return "unknown";
}

}  // namespace sqdr
