#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dexdrum {

// Every failure the engine reports carries one of these kinds so callers can
// branch on the category without parsing messages.
enum class ErrorKind {
  // score_io
  kMalformedHeader,
  kUnsupportedFormat,
  kTruncatedTrack,
  kBadVarint,
  kNonPositiveFactor,
  kNonPositiveBpm,
  kUnassignedDrum,
  kSameHandCollision,
  // choreography
  kUnreachableDrum,
  kWindowTooNarrow,
  kOverlappingStrikes,
  kBadLayout,
  // drumworld
  kBadConfig,
  kNonFiniteState,
  // rewards_obs
  kNonPositiveSigma,
  // learner
  kDimensionMismatch,
  kLengthMismatch,
  kNonFiniteLoss,
  kRecordingLengthMismatch,
  kBadCheckpoint,
  // evalkit
  kEmptyTrace,
  kMissingCheckpoint,
  // cli
  kUnknownSubcommand,
  kConfigError,
  kIo,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedHeader: return "MalformedHeader";
    case ErrorKind::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::kTruncatedTrack: return "TruncatedTrack";
    case ErrorKind::kBadVarint: return "BadVarint";
    case ErrorKind::kNonPositiveFactor: return "NonPositiveFactor";
    case ErrorKind::kNonPositiveBpm: return "NonPositiveBpm";
    case ErrorKind::kUnassignedDrum: return "UnassignedDrum";
    case ErrorKind::kSameHandCollision: return "SameHandCollision";
    case ErrorKind::kUnreachableDrum: return "UnreachableDrum";
    case ErrorKind::kWindowTooNarrow: return "WindowTooNarrow";
    case ErrorKind::kOverlappingStrikes: return "OverlappingStrikes";
    case ErrorKind::kBadLayout: return "BadLayout";
    case ErrorKind::kBadConfig: return "BadConfig";
    case ErrorKind::kNonFiniteState: return "NonFiniteState";
    case ErrorKind::kNonPositiveSigma: return "NonPositiveSigma";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kRecordingLengthMismatch: return "RecordingLengthMismatch";
    case ErrorKind::kBadCheckpoint: return "BadCheckpoint";
    case ErrorKind::kEmptyTrace: return "EmptyTrace";
    case ErrorKind::kMissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::kUnknownSubcommand: return "UnknownSubcommand";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dexdrum
