#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ionolink {

/// Error codes used across the library. Each maps to one of three process
/// exit classes: configuration (2), frozen-protocol violation (3), data (4).
enum class Errc {
  // configuration
  InvalidConfig,
  UnknownPolicy,
  WindowTooLong,
  DegenerateShape,
  BetaOutOfRange,
  RateNotOnLadder,
  MissingBundle,
  // frozen-calibration protocol
  AlreadyFrozen,
  BundleExists,
  BundleHashMismatch,
  // data
  UnknownFormat,
  NonMonotonicTime,
  EmptySeries,
  GridMismatch,
  InsufficientData,
  SeriesTooShort,
  DegenerateVariance,
  EmptyGate,
  NoBracket,
  NumericalBreakdown,
  PoorConditioning,
};

constexpr int exit_code_for(Errc c) {
  switch (c) {
    case Errc::InvalidConfig:
    case Errc::UnknownPolicy:
    case Errc::WindowTooLong:
    case Errc::DegenerateShape:
    case Errc::BetaOutOfRange:
    case Errc::RateNotOnLadder:
    case Errc::MissingBundle:
      return 2;
    case Errc::AlreadyFrozen:
    case Errc::BundleExists:
    case Errc::BundleHashMismatch:
      return 3;
    default:
      return 4;
  }
}

constexpr const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownPolicy: return "UnknownPolicy";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::DegenerateShape: return "DegenerateShape";
    case Errc::BetaOutOfRange: return "BetaOutOfRange";
    case Errc::RateNotOnLadder: return "RateNotOnLadder";
    case Errc::MissingBundle: return "MissingBundle";
    case Errc::AlreadyFrozen: return "AlreadyFrozen";
    case Errc::BundleExists: return "BundleExists";
    case Errc::BundleHashMismatch: return "BundleHashMismatch";
    case Errc::UnknownFormat: return "UnknownFormat";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::EmptyGate: return "EmptyGate";
    case Errc::NoBracket: return "NoBracket";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::PoorConditioning: return "PoorConditioning";
  }
  return "Unknown";
}

/// Library exception carrying a typed error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  [[nodiscard]] int exit_code() const noexcept { return exit_code_for(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool ok, Errc code, const std::string& message) {
  if (!ok) raise(code, message);
}

}  // namespace ionolink
