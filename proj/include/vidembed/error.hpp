#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vidembed {

enum class Errc {
  ShapeMismatch,
  IndexOutOfRange,
  TapeConsumed,
  NonScalarLoss,
  NormUnderflow,
  NonFinite,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  TruncatedFile,
  ConfigInvalid,
  EmptyDataset,
  HeadNotTrainable,
  HeadNotEmbedding,
  DimMismatch,
  EmptyResult,
  DegenerateData,
  InsufficientData,
  IoError,
  ParseError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::TapeConsumed: return "TapeConsumed";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::NormUnderflow: return "NormUnderflow";
    case Errc::NonFinite: return "NonFinite";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::HeadNotTrainable: return "HeadNotTrainable";
    case Errc::HeadNotEmbedding: return "HeadNotEmbedding";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (and the CLI's exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace vidembed
