#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lcs {

enum class Errc {
  ZeroTrace,
  NonPhysical,
  OutOfRange,
  NoConvergence,
  BadGridSize,
  SizeMismatch,
  BadSize,
  DimensionMismatch,
  EmptyDataset,
  DuplicateCenters,
  SingularSystem,
  OutOfDomain,
  IncompleteGrid,
  EmptySpace,
  ZeroProbability,
  BadSizes,
  ArchitectureTooSmall,
  Parse,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::ZeroTrace: return "ZeroTrace";
    case Errc::NonPhysical: return "NonPhysical";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::BadGridSize: return "BadGridSize";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::BadSize: return "BadSize";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DuplicateCenters: return "DuplicateCenters";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::IncompleteGrid: return "IncompleteGrid";
    case Errc::EmptySpace: return "EmptySpace";
    case Errc::ZeroProbability: return "ZeroProbability";
    case Errc::BadSizes: return "BadSizes";
    case Errc::ArchitectureTooSmall: return "ArchitectureTooSmall";
    case Errc::Parse: return "Parse";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lcs
