#pragma once

#include <stdexcept>
#include <string>

namespace fchlab {

enum class ErrorKind {
  InvalidField,
  Domain,
  GridMismatch,
  InvalidWell,
  NoHomoclinic,
  Tolerance,
  Window,
  Conditioning,
  Admissibility,
  Refinement,
  MassSplit,
  Shift,
  Iteration,
  Stiffness,
  Extraction,
  Config,
  Validation,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidField: return "invalid-field";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::InvalidWell: return "invalid-well";
    case ErrorKind::NoHomoclinic: return "no-homoclinic";
    case ErrorKind::Tolerance: return "tolerance";
    case ErrorKind::Window: return "window";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::Admissibility: return "admissibility";
    case ErrorKind::Refinement: return "refinement";
    case ErrorKind::MassSplit: return "mass-split";
    case ErrorKind::Shift: return "shift";
    case ErrorKind::Iteration: return "iteration";
    case ErrorKind::Stiffness: return "stiffness";
    case ErrorKind::Extraction: return "extraction";
    case ErrorKind::Config: return "config";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fchlab
