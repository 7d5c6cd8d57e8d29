#include "thermoray/error.hpp"

namespace thermoray {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::MissingSigma: return "MissingSigma";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::LeftDomain: return "LeftDomain";
    case ErrorKind::LeftPatch: return "LeftPatch";
    case ErrorKind::NotHyperbolic: return "NotHyperbolic";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::NotRectangle: return "NotRectangle";
    case ErrorKind::BadScenario: return "BadScenario";
  }
  return "Unknown";
}

}  // namespace thermoray
