#include "eic/errors.hpp"

namespace eic {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::OutOfSupport: return "OutOfSupport";
    case Errc::DomainError: return "DomainError";
    case Errc::DivisionByZeroSupport: return "DivisionByZeroSupport";
    case Errc::NonNormalisablePrior: return "NonNormalisablePrior";
    case Errc::IntegralNotConverged: return "IntegralNotConverged";
    case Errc::UnsupportedClass: return "UnsupportedClass";
    case Errc::BoundaryTooClose: return "BoundaryTooClose";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::NoAnalyticForm: return "NoAnalyticForm";
    case Errc::NoFiniteValue: return "NoFiniteValue";
    case Errc::IllDefinedEstimator: return "IllDefinedEstimator";
    case Errc::SingularDivergence: return "SingularDivergence";
    case Errc::InvalidSpectrum: return "InvalidSpectrum";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what),
      code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace eic
