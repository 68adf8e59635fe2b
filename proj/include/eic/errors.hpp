#pragma once

#include <stdexcept>
#include <string>

namespace eic {

enum class Errc {
  OutOfSupport,
  DomainError,
  DivisionByZeroSupport,
  NonNormalisablePrior,
  IntegralNotConverged,
  UnsupportedClass,
  BoundaryTooClose,
  NonFiniteLoss,
  NoAnalyticForm,
  NoFiniteValue,
  IllDefinedEstimator,
  SingularDivergence,
  InvalidSpectrum,
  PreconditionViolated,
  InvalidConfig,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what);
  Errc code() const { return code_; }

private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace eic
