#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcopt {

enum class Errc {
  // caseio
  FileNotFound,
  MissingTable,
  MalformedRow,
  DuplicateBusId,
  UnknownBus,
  InvalidCase,
  SchemaVersionMismatch,
  LengthMismatch,
  CrossReferenceError,
  EmptyEvaluation,
  // grid
  UnsupportedCostModel,
  IslandedNetwork,
  NoReferenceBus,
  ZeroImpedance,
  NominalNotConverged,
  DimensionMismatch,
  // acsolve
  Diverged,
  SingularJacobian,
  // dcsolve
  PrimalInfeasible,
  Unbounded,
  MaxIterations,
  // sensitivity
  SingularKkt,
  NotOptimal,
  // train
  LowerLevelInfeasible,
  InvalidConfig,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dcopt
