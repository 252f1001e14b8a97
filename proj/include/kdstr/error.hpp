#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kdstr {

enum class ErrorCode {
  ParseError,
  DuplicateInstance,
  NonFiniteValue,
  InvalidDataset,
  DegenerateGeometry,
  DisconnectedSensorSet,
  MissingOutline,
  EmptyDataset,
  OutOfRange,
  TooManyInstances,
  LevelMismatch,
  ComplexityExceedsData,
  OutsideModelDomain,
  KeyMismatch,
  ZeroValueInData,
  UnassignedInstance,
  OutsideAllRegions,
  TechniqueCannotImpute,
  VersionMismatch,
  CorruptPayload,
  InvalidConfig,
  InvalidParams,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace kdstr
