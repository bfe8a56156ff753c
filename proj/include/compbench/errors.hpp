#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace compbench {

enum class ErrorCode {
  // ingestion
  ParseError,
  UnsupportedSchema,
  DuplicateId,
  DuplicateMetric,
  InvalidMetricSpec,
  UnknownParent,
  CycleDetected,
  UndeclaredMetric,
  NonFiniteMetric,
  RootWithOperation,
  MissingOperation,
  // lookups
  UnknownModel,
  UnknownMetric,
  UnknownPath,
  NoValues,
  // behaviors
  MissingOutput,
  BaseRequired,
  MismatchedInstanceSets,
  // layers
  PathSetMismatch,
  KindMismatch,
  PathMismatch,
  ShapeMismatch,
  // simulator
  DimensionMismatch,
  // generic
  InvalidArgument,
  IoError,
  // service
  BadRequest,
  BadConfig,
  LoadFailure,
  ProviderUnavailable,
  ProviderProtocolViolation,
};

std::string_view to_string(ErrorCode code);

// All engine failures are reported with this exception. `subject` names the
// offending entity (model id, metric, layer path, ...) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string subject, std::string message = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::string message_;
};

}  // namespace compbench
