#include "compbench/errors.hpp"

namespace compbench {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedSchema: return "UnsupportedSchema";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateMetric: return "DuplicateMetric";
    case ErrorCode::InvalidMetricSpec: return "InvalidMetricSpec";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UndeclaredMetric: return "UndeclaredMetric";
    case ErrorCode::NonFiniteMetric: return "NonFiniteMetric";
    case ErrorCode::RootWithOperation: return "RootWithOperation";
    case ErrorCode::MissingOperation: return "MissingOperation";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::UnknownPath: return "UnknownPath";
    case ErrorCode::NoValues: return "NoValues";
    case ErrorCode::MissingOutput: return "MissingOutput";
    case ErrorCode::BaseRequired: return "BaseRequired";
    case ErrorCode::MismatchedInstanceSets: return "MismatchedInstanceSets";
    case ErrorCode::PathSetMismatch: return "PathSetMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::PathMismatch: return "PathMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::LoadFailure: return "LoadFailure";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::ProviderProtocolViolation: return "ProviderProtocolViolation";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& subject, const std::string& message) {
  std::string out(to_string(code));
  if (!subject.empty()) out += "(" + subject + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string subject, std::string message)
    : std::runtime_error(compose(code, subject, message)),
      code_(code),
      subject_(std::move(subject)),
      message_(std::move(message)) {}

}  // namespace compbench
