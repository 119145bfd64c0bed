#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icebench {

enum class Err {
  MissingFile,
  IoFailure,
  PayloadSizeMismatch,
  UnknownDtype,
  OrphanPolygonId,
  MalformedDate,
  InvalidPolygon,
  UnknownChannel,
  DuplicateChannel,
  ShapeMismatch,
  IncompatibleGrid,
  DegenerateChannel,
  MissingStats,
  SceneTooSmall,
  EmptyOutput,
  EmptySupport,
  DomainError,
  InsufficientScenes,
  UnknownLocation,
  UnknownClimatology,
  NonFiniteLoss,
  UntrainedModel,
  VersionMismatch,
  CorruptPayload,
  ConfigError,
  InvalidArgument,
};

std::string_view err_name(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& message)
      : std::runtime_error(std::string(err_name(code)) + ": " + message), code_(code) {}

  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& message) { throw Error(code, message); }

inline std::string_view err_name(Err code) {
  switch (code) {
    case Err::MissingFile: return "missing file";
    case Err::IoFailure: return "io failure";
    case Err::PayloadSizeMismatch: return "payload size mismatch";
    case Err::UnknownDtype: return "unknown dtype";
    case Err::OrphanPolygonId: return "orphan polygon id";
    case Err::MalformedDate: return "malformed date";
    case Err::InvalidPolygon: return "invalid polygon";
    case Err::UnknownChannel: return "unknown channel";
    case Err::DuplicateChannel: return "duplicate channel";
    case Err::ShapeMismatch: return "shape mismatch";
    case Err::IncompatibleGrid: return "incompatible grid";
    case Err::DegenerateChannel: return "degenerate channel";
    case Err::MissingStats: return "missing stats";
    case Err::SceneTooSmall: return "scene too small";
    case Err::EmptyOutput: return "empty output";
    case Err::EmptySupport: return "empty support";
    case Err::DomainError: return "domain error";
    case Err::InsufficientScenes: return "insufficient scenes";
    case Err::UnknownLocation: return "unknown location";
    case Err::UnknownClimatology: return "unknown climatology";
    case Err::NonFiniteLoss: return "non-finite loss";
    case Err::UntrainedModel: return "untrained model";
    case Err::VersionMismatch: return "version mismatch";
    case Err::CorruptPayload: return "corrupt payload";
    case Err::ConfigError: return "config error";
    case Err::InvalidArgument: return "invalid argument";
  }
  return "error";
}

}  // namespace icebench
