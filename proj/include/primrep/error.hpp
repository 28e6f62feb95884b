#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace primrep {

enum class ErrorCode {
  NonManifoldEdge,
  InconsistentOrientation,
  InvalidMesh,
  InvalidPrimitive,
  GenerationFailed,
  EmptyMap,
  NoHits,
  NoValidCut,
  InsufficientSupport,
  NonWatertightInput,
  NoCurves,
  TangentialContact,
  EmptySurface,
  Io,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonManifoldEdge: return "NonManifoldEdge";
    case ErrorCode::InconsistentOrientation: return "InconsistentOrientation";
    case ErrorCode::InvalidMesh: return "InvalidMesh";
    case ErrorCode::InvalidPrimitive: return "InvalidPrimitive";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::NoValidCut: return "NoValidCut";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::NonWatertightInput: return "NonWatertightInput";
    case ErrorCode::NoCurves: return "NoCurves";
    case ErrorCode::TangentialContact: return "TangentialContact";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace primrep
