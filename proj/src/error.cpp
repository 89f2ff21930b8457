#include "defpose/error.hpp"

namespace defpose {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::BehindCamera: return "BehindCamera";
    case ErrorKind::InvalidDepth: return "InvalidDepth";
    case ErrorKind::InvalidRotation: return "InvalidRotation";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyMesh: return "EmptyMesh";
    case ErrorKind::DegenerateMesh: return "DegenerateMesh";
    case ErrorKind::InvalidMesh: return "InvalidMesh";
    case ErrorKind::VertexOutsideLattice: return "VertexOutsideLattice";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::FullyBehindCamera: return "FullyBehindCamera";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NoBoundary: return "NoBoundary";
    case ErrorKind::ExtractorUnavailable: return "ExtractorUnavailable";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewFrames: return "TooFewFrames";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::DegenerateLookAt: return "DegenerateLookAt";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateInput:
    case ErrorKind::BehindCamera:
    case ErrorKind::InvalidDepth:
    case ErrorKind::DegenerateMesh:
    case ErrorKind::DegenerateConfiguration:
    case ErrorKind::FullyBehindCamera:
    case ErrorKind::NoBoundary:
    case ErrorKind::DegenerateLookAt:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, std::string where, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " in " + where + ": " + message),
      kind_(kind),
      where_(std::move(where)),
      message_(message) {}

}  // namespace defpose
