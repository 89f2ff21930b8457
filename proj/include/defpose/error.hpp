#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace defpose {

enum class ErrorKind {
  // geometry
  DegenerateInput,
  BehindCamera,
  InvalidDepth,
  InvalidRotation,
  // mesh
  ParseError,
  IoError,
  EmptyMesh,
  DegenerateMesh,
  InvalidMesh,
  // lattice
  VertexOutsideLattice,
  DegenerateConfiguration,
  // silhouette
  FullyBehindCamera,
  DimensionMismatch,
  NoBoundary,
  ExtractorUnavailable,
  // consensus
  LengthMismatch,
  TooFewFrames,
  // metrics
  EmptyInput,
  // protocol
  InvalidSpec,
  DegenerateLookAt,
  // shared
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// True for failures caused by numerically degenerate input (as opposed to
/// malformed data). The CLI maps these to exit code 3.
bool is_numerical(ErrorKind kind);

/// Library exception. `where` names the failing operation as
/// "module.operation" so command-line callers can report it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string where, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& where() const noexcept { return where_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string where_;
  std::string message_;
};

}  // namespace defpose
