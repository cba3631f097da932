#pragma once

#include <stdexcept>
#include <string>

namespace fuchsian {

enum class ErrorKind {
  AngleSumTooLarge,
  NoSolution,
  NoIntersection,
  NotBipartite,
  Disconnected,
  UnsupportedOrder,
  NotEmbedded,
  PathTooLong,
  ExtensionFailed,
  ParseError,
  IncidenceError,
  LabelError,
  DimensionMismatch,
  SingularVertex,
  VertexHit,
  Tangent,
  NotClosed,
  DegenerateClass,
  CapExceeded,
  WallGeodesic,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AngleSumTooLarge: return "AngleSumTooLarge";
    case ErrorKind::NoSolution: return "NoSolution";
    case ErrorKind::NoIntersection: return "NoIntersection";
    case ErrorKind::NotBipartite: return "NotBipartite";
    case ErrorKind::Disconnected: return "Disconnected";
    case ErrorKind::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorKind::NotEmbedded: return "NotEmbedded";
    case ErrorKind::PathTooLong: return "PathTooLong";
    case ErrorKind::ExtensionFailed: return "ExtensionFailed";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IncidenceError: return "IncidenceError";
    case ErrorKind::LabelError: return "LabelError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularVertex: return "SingularVertex";
    case ErrorKind::VertexHit: return "VertexHit";
    case ErrorKind::Tangent: return "Tangent";
    case ErrorKind::NotClosed: return "NotClosed";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::WallGeodesic: return "WallGeodesic";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every library failure is reported through this type; `kind()` is the
/// machine-readable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, int line = 0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// 1-based input line for parse failures, 0 otherwise.
  int line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  int line_;
};

}  // namespace fuchsian
