#pragma once

#include <stdexcept>
#include <string>

namespace boneage {

enum class ErrorKind {
  Parse,
  Referential,
  Geometry,
  UnsupportedShape,
  Shape,
  Config,
  Singular,
  Domain,
  Io,
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Referential: return "referential";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::UnsupportedShape: return "unsupported-shape";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Config: return "config";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace boneage
