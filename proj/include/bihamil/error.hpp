#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bihamil {

namespace detail {

/// Shortest round-trip text for a double.
inline std::string num(double v) {
  char buf[32];
  return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

}  // namespace detail

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed DSL input. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string message)
      : Error("parse error at offset " + std::to_string(offset) + ": " + message),
        offset_(offset),
        detail_(std::move(message)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

/// Evaluation left the natural domain of a node (ln of non-positive, etc.).
class DomainError : public Error {
 public:
  DomainError(std::string node, std::string message)
      : Error("domain error in '" + node + "': " + message), node_(std::move(node)) {}

  const std::string& node() const noexcept { return node_; }

 private:
  std::string node_;
};

/// A precondition on an argument was violated (non-unit direction, h <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Base for conditions that abort a computation because the geometry it
/// needs does not exist. The CLI maps these to exit code 2.
class AbortedError : public Error {
 public:
  using Error::Error;
};

enum class DegeneracyKind { ZeroVelocity, VanishingNormal, CurlEigenvector };

inline std::string_view to_string(DegeneracyKind k) {
  switch (k) {
    case DegeneracyKind::ZeroVelocity:
      return "ZeroVelocity";
    case DegeneracyKind::VanishingNormal:
      return "VanishingNormal";
    case DegeneracyKind::CurlEigenvector:
      return "CurlEigenvector";
  }
  return "?";
}

struct DegeneracyReport {
  DegeneracyKind kind{DegeneracyKind::ZeroVelocity};
  // The quantity that fell below its threshold: ‖v‖ for ZeroVelocity,
  // ‖t×(∇×t)‖ = ‖∇×t − λt‖ otherwise.
  double magnitude{0.0};
  double threshold{0.0};
};

class DegeneracyError : public AbortedError {
 public:
  explicit DegeneracyError(DegeneracyReport r)
      : AbortedError(std::string("degenerate frame: ") + std::string(to_string(r.kind)) +
                     " (magnitude " + detail::num(r.magnitude) + " < " + detail::num(r.threshold) + ")"),
        report_(r) {}

  const DegeneracyReport& report() const noexcept { return report_; }

 private:
  DegeneracyReport report_;
};

}  // namespace bihamil
