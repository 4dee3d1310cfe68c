#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace confscore {

enum class ErrorKind {
  io,
  parse,
  missing_column,
  validation,
  unknown_column,
  duplicate_membership,
  duplicate_group,
  empty_group,
  precondition,
  domain,
  unsupported,
  config,
};

std::string_view error_kind_name(ErrorKind kind);

/// Typed error for every user-facing failure (malformed input, violated
/// preconditions). Internal invariant breaks are not reported through this.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Single-line "kind=<kind> message=<text>" form for machine consumers.
  std::string reason() const;

 private:
  ErrorKind kind_;
};

}  // namespace confscore
