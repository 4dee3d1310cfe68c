#include "confscore/error.hpp"

namespace confscore {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::missing_column: return "missing_column";
    case ErrorKind::validation: return "validation";
    case ErrorKind::unknown_column: return "unknown_column";
    case ErrorKind::duplicate_membership: return "duplicate_membership";
    case ErrorKind::duplicate_group: return "duplicate_group";
    case ErrorKind::empty_group: return "empty_group";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::domain: return "domain";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

std::string Error::reason() const {
  std::string msg = what();
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  return "kind=" + std::string(error_kind_name(kind_)) + " message=" + msg;
}

}  // namespace confscore
