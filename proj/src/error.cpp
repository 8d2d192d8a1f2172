#include "plabel/error.hpp"

namespace plabel {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Detector: return "detector";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Config: return "config";
    case ErrorKind::Invariant: return "invariant";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return 1;
    case ErrorKind::Format: return 2;
    case ErrorKind::Invariant: return 2;
    case ErrorKind::Detector:
    case ErrorKind::Timeout:
    case ErrorKind::Protocol: return 3;
    case ErrorKind::Config: return 4;
  }
  return 1;
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace plabel
