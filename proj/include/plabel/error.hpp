#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plabel {

enum class ErrorKind {
  Io,        // filesystem / stream failure
  Format,    // unparseable or schema-violating input
  Detector,  // external detector failed (nonzero exit, missing binary)
  Timeout,   // external detector exceeded its time budget
  Protocol,  // detector output violates the adapter contract
  Config,    // invalid configuration or argument
  Invariant, // a data invariant was violated by an internal step
};

std::string_view to_string(ErrorKind kind);

// Process exit code for the command-line tools:
// 0 ok, 1 I/O, 2 format, 3 detector/protocol, 4 config.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace plabel
