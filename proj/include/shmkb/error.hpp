#pragma once

#include <stdexcept>
#include <string>

namespace shmkb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// store
class CapacityError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class StructureError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class CorruptionError : public Error { using Error::Error; };

struct SourcePosition {
  int line = 1;
  int column = 1;
};

/// Error carrying a line/column in a rule-file text.
class PositionedError : public Error {
 public:
  PositionedError(const std::string& what, SourcePosition pos)
      : Error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + what), pos_(pos) {}

  SourcePosition position() const { return pos_; }

 private:
  SourcePosition pos_;
};

class LexError : public PositionedError { using PositionedError::PositionedError; };
class ParseError : public PositionedError { using PositionedError::PositionedError; };
class StaleSourceError : public Error { using Error::Error; };

// engine / builtins
class LinkError : public Error { using Error::Error; };
class ArityError : public Error { using Error::Error; };
class BindingError : public Error { using Error::Error; };
class TypeError : public Error { using Error::Error; };
class AssignmentError : public Error { using Error::Error; };
class UnsupportedError : public Error { using Error::Error; };
class FileError : public Error { using Error::Error; };

// semantics / api
class NotFoundError : public Error { using Error::Error; };
class RequestError : public Error { using Error::Error; };   // malformed request
class ConflictError : public Error { using Error::Error; };  // write during a snapshot

}  // namespace shmkb
