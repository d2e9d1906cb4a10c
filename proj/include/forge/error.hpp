#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "forge/model.hpp"

namespace forge {

enum class ErrorKind {
  range,      // offset or index outside its domain
  lex,        // unterminated string/comment, stray character
  encoding,   // invalid UTF-8
  syntax,     // unexpected token
  semantic,   // duplicate names, self-import, name mismatch
  reference,  // unknown session/theory/node, missing source
  cycle,      // cyclic graph
  scope,      // import not visible from the importing session
  domain,     // arithmetic precondition (e.g. non-positive elapsed time)
  storage,    // filesystem failure
  empty,      // nothing selected
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// An error attached to a source range (lexer, parser, catalog checks).
class SourceError : public Error {
 public:
  SourceError(ErrorKind kind, Position pos, std::string message)
      : Error(kind, format(pos, message)), pos_(std::move(pos)), message_(std::move(message)) {}

  const Position& position() const { return pos_; }
  /// The message without the position prefix.
  const std::string& message() const { return message_; }

 private:
  static std::string format(const Position& pos, const std::string& message);
  Position pos_;
  std::string message_;
};

/// Acyclicity violation; carries one witness cycle whose first and last
/// elements coincide.
class CycleError : public Error {
 public:
  explicit CycleError(std::vector<std::string> cycle)
      : Error(ErrorKind::cycle, format(cycle)), cycle_(std::move(cycle)) {}

  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  static std::string format(const std::vector<std::string>& cycle);
  std::vector<std::string> cycle_;
};

}  // namespace forge
