#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualsim {

// Malformed config text. line/column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Syntactically valid but geometrically impossible layer stack.
class ShapeError : public std::runtime_error {
 public:
  ShapeError(const std::string& layer, const std::string& what)
      : std::runtime_error("layer '" + layer + "': " + what), layer_(layer) {}

  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

// Invalid hardware or experiment parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dualsim
