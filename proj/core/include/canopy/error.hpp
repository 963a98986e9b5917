#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canopy {

enum class ErrorKind {
  Io,
  Parse,
  Format,
  Validation,
  EmptyInput,
  InsufficientPoints,
  DegenerateInput,
  DegenerateLabels,
  Arity,
  NoFoliage,
  InsufficientData,
  NotFound,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the toolkit; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace canopy
