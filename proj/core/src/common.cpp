#include "canopy/cloud.hpp"
#include "canopy/error.hpp"

#include <string>

namespace canopy {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Format: return "format";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::InsufficientPoints: return "insufficient-points";
    case ErrorKind::DegenerateInput: return "degenerate-input";
    case ErrorKind::DegenerateLabels: return "degenerate-labels";
    case ErrorKind::Arity: return "arity";
    case ErrorKind::NoFoliage: return "no-foliage";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::NotFound: return "not-found";
  }
  return "unknown";
}

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::Green: return "Green";
    case Label::Yellow: return "Yellow";
    case Label::Trunk: return "Trunk";
    case Label::Unassigned: return "Unassigned";
  }
  return "Unassigned";
}

Label parse_label(std::string_view text) {
  if (text == "Green") return Label::Green;
  if (text == "Yellow") return Label::Yellow;
  if (text == "Trunk") return Label::Trunk;
  if (text == "Unassigned") return Label::Unassigned;
  throw Error(ErrorKind::Validation, "unknown label '" + std::string(text) + "'");
}

}  // namespace canopy
