#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace canopy::detail {

/// Shortest representation that parses back to the same double.
std::string format_double(double value);
/// Fixed number of decimals; used where a stable human-readable table is wanted.
std::string format_fixed(double value, int decimals);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view text);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

/// Iterates lines, stripping a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line);
  std::size_t line_number() const { return line_number_; }
  std::size_t offset() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_number_ = 0;
};

}  // namespace canopy::detail
