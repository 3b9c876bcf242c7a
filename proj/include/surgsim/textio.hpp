#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace surgsim {

// Shortest text that parses back to the same double.
std::string format_double(double v);

// Whole-token numeric parses; throw ParseError naming the token.
double parse_double(std::string_view token);
long parse_long(std::string_view token);

std::vector<std::string> split(std::string_view s, char delimiter);

// Line-oriented reader shared by the text formats: skips blank lines and
// '#' comments, tracks line numbers for error messages.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Whitespace-separated tokens of the next content line; empty at EOF.
  std::vector<std::string> next_tokens();
  bool next_line(std::string& line);

  [[noreturn]] void fail(const std::string& what) const;
  double parse_double(std::string_view token) const;
  long parse_int(std::string_view token) const;
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace surgsim
