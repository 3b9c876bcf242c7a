#include "surgsim/textio.hpp"

#include "surgsim/types.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <sstream>

namespace surgsim {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

namespace {

template <typename T>
bool parse_whole(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && p == token.data() + token.size() && !token.empty();
}

}  // namespace

double parse_double(std::string_view token) {
  double v = 0.0;
  if (!parse_whole(token, v)) throw ParseError("bad number '" + std::string(token) + "'");
  return v;
}

long parse_long(std::string_view token) {
  long v = 0;
  if (!parse_whole(token, v)) throw ParseError("bad integer '" + std::string(token) + "'");
  return v;
}

std::vector<std::string> split(std::string_view s, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = s.find(delimiter, start);
    out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

bool LineReader::next_line(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

std::vector<std::string> LineReader::next_tokens() {
  std::string line;
  std::vector<std::string> out;
  if (!next_line(line)) return out;
  std::istringstream s(line);
  for (std::string t; s >> t;) out.push_back(t);
  return out;
}

void LineReader::fail(const std::string& what) const { throw ParseError(source_, line_, what); }

double LineReader::parse_double(std::string_view token) const {
  double v = 0.0;
  if (!parse_whole(token, v)) fail("bad number '" + std::string(token) + "'");
  return v;
}

long LineReader::parse_int(std::string_view token) const {
  long v = 0;
  if (!parse_whole(token, v)) fail("bad integer '" + std::string(token) + "'");
  return v;
}

}  // namespace surgsim
