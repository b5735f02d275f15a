#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idlewatch::csv {

/// Comma-separated, header row, UTF-8. Fields are quoted only when they
/// contain a comma, quote, CR or LF; quotes are doubled.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 reader. Accepts LF or CRLF line ends and a trailing newline.
/// Throws ParseError on an unterminated quoted field or a row whose width
/// differs from the header.
Table parse(std::string_view text);
Table read_file(const std::string& path);

}  // namespace idlewatch::csv
