#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace densitycp::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes. Throws IngestError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line, std::string_view source = "", std::size_t line_no = 0);

/// Reads the next nonblank line (trailing '\r' removed). Counts lines read.
std::optional<std::string> next_line(std::istream& in, std::size_t& line_no);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

} // namespace densitycp::csv
