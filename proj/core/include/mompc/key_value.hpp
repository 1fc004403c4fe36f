#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace mompc {

struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

/// Parses `name = value` lines. '#' starts a comment, blank lines are skipped.
/// Throws FormatError on a line without '=' or with an empty name.
std::vector<KeyValue> parse_key_values(std::istream& in);
std::vector<KeyValue> read_key_value_file(const std::string& path);

/// Strict numeric conversion of a whole token; throws FormatError naming `line`.
double parse_number(const std::string& text, std::size_t line);
std::vector<double> parse_number_list(const std::string& text, std::size_t line);

/// Shortest text that round-trips to the same double at 12 significant digits.
std::string format_decimal(double value);
/// Shortest text that round-trips to exactly the same double.
std::string format_exact(double value);
/// Rounds to 12 significant digits (the persisted precision).
double round_to_persisted(double value);

}  // namespace mompc
