#include <charconv>
#include "mompc/key_value.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mompc/errors.hpp"

namespace mompc {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::istream& in) {
    std::vector<KeyValue> out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(line_no, "expected 'name = value'");
        }
        KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
        if (kv.key.empty() || kv.value.empty()) {
            throw FormatError(line_no, "empty name or value");
        }
        out.push_back(std::move(kv));
    }
    return out;
}

std::vector<KeyValue> read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    return parse_key_values(in);
}

double parse_number(const std::string& text, std::size_t line) {
    const std::string t = trim(text);
    if (t.empty()) {
        throw FormatError(line, "expected a number");
    }
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE) {
        throw FormatError(line, "not a number: '" + t + "'");
    }
    return value;
}

std::vector<double> parse_number_list(const std::string& text, std::size_t line) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number(item, line));
    }
    if (out.empty()) {
        throw FormatError(line, "expected a comma-separated list of numbers");
    }
    return out;
}

std::string format_decimal(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value == 0.0 ? 0.0 : value);
    return buf;
}

std::string format_exact(double value) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, value == 0.0 ? 0.0 : value);
    return std::string(buf, r.ptr);
}

double round_to_persisted(double value) {
    return std::strtod(format_decimal(value).c_str(), nullptr);
}

}  // namespace mompc
