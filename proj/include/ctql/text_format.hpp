#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ctql {

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double value);

// Strict double parse; `context` names the field or line in the error.
double parse_double(const std::string& token, const std::string& context);

std::vector<std::string> split(const std::string& line, char separator);
std::string trim(const std::string& text);

// FNV-1a 64-bit of the raw bytes, lower-case hex. Used as the config hash
// embedded in output file headers.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ctql
