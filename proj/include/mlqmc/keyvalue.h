#pragma once

// Flat `key = value` text files with `#` comments, shared by the portfolio
// and experiment configuration readers.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mlqmc {

/// Key/value pairs in file order. Throws std::invalid_argument on a line
/// without '=' or a repeated key; the message carries `source` and the line.
std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& source);

std::vector<std::string> split_list(const std::string& value);
double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);

std::string trim(const std::string& s);

}  // namespace mlqmc
