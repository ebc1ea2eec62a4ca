#include "mlqmc/keyvalue.h"

#include <istream>
#include <stdexcept>

namespace mlqmc {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& source) {
    std::map<std::string, std::string> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(source + ":" + std::to_string(number) + ": expected 'key = value'");
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(number) + ": empty key");
        if (!out.emplace(key, value).second) {
            throw std::invalid_argument(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string::size_type pos = 0;
    while (true) {
        const auto comma = value.find(',', pos);
        auto item = trim(value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!item.empty()) items.push_back(std::move(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return items;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw std::invalid_argument("'" + key + "': expected a number, got '" + value + "'");
    }
    return x;
}

long long parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw std::invalid_argument("'" + key + "': expected an integer, got '" + value + "'");
    }
    return x;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
    if (out.empty()) throw std::invalid_argument("'" + key + "': empty list");
    return out;
}

}  // namespace mlqmc
