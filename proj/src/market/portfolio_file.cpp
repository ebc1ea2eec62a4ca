#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mlqmc/keyvalue.h"
#include "mlqmc/market.h"

namespace mlqmc::market {

namespace {

std::vector<double> broadcast(const std::string& key, const std::string& value, std::size_t d) {
    auto xs = parse_double_list(key, value);
    if (xs.size() == 1) xs.assign(d, xs.front());
    if (xs.size() != d) {
        throw std::invalid_argument("'" + key + "': expected 1 or " + std::to_string(d) + " values");
    }
    return xs;
}

Eigen::MatrixXd read_covariance_csv(const std::string& path, int d) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open covariance file '" + path + "'");
    Eigen::MatrixXd c(d, d);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (row >= d) throw std::invalid_argument(path + ": more than " + std::to_string(d) + " rows");
        const auto values = parse_double_list("covariance_file", line);
        if (static_cast<int>(values.size()) != d) {
            throw std::invalid_argument(path + ": row " + std::to_string(row + 1) + " has " +
                                        std::to_string(values.size()) + " entries, expected " + std::to_string(d));
        }
        for (int j = 0; j < d; ++j) c(row, j) = values[j];
        ++row;
    }
    if (row != d) throw std::invalid_argument(path + ": expected " + std::to_string(d) + " rows");
    return c;
}

}  // namespace

Portfolio parse_portfolio(std::istream& in, const std::string& base_dir) {
    const auto kv = read_key_values(in, "portfolio");
    static const std::set<std::string> known = {"d",        "s0",  "mu",          "mu0",        "strikes",
                                                "maturity", "tau", "option_kind", "covariance", "volatility",
                                                "covariance_file"};
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw std::invalid_argument("portfolio: unknown key '" + key + "'");
    }
    auto require = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw std::invalid_argument("portfolio: missing key '" + key + "'");
        return it->second;
    };

    const auto d_signed = parse_int("d", require("d"));
    if (d_signed < 1) throw std::invalid_argument("portfolio: d must be >= 1");
    const auto d = static_cast<std::size_t>(d_signed);

    Portfolio p;
    p.spot = broadcast("s0", require("s0"), d);
    p.strike = broadcast("strikes", require("strikes"), d);
    p.drift = parse_double("mu", require("mu"));
    p.rate = parse_double("mu0", require("mu0"));
    p.maturity = parse_double("maturity", require("maturity"));
    p.horizon = parse_double("tau", require("tau"));

    auto kinds = split_list(require("option_kind"));
    if (kinds.size() == 1) kinds.assign(d, kinds.front());
    if (kinds.size() != d) throw std::invalid_argument("'option_kind': expected 1 or " + std::to_string(d) + " values");
    for (const auto& k : kinds) {
        if (k == "put") {
            p.kind.push_back(OptionKind::put);
        } else if (k == "call") {
            p.kind.push_back(OptionKind::call);
        } else {
            throw std::invalid_argument("'option_kind': expected put or call, got '" + k + "'");
        }
    }

    const auto& cov = require("covariance");
    const bool has_vol = kv.count("volatility") != 0;
    const bool has_file = kv.count("covariance_file") != 0;
    if (has_vol && cov != "diagonal") throw std::invalid_argument("'volatility' only applies to covariance = diagonal");
    if (has_file && cov != "file") throw std::invalid_argument("'covariance_file' only applies to covariance = file");

    Eigen::MatrixXd c;
    const int di = static_cast<int>(d);
    if (cov == "exponential") {
        c = build_covariance(CovarianceKind::exponential, di);
    } else if (cov == "triangular") {
        c = build_covariance(CovarianceKind::triangular, di);
    } else if (cov == "diagonal") {
        const auto vol = broadcast("volatility", require("volatility"), d);
        c = Eigen::MatrixXd::Zero(di, di);
        for (int i = 0; i < di; ++i) c(i, i) = vol[i] * vol[i];
    } else if (cov == "file") {
        std::filesystem::path path = require("covariance_file");
        if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
        c = read_covariance_csv(path.string(), di);
    } else {
        throw std::invalid_argument("'covariance': expected exponential, triangular, diagonal or file");
    }
    try {
        p.vol_factor = cholesky(c).a;
    } catch (const DecompositionError& e) {
        throw std::invalid_argument(std::string("portfolio covariance: ") + e.what());
    }
    p.validate();
    return p;
}

Portfolio load_portfolio(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open portfolio file '" + path + "'");
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_portfolio(in, dir.empty() ? "." : dir);
}

}  // namespace mlqmc::market
