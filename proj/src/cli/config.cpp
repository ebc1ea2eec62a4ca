#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlqmc/cli.h"
#include "mlqmc/keyvalue.h"

namespace mlqmc::cli {

namespace {

using coupling::ConfigurationError;

void set_coupling_key(CouplingSpec& spec, const std::string& field, const std::string& value) {
    auto& c = spec.config;
    const std::string key = "coupling." + spec.name + "." + field;
    if (field == "kind") {
        if (value == "crude") {
            c.kind = coupling::CouplingKind::crude;
        } else if (value == "antithetic") {
            c.kind = coupling::CouplingKind::antithetic;
        } else if (value == "smoothed") {
            c.kind = coupling::CouplingKind::smoothed;
        } else if (value == "smoothed_antithetic") {
            c.kind = coupling::CouplingKind::smoothed_antithetic;
        } else {
            throw ConfigurationError("'" + key + "': unknown kind '" + value + "'");
        }
    } else if (field == "inner") {
        if (value == "mc") {
            c.inner = coupling::InnerSampling::mc;
        } else if (value == "rqmc") {
            c.inner = coupling::InnerSampling::rqmc;
        } else {
            throw ConfigurationError("'" + key + "': expected mc or rqmc");
        }
    } else if (field == "factor") {
        if (value == "cholesky") {
            c.factor = market::FactorProvenance::cholesky;
        } else if (value == "gpca") {
            c.factor = market::FactorProvenance::gpca;
        } else {
            throw ConfigurationError("'" + key + "': expected cholesky or gpca");
        }
    } else if (field == "k0") {
        if (!c.smoothing) c.smoothing.emplace();
        c.smoothing->k0 = parse_double(key, value);
    } else if (field == "r") {
        if (!c.smoothing) c.smoothing.emplace();
        c.smoothing->r = parse_double(key, value);
    } else if (field == "m0") {
        const auto m0 = parse_int(key, value);
        if (m0 < 1) throw ConfigurationError("'" + key + "' must be >= 1");
        c.schedule.m0 = static_cast<std::uint64_t>(m0);
    } else {
        throw ConfigurationError("unknown key '" + key + "'");
    }
}

long long positive_int(const std::string& key, const std::string& value, long long min = 1) {
    const auto v = parse_int(key, value);
    if (v < min) throw ConfigurationError("'" + key + "' must be >= " + std::to_string(min));
    return v;
}

void set_run_key(ExperimentConfig& cfg, const std::string& field, const std::string& value) {
    const std::string key = "run." + field;
    if (field == "eps") {
        cfg.eps = parse_double_list(key, value);
        for (double e : cfg.eps) {
            if (!(e > 0.0)) throw ConfigurationError("'run.eps': values must be positive");
        }
    } else if (field == "l_max") {
        cfg.l_max = static_cast<int>(positive_int(key, value, 0));
    } else if (field == "n_per_level") {
        cfg.n_per_level = static_cast<std::uint64_t>(positive_int(key, value));
    } else if (field == "batches") {
        cfg.batches = static_cast<int>(positive_int(key, value));
    } else if (field == "repeats") {
        cfg.repeats = static_cast<int>(positive_int(key, value));
    } else if (field == "seed") {
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(value, &used, 0);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw ConfigurationError("'run.seed': expected an unsigned 64-bit integer, got '" + value + "'");
        }
    } else if (field == "out_dir") {
        cfg.out_dir = value;
    } else if (field == "threads") {
        cfg.threads = static_cast<unsigned>(positive_int(key, value));
    } else if (field == "warmup") {
        cfg.warmup = static_cast<std::uint64_t>(positive_int(key, value, 2));
    } else if (field == "max_level") {
        cfg.max_level = static_cast<int>(positive_int(key, value, 0));
    } else if (field == "target_prob") {
        cfg.target_prob = parse_double(key, value);
        if (!(cfg.target_prob > 0.0 && cfg.target_prob < 1.0)) {
            throw ConfigurationError("'run.target_prob' must lie in (0,1)");
        }
    } else if (field == "threshold") {
        cfg.threshold = parse_double(key, value);
    } else if (field == "threshold_fraction") {
        cfg.threshold_fraction = parse_double(key, value);
    } else if (field == "reference") {
        cfg.reference = parse_double(key, value);
    } else if (field == "eta_m") {
        cfg.eta_m.clear();
        for (const auto& item : split_list(value)) {
            cfg.eta_m.push_back(static_cast<std::uint64_t>(positive_int(key, item)));
        }
    } else if (field == "eta_replicates") {
        cfg.eta_replicates = static_cast<int>(positive_int(key, value, 2));
    } else if (field == "eta_scenarios") {
        cfg.eta_scenarios = static_cast<int>(positive_int(key, value));
    } else if (field == "eta_inner") {
        if (value == "mc") {
            cfg.eta_inner = coupling::InnerSampling::mc;
        } else if (value == "rqmc") {
            cfg.eta_inner = coupling::InnerSampling::rqmc;
        } else {
            throw ConfigurationError("'run.eta_inner': expected mc or rqmc");
        }
    } else {
        throw ConfigurationError("unknown key '" + key + "'");
    }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir) {
    ExperimentConfig cfg;
    std::map<std::string, std::string> kv;
    try {
        kv = read_key_values(in, "config");
    } catch (const std::invalid_argument& e) {
        throw ConfigurationError(e.what());
    }
    std::map<std::string, CouplingSpec> couplings;
    try {
        for (const auto& [key, value] : kv) {
            if (key == "portfolio.file") {
                std::filesystem::path path = value;
                if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
                cfg.portfolio_path = path.string();
            } else if (key.rfind("run.", 0) == 0) {
                set_run_key(cfg, key.substr(4), value);
            } else if (key.rfind("coupling.", 0) == 0) {
                const auto rest = key.substr(9);
                const auto dot = rest.rfind('.');
                if (dot == std::string::npos || dot == 0) {
                    throw ConfigurationError("'" + key + "': expected coupling.<name>.<field>");
                }
                auto& spec = couplings[rest.substr(0, dot)];
                spec.name = rest.substr(0, dot);
                set_coupling_key(spec, rest.substr(dot + 1), value);
            } else {
                throw ConfigurationError("unknown key '" + key + "'");
            }
        }
    } catch (const ConfigurationError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigurationError(e.what());
    }

    if (cfg.portfolio_path.empty()) throw ConfigurationError("missing key 'portfolio.file'");
    if (!std::filesystem::exists(cfg.portfolio_path)) {
        throw ConfigurationError("portfolio file not found: " + cfg.portfolio_path);
    }
    try {
        cfg.portfolio = market::load_portfolio(cfg.portfolio_path);
    } catch (const std::invalid_argument& e) {
        throw ConfigurationError(cfg.portfolio_path + ": " + e.what());
    }
    for (auto& [name, spec] : couplings) {
        if (spec.config.smoothing && !coupling::is_smoothed(spec.config.kind)) {
            throw ConfigurationError("coupling." + name + ": k0 and r apply only to smoothed kinds");
        }
        if (coupling::is_smoothed(spec.config.kind) && !spec.config.smoothing) spec.config.smoothing.emplace();
        spec.config.validate();
        cfg.couplings.push_back(spec);
    }
    if (cfg.eta_m.empty()) {
        for (std::uint64_t m = 32; m <= 4096; m *= 2) cfg.eta_m.push_back(m);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw coupling::ConfigurationError("cannot open config file '" + path + "'");
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(in, dir.empty() ? "." : dir);
}

}  // namespace mlqmc::cli
