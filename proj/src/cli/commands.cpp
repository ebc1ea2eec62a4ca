#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "mlqmc/cli.h"
#include "mlqmc/driver.h"
#include "mlqmc/philox.h"

namespace mlqmc::cli {

namespace {

using coupling::ConfigurationError;

constexpr std::uint64_t kEtaScenarioPurpose = 0x6574612d6f6d6567ull;

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream f(path);
    if (!f) throw ConfigurationError("cannot write '" + path.string() + "'");
    f << std::setprecision(17);
    return f;
}

template <class T>
void write_optional(std::ostream& os, const std::optional<T>& v) {
    if (v) os << *v;
}

void write_rate(std::ostream& os, const driver::Rate& r) {
    if (r.defined) os << r.value << ',' << r.stderr_;
    else os << ',';
}

void require_couplings(const ExperimentConfig& cfg) {
    if (cfg.couplings.empty()) throw ConfigurationError("no couplings configured");
}

market::FactorMatrix factor_for(const ExperimentConfig& cfg, const coupling::CouplingConfig& c) {
    const market::FactorMatrix l{cfg.portfolio.vol_factor, market::FactorProvenance::cholesky};
    if (c.factor == market::FactorProvenance::gpca) return market::gpca_factor(cfg.portfolio, l, cfg.seed);
    return l;
}

coupling::CouplingConfig with_threshold(const CouplingSpec& spec, double c) {
    auto config = spec.config;
    config.threshold = c;
    return config;
}

driver::DriverOptions driver_options(const ExperimentConfig& cfg) {
    driver::DriverOptions o;
    o.threads = cfg.threads;
    o.warmup = cfg.warmup;
    o.max_level = cfg.max_level;
    return o;
}

double reference_theta(const ExperimentConfig& cfg, double c) {
    if (cfg.reference) return *cfg.reference;
    if (cfg.portfolio.dim() == 1) return market::loss_probability(cfg.portfolio, c);
    throw ConfigurationError("run.reference is required for multi-asset portfolios");
}

int cmd_calibrate(const ExperimentConfig& cfg, std::ostream& out) {
    const double c = resolve_threshold(cfg);
    out << std::setprecision(17);
    out << "c = " << c << '\n' << "v0 = " << market::initial_value(cfg.portfolio) << '\n';
    if (cfg.portfolio.dim() == 1) out << "theta = " << market::loss_probability(cfg.portfolio, c) << '\n';
    return kExitOk;
}

int cmd_convergence(const ExperimentConfig& cfg, std::ostream& out) {
    require_couplings(cfg);
    if (cfg.n_per_level < 1000) throw ConfigurationError("run.n_per_level must be >= 1000");
    const double c = resolve_threshold(cfg);
    auto rates_csv = open_csv(cfg, "rates.csv");
    rates_csv << "coupling,alpha,alpha_stderr,beta,beta_stderr,gamma,gamma_stderr\n";
    for (const auto& spec : cfg.couplings) {
        const auto config = with_threshold(spec, c);
        const auto a = factor_for(cfg, config);
        const auto study = driver::run_convergence_study(cfg.portfolio, a, config, cfg.l_max, cfg.n_per_level,
                                                         cfg.seed, cfg.threads, cfg.batches);
        auto csv = open_csv(cfg, "convergence_" + spec.name + ".csv");
        csv << "level,m_ell,abs_mean,variance,kurtosis,kvf,cost,n_samples\n";
        for (const auto& s : study.levels) {
            const auto d = driver::level_statistics(s);
            csv << s.level << ',' << config.schedule.inner_samples(s.level) << ',' << std::abs(d.mean) << ','
                << d.variance << ',';
            write_optional(csv, d.kurtosis);
            csv << ',';
            write_optional(csv, d.kvf);
            csv << ',' << s.cost_per_sample() << ',' << s.count << '\n';
        }
        rates_csv << spec.name << ',';
        write_rate(rates_csv, study.rates.alpha);
        rates_csv << ',';
        write_rate(rates_csv, study.rates.beta);
        rates_csv << ',';
        write_rate(rates_csv, study.rates.gamma);
        rates_csv << '\n';
        out << spec.name << ": beta = " << study.rates.beta.value << '\n';
    }
    return kExitOk;
}

int cmd_complexity(const ExperimentConfig& cfg, std::ostream& out) {
    require_couplings(cfg);
    if (cfg.eps.empty()) throw ConfigurationError("run.eps is required");
    const double c = resolve_threshold(cfg);
    const double reference = reference_theta(cfg, c);
    std::vector<driver::SweepEntry> entries;
    for (const auto& spec : cfg.couplings) {
        const auto config = with_threshold(spec, c);
        entries.push_back({spec.name, config, factor_for(cfg, config)});
    }
    const auto cells =
        driver::run_complexity_sweep(cfg.portfolio, entries, cfg.eps, cfg.repeats, cfg.seed, reference, driver_options(cfg));
    auto csv = open_csv(cfg, "complexity.csv");
    csv << "eps,coupling,mean_cost,rmse,eps2_cost\n";
    int status = kExitOk;
    for (const auto& cell : cells) {
        csv << cell.epsilon << ',' << cell.coupling << ',' << cell.mean_cost << ',' << cell.rmse << ','
            << cell.eps2_cost() << '\n';
        if (!cell.error.empty()) {
            out << cell.coupling << " eps=" << cell.epsilon << ": " << cell.error << '\n';
            status = kExitNonConvergence;
        }
    }
    return status;
}

int cmd_estimate(const ExperimentConfig& cfg, std::ostream& out) {
    require_couplings(cfg);
    if (cfg.eps.empty()) throw ConfigurationError("run.eps is required");
    const double c = resolve_threshold(cfg);
    out << std::setprecision(17);
    for (const auto& spec : cfg.couplings) {
        const auto config = with_threshold(spec, c);
        const auto report =
            driver::run_mlmc(cfg.portfolio, factor_for(cfg, config), config, cfg.eps.front(), cfg.seed, driver_options(cfg));
        auto csv = open_csv(cfg, "estimate_" + spec.name + ".csv");
        csv << "theta_hat,stderr,levels,cost\n";
        csv << report.estimate << ',' << report.stderr_ << ',' << report.levels << ',' << report.total_cost << '\n';
        out << spec.name << ": theta = " << report.estimate << " (stderr " << report.stderr_ << ", L = " << report.levels
            << ")\n";
    }
    return kExitOk;
}

int cmd_eta(const ExperimentConfig& cfg, std::ostream& out) {
    if (cfg.eta_replicates < 16) throw ConfigurationError("run.eta_replicates must be >= 16");
    std::vector<market::Scenario> scenarios;
    const std::uint64_t scenario_seed = derive_seed(cfg.seed, kEtaScenarioPurpose);
    for (int i = 0; i < cfg.eta_scenarios; ++i) {
        scenarios.push_back(market::draw_scenario(cfg.portfolio, scenario_seed, 0, static_cast<std::uint64_t>(i)));
    }
    const market::FactorMatrix l{cfg.portfolio.vol_factor, market::FactorProvenance::cholesky};
    if (cfg.eta_inner == coupling::InnerSampling::rqmc) {
        for (auto m : cfg.eta_m) {
            if ((m & (m - 1)) != 0) throw ConfigurationError("run.eta_m: RQMC needs powers of two");
        }
    }
    const auto study = driver::run_eta_study(cfg.portfolio, l, scenarios, cfg.eta_m, cfg.eta_replicates, cfg.seed,
                                             cfg.eta_inner);
    auto csv = open_csv(cfg, "eta.csv");
    csv << "scenario_id,eta_hat,stderr\n";
    for (std::size_t s = 0; s < study.per_scenario.size(); ++s) {
        csv << s << ',';
        if (study.per_scenario[s]) csv << study.per_scenario[s]->value << ',' << study.per_scenario[s]->stderr_;
        else csv << ',';
        csv << '\n';
    }
    csv << "pooled,";
    write_rate(csv, study.pooled);
    csv << '\n';
    out << std::setprecision(6) << "pooled eta = " << study.pooled.value << " (stderr " << study.pooled.stderr_ << ")\n";
    return kExitOk;
}

}  // namespace

double resolve_threshold(const ExperimentConfig& cfg) {
    if (cfg.threshold) return *cfg.threshold;
    return market::calibrate_threshold(cfg.portfolio, cfg.target_prob, cfg.threshold_fraction);
}

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (command == "calibrate") return cmd_calibrate(cfg, out);
        if (command == "convergence") return cmd_convergence(cfg, out);
        if (command == "complexity") return cmd_complexity(cfg, out);
        if (command == "estimate") return cmd_estimate(cfg, out);
        if (command == "eta") return cmd_eta(cfg, out);
        err << "unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const driver::NonConvergence& e) {
        err << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    }
}

}  // namespace mlqmc::cli
