// gauge-arb: scenario ingestion -> simulation -> curvature / range test /
// spectrum / kernel extraction / utility optimization, with machine-readable
// reports. Exit codes: 0 completed analysis (whatever the verdict), 2 config
// or I/O problems, 3 numerical failures. Verdicts live in the reports only.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ga/arbitrage.hpp"
#include "ga/errors.hpp"
#include "ga/gauge_algebra.hpp"
#include "ga/laplacian.hpp"
#include "ga/nelson.hpp"
#include "ga/pipeline.hpp"
#include "ga/scenario_io.hpp"
#include "ga/simulation.hpp"
#include "ga/utility.hpp"
#include "ga/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string scenario_path;
    std::string out_dir = "runs";
    uint64_t seed = 0;
    bool seed_set = false;
    std::size_t grid = 33;
    std::size_t k = 4;
    double tol = 1e-10;
    double epsilon_kernel = 0.0;  // <= 0: resolution-scaled default
    double zc_tol = 1e-6;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool needs_scenario = true) {
    auto* s = cmd->add_option("--scenario", opt.scenario_path, "scenario JSON path");
    if (needs_scenario) s->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "simulation seed override")
        ->each([&opt](const std::string&) { opt.seed_set = true; });
    cmd->add_option("--grid", opt.grid, "nodes per axis of the (t,x) grid");
    cmd->add_option("--k", opt.k, "number of eigenpairs");
    cmd->add_option("--tol", opt.tol, "eigensolver residual tolerance");
    cmd->add_option("--epsilon-kernel", opt.epsilon_kernel, "kernel threshold (0 = auto)");
    cmd->add_option("--zc-tol", opt.zc_tol, "zero-curvature residual threshold");
    cmd->add_flag("--force", opt.force, "allow overwriting an existing report");
}

// reports are append-only per run directory unless --force
void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw ga::Error(ga::ErrorCode::config_invalid,
                        "report exists (use --force to overwrite): " + path.string());
    }
    fs::create_directories(path.parent_path());
}

void write_report(const fs::path& out_dir, const std::string& name, json report,
                  const json& config, bool force) {
    report["config_hash"] = ga::config_hash(config);
    report["version"] = ga::kVersion;
    const fs::path report_path = out_dir / (name + "_report.json");
    ensure_writable(report_path, force);
    ga::write_text_file(report_path.string(), report.dump(2) + "\n");

    // timestamps go to a side file so reports stay byte-identical per config
    json meta;
    meta["created_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    meta["report"] = report_path.filename().string();
    ga::write_text_file((out_dir / (name + "_metadata.json")).string(), meta.dump(2) + "\n");
    std::cout << "wrote " << report_path.string() << "\n";
}

json config_of(const std::string& subcommand, const CommonOptions& opt, const json& raw) {
    json config;
    config["subcommand"] = subcommand;
    config["grid"] = opt.grid;
    config["k"] = opt.k;
    config["tol"] = opt.tol;
    config["epsilon_kernel"] = opt.epsilon_kernel;
    config["zc_tol"] = opt.zc_tol;
    config["seed"] = opt.seed;
    config["scenario"] = raw;
    return config;
}

void validate_options(const CommonOptions& opt) {
    if (!(opt.tol > 0.0) || !(opt.zc_tol > 0.0)) {
        throw ga::Error(ga::ErrorCode::config_invalid, "tolerances must be positive");
    }
    if (opt.epsilon_kernel < 0.0) {
        throw ga::Error(ga::ErrorCode::config_invalid, "epsilon-kernel must be >= 0");
    }
}

ga::SimulationConfig sim_config(const ga::ScenarioFile& file, const CommonOptions& opt) {
    if (!file.simulation) {
        throw ga::Error(ga::ErrorCode::config_invalid,
                        "scenario has no simulation block; stochastic run needs one");
    }
    ga::SimulationConfig cfg = *file.simulation;
    if (opt.seed_set) cfg.seed = opt.seed;
    return cfg;
}

ga::PathEnsemble simulate_from(const ga::ScenarioFile& file, const CommonOptions& opt) {
    if (!file.ito) {
        throw ga::Error(ga::ErrorCode::config_invalid, "scenario has no ito_model block");
    }
    const auto cfg = sim_config(file, opt);
    return ga::simulate(*file.ito, cfg.horizon, cfg.steps, cfg.paths, cfg.seed);
}

int run_simulate(const CommonOptions& opt) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    const auto config = config_of("simulate", opt, file.raw);
    const auto ensemble = simulate_from(file, opt);

    const fs::path out_dir(opt.out_dir);
    ensure_writable(out_dir / "ensemble.csv", opt.force);
    ga::write_ensemble_csv(ensemble, (out_dir / "ensemble.csv").string());

    json report;
    report["paths"] = ensemble.n_paths();
    report["steps"] = ensemble.n_steps();
    report["dt"] = ensemble.dt();
    report["seed"] = ensemble.seed();
    json terminal = json::array();
    for (std::size_t j = 0; j < ensemble.n_assets(); ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
            acc += ensemble.asset(p, ensemble.n_steps(), j);
        }
        terminal.push_back(acc / static_cast<double>(ensemble.n_paths()));
    }
    report["terminal_mean"] = terminal;
    write_report(out_dir, "simulate", report, config, opt.force);
    return 0;
}

int run_curvature(const CommonOptions& opt) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    const auto config = config_of("curvature", opt, file.raw);
    const fs::path out_dir(opt.out_dir);

    ga::CurvatureField field;
    if (file.scenario) {
        const ga::XGrid grid(file.scenario->portfolio_domain, opt.grid);
        field = ga::curvature_field(*file.scenario, grid);
    } else {
        const auto ensemble = simulate_from(file, opt);
        const ga::XGrid grid(file.domain, opt.grid);
        field = ga::curvature_field(ensemble, grid);
    }

    ensure_writable(out_dir / "curvature.csv", opt.force);
    ga::write_curvature_csv(field, (out_dir / "curvature.csv").string());

    json report;
    report["sup_norm"] = field.sup_norm;
    json entries = json::array();
    const std::size_t n_nodes = field.x_grid.size();
    for (std::size_t t = 0; t < field.times.size(); ++t) {
        double worst = 0.0;
        for (std::size_t m = 0; m < n_nodes; ++m) {
            if (!field.usable[t * n_nodes + m]) continue;
            double norm2 = 0.0;
            for (std::size_t d = 0; d < field.n_components; ++d) {
                norm2 += field.component(t, m, d) * field.component(t, m, d);
            }
            worst = std::max(worst, std::sqrt(norm2));
        }
        entries.push_back({{"time", field.times[t]},
                           {"residual", worst},
                           {"verdict", worst < opt.zc_tol ? "ZC" : "CURVED"}});
    }
    report["entries"] = entries;
    report["verdict"] = field.sup_norm < opt.zc_tol ? "ZC" : "CURVED";
    write_report(out_dir, "curvature", report, config, opt.force);
    return 0;
}

int run_zc_test(const CommonOptions& opt) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    const auto config = config_of("zc-test", opt, file.raw);
    ga::RangeTestReport range_report;

    if (file.ito) {
        const auto& model = *file.ito;
        const auto cfg = sim_config(file, opt);
        const auto ensemble = ga::simulate(model, cfg.horizon, cfg.steps, cfg.paths, cfg.seed);

        const std::size_t n = model.n_assets;
        const std::size_t kdim = model.brownian_dim;
        std::vector<double> alpha(n), sigma(n * kdim), r(n), bracket(n);
        std::vector<double> state(n), rate(n);
        for (std::size_t step = 0; step + 1 <= ensemble.n_steps(); ++step) {
            const double t = ensemble.dt() * static_cast<double>(step);
            // ensemble means of the state-dependent coefficients
            std::fill(alpha.begin(), alpha.end(), 0.0);
            std::fill(sigma.begin(), sigma.end(), 0.0);
            std::fill(r.begin(), r.end(), 0.0);
            std::fill(bracket.begin(), bracket.end(), 0.0);
            std::vector<double> coef_a(n), coef_s(n * kdim), coef_s_next(n * kdim);
            for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
                for (std::size_t j = 0; j < n; ++j) {
                    state[j] = ensemble.asset(p, step, j);
                    rate[j] = ensemble.rate(p, step, j);
                }
                model.drift.eval(t, state, coef_a);
                model.volatility.eval(t, state, coef_s);
                for (std::size_t j = 0; j < n; ++j) {
                    alpha[j] += coef_a[j];
                    r[j] += rate[j];
                }
                for (std::size_t e = 0; e < n * kdim; ++e) sigma[e] += coef_s[e];
                // bracket correction rate: d<sigma_j., W>/dt estimated pathwise
                for (std::size_t j = 0; j < n; ++j) state[j] = ensemble.asset(p, step + 1, j);
                model.volatility.eval(t + ensemble.dt(), state, coef_s_next);
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t kk = 0; kk < kdim; ++kk) {
                        acc += (coef_s_next[j * kdim + kk] - coef_s[j * kdim + kk]) *
                               ensemble.increment(p, step, kk);
                    }
                    bracket[j] += acc / ensemble.dt();
                }
            }
            const double inv = 1.0 / static_cast<double>(ensemble.n_paths());
            for (auto& v : alpha) v *= inv;
            for (auto& v : sigma) v *= inv;
            for (auto& v : r) v *= inv;
            for (auto& v : bracket) v *= inv;

            const auto entry = ga::zc_range_test(alpha, sigma, kdim, r, bracket, t);
            range_report.all_zero_curvature =
                range_report.all_zero_curvature && entry.zero_curvature;
            range_report.entries.push_back(entry);
        }
    } else {
        // deterministic scenario: sigma = 0 and alpha = d log D^j, so the
        // condition degenerates to alpha + r = 0 at every grid time
        const auto& s = *file.scenario;
        const std::size_t n = s.n_assets();
        const auto& tg = s.time_grid;
        for (std::size_t t = 1; t + 1 < s.n_times(); ++t) {
            std::vector<double> alpha(n), r(n);
            const std::vector<double> sigma(n, 0.0);  // n x 1 zero block
            for (std::size_t j = 0; j < n; ++j) {
                alpha[j] = std::log(std::abs(s.assets[j].deflator[t + 1] /
                                             s.assets[j].deflator[t - 1])) /
                           (tg[t + 1] - tg[t - 1]);
                r[j] = s.short_rates[j][t];
            }
            const auto entry = ga::zc_range_test(alpha, sigma, 1, r, {}, tg[t]);
            range_report.all_zero_curvature =
                range_report.all_zero_curvature && entry.zero_curvature;
            range_report.entries.push_back(entry);
        }
    }

    json entries = json::array();
    for (const auto& entry : range_report.entries) {
        entries.push_back({{"time", entry.time},
                           {"residual", entry.residual},
                           {"verdict", entry.zero_curvature ? "ZC" : "CURVED"},
                           {"lambda", entry.lambda},
                           {"rank_deficient", entry.rank_deficient}});
    }
    const fs::path out_dir(opt.out_dir);
    json report;
    report["entries"] = entries;
    report["zc_tol_rel"] = range_report.zc_tol_rel;
    report["verdict"] = range_report.all_zero_curvature ? "ZC" : "CURVED";
    write_report(out_dir, "zc_test", report, config, opt.force);
    return 0;
}

json spectrum_block_report(const ga::SpectrumAnalysis& analysis) {
    json block;
    block["lambda"] = analysis.spectral.eigenvalues;
    block["residuals"] = analysis.spectral.residuals;
    block["kernel_dim"] = analysis.kernel_dim;
    block["epsilon_kernel"] = analysis.epsilon_kernel;
    block["verdict"] = ga::to_string(analysis.verdict);
    return block;
}

int run_spectrum(const CommonOptions& opt) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    const auto config = config_of("spectrum", opt, file.raw);
    const fs::path out_dir(opt.out_dir);
    ensure_writable(out_dir / "spectrum_report.json", opt.force);

    json report;
    if (file.scenario) {
        const auto analysis = ga::analyze_spectrum(*file.scenario, opt.grid, opt.k, opt.tol,
                                                   opt.epsilon_kernel);
        if (!analysis.spectral.converged) {
            throw ga::Error(ga::ErrorCode::no_convergence, "eigensolver did not converge");
        }
        report = spectrum_block_report(analysis);
        report["lambda_min"] = analysis.spectral.eigenvalues.front();
        report["completeness"] =
            ga::to_string(ga::is_complete(analysis.spectral, analysis.epsilon_kernel, true));
        for (std::size_t j = 0; j < analysis.spectral.eigensections.size(); ++j) {
            ga::write_section_csv(analysis.spectral.eigensections[j],
                                  (out_dir / ("eigensection_" + std::to_string(j) + ".csv"))
                                      .string());
        }
    } else {
        const auto ensemble = simulate_from(file, opt);
        const auto blocks = ga::quantile_scenarios(ensemble, file.domain, 4);
        json block_reports = json::array();
        std::vector<ga::NflvrVerdict> verdicts;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto analysis =
                ga::analyze_spectrum(blocks[b], opt.grid, opt.k, opt.tol, opt.epsilon_kernel,
                                     0, ga::TimeDerivativeMode::nelson_smoothed);
            if (!analysis.spectral.converged) {
                throw ga::Error(ga::ErrorCode::no_convergence, "eigensolver did not converge");
            }
            verdicts.push_back(analysis.verdict);
            block_reports.push_back(spectrum_block_report(analysis));
        }
        report["blocks"] = block_reports;
        report["verdict"] = ga::to_string(ga::aggregate_verdicts(verdicts));
    }
    write_report(out_dir, "spectrum", report, config, opt.force);
    return 0;
}

int run_kernel(const CommonOptions& opt) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    if (!file.scenario) {
        throw ga::Error(ga::ErrorCode::config_invalid,
                        "kernel extraction needs a deterministic scenario");
    }
    const auto config = config_of("kernel", opt, file.raw);
    const auto& scenario = *file.scenario;
    const auto analysis =
        ga::analyze_spectrum(scenario, opt.grid, std::max<std::size_t>(opt.k, 1), opt.tol,
                             opt.epsilon_kernel);
    if (!analysis.spectral.converged) {
        throw ga::Error(ga::ErrorCode::no_convergence, "eigensolver did not converge");
    }
    json report;
    report["lambda_min"] = analysis.spectral.eigenvalues.front();
    report["verdict"] = ga::to_string(analysis.verdict);
    const fs::path out_dir(opt.out_dir);
    ensure_writable(out_dir / "kernel_report.json", opt.force);
    if (analysis.verdict == ga::NflvrVerdict::arbitrage_free) {
        std::vector<double> x_ref(scenario.n_assets());
        for (std::size_t d = 0; d < x_ref.size(); ++d) {
            x_ref[d] = 0.5 * (scenario.portfolio_domain.lo[d] + scenario.portfolio_domain.hi[d]);
        }
        const auto kernel =
            ga::extract_pricing_kernel(analysis.spectral.eigensections.front(), scenario, x_ref);
        report["check_residual"] = kernel.check_residual;
        report["beta"] = kernel.beta;
        json rn = json::array();
        const std::size_t n_times = scenario.n_times();
        for (std::size_t t : {n_times / 4, n_times / 2, n_times - 1}) {
            rn.push_back({{"time", scenario.time_grid[t]},
                          {"radon_nikodym",
                           ga::radon_nikodym(analysis.spectral.eigensections.front(), scenario,
                                             t)}});
        }
        report["radon_nikodym"] = rn;
        ga::write_section_csv(analysis.spectral.eigensections.front(),
                              (out_dir / "harmonic_section.csv").string());
    } else {
        report["note"] = "no kernel: market not arbitrage-free at this threshold";
    }
    write_report(out_dir, "kernel", report, config, opt.force);
    return 0;
}

int run_utility(const CommonOptions& opt, const std::string& u_form, double gamma, double a,
                std::size_t start, std::size_t horizon) {
    validate_options(opt);
    const auto file = ga::load_scenario_file(opt.scenario_path);
    if (!file.scenario) {
        throw ga::Error(ga::ErrorCode::config_invalid,
                        "utility optimization needs a deterministic scenario");
    }
    auto config = config_of("utility", opt, file.raw);
    config["u"] = u_form;
    config["gamma"] = gamma;
    config["a"] = a;
    config["start"] = start;
    config["horizon"] = horizon;

    const auto utility = [&] {
        if (u_form == "log") return ga::UtilityFunction::log_form();
        if (u_form == "power") return ga::UtilityFunction::power_form(gamma);
        if (u_form == "exp") return ga::UtilityFunction::exponential_form(a);
        throw ga::Error(ga::ErrorCode::config_invalid, "unknown utility form: " + u_form);
    }();

    const auto& scenario = *file.scenario;
    if (horizon == 0) horizon = scenario.n_times() - 1;
    const ga::XGrid grid(scenario.portfolio_domain, opt.grid);
    std::optional<ga::PathEnsemble> ensemble;
    if (file.ito && file.simulation) ensemble = simulate_from(file, opt);
    const auto optimum = ga::maximize_expected_utility(scenario, utility, start, horizon, grid,
                                                       ensemble ? &*ensemble : nullptr);

    json report;
    report["value"] = optimum.value;
    report["verdict"] = optimum.verdict;
    report["flat"] = optimum.flat;
    report["boundary"] = optimum.boundary;
    report["foc_along_optimum"] = optimum.foc_along_optimum;
    json strategy = json::array();
    for (std::size_t i = 0; i < optimum.strategy.size(); ++i) {
        strategy.push_back({{"time", scenario.time_grid[optimum.step_indices[i]]},
                            {"nominals", optimum.strategy[i]}});
    }
    report["strategy"] = strategy;
    write_report(fs::path(opt.out_dir), "utility", report, config, opt.force);
    return 0;
}

int run_report(const std::string& out_dir) {
    const fs::path dir(out_dir);
    if (!fs::exists(dir)) {
        throw ga::Error(ga::ErrorCode::config_invalid, "no such run directory: " + out_dir);
    }
    json summary = json::array();
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > 12 && name.substr(name.size() - 12) == "_report.json") {
            std::ifstream in(entry.path());
            json doc;
            in >> doc;
            json row;
            row["report"] = name;
            if (doc.contains("verdict")) row["verdict"] = doc["verdict"];
            if (doc.contains("lambda_min")) row["lambda_min"] = doc["lambda_min"];
            if (doc.contains("sup_norm")) row["sup_norm"] = doc["sup_norm"];
            if (doc.contains("value")) row["value"] = doc["value"];
            row["config_hash"] = doc.value("config_hash", "");
            summary.push_back(row);
            std::cout << row.dump() << "\n";
        }
    }
    ga::write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geometric market analysis: curvature, spectra, kernels"};
    app.require_subcommand(1);

    CommonOptions sim_opt, curv_opt, zc_opt, spec_opt, kern_opt, util_opt;
    std::string util_form = "log";
    double util_gamma = 2.0, util_a = 1.0;
    std::size_t util_start = 0, util_horizon = 0;
    std::string report_dir = "runs";

    add_common(app.add_subcommand("simulate", "generate a Monte Carlo ensemble"), sim_opt);
    add_common(app.add_subcommand("curvature", "curvature field of the market connection"),
               curv_opt);
    add_common(app.add_subcommand("zc-test", "range condition on the Ito coefficients"), zc_opt);
    add_common(app.add_subcommand("spectrum", "low spectrum of the connection laplacian"),
               spec_opt);
    add_common(app.add_subcommand("kernel", "pricing kernel from the harmonic section"),
               kern_opt);
    auto* util_cmd = app.add_subcommand("utility", "expected-utility optimization");
    add_common(util_cmd, util_opt);
    util_cmd->add_option("--u", util_form, "utility form: log | power | exp");
    util_cmd->add_option("--gamma", util_gamma, "power utility exponent");
    util_cmd->add_option("--a", util_a, "exponential utility coefficient");
    util_cmd->add_option("--start", util_start, "start time index");
    util_cmd->add_option("--horizon", util_horizon, "horizon time index (0 = last)");
    auto* report_cmd = app.add_subcommand("report", "summarize reports in a run directory");
    report_cmd->add_option("--out", report_dir, "run directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("simulate")) return run_simulate(sim_opt);
        if (app.got_subcommand("curvature")) return run_curvature(curv_opt);
        if (app.got_subcommand("zc-test")) return run_zc_test(zc_opt);
        if (app.got_subcommand("spectrum")) return run_spectrum(spec_opt);
        if (app.got_subcommand("kernel")) return run_kernel(kern_opt);
        if (app.got_subcommand("utility")) {
            return run_utility(util_opt, util_form, util_gamma, util_a, util_start, util_horizon);
        }
        if (app.got_subcommand("report")) return run_report(report_dir);
    } catch (const ga::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return (e.code() == ga::ErrorCode::config_invalid || e.code() == ga::ErrorCode::io_error)
                   ? 2
                   : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
