#include "ga/scenario_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ga {

using nlohmann::json;

namespace {

std::vector<double> doubles(const json& j, const char* what) {
    if (!j.is_array()) throw Error(ErrorCode::config_invalid, std::string(what) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

VectorCoefficient vector_coefficient(const json& j, std::size_t n, const char* what) {
    VectorCoefficient c;
    const std::string kind = j.value("kind", "constant");
    if (kind == "constant") {
        c.kind = VectorCoefficient::Kind::constant;
        c.value = doubles(j.at("value"), what);
    } else if (kind == "affine") {
        c.kind = VectorCoefficient::Kind::affine;
        c.value = doubles(j.at("value"), what);
        c.scale = doubles(j.at("scale"), what);
        if (c.scale.size() != n) {
            throw Error(ErrorCode::config_invalid, std::string(what) + ": scale size mismatch");
        }
    } else if (kind == "table") {
        c.kind = VectorCoefficient::Kind::table;
        c.table_times = doubles(j.at("times"), what);
        for (const auto& row : j.at("values")) c.table_values.push_back(doubles(row, what));
        if (c.table_values.size() != c.table_times.size()) {
            throw Error(ErrorCode::config_invalid, std::string(what) + ": table rows mismatch");
        }
        return c;
    } else {
        throw Error(ErrorCode::config_invalid,
                    std::string(what) + ": unknown coefficient kind '" + kind + "'");
    }
    if (c.value.size() != n) {
        throw Error(ErrorCode::config_invalid, std::string(what) + ": value size mismatch");
    }
    return c;
}

MatrixCoefficient matrix_coefficient(const json& j, std::size_t rows, std::size_t cols,
                                     const char* what) {
    MatrixCoefficient c;
    c.rows = rows;
    c.cols = cols;
    const std::string kind = j.value("kind", "constant");
    if (kind == "constant") {
        c.kind = MatrixCoefficient::Kind::constant;
        c.value = doubles(j.at("value"), what);
    } else if (kind == "affine") {
        c.kind = MatrixCoefficient::Kind::affine;
        c.value = doubles(j.at("value"), what);
        c.scale = doubles(j.at("scale"), what);
        if (c.scale.size() != rows * cols) {
            throw Error(ErrorCode::config_invalid, std::string(what) + ": scale size mismatch");
        }
    } else if (kind == "table") {
        c.kind = MatrixCoefficient::Kind::table;
        c.table_times = doubles(j.at("times"), what);
        for (const auto& row : j.at("values")) c.table_values.push_back(doubles(row, what));
        if (c.table_values.size() != c.table_times.size()) {
            throw Error(ErrorCode::config_invalid, std::string(what) + ": table rows mismatch");
        }
        for (const auto& row : c.table_values) {
            if (row.size() != rows * cols) {
                throw Error(ErrorCode::config_invalid, std::string(what) + ": table entry size");
            }
        }
        return c;
    } else {
        throw Error(ErrorCode::config_invalid,
                    std::string(what) + ": unknown coefficient kind '" + kind + "'");
    }
    if (c.value.size() != rows * cols) {
        throw Error(ErrorCode::config_invalid, std::string(what) + ": value size mismatch");
    }
    return c;
}

Box box_from_json(const json& j) {
    Box box;
    for (const auto& axis : j) {
        if (!axis.is_array() || axis.size() != 2) {
            throw Error(ErrorCode::config_invalid, "portfolio_domain axes must be [lo, hi]");
        }
        box.lo.push_back(axis[0].get<double>());
        box.hi.push_back(axis[1].get<double>());
        if (!(box.hi.back() > box.lo.back())) {
            throw Error(ErrorCode::config_invalid, "portfolio_domain axis must have lo < hi");
        }
    }
    return box;
}

} // namespace

MarketScenario scenario_from_json(const json& doc) {
    MarketScenario s;
    s.time_grid = doubles(doc.at("time_grid"), "time_grid");
    s.portfolio_domain = box_from_json(doc.at("portfolio_domain"));
    for (const auto& asset : doc.at("assets")) {
        Gauge g;
        g.deflator = doubles(asset.at("deflator"), "deflator");
        if (asset.contains("term_structure")) {
            const auto& ts = asset.at("term_structure");
            g.term_structure.offsets = doubles(ts.at("maturity_offsets"), "maturity_offsets");
            g.term_structure.values = doubles(ts.at("values"), "term_structure values");
            g.term_structure.n_times = s.time_grid.size();
            if (g.term_structure.values.size() !=
                g.term_structure.offsets.size() * s.time_grid.size()) {
                throw Error(ErrorCode::config_invalid, "term_structure values size mismatch");
            }
        }
        s.assets.push_back(std::move(g));
        s.short_rates.push_back(doubles(asset.at("short_rate"), "short_rate"));
    }
    s.validate();
    return s;
}

ItoModelSpec ito_from_json(const json& doc) {
    ItoModelSpec m;
    m.n_assets = doc.at("assets").get<std::size_t>();
    m.brownian_dim = doc.at("brownian_dim").get<std::size_t>();
    m.rate_brownian_dim = doc.value("rate_brownian_dim", std::size_t{0});
    m.drift = vector_coefficient(doc.at("drift"), m.n_assets, "drift");
    m.volatility = matrix_coefficient(doc.at("volatility"), m.n_assets, m.brownian_dim,
                                      "volatility");
    if (doc.contains("rate_drift")) {
        m.rate_drift = vector_coefficient(doc.at("rate_drift"), m.n_assets, "rate_drift");
    } else {
        m.rate_drift.kind = VectorCoefficient::Kind::constant;
        m.rate_drift.value.assign(m.n_assets, 0.0);
    }
    if (m.rate_brownian_dim > 0) {
        m.rate_volatility = matrix_coefficient(doc.at("rate_volatility"), m.n_assets,
                                               m.rate_brownian_dim, "rate_volatility");
    }
    m.s0 = doubles(doc.at("s0"), "s0");
    m.r0 = doc.contains("r0") ? doubles(doc.at("r0"), "r0")
                              : std::vector<double>(m.n_assets, 0.0);
    m.validate();
    return m;
}

CashflowIntensity intensity_from_json(const json& doc) {
    CashflowIntensity out;
    if (doc.contains("atoms")) {
        for (const auto& a : doc.at("atoms")) {
            if (!a.is_array() || a.size() != 2) {
                throw Error(ErrorCode::config_invalid, "atoms must be [location, weight] pairs");
            }
            out.atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
        }
    }
    if (doc.contains("density")) {
        const auto& d = doc.at("density");
        out = [&] {
            auto base = CashflowIntensity::piecewise(doubles(d.at("breakpoints"), "breakpoints"),
                                                     doubles(d.at("values"), "values"));
            base.atoms = out.atoms;
            return base;
        }();
    }
    out.validate();
    return out;
}

ScenarioFile load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config_invalid, "cannot open scenario file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_invalid, "scenario JSON parse failure: " + std::string(e.what()));
    }
    ScenarioFile out;
    out.raw = doc;
    try {
        if (doc.contains("portfolio_domain")) out.domain = box_from_json(doc.at("portfolio_domain"));
        if (doc.contains("assets") && doc.contains("time_grid")) {
            out.scenario = scenario_from_json(doc);
        }
        if (doc.contains("ito_model")) out.ito = ito_from_json(doc.at("ito_model"));
        if (doc.contains("simulation")) {
            const auto& s = doc.at("simulation");
            SimulationConfig cfg;
            cfg.horizon = s.value("horizon", 1.0);
            cfg.steps = s.value("steps", std::size_t{64});
            cfg.paths = s.value("paths", std::size_t{1000});
            cfg.seed = s.value("seed", uint64_t{0});
            out.simulation = cfg;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_invalid, "scenario schema failure: " + std::string(e.what()));
    }
    if (!out.scenario && !out.ito) {
        throw Error(ErrorCode::config_invalid,
                    "scenario file needs either asset paths or an ito_model block");
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_error, "cannot write: " + path);
    return out;
}

} // namespace

void write_ensemble_csv(const PathEnsemble& ensemble, const std::string& path) {
    auto out = open_out(path);
    out << "path,step,time";
    for (std::size_t j = 0; j < ensemble.n_assets(); ++j) out << ",asset_" << j + 1;
    for (std::size_t j = 0; j < ensemble.n_assets(); ++j) out << ",rate_" << j + 1;
    out << "\n";
    for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
        for (std::size_t s = 0; s <= ensemble.n_steps(); ++s) {
            out << p << ',' << s << ',' << format_double(ensemble.times()[s]);
            for (std::size_t j = 0; j < ensemble.n_assets(); ++j) {
                out << ',' << format_double(ensemble.asset(p, s, j));
            }
            for (std::size_t j = 0; j < ensemble.n_assets(); ++j) {
                out << ',' << format_double(ensemble.rate(p, s, j));
            }
            out << "\n";
        }
    }
}

void write_estimate_csv(const DerivativeEstimate& estimate, const std::string& path) {
    auto out = open_out(path);
    out << "time,bin_center,value,stderr,n\n";
    for (std::size_t i = 0; i < estimate.times.size(); ++i) {
        for (const auto& bin : estimate.bins[i]) {
            out << format_double(estimate.times[i]) << ',' << format_double(bin.center) << ','
                << format_double(bin.value) << ',' << format_double(bin.std_error) << ','
                << bin.count << "\n";
        }
    }
}

void write_curvature_csv(const CurvatureField& field, const std::string& path) {
    auto out = open_out(path);
    out << "time";
    for (std::size_t d = 0; d < field.x_grid.dim(); ++d) out << ",x_" << d + 1;
    for (std::size_t d = 0; d < field.n_components; ++d) out << ",r_" << d + 1;
    out << ",usable\n";
    for (std::size_t t = 0; t < field.times.size(); ++t) {
        for (std::size_t m = 0; m < field.x_grid.size(); ++m) {
            out << format_double(field.times[t]);
            const auto x = field.x_grid.point(m);
            for (double v : x) out << ',' << format_double(v);
            for (std::size_t d = 0; d < field.n_components; ++d) {
                out << ',' << format_double(field.component(t, m, d));
            }
            out << ',' << static_cast<int>(field.usable[t * field.x_grid.size() + m]) << "\n";
        }
    }
}

void write_section_csv(const SectionGrid& section, const std::string& path) {
    auto out = open_out(path);
    out << "time";
    for (std::size_t d = 0; d < section.x_grid.dim(); ++d) out << ",x_" << d + 1;
    out << ",value\n";
    for (std::size_t t = 0; t < section.times.size(); ++t) {
        for (std::size_t m = 0; m < section.x_grid.size(); ++m) {
            out << format_double(section.times[t]);
            const auto x = section.x_grid.point(m);
            for (double v : x) out << ',' << format_double(v);
            out << ',' << format_double(section.at(t, m)) << "\n";
        }
    }
}

std::string config_hash(const json& config) {
    const std::string dump = config.dump();
    uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
}

} // namespace ga
