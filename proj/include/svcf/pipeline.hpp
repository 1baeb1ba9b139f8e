#ifndef SVCF_PIPELINE_HPP
#define SVCF_PIPELINE_HPP

// Config-driven orchestration behind the command line: one declarative JSON
// file describes the model, data source, grids and inference settings; each
// subcommand reads it, runs the matching module and drops artifacts into the
// output directory.  Exit codes: 0 ok, 2 bad config or input, 3 model refuted.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcf/identify.hpp"
#include "svcf/inference.hpp"
#include "svcf/io.hpp"
#include "svcf/school.hpp"

namespace svcf::pipeline {

using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRefuted = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelSpec spec;
    ThetaPoint theta0;
    bool has_theta0 = false;

    std::string data_path; // input CSV; empty means simulate on the fly
    std::size_t n_sim = 1000;
    std::uint64_t seed = 1;

    cells::Schema schema;
    cells::BinningOptions binning;
    identify::GridOptions grid;
    identify::RegionOptions region;
    bool method_auto = true;
    std::vector<identify::Functional> functionals;
    infer::CiOptions ci;

    bool is_school = false;
    school::MatchConfig school_cfg;
    int school_j = 1, school_k = 0;
    double school_bandwidth = 0.1;

    std::string out_dir = "out";
};

namespace detail {

inline Kind kind_from_string(const std::string& s) {
    if (s == "binary_roy") return Kind::BinaryRoy;
    if (s == "random_coef") return Kind::RandomCoef;
    if (s == "ordered_choice") return Kind::OrderedChoice;
    if (s == "dynamic_two_period") return Kind::DynamicTwoPeriod;
    if (s == "entry_game") return Kind::EntryGame;
    if (s == "multinomial") return Kind::Multinomial;
    if (s == "censored_selection") return Kind::CensoredSel;
    if (s == "interval_treatment") return Kind::IntervalTreatment;
    if (s == "school_match") return Kind::SchoolMatch;
    throw ConfigError("unknown model kind: " + s);
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

inline identify::Functional parse_functional(const nlohmann::json& j) {
    identify::Functional fn;
    std::string type = j.at("type").get<std::string>();
    if (type == "ASF")
        fn.type = identify::Functional::Type::ASF;
    else if (type == "DSF")
        fn.type = identify::Functional::Type::DSF;
    else if (type == "QSF")
        fn.type = identify::Functional::Type::QSF;
    else if (type == "PRSF")
        fn.type = identify::Functional::Type::PRSF;
    else if (type == "SWITCH")
        fn.type = identify::Functional::Type::SWITCH;
    else
        throw ConfigError("unknown functional type: " + type);
    fn.d = get_or(j, "d", fn.d);
    fn.x = get_or(j, "x", fn.x);
    fn.y = get_or(j, "y", fn.y);
    fn.tau = get_or(j, "tau", fn.tau);
    fn.z = get_or(j, "z", fn.z);
    return fn;
}

} // namespace detail

inline RunConfig load_config(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        const auto& m = j.at("model");
        cfg.spec.kind = detail::kind_from_string(m.at("kind").get<std::string>());
        cfg.is_school = cfg.spec.kind == Kind::SchoolMatch;
        if (!cfg.is_school) {
            cfg.spec.support = detail::get_or(m, "support", std::vector<double>{0.0, 1.0});
            cfg.spec.n_z = detail::get_or(m, "n_z", 2);
            cfg.spec.n_x = detail::get_or(m, "n_x", 1);
            cfg.spec.J = detail::get_or(m, "J", 0);
            bool cont_default = cfg.spec.kind == Kind::EntryGame ||
                                cfg.spec.kind == Kind::CensoredSel ||
                                cfg.spec.kind == Kind::IntervalTreatment;
            cfg.spec.continuous_outcome = detail::get_or(m, "continuous_outcome", cont_default);
            cfg.spec.observed_control = detail::get_or(m, "observed_control", false);
            cfg.spec.v_support = detail::get_or(m, "v_support", std::vector<double>{});
            cfg.spec.p_s = detail::get_or(m, "p_s", 0.5);
            cfg.schema = cells::default_schema(cfg.spec);
        }

        if (j.contains("theta0")) {
            const auto& t = j.at("theta0");
            cfg.theta0.mu = detail::get_or(t, "mu", std::vector<double>{});
            cfg.theta0.pi = detail::get_or(t, "pi", std::vector<double>{});
            cfg.theta0.rho = detail::get_or(t, "rho", 0.0);
            cfg.theta0.f_extra = detail::get_or(t, "f_extra", std::vector<double>{});
            cfg.theta0.c_lo = detail::get_or(t, "c_lo", 0.0);
            cfg.theta0.c_hi = detail::get_or(t, "c_hi", 0.0);
            cfg.has_theta0 = true;
        }

        if (j.contains("data")) {
            const auto& d = j.at("data");
            cfg.data_path = detail::get_or(d, "path", std::string{});
            cfg.n_sim = detail::get_or(d, "n", std::size_t{1000});
        }
        cfg.seed = detail::get_or(j, "seed", std::uint64_t{1});
        cfg.out_dir = detail::get_or(j, "out_dir", std::string{"out"});

        if (j.contains("schema") && !cfg.is_school) {
            const auto& s = j.at("schema");
            cfg.schema.y = detail::get_or(s, "y", cfg.schema.y);
            cfg.schema.d = detail::get_or(s, "d", cfg.schema.d);
            cfg.schema.x = detail::get_or(s, "x", cfg.schema.x);
            cfg.schema.z = detail::get_or(s, "z", cfg.schema.z);
            cfg.schema.v = detail::get_or(s, "v", cfg.schema.v);
        }
        if (j.contains("binning")) {
            const auto& b = j.at("binning");
            cfg.binning.min_count = detail::get_or(b, "min_count", cfg.binning.min_count);
            if (b.contains("columns"))
                for (const auto& [col, spec_j] : b.at("columns").items()) {
                    cells::Bin bin;
                    std::string mode = detail::get_or(spec_j, "mode", std::string{"none"});
                    if (mode == "equal_width")
                        bin.mode = cells::Bin::Mode::EqualWidth;
                    else if (mode == "quantile")
                        bin.mode = cells::Bin::Mode::Quantile;
                    else if (mode != "none")
                        throw ConfigError("unknown binning mode: " + mode);
                    bin.k = detail::get_or(spec_j, "k", bin.k);
                    cfg.binning.by_column[col] = bin;
                }
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            cfg.grid.n_mu = detail::get_or(g, "n_mu", cfg.grid.n_mu);
            cfg.grid.n_rho = detail::get_or(g, "n_rho", cfg.grid.n_rho);
            cfg.grid.n_cut = detail::get_or(g, "n_cut", cfg.grid.n_cut);
            cfg.grid.mu_span = detail::get_or(g, "mu_span", cfg.grid.mu_span);
            cfg.grid.rho_limit = detail::get_or(g, "rho_limit", cfg.grid.rho_limit);
        }
        if (j.contains("identify")) {
            const auto& r = j.at("identify");
            std::string method = detail::get_or(r, "method", std::string{"auto"});
            if (method == "full_independence") {
                cfg.region.method = identify::Method::FullIndependence;
                cfg.method_auto = false;
            } else if (method == "mean_independence") {
                cfg.region.method = identify::Method::MeanIndependence;
                cfg.method_auto = false;
            } else if (method != "auto") {
                throw ConfigError("unknown identify method: " + method);
            }
            cfg.region.slack = detail::get_or(r, "slack", cfg.region.slack);
            cfg.region.threads = detail::get_or(r, "threads", cfg.region.threads);
            cfg.region.mc_draws = detail::get_or(r, "mc_draws", cfg.region.mc_draws);
            for (const auto& c : detail::get_or(r, "constraints", std::vector<std::string>{})) {
                if (c == "mts")
                    cfg.region.constraints.mts = true;
                else if (c == "mtr")
                    cfg.region.constraints.mtr = true;
                else
                    throw ConfigError("unknown constraint: " + c);
            }
        }
        if (j.contains("functionals"))
            for (const auto& f : j.at("functionals")) cfg.functionals.push_back(detail::parse_functional(f));
        if (j.contains("inference")) {
            const auto& c = j.at("inference");
            cfg.ci.alpha = detail::get_or(c, "alpha", cfg.ci.alpha);
            cfg.ci.grid_k = detail::get_or(c, "grid_k", cfg.ci.grid_k);
            cfg.ci.seed = detail::get_or(c, "seed", cfg.seed);
            cfg.ci.threads = detail::get_or(c, "threads", cfg.ci.threads);
            cfg.ci.binning.min_count = detail::get_or(c, "min_count", cfg.ci.binning.min_count);
        } else {
            cfg.ci.seed = cfg.seed;
        }
        if (!(cfg.ci.alpha > 0.0 && cfg.ci.alpha < 1.0))
            throw ConfigError("alpha must lie in (0,1)");

        if (cfg.is_school) {
            if (!j.contains("school")) throw ConfigError("school_match needs a school block");
            const auto& s = j.at("school");
            cfg.school_cfg.J = detail::get_or(s, "J", cfg.school_cfg.J);
            cfg.school_cfg.K = detail::get_or(s, "K", cfg.school_cfg.K);
            cfg.school_cfg.cutoffs = s.at("cutoffs").get<std::vector<double>>();
            cfg.school_cfg.mu1 = s.at("mu1").get<std::vector<double>>();
            cfg.school_cfg.rho = detail::get_or(s, "rho", cfg.school_cfg.rho);
            cfg.school_cfg.sigma = detail::get_or(s, "sigma", cfg.school_cfg.sigma);
            cfg.school_cfg.all_acceptable =
                detail::get_or(s, "all_acceptable", cfg.school_cfg.all_acceptable);
            cfg.school_cfg.truthful = detail::get_or(s, "truthful", cfg.school_cfg.truthful);
            cfg.school_cfg.n = cfg.n_sim;
            cfg.school_cfg.seed = cfg.seed;
            cfg.school_j = detail::get_or(s, "j", cfg.school_j);
            cfg.school_k = detail::get_or(s, "k", cfg.school_k);
            cfg.school_bandwidth = detail::get_or(s, "bandwidth", cfg.school_bandwidth);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string{"config: "} + e.what());
    }
    return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string{"config parse: "} + e.what());
    }
    return load_config(j);
}

namespace detail {

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline nlohmann::json settings_json(const RunConfig& cfg) {
    nlohmann::json s;
    s["seed"] = cfg.seed;
    s["binning_min_count"] = cfg.binning.min_count;
    s["grid"] = {{"n_mu", cfg.grid.n_mu},
                 {"n_rho", cfg.grid.n_rho},
                 {"n_cut", cfg.grid.n_cut},
                 {"mu_span", cfg.grid.mu_span},
                 {"rho_limit", cfg.grid.rho_limit}};
    return s;
}

struct Fit {
    dgp::Dataset data;
    cells::CellTable table;
    cells::PropensityTable prop;
};

inline dgp::Dataset obtain_data(const RunConfig& cfg) {
    if (!cfg.data_path.empty()) return io::read_csv_file(cfg.data_path);
    if (cfg.is_school) return school::simulate_match(cfg.school_cfg).data;
    if (!cfg.has_theta0)
        throw ConfigError("no data path and no theta0 to simulate from");
    dgp::SimConfig sim;
    sim.spec = cfg.spec;
    sim.theta = cfg.theta0;
    sim.n = cfg.n_sim;
    sim.seed = cfg.seed;
    return dgp::simulate(sim).data;
}

inline Fit load_fit(const RunConfig& cfg) {
    Fit fit;
    fit.data = obtain_data(cfg);
    fit.table = cells::estimate_cells(cfg.spec, fit.data, cfg.schema, cfg.binning);
    fit.prop = cells::propensity_table(cfg.spec, fit.data, cfg.schema);
    return fit;
}

inline std::vector<identify::Functional> default_functionals(const ModelSpec& spec) {
    std::vector<identify::Functional> out;
    identify::Functional f1;
    f1.d = 1;
    out.push_back(f1);
    identify::Functional f0;
    f0.d = 0;
    out.push_back(f0);
    if (spec.support_size() == 2) {
        identify::Functional sw;
        sw.type = identify::Functional::Type::SWITCH;
        out.push_back(sw);
    }
    return out;
}

} // namespace detail

inline int run_simulate(const RunConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.is_school) {
        auto sim = school::simulate_match(cfg.school_cfg);
        io::write_csv_file(detail::out_path(cfg, "data.csv"), sim.data);
        io::write_csv_file(detail::out_path(cfg, "latents.csv"), sim.latents);
    } else {
        if (!cfg.has_theta0) throw ConfigError("simulate needs theta0");
        dgp::SimConfig sim;
        sim.spec = cfg.spec;
        sim.theta = cfg.theta0;
        sim.n = cfg.n_sim;
        sim.seed = cfg.seed;
        auto res = dgp::simulate(sim);
        io::write_csv_file(detail::out_path(cfg, "data.csv"), res.data);
        io::write_csv_file(detail::out_path(cfg, "latents.csv"), res.latents);
    }
    nlohmann::json meta;
    meta["schema_version"] = io::kSchemaVersion;
    meta["n"] = cfg.n_sim;
    meta["seed"] = cfg.seed;
    if (cfg.has_theta0) meta["theta0"] = io::theta_json(cfg.theta0);
    io::write_json_file(detail::out_path(cfg, "meta.json"), meta);
    log << "simulate: wrote " << cfg.out_dir << "/data.csv (" << cfg.n_sim << " rows)\n";
    return kExitOk;
}

inline int run_containment(const RunConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.is_school) throw ConfigError("containment tables are not defined for school_match");
    if (!cfg.has_theta0) throw ConfigError("containment needs theta0");
    auto fit = detail::load_fit(cfg);
    std::vector<models::Cell> keys;
    for (const auto& cs : fit.table.cells) keys.push_back(cs.cell);
    contain::ContainmentOptions opt;
    opt.seed = cfg.seed;
    auto rows = contain::containment_table(cfg.spec, cfg.theta0, keys, opt);
    std::ofstream f(detail::out_path(cfg, "containment.csv"));
    contain::write_table_csv(f, cfg.spec, rows);
    log << "containment: wrote " << cfg.out_dir << "/containment.csv (" << rows.size()
        << " rows)\n";
    return kExitOk;
}

namespace detail {

inline identify::IdentifiedRegion compute_region(const RunConfig& cfg, const Fit& fit) {
    auto grid = identify::make_grid(cfg.spec, fit.table, fit.prop, cfg.grid);
    identify::RegionOptions opt = cfg.region;
    if (cfg.method_auto) opt.method = identify::default_method(cfg.spec);
    opt.seed = static_cast<unsigned>(cfg.seed);
    return identify::identified_region(cfg.spec, grid, fit.table, fit.prop, opt);
}

} // namespace detail

inline int run_identify(const RunConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.is_school) throw ConfigError("identify runs on the threshold-selection kinds");
    auto fit = detail::load_fit(cfg);
    auto region = detail::compute_region(cfg, fit);

    auto j = io::region_json(region);
    j["settings"] = detail::settings_json(cfg);
    io::write_json_file(detail::out_path(cfg, "region.json"), j);
    std::ofstream f(detail::out_path(cfg, "region.csv"));
    io::write_region_csv(f, region);

    log << "identify: " << region.n_accepted() << "/" << region.grid.size()
        << " grid points accepted at slack " << region.slack << "\n";
    if (region.refuted()) {
        log << "identify: model refuted (no grid point satisfies the restrictions)\n";
        return kExitRefuted;
    }
    return kExitOk;
}

inline int run_bounds(const RunConfig& cfg, std::ostream& log = std::cout) {
    std::vector<identify::FunctionalBounds> bounds;
    double slack = 0.0;
    if (cfg.is_school) {
        auto data = detail::obtain_data(cfg);
        auto sb = school::school_bounds(data, cfg.school_cfg.J, cfg.school_j, cfg.school_k,
                                        cfg.school_cfg.cutoffs, cfg.school_bandwidth);
        bounds.push_back(sb.contrast);
    } else {
        auto fit = detail::load_fit(cfg);
        auto region = detail::compute_region(cfg, fit);
        slack = region.slack;
        if (region.refuted()) {
            log << "bounds: model refuted at slack " << region.slack << "\n";
            return kExitRefuted;
        }
        auto fns = cfg.functionals.empty() ? detail::default_functionals(cfg.spec)
                                           : cfg.functionals;
        for (const auto& fn : fns)
            bounds.push_back(identify::kappa_bounds(cfg.spec, region, fn, fit.table));
    }
    auto j = io::bounds_json(bounds, slack);
    j["settings"] = detail::settings_json(cfg);
    io::write_json_file(detail::out_path(cfg, "bounds.json"), j);
    std::ofstream f(detail::out_path(cfg, "bounds.csv"));
    io::write_bounds_csv(f, bounds);
    for (const auto& b : bounds)
        log << "bounds: " << b.functional_id << " in [" << b.lower << ", " << b.upper << "]\n";
    return kExitOk;
}

inline int run_ci(const RunConfig& cfg, std::ostream& log = std::cout) {
    if (cfg.is_school) throw ConfigError("ci runs on the threshold-selection kinds");
    auto fit = detail::load_fit(cfg);
    auto grid = identify::make_grid(cfg.spec, fit.table, fit.prop, cfg.grid);
    auto fns = cfg.functionals.empty() ? detail::default_functionals(cfg.spec) : cfg.functionals;

    nlohmann::json all = nlohmann::json::array();
    bool any_refuted = false;
    for (const auto& fn : fns) {
        auto ci = infer::confidence_interval(cfg.spec, fit.data, grid, fn, cfg.ci);
        all.push_back(io::ci_json(ci, cfg.ci.grid_k, cfg.ci.seed));
        if (ci.empty) {
            any_refuted = true;
            log << "ci: " << ci.functional_id << " refuted at every grid value\n";
        } else {
            log << "ci: " << ci.functional_id << " [" << ci.lower << ", " << ci.upper
                << "] at alpha " << ci.alpha << "\n";
        }
    }
    nlohmann::json j;
    j["schema_version"] = io::kSchemaVersion;
    j["settings"] = detail::settings_json(cfg);
    j["intervals"] = all;
    io::write_json_file(detail::out_path(cfg, "ci.json"), j);
    return any_refuted ? kExitRefuted : kExitOk;
}

inline int run_report(const RunConfig& cfg, std::ostream& log = std::cout) {
    namespace fs = std::filesystem;
    std::ostringstream report;
    bool found = false;

    auto region_path = fs::path(cfg.out_dir) / "region.json";
    if (fs::exists(region_path)) {
        found = true;
        auto j = io::read_json_file(region_path.string());
        report << "identified region\n"
               << "  method:      " << j.at("method").get<std::string>() << "\n"
               << "  slack:       " << j.at("slack").get<double>() << "\n"
               << "  accepted:    " << j.at("n_accepted").get<long>() << " / "
               << j.at("n_grid").get<long>() << "\n"
               << "  refuted:     " << (j.at("refuted").get<bool>() ? "yes" : "no") << "\n\n";
    }
    auto bounds_path = fs::path(cfg.out_dir) / "bounds.json";
    if (fs::exists(bounds_path)) {
        found = true;
        auto j = io::read_json_file(bounds_path.string());
        report << "functional bounds\n";
        for (const auto& b : j.at("bounds"))
            report << "  " << b.at("functional").get<std::string>() << ": ["
                   << b.at("lower").get<double>() << ", " << b.at("upper").get<double>() << "]\n";
        report << "\n";
    }
    auto ci_path = fs::path(cfg.out_dir) / "ci.json";
    if (fs::exists(ci_path)) {
        found = true;
        auto j = io::read_json_file(ci_path.string());
        report << "confidence intervals\n";
        for (const auto& c : j.at("intervals")) {
            report << "  " << c.at("functional").get<std::string>() << ": ";
            if (c.at("refuted").get<bool>())
                report << "refuted";
            else
                report << "[" << c.at("lower").get<double>() << ", "
                       << c.at("upper").get<double>() << "] at alpha "
                       << c.at("alpha").get<double>();
            report << "\n";
        }
        report << "\n";
    }
    if (!found) throw ConfigError("report: no artifacts found in " + cfg.out_dir);

    std::ofstream f(detail::out_path(cfg, "report.txt"));
    f << report.str();
    log << report.str();
    return kExitOk;
}

} // namespace svcf::pipeline

#endif
