#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svcf/pipeline.hpp"

namespace pl = svcf::pipeline;

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::string constraints;
    double seed = -1.0;
    double slack = -2.0;
    double alpha = -1.0;
    int grid_k = -1;
    int threads = -1;
};

pl::RunConfig configure(const Overrides& ov) {
    auto cfg = pl::load_config_file(ov.config_path);
    if (ov.seed >= 0.0) {
        cfg.seed = static_cast<std::uint64_t>(ov.seed);
        cfg.school_cfg.seed = cfg.seed;
        cfg.ci.seed = cfg.seed;
    }
    if (ov.slack > -2.0) cfg.region.slack = ov.slack;
    if (ov.alpha > 0.0) cfg.ci.alpha = ov.alpha;
    if (ov.grid_k > 0) cfg.ci.grid_k = ov.grid_k;
    if (ov.threads > 0) {
        cfg.region.threads = ov.threads;
        cfg.ci.threads = ov.threads;
    }
    if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
    if (!ov.constraints.empty()) {
        cfg.region.constraints = {};
        std::size_t pos = 0;
        while (pos <= ov.constraints.size()) {
            std::size_t comma = ov.constraints.find(',', pos);
            std::string tok = ov.constraints.substr(
                pos, comma == std::string::npos ? comma : comma - pos);
            if (tok == "mts")
                cfg.region.constraints.mts = true;
            else if (tok == "mtr")
                cfg.region.constraints.mtr = true;
            else if (!tok.empty())
                throw pl::ConfigError("unknown constraint: " + tok);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (!(cfg.ci.alpha > 0.0 && cfg.ci.alpha < 1.0))
        throw pl::ConfigError("alpha must lie in (0,1)");
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"set-valued control function toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    Overrides ov;
    app.add_option("--config", ov.config_path, "JSON run configuration")->required();
    app.add_option("--seed", ov.seed, "override the run seed");
    app.add_option("--slack", ov.slack, "override the acceptance slack (negative: 2x max cell SE)");
    app.add_option("--alpha", ov.alpha, "override the CI level");
    app.add_option("--grid-k", ov.grid_k, "override the CI grid size");
    app.add_option("--constraints", ov.constraints, "comma list of shape constraints: mts,mtr");
    app.add_option("--out-dir", ov.out_dir, "override the output directory");
    app.add_option("--threads", ov.threads, "override worker thread counts");

    auto* c_sim = app.add_subcommand("simulate", "draw a synthetic dataset");
    auto* c_con = app.add_subcommand("containment", "tabulate containment and capacity values");
    auto* c_ide = app.add_subcommand("identify", "sweep the theta grid into an identified region");
    auto* c_bnd = app.add_subcommand("bounds", "bound structural functionals over the region");
    auto* c_ci = app.add_subcommand("ci", "finite-sample confidence intervals");
    auto* c_rep = app.add_subcommand("report", "render accumulated artifacts as text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : pl::kExitConfig;
    }

    try {
        auto cfg = configure(ov);
        if (c_sim->parsed()) return pl::run_simulate(cfg);
        if (c_con->parsed()) return pl::run_containment(cfg);
        if (c_ide->parsed()) return pl::run_identify(cfg);
        if (c_bnd->parsed()) return pl::run_bounds(cfg);
        if (c_ci->parsed()) return pl::run_ci(cfg);
        if (c_rep->parsed()) return pl::run_report(cfg);
        return pl::kExitConfig;
    } catch (const pl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return pl::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pl::kExitConfig;
    }
}
