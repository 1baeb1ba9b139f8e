#ifndef SVCF_IO_HPP
#define SVCF_IO_HPP

// File formats for the pipeline: a strict CSV dialect for datasets (comma
// separated, header required, '.' decimal, no missing values) and JSON
// envelopes for derived artifacts.  Every envelope carries a schema version
// and the settings that produced it.

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcf/dgp.hpp"
#include "svcf/identify.hpp"
#include "svcf/inference.hpp"

namespace svcf::io {

constexpr int kSchemaVersion = 1;

inline dgp::Dataset read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    dgp::Dataset out;
    {
        std::stringstream header(line);
        std::string name;
        while (std::getline(header, name, ',')) {
            if (name.empty()) throw std::runtime_error("read_csv: empty column name in header");
            if (out.index_of(name) >= 0)
                throw std::runtime_error("read_csv: duplicate column name " + name);
            out.add(name);
        }
        if (line.back() == ',') throw std::runtime_error("read_csv: empty column name in header");
    }

    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (is.peek() == EOF) break; // tolerate one trailing newline
            throw std::runtime_error("read_csv: blank line at row " + std::to_string(row));
        }
        std::size_t col = 0, pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            std::string field = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
            if (col >= out.cols.size())
                throw std::runtime_error("read_csv: too many fields at row " + std::to_string(row));
            if (field.empty())
                throw std::runtime_error("read_csv: missing value at row " + std::to_string(row) +
                                         ", column " + out.names[col]);
            double value = 0.0;
            auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
            if (ec != std::errc{} || end != field.data() + field.size())
                throw std::runtime_error("read_csv: bad number '" + field + "' at row " +
                                         std::to_string(row) + ", column " + out.names[col]);
            out.cols[col].push_back(value);
            ++col;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (col != out.cols.size())
            throw std::runtime_error("read_csv: too few fields at row " + std::to_string(row));
    }
    return out;
}

inline dgp::Dataset read_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_csv: cannot open " + path);
    return read_csv(f);
}

inline void write_csv_file(const std::string& path, const dgp::Dataset& d) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    dgp::write_csv(f, d);
}

// ---- JSON envelopes ------------------------------------------------------------------

inline nlohmann::json theta_json(const models::ThetaPoint& th) {
    nlohmann::json j;
    j["mu"] = th.mu;
    j["pi"] = th.pi;
    j["rho"] = th.rho;
    if (!th.f_extra.empty()) j["f_extra"] = th.f_extra;
    if (th.c_lo != 0.0 || th.c_hi != 0.0) {
        j["c_lo"] = th.c_lo;
        j["c_hi"] = th.c_hi;
    }
    return j;
}

inline nlohmann::json region_json(const identify::IdentifiedRegion& region) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["slack"] = region.slack;
    j["method"] = region.method == identify::Method::FullIndependence ? "full_independence"
                                                                      : "mean_independence";
    j["constraints"]["mts"] = region.constraints.mts;
    j["constraints"]["mtr"] = region.constraints.mtr;
    j["n_grid"] = region.grid.size();
    j["n_accepted"] = region.n_accepted();
    j["refuted"] = region.refuted();
    auto& pts = j["points"];
    pts = nlohmann::json::array();
    for (std::size_t g = 0; g < region.grid.size(); ++g) {
        nlohmann::json p = theta_json(region.grid[g]);
        p["accepted"] = static_cast<bool>(region.accepted[g]);
        p["max_violation"] = std::isfinite(region.max_violation[g])
                                 ? nlohmann::json(region.max_violation[g])
                                 : nlohmann::json("inf");
        pts.push_back(std::move(p));
    }
    return j;
}

inline void write_region_csv(std::ostream& os, const identify::IdentifiedRegion& region) {
    os << "index,accepted,max_violation,rho,mu,pi\n";
    for (std::size_t g = 0; g < region.grid.size(); ++g) {
        const auto& th = region.grid[g];
        os << g << ',' << int(region.accepted[g]) << ',';
        if (std::isfinite(region.max_violation[g]))
            os << region.max_violation[g];
        else
            os << "inf";
        os << ',' << th.rho << ',';
        for (std::size_t i = 0; i < th.mu.size(); ++i) os << (i ? ";" : "") << th.mu[i];
        os << ',';
        for (std::size_t i = 0; i < th.pi.size(); ++i) os << (i ? ";" : "") << th.pi[i];
        os << '\n';
    }
}

inline nlohmann::json bounds_json(const std::vector<identify::FunctionalBounds>& bounds,
                                  double slack) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["slack"] = slack;
    j["bounds"] = nlohmann::json::array();
    for (const auto& b : bounds)
        j["bounds"].push_back(
            {{"functional", b.functional_id}, {"lower", b.lower}, {"upper", b.upper}});
    return j;
}

inline void write_bounds_csv(std::ostream& os,
                             const std::vector<identify::FunctionalBounds>& bounds) {
    os << "functional,lower,upper\n";
    for (const auto& b : bounds)
        os << b.functional_id << ',' << b.lower << ',' << b.upper << '\n';
}

inline nlohmann::json ci_json(const infer::CiResult& ci, int grid_k, std::uint64_t seed) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["functional"] = ci.functional_id;
    j["alpha"] = ci.alpha;
    j["grid_k"] = grid_k;
    j["seed"] = seed;
    j["refuted"] = ci.empty;
    if (!ci.empty) {
        j["lower"] = ci.lower;
        j["upper"] = ci.upper;
    }
    j["phi_grid"] = ci.phi_grid;
    auto& trace = j["s_n"];
    trace = nlohmann::json::array();
    for (double s : ci.s_n)
        trace.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json("inf"));
    j["slice_empty"] = nlohmann::json::array();
    for (char c : ci.slice_empty) j["slice_empty"].push_back(static_cast<bool>(c));
    return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_json: cannot open " + path);
    f << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_json: cannot open " + path);
    return nlohmann::json::parse(f);
}

} // namespace svcf::io

#endif
