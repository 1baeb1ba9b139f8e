#ifndef SVCF_CELLS_HPP
#define SVCF_CELLS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svcf/dgp.hpp"
#include "svcf/models.hpp"

namespace svcf::cells {

using models::Cell;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

// Column names for the observable schema.  d lists the discrete conditioning
// columns in cell order (for the dynamic kind that is the realized history
// (y1, d1, d2); for the interval kind it is the lower treatment edge).
struct Schema {
    std::string y;
    std::vector<std::string> d;
    std::vector<std::string> x;
    std::vector<std::string> z;
    std::string v; // observed-control index column, empty unless used
};

inline Schema default_schema(const ModelSpec& spec) {
    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice: {
            Schema s{"y", {"d"}, {"x"}, {"z"}, ""};
            if (spec.observed_control) s.v = "v_idx";
            return s;
        }
        case Kind::RandomCoef:
        case Kind::Multinomial: return {"y", {"d"}, {"x"}, {"z"}, ""};
        case Kind::DynamicTwoPeriod: return {"y2", {"y1", "d1", "d2"}, {}, {"z1", "z2"}, ""};
        case Kind::EntryGame: return {"y", {"d1", "d2"}, {}, {"z1", "z2"}, ""};
        case Kind::CensoredSel: return {"y", {"d"}, {}, {"z"}, ""};
        case Kind::IntervalTreatment: return {"y", {"d_lo"}, {}, {"z"}, ""};
        default: throw std::invalid_argument("default_schema: unsupported kind");
    }
}

struct Bin {
    enum class Mode { None, EqualWidth, Quantile } mode = Mode::None;
    int k = 4;
};

struct BinningOptions {
    std::map<std::string, Bin> by_column;
    int min_count = 30;
};

struct CellStats {
    Cell cell;
    long count = 0;
    std::vector<double> prob; // discrete outcome law over the support
    double y_mean = 0.0;
    double y_sd = 0.0;
    // continuous-treatment kinds keep the realized treatments: the latent
    // adjustment is a per-row function of theta and cannot be pre-aggregated
    std::vector<double> d_values;
    bool population = false;
    double weight = 0.0; // sample share, or exact probability for population cells

    double se() const { return population ? 0.0 : 0.5 / std::sqrt(static_cast<double>(count)); }

    double prob_of(std::uint32_t event_mask) const {
        double p = 0.0;
        for (std::size_t i = 0; i < prob.size(); ++i)
            if ((event_mask >> i) & 1u) p += prob[i];
        return p;
    }
};

struct BinEdges {
    std::string column;
    std::vector<double> cuts; // level = number of cuts <= value
};

struct CellTable {
    ModelSpec spec;
    std::vector<CellStats> cells;
    long n_used = 0;
    long n_dropped = 0;
    std::vector<std::string> warnings;
    std::vector<BinEdges> bins;

    double max_se() const {
        double m = 0.0;
        for (const auto& c : cells) m = std::max(m, c.se());
        return m;
    }
    const CellStats* find(const Cell& key) const {
        for (const auto& c : cells)
            if (c.cell == key) return &c;
        return nullptr;
    }
};

namespace detail {

inline int apply_cuts(double x, const std::vector<double>& cuts) {
    int lvl = 0;
    for (double c : cuts)
        if (x >= c) ++lvl;
    return lvl;
}

inline std::vector<double> make_cuts(const std::vector<double>& col, const Bin& b) {
    std::vector<double> cuts;
    if (b.k < 2) throw std::invalid_argument("binning: need at least 2 bins");
    if (b.mode == Bin::Mode::EqualWidth) {
        double lo = *std::min_element(col.begin(), col.end());
        double hi = *std::max_element(col.begin(), col.end());
        for (int j = 1; j < b.k; ++j) cuts.push_back(lo + (hi - lo) * j / b.k);
    } else {
        std::vector<double> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        for (int j = 1; j < b.k; ++j) {
            std::size_t idx = static_cast<std::size_t>(
                std::ceil(static_cast<double>(j) * sorted.size() / b.k));
            if (idx >= sorted.size()) idx = sorted.size() - 1;
            cuts.push_back(sorted[idx]);
        }
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
    return cuts;
}

inline int as_level(double x, const char* what) {
    double r = std::round(x);
    if (std::abs(x - r) > 1e-9 || r < 0.0 || r > 1e6)
        throw std::invalid_argument(std::string("estimate_cells: column ") + what +
                                    " is not a small nonnegative integer level; declare a binning");
    return static_cast<int>(r);
}

// conditioning treatments may be negative (interval lower edges)
inline int as_int(double x, const char* what) {
    double r = std::round(x);
    if (std::abs(x - r) > 1e-9 || std::abs(r) > 1e6)
        throw std::invalid_argument(std::string("estimate_cells: column ") + what +
                                    " is not integral");
    return static_cast<int>(r);
}

} // namespace detail

inline CellTable estimate_cells(const ModelSpec& spec, const dgp::Dataset& data,
                                const Schema& schema, const BinningOptions& opts = {}) {
    const std::size_t n = data.n();
    if (n == 0) throw std::invalid_argument("estimate_cells: empty data");
    const bool discrete_y = !spec.continuous_outcome;
    const bool keep_d = spec.kind == Kind::CensoredSel;

    CellTable out;
    out.spec = spec;

    // resolve and, where declared, bin the conditioning columns
    struct Col {
        const std::vector<double>* raw;
        std::vector<double> cuts;
        const char* name;
    };
    auto resolve = [&](const std::string& name) {
        Col c{&data.col(name), {}, name.c_str()};
        auto it = opts.by_column.find(name);
        if (it != opts.by_column.end() && it->second.mode != Bin::Mode::None) {
            c.cuts = detail::make_cuts(*c.raw, it->second);
            out.bins.push_back({name, c.cuts});
        }
        return c;
    };
    auto level = [](const Col& c, std::size_t i) {
        if (!c.cuts.empty()) return detail::apply_cuts((*c.raw)[i], c.cuts);
        return detail::as_level((*c.raw)[i], c.name);
    };
    auto d_level = [](const Col& c, std::size_t i) {
        if (!c.cuts.empty()) return detail::apply_cuts((*c.raw)[i], c.cuts);
        return detail::as_int((*c.raw)[i], c.name);
    };

    std::vector<Col> dcols, xcols, zcols;
    for (const auto& nm : schema.d) dcols.push_back(resolve(nm));
    for (const auto& nm : schema.x) xcols.push_back(resolve(nm));
    for (const auto& nm : schema.z) zcols.push_back(resolve(nm));
    const auto& ycol = data.col(schema.y);
    const std::vector<double>* vcol = schema.v.empty() ? nullptr : &data.col(schema.v);
    const std::vector<double>* draw =
        keep_d ? &data.col(schema.d.at(0)) : nullptr;

    struct Acc {
        long count = 0;
        std::vector<long> labels;
        double mean = 0.0, m2 = 0.0;
        std::vector<double> ds;
    };
    std::map<Cell, Acc> acc;

    for (std::size_t i = 0; i < n; ++i) {
        Cell cell;
        if (keep_d) {
            cell.d = {(*draw)[i] > 0.0 ? 1 : 0};
        } else {
            for (auto& c : dcols) cell.d.push_back(d_level(c, i));
        }
        int x_mixed = 0;
        for (std::size_t k = 0; k < xcols.size(); ++k)
            x_mixed = x_mixed * 1000 + level(xcols[k], i);
        cell.x = x_mixed;
        for (auto& c : zcols) cell.z.push_back(level(c, i));
        if (vcol) cell.v = detail::as_level((*vcol)[i], "v");

        auto& a = acc[cell];
        ++a.count;
        if (discrete_y) {
            if (a.labels.empty()) a.labels.assign(spec.support_size(), 0);
            ++a.labels[spec.label_index(ycol[i])];
        } else {
            double delta = ycol[i] - a.mean;
            a.mean += delta / a.count;
            a.m2 += delta * (ycol[i] - a.mean);
        }
        if (keep_d && cell.d[0] == 1) a.ds.push_back((*draw)[i]);
    }

    for (auto& [cell, a] : acc) {
        if (a.count < opts.min_count) {
            out.n_dropped += a.count;
            out.warnings.push_back("dropped cell " + cell.to_string() + " with " +
                                   std::to_string(a.count) + " rows (min_count " +
                                   std::to_string(opts.min_count) + ")");
            continue;
        }
        CellStats cs;
        cs.cell = cell;
        cs.count = a.count;
        if (discrete_y) {
            cs.prob.resize(a.labels.size());
            for (std::size_t k = 0; k < a.labels.size(); ++k)
                cs.prob[k] = static_cast<double>(a.labels[k]) / a.count;
        } else {
            cs.y_mean = a.mean;
            cs.y_sd = a.count > 1 ? std::sqrt(a.m2 / (a.count - 1)) : 0.0;
        }
        cs.d_values = std::move(a.ds);
        out.n_used += a.count;
        out.cells.push_back(std::move(cs));
    }
    if (out.cells.empty()) throw std::invalid_argument("estimate_cells: every cell fell below min_count");
    for (auto& cs : out.cells)
        cs.weight = static_cast<double>(cs.count) / static_cast<double>(out.n_used);
    return out;
}

// ---- propensity restriction ---------------------------------------------------

// One point-identified selection probability.  node is the selection equation
// index; levels are its conditioning values (documented per kind below).
struct PropensityRow {
    int node = 0;
    std::vector<int> levels;
    double p_hat = 0.0;
    long count = 0;
    bool degenerate = false; // no treatment variation in the cell
};

struct PropensityTable {
    Kind kind = Kind::BinaryRoy;
    bool applicable = false;
    std::vector<PropensityRow> rows;
};

// levels layout: single-selection kinds (z, x); dynamic node 0 (z1),
// node 1 (y1, d1, z2).  Simultaneous or continuous selection has no
// point-identified propensity and yields an inapplicable table.
inline PropensityTable propensity_table(const ModelSpec& spec, const dgp::Dataset& data,
                                        const Schema& schema) {
    PropensityTable out;
    out.kind = spec.kind;
    const std::size_t n = data.n();
    auto tally = [&](std::map<std::vector<int>, std::pair<long, long>>& m,
                     const std::vector<int>& key, bool hit) {
        auto& e = m[key];
        ++e.first;
        e.second += hit ? 1 : 0;
    };
    auto emit = [&](const std::map<std::vector<int>, std::pair<long, long>>& m, int node) {
        for (const auto& [key, cnt] : m) {
            PropensityRow r;
            r.node = node;
            r.levels = key;
            r.count = cnt.first;
            r.p_hat = static_cast<double>(cnt.second) / cnt.first;
            r.degenerate = cnt.second == 0 || cnt.second == cnt.first;
            out.rows.push_back(r);
        }
    };

    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice:
        case Kind::RandomCoef:
        case Kind::Multinomial: {
            out.applicable = true;
            const auto& d = data.col(schema.d.at(0));
            const auto& z = data.col(schema.z.at(0));
            const std::vector<double>* x =
                schema.x.empty() ? nullptr : &data.col(schema.x.at(0));
            std::map<std::vector<int>, std::pair<long, long>> m;
            for (std::size_t i = 0; i < n; ++i)
                tally(m,
                      {detail::as_level(z[i], "z"),
                       x ? detail::as_level((*x)[i], "x") : 0},
                      d[i] == 1.0);
            emit(m, 0);
            break;
        }
        case Kind::DynamicTwoPeriod: {
            out.applicable = true;
            const auto& y1 = data.col("y1");
            const auto& d1 = data.col("d1");
            const auto& d2 = data.col("d2");
            const auto& z1 = data.col("z1");
            const auto& z2 = data.col("z2");
            std::map<std::vector<int>, std::pair<long, long>> m1, m2;
            for (std::size_t i = 0; i < n; ++i) {
                tally(m1, {detail::as_level(z1[i], "z1")}, d1[i] == 1.0);
                tally(m2,
                      {detail::as_level(y1[i], "y1"), detail::as_level(d1[i], "d1"),
                       detail::as_level(z2[i], "z2")},
                      d2[i] == 1.0);
            }
            emit(m1, 0);
            emit(m2, 1);
            break;
        }
        default: break; // entry (simultaneous) and continuous selection: not applicable
    }
    return out;
}

// Worst absolute gap between theta's selection probabilities and the
// estimated propensities.  Inapplicable tables constrain nothing.
inline double pi_violation(const ModelSpec& spec, const ThetaPoint& th,
                           const PropensityTable& table) {
    if (!table.applicable) return 0.0;
    double worst = 0.0;
    for (const auto& r : table.rows) {
        double p;
        if (table.kind == Kind::DynamicTwoPeriod) {
            p = r.node == 0 ? models::dyn_pi1(spec, th, r.levels.at(0))
                            : models::dyn_pi2(spec, th, r.levels.at(0), r.levels.at(1),
                                              r.levels.at(2));
        } else {
            p = models::pi_prob(spec, th, r.levels.at(0), r.levels.at(1));
        }
        worst = std::max(worst, std::abs(p - r.p_hat));
    }
    return worst;
}

} // namespace svcf::cells

#endif
