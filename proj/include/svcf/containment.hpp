#ifndef SVCF_CONTAINMENT_HPP
#define SVCF_CONTAINMENT_HPP

#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "svcf/models.hpp"

namespace svcf::contain {

using models::Cell;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

// Subset of the (ordered) outcome support as a bitmask over label indices.
struct Event {
    std::uint32_t mask = 0;
    int n = 0; // support size

    static Event from_indices(int support_size, std::initializer_list<int> idx) {
        Event e{0, support_size};
        for (int i : idx) e.mask |= (1u << i);
        return e;
    }
    static Event from_labels(const ModelSpec& spec, std::initializer_list<double> labels) {
        Event e{0, spec.support_size()};
        for (double y : labels) e.mask |= (1u << spec.label_index(y));
        return e;
    }

    bool has(int i) const { return (mask >> i) & 1u; }
    bool proper() const { return mask != 0 && mask != (1u << n) - 1u; }
    Event complement() const { return {~mask & ((1u << n) - 1u), n}; }
    bool subset_of(const Event& o) const { return (mask & ~o.mask) == 0; }
    int size() const { return __builtin_popcount(mask); }

    bool contains_label_set(const std::vector<int>& label_indices) const {
        for (int i : label_indices)
            if (!has(i)) return false;
        return true;
    }

    std::string label(const ModelSpec& spec) const {
        std::string s = "{";
        bool first = true;
        for (int i = 0; i < n; ++i)
            if (has(i)) {
                if (!first) s += ",";
                first = false;
                char buf[32];
                std::snprintf(buf, sizeof buf, "%g", spec.support[i]);
                s += buf;
            }
        return s + "}";
    }

    bool operator<(const Event& o) const { return mask < o.mask; }
    bool operator==(const Event& o) const { return mask == o.mask && n == o.n; }
};

// All nonempty proper subsets of the support.  For the three-level ordered
// kind the middle singleton and the outer pair add no information (their
// containments decompose additively), so prune drops them.
inline std::vector<Event> event_class(const ModelSpec& spec, bool prune = false) {
    const int n = spec.support_size();
    if (n < 2 || n > 8) throw std::invalid_argument("event_class: support size outside [2,8]");
    std::vector<Event> out;
    for (std::uint32_t m = 1; m + 1 < (1u << n); ++m) {
        Event e{m, n};
        if (prune && spec.kind == Kind::OrderedChoice && n == 3) {
            if (m == 0b010u || m == 0b101u) continue;
        }
        out.push_back(e);
    }
    return out;
}

// ---- control set for a conditioning cell -------------------------------------

inline models::SetExpr control_set(const ModelSpec& spec, const ThetaPoint& th, const Cell& cell) {
    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice:
            if (spec.observed_control) return models::cf_observed_control(spec, cell);
            return models::cf_binary_roy(spec, th, cell.d.at(0), cell.z.at(0), cell.x);
        case Kind::RandomCoef:
        case Kind::Multinomial:
            return models::cf_random_coef(spec, th, cell.d.at(0), cell.z.at(0), cell.x);
        case Kind::DynamicTwoPeriod:
            return models::cf_dynamic(spec, th, cell.d.at(0), cell.d.at(1), cell.d.at(2),
                                      cell.z.at(0), cell.z.at(1));
        case Kind::EntryGame:
            return models::cf_entry_game(spec, th, cell.d.at(0), cell.d.at(1), cell.z.at(0),
                                         cell.z.at(1));
        default:
            throw std::invalid_argument("control_set: kind has no cell-level control set");
    }
}

// ---- analytic containment -----------------------------------------------------

namespace detail {

inline double binary_containment(const models::BinaryPrediction& p, const Event& e) {
    // support ordered {0,1}: index 0 is the low outcome
    if (e.mask == 0b01u) return 1.0 - p.t_hi; // {0}
    if (e.mask == 0b10u) return p.t_lo;       // {1}
    throw std::invalid_argument("binary containment: event not a proper subset");
}

inline double ordered_containment(const models::OrderedThresholds& t, const Event& e) {
    switch (e.mask) {
        case 0b001u: return t.c0;                                   // {low}
        case 0b010u: return std::max(0.0, (1.0 - t.cs6) - t.cs0);   // {mid}
        case 0b100u: return t.c6;                                   // {high}
        case 0b011u: return 1.0 - t.cs6;                            // {low,mid}
        case 0b110u: return 1.0 - t.cs0;                            // {mid,high}
        case 0b101u: return t.c0 + t.c6;                            // {low,high}
        default: throw std::invalid_argument("ordered containment: bad event");
    }
}

} // namespace detail

// Exact containment for the kinds with closed forms.  Multinomial cells go
// through the Monte Carlo path below.
inline double containment_value(const ModelSpec& spec, const ThetaPoint& th, const Cell& cell,
                                const Event& e) {
    if (!e.proper()) throw std::invalid_argument("containment: event must be a proper subset");
    auto cf = control_set(spec, th, cell);
    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::RandomCoef: {
            auto p = models::predict_binary(spec, th, cell.d.at(0), cell.x, cf);
            return detail::binary_containment(p, e);
        }
        case Kind::OrderedChoice: {
            auto t = models::predict_ordered(spec, th, cell.d.at(0), cell.x, cf);
            return detail::ordered_containment(t, e);
        }
        case Kind::DynamicTwoPeriod: {
            double mu2 = models::dyn_mu2(th, cell.d.at(0), cell.d.at(1), cell.d.at(2));
            auto p = models::predict_dynamic_y2(th, mu2, cf);
            return detail::binary_containment(p, e);
        }
        default:
            throw std::invalid_argument("containment_value: kind needs the MC estimator");
    }
}

inline double capacity_value(const ModelSpec& spec, const ThetaPoint& th, const Cell& cell,
                             const Event& e) {
    return 1.0 - containment_value(spec, th, cell, e.complement());
}

// ---- Monte Carlo containment (multinomial) ------------------------------------

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
};

// One shared draw stream per (seed, cell, theta): every event is evaluated on
// the same eta draws, so subset monotonicity and the conjugacy identity hold
// exactly in the estimates.
inline std::map<std::uint32_t, McEstimate> mc_containment_table(
    const ModelSpec& spec, const ThetaPoint& th, const Cell& cell,
    const std::vector<Event>& events, int n_draws, std::uint64_t seed) {
    if (spec.kind != Kind::Multinomial)
        throw std::invalid_argument("mc_containment_table: only the multinomial kind");
    if (n_draws < 1) throw std::invalid_argument("mc_containment_table: n_draws < 1");
    auto cf = control_set(spec, th, cell);
    auto rng = num::CounterRng::keyed(num::mix_key(seed, cell.hash()), th.hash());

    std::map<std::uint32_t, long> hits;
    for (const auto& e : events) hits[e.mask] = 0;

    std::vector<double> eta(spec.J);
    for (int i = 0; i < n_draws; ++i) {
        for (int j = 0; j < spec.J; ++j)
            eta[j] = rng.uniform(static_cast<std::uint64_t>(i) * spec.J + j);
        auto labels = models::predict_multinomial(spec, th, eta, cell.d.at(0), cell.x, cf);
        std::uint32_t pred_mask = 0;
        for (int lab : labels) pred_mask |= 1u << (lab - 1); // support is {1..J}
        for (const auto& e : events)
            if ((pred_mask & ~e.mask) == 0) ++hits[e.mask];
    }

    std::map<std::uint32_t, McEstimate> out;
    for (const auto& e : events) {
        double p = static_cast<double>(hits[e.mask]) / n_draws;
        out[e.mask] = {p, std::sqrt(p * (1.0 - p) / n_draws)};
    }
    return out;
}

// ---- table ---------------------------------------------------------------------

struct TableRow {
    Cell cell;
    Event event;
    double containment = 0.0;
    double capacity = 0.0;
    bool has_se = false;
    double se = 0.0;
};

struct ContainmentOptions {
    int mc_draws = 20000;
    std::uint64_t seed = 1;
    bool prune = false;
};

inline std::vector<TableRow> containment_table(const ModelSpec& spec, const ThetaPoint& th,
                                               const std::vector<Cell>& cells,
                                               const ContainmentOptions& opt = {}) {
    auto events = event_class(spec, opt.prune);
    std::vector<TableRow> rows;
    rows.reserve(cells.size() * events.size());
    for (const auto& cell : cells) {
        if (spec.kind == Kind::Multinomial) {
            // capacity needs complements: estimate over the full class once
            auto all = event_class(spec, false);
            auto table = mc_containment_table(spec, th, cell, all, opt.mc_draws, opt.seed);
            for (const auto& e : events) {
                TableRow r{cell, e, table[e.mask].value,
                           1.0 - table[e.complement().mask].value, true, table[e.mask].se};
                rows.push_back(r);
            }
        } else {
            for (const auto& e : events) {
                TableRow r{cell, e, containment_value(spec, th, cell, e),
                           capacity_value(spec, th, cell, e), false, 0.0};
                rows.push_back(r);
            }
        }
    }
    return rows;
}

inline void write_table_csv(std::ostream& os, const ModelSpec& spec,
                            const std::vector<TableRow>& rows) {
    os << "cell,event,containment,capacity,se\n";
    char buf[64];
    for (const auto& r : rows) {
        os << '"' << r.cell.to_string() << "\",\"" << r.event.label(spec) << "\",";
        std::snprintf(buf, sizeof buf, "%.17g", r.containment);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.capacity);
        os << buf << ',';
        if (r.has_se) {
            std::snprintf(buf, sizeof buf, "%.17g", r.se);
            os << buf;
        }
        os << '\n';
    }
}

} // namespace svcf::contain

#endif
