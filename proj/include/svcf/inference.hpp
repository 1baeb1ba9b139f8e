#ifndef SVCF_INFERENCE_HPP
#define SVCF_INFERENCE_HPP

// Finite-sample confidence intervals for scalar functionals of theta by
// inverting a split-sample likelihood-ratio test.  The null likelihood uses a
// least-favorable density q_theta: the element of the Artstein-feasible
// probability set closest (in alternative-weighted log-likelihood) to a fixed
// alternative fitted on the other half of the sample.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "svcf/cells.hpp"
#include "svcf/containment.hpp"
#include "svcf/identify.hpp"

namespace svcf::infer {

using models::Cell;
using models::InfeasibleTheta;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

constexpr double kLogFloor = -690.77552789821368; // log(1e-300)

// ---- least-favorable-pair density ---------------------------------------------------

// For |support| <= 3 every Artstein constraint is a per-coordinate bound:
// singleton events give lower bounds l_y = C({y}), their complements give
// upper bounds u_y = 1 - C(Y\{y}).  Maximizing sum_y p_alt(y) log q(y) over
// that box intersected with the simplex is an exact water-filling problem:
// q_y(nu) = clamp(p_alt(y)/nu, l_y, u_y) with nu solving sum_y q_y(nu) = 1.
inline std::vector<double> lfp_solve(int n_support,
                                     const std::map<std::uint32_t, double>& containment,
                                     const std::vector<double>& p_alt) {
    if (n_support < 2 || n_support > 3)
        throw std::invalid_argument("lfp_solve: closed-form solver covers |support| in {2,3}");
    if (static_cast<int>(p_alt.size()) != n_support)
        throw std::invalid_argument("lfp_solve: alternative density has wrong length");
    double psum = 0.0;
    for (double p : p_alt) {
        if (p < 0.0) throw std::invalid_argument("lfp_solve: negative alternative mass");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-9)
        throw std::invalid_argument("lfp_solve: alternative density does not sum to 1");

    const std::uint32_t full = (1u << n_support) - 1u;
    std::vector<double> lo(n_support, 0.0), hi(n_support, 1.0);
    for (const auto& [mask, c] : containment) {
        if (mask == 0 || mask == full) continue;
        int bits = 0, last = 0;
        for (int y = 0; y < n_support; ++y)
            if ((mask >> y) & 1u) ++bits, last = y;
        if (bits == 1) {
            lo[last] = std::max(lo[last], c);
        } else if (bits == n_support - 1) {
            int y = 0;
            while ((mask >> y) & 1u) ++y;
            hi[y] = std::min(hi[y], 1.0 - c);
        } else {
            throw std::logic_error("lfp_solve: event is neither a singleton nor a co-singleton");
        }
    }

    const double tol = 1e-12;
    double lo_sum = 0.0, hi_sum = 0.0;
    for (int y = 0; y < n_support; ++y) {
        if (lo[y] > hi[y] + tol)
            throw InfeasibleTheta("lfp_solve: Artstein constraints are infeasible");
        lo_sum += lo[y];
        hi_sum += hi[y];
    }
    if (lo_sum > 1.0 + tol || hi_sum < 1.0 - tol)
        throw InfeasibleTheta("lfp_solve: Artstein constraints are infeasible");

    auto fill = [&](double nu) {
        std::vector<double> q(static_cast<std::size_t>(n_support));
        for (int y = 0; y < n_support; ++y)
            q[static_cast<std::size_t>(y)] = std::clamp(p_alt[static_cast<std::size_t>(y)] / nu,
                                                        lo[static_cast<std::size_t>(y)],
                                                        hi[static_cast<std::size_t>(y)]);
        return q;
    };
    auto mass = [&](double nu) {
        auto q = fill(nu);
        return std::accumulate(q.begin(), q.end(), 0.0);
    };

    // mass(nu) decreases from hi_sum to lo_sum; bracket the unit level
    double nu_lo = 1.0, nu_hi = 1.0;
    while (mass(nu_lo) < 1.0 && nu_lo > 1e-30) nu_lo /= 2.0;
    while (mass(nu_hi) > 1.0 && nu_hi < 1e30) nu_hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (nu_lo + nu_hi);
        if (mass(mid) >= 1.0)
            nu_lo = mid;
        else
            nu_hi = mid;
    }
    auto q = fill(0.5 * (nu_lo + nu_hi));
    double s = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& v : q) v /= s;
    return q;
}

inline std::vector<double> lfp_density(const ModelSpec& spec, const ThetaPoint& th,
                                       const Cell& cell, const std::vector<double>& p_alt) {
    if (spec.continuous_outcome)
        throw std::invalid_argument("lfp_density: needs a finite outcome support");
    std::map<std::uint32_t, double> con;
    for (const auto& e : contain::event_class(spec))
        con[e.mask] = contain::containment_value(spec, th, cell, e);
    return lfp_solve(spec.support_size(), con, p_alt);
}

// ---- sample splitting ----------------------------------------------------------------

struct SplitPlan {
    std::vector<std::size_t> s0, s1;
    std::uint64_t seed = 0;
};

inline SplitPlan make_split(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_split: need at least two observations");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    auto rng = num::CounterRng::keyed(seed, 77);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform(i) * (i + 1));
        if (j > i) j = i;
        std::swap(idx[i], idx[j]);
    }
    SplitPlan plan;
    plan.seed = seed;
    plan.s0.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n / 2));
    plan.s1.assign(idx.begin() + static_cast<std::ptrdiff_t>(n / 2), idx.end());
    std::sort(plan.s0.begin(), plan.s0.end());
    std::sort(plan.s1.begin(), plan.s1.end());
    return plan;
}

inline dgp::Dataset subset_rows(const dgp::Dataset& data, const std::vector<std::size_t>& rows) {
    dgp::Dataset out;
    for (std::size_t c = 0; c < data.names.size(); ++c) {
        auto& col = out.add(data.names[c]);
        col.reserve(rows.size());
        for (std::size_t i : rows) col.push_back(data.cols[c].at(i));
    }
    return out;
}

// ---- half-sample fits ----------------------------------------------------------------

// Criterion for the unrestricted estimator: worst-case squared positive-part
// Artstein violation accumulated over observations.
inline double minimum_distance_criterion(const ModelSpec& spec, const ThetaPoint& th,
                                         const cells::CellTable& table,
                                         const std::vector<contain::Event>& events) {
    double worst = 0.0;
    for (const auto& e : events) {
        double acc = 0.0;
        for (const auto& cs : table.cells) {
            double gap = contain::containment_value(spec, th, cs.cell, e) - cs.prob_of(e.mask);
            if (gap > 0.0) acc += static_cast<double>(cs.count) * gap * gap;
        }
        worst = std::max(worst, acc);
    }
    return worst;
}

struct UnrestrictedFit {
    std::size_t index = 0;
    double criterion = std::numeric_limits<double>::infinity();
};

inline UnrestrictedFit unrestricted_estimator(const ModelSpec& spec,
                                              const std::vector<ThetaPoint>& grid,
                                              const cells::CellTable& table) {
    if (grid.empty()) throw std::invalid_argument("unrestricted_estimator: empty grid");
    auto events = contain::event_class(spec);
    UnrestrictedFit best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double crit;
        try {
            crit = minimum_distance_criterion(spec, grid[g], table, events);
        } catch (const InfeasibleTheta&) {
            continue;
        }
        if (crit < best.criterion) {
            best.criterion = crit;
            best.index = g;
        }
    }
    if (!std::isfinite(best.criterion) && table.cells.empty())
        throw std::invalid_argument("unrestricted_estimator: no cells");
    if (!std::isfinite(best.criterion))
        throw std::runtime_error("unrestricted_estimator: every grid point is infeasible");
    return best;
}

// One direction of the cross-fit: the alternative density is fitted on the
// training half (the empirical law information-projected onto the feasible
// set of the training argmin), the likelihoods run over the evaluation half.
struct DirectionFit {
    cells::CellTable eval_table;                     // cells of the evaluation half
    std::vector<std::vector<double>> alternative;    // density per eval cell
    double numerator = 0.0;                          // log-likelihood of the alternative
    std::vector<double> loglik;                      // per grid theta, -inf if infeasible
};

namespace detail {

inline double table_loglik(const cells::CellTable& table,
                           const std::vector<std::vector<double>>& density) {
    double acc = 0.0;
    for (std::size_t c = 0; c < table.cells.size(); ++c) {
        const auto& cs = table.cells[c];
        for (std::size_t y = 0; y < cs.prob.size(); ++y) {
            if (cs.prob[y] == 0.0) continue;
            double logq = std::log(std::max(density[c][y], 1e-300));
            acc += static_cast<double>(cs.count) * cs.prob[y] * std::max(logq, kLogFloor);
        }
    }
    return acc;
}

} // namespace detail

struct CiOptions {
    double alpha = 0.05;
    int grid_k = 200;
    std::uint64_t seed = 1;
    int threads = 1;
    cells::BinningOptions binning{.by_column = {}, .min_count = 5};
};

inline DirectionFit fit_direction(const ModelSpec& spec, const std::vector<ThetaPoint>& grid,
                                  const cells::CellTable& train, const cells::CellTable& eval,
                                  int threads) {
    DirectionFit out;
    out.eval_table = eval;

    auto train_theta = grid[unrestricted_estimator(spec, grid, train).index];
    out.alternative.resize(eval.cells.size());
    for (std::size_t c = 0; c < eval.cells.size(); ++c) {
        const auto& cs = eval.cells[c];
        const auto* seen = train.find(cs.cell);
        // a cell absent from the training half gets a flat alternative: any
        // density fixed given the training half preserves validity
        std::vector<double> p_alt(cs.prob.size(), 1.0 / static_cast<double>(cs.prob.size()));
        if (seen != nullptr) {
            try {
                p_alt = lfp_density(spec, train_theta, cs.cell, seen->prob);
            } catch (const InfeasibleTheta&) {
                p_alt = seen->prob; // training argmin infeasible here: keep the raw law
            }
        }
        out.alternative[c] = std::move(p_alt);
    }
    out.numerator = detail::table_loglik(eval, out.alternative);

    out.loglik.assign(grid.size(), -std::numeric_limits<double>::infinity());
    int n_threads = std::max(1, threads);
    auto worker = [&](std::size_t start) {
        std::vector<std::vector<double>> q(eval.cells.size());
        for (std::size_t g = start; g < grid.size(); g += static_cast<std::size_t>(n_threads)) {
            bool ok = true;
            for (std::size_t c = 0; c < eval.cells.size() && ok; ++c) {
                try {
                    q[c] = lfp_density(spec, grid[g], eval.cells[c].cell, out.alternative[c]);
                } catch (const InfeasibleTheta&) {
                    ok = false;
                }
            }
            if (ok) out.loglik[g] = detail::table_loglik(eval, q);
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, static_cast<std::size_t>(t));
        for (auto& t : pool) t.join();
    }
    return out;
}

// Everything frozen before the phi* sweep: the split, both direction fits and
// the functional value of every grid point.
struct CiWorkspace {
    ModelSpec spec;
    std::vector<ThetaPoint> grid;
    SplitPlan plan;
    DirectionFit on0; // alternative trained on S1, likelihoods over S0
    DirectionFit on1; // swap
    std::vector<double> phi;
    double phi_tol = 0.0;
};

inline CiWorkspace build_workspace(const ModelSpec& spec, const dgp::Dataset& data,
                                   const std::vector<ThetaPoint>& grid,
                                   const identify::Functional& fn, const CiOptions& opt) {
    if (grid.empty()) throw std::invalid_argument("build_workspace: empty grid");
    CiWorkspace ws;
    ws.spec = spec;
    ws.grid = grid;
    ws.plan = make_split(data.n(), opt.seed);

    auto schema = cells::default_schema(spec);
    auto half0 = cells::estimate_cells(spec, subset_rows(data, ws.plan.s0), schema, opt.binning);
    auto half1 = cells::estimate_cells(spec, subset_rows(data, ws.plan.s1), schema, opt.binning);
    ws.on0 = fit_direction(spec, grid, half1, half0, opt.threads);
    ws.on1 = fit_direction(spec, grid, half0, half1, opt.threads);

    auto full = cells::estimate_cells(spec, data, schema, opt.binning);
    auto xw = identify::detail::x_weights(spec, full);
    ws.phi.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        ws.phi[g] = identify::kappa_value(spec, grid[g], fn, xw);
    return ws;
}

struct LrValue {
    double value = std::numeric_limits<double>::infinity();
    bool slice_empty = true;
};

// T_n at one phi*: numerator over the evaluation half at the trained
// alternative, denominator profiled over the grid slice |phi - phi*| <= tol.
inline LrValue t_n(const CiWorkspace& ws, const DirectionFit& dir, double phi_star) {
    double denom = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t g = 0; g < ws.grid.size(); ++g) {
        if (std::abs(ws.phi[g] - phi_star) > ws.phi_tol) continue;
        any = true;
        denom = std::max(denom, dir.loglik[g]);
    }
    LrValue out;
    if (!any || !std::isfinite(denom)) return out; // +inf statistic, flagged
    out.slice_empty = false;
    out.value = std::exp(dir.numerator - denom);
    return out;
}

inline LrValue s_n(const CiWorkspace& ws, double phi_star) {
    auto a = t_n(ws, ws.on0, phi_star);
    auto b = t_n(ws, ws.on1, phi_star);
    LrValue out;
    out.slice_empty = a.slice_empty || b.slice_empty;
    out.value = 0.5 * (a.value + b.value);
    return out;
}

struct CiResult {
    std::string functional_id;
    double alpha = 0.05;
    std::vector<double> phi_grid;
    std::vector<double> s_n;
    std::vector<char> slice_empty;
    double lower = 0.0, upper = 0.0;
    bool empty = true; // no phi* accepted: the model refutes every value
};

inline CiResult confidence_interval(const ModelSpec& spec, const dgp::Dataset& data,
                                    const std::vector<ThetaPoint>& grid,
                                    const identify::Functional& fn, const CiOptions& opt = {}) {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0))
        throw std::invalid_argument("confidence_interval: alpha must lie in (0,1)");
    if (opt.grid_k < 2) throw std::invalid_argument("confidence_interval: need at least 2 points");

    auto ws = build_workspace(spec, data, grid, fn, opt);
    double lo = *std::min_element(ws.phi.begin(), ws.phi.end());
    double hi = *std::max_element(ws.phi.begin(), ws.phi.end());

    CiResult out;
    out.functional_id = fn.id();
    out.alpha = opt.alpha;
    out.phi_grid = num::linspace(lo, hi, opt.grid_k);
    double spacing = opt.grid_k > 1 ? (hi - lo) / (opt.grid_k - 1) : 0.0;
    ws.phi_tol = std::max(0.5 * spacing, 1e-12);

    const double cutoff = 1.0 / opt.alpha;
    double best_lo = std::numeric_limits<double>::infinity();
    double best_hi = -std::numeric_limits<double>::infinity();
    for (double phi_star : out.phi_grid) {
        auto s = s_n(ws, phi_star);
        out.s_n.push_back(s.value);
        out.slice_empty.push_back(s.slice_empty ? 1 : 0);
        if (s.value <= cutoff) {
            best_lo = std::min(best_lo, phi_star);
            best_hi = std::max(best_hi, phi_star);
            out.empty = false;
        }
    }
    if (!out.empty) {
        out.lower = best_lo;
        out.upper = best_hi;
    }
    return out;
}

} // namespace svcf::infer

#endif
