#ifndef SVCF_IDENTIFY_HPP
#define SVCF_IDENTIFY_HPP

// Identification layer: test one parameter point against the empirical cells
// (distributional Artstein inequalities or additive-mean Aumann inequalities,
// both joined with the propensity restriction), sweep a grid into an
// identified region, and turn an accepted region into bounds on causal
// functionals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "svcf/cells.hpp"
#include "svcf/containment.hpp"
#include "svcf/models.hpp"

namespace svcf::identify {

using models::Cell;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

struct CheckResult {
    bool pass = false;
    double max_violation = std::numeric_limits<double>::infinity();
    std::string worst; // cell/event behind the binding violation
};

struct CheckOptions {
    double slack = 0.0;
    long mc_draws = 20000; // multinomial containment draws
    unsigned seed = 1;
    double truncation = num::kLatentTail; // latent box for unbounded control sets
};

// ---- distributional restrictions ------------------------------------------------

// max over cells and proper events of containment(A|cell;theta) - Phat(A|cell),
// joined with the propensity gap so that pass <=> max_violation <= slack.
inline CheckResult artstein_check(const ModelSpec& spec, const ThetaPoint& th,
                                  const cells::CellTable& table,
                                  const cells::PropensityTable& prop,
                                  const CheckOptions& opt = {}) {
    if (spec.continuous_outcome)
        throw std::invalid_argument("artstein_check: needs a discrete outcome support");
    auto events = contain::event_class(spec);
    CheckResult out;
    out.max_violation = -std::numeric_limits<double>::infinity();
    if (prop.applicable && !prop.rows.empty()) {
        out.max_violation = cells::pi_violation(spec, th, prop);
        out.worst = "propensity";
    }
    for (const auto& cs : table.cells) {
        if (spec.kind == Kind::Multinomial) {
            auto mc = contain::mc_containment_table(spec, th, cs.cell, events, opt.mc_draws,
                                                    opt.seed);
            for (const auto& e : events) {
                double gap = mc[e.mask].value - cs.prob_of(e.mask);
                if (gap > out.max_violation) {
                    out.max_violation = gap;
                    out.worst = cs.cell.to_string() + " A=" + e.label(spec);
                }
            }
            continue;
        }
        for (const auto& e : events) {
            double gap = contain::containment_value(spec, th, cs.cell, e) - cs.prob_of(e.mask);
            if (gap > out.max_violation) {
                out.max_violation = gap;
                out.worst = cs.cell.to_string() + " A=" + e.label(spec);
            }
        }
    }
    out.pass = out.max_violation <= opt.slack;
    return out;
}

// ---- additive-mean restrictions -------------------------------------------------

struct MeanInterval {
    double lo = 0.0, hi = 0.0;
    bool truncated = false;
};

// Predicted interval for E[Y | cell] under theta, including the location part.
// Censored cells use the stored per-row treatments: the interior arm pins the
// control exactly, the censored arm leaves a half-line.
inline MeanInterval predicted_mean(const ModelSpec& spec, const ThetaPoint& th,
                                   const cells::CellStats& cs, double truncation) {
    switch (spec.kind) {
        case Kind::EntryGame: {
            const auto& c = cs.cell;
            auto cf = models::cf_entry_game(spec, th, c.d.at(0), c.d.at(1), c.z.at(0), c.z.at(1));
            auto mp = models::predict_additive_mean(
                spec, th, models::entry_mu(th, c.d.at(0), c.d.at(1)), cf, {}, truncation);
            return {mp.lo, mp.hi, mp.truncated};
        }
        case Kind::CensoredSel: {
            double ps = models::pi_shift(spec, th, cs.cell.z.at(0));
            double r = models::rho_checked(th);
            if (cs.cell.d.at(0) == 1) {
                if (cs.d_values.size() != static_cast<std::size_t>(cs.count))
                    throw std::invalid_argument(
                        "predicted_mean: censored cell lost its treatment values");
                double m = 0.0;
                for (double d : cs.d_values)
                    m += th.mu.at(0) + th.mu.at(1) * d + r * (num::normal_cdf(d - ps) - 0.5);
                m /= static_cast<double>(cs.d_values.size());
                return {m, m, false};
            }
            // censored arm: v <= -pi*, lambda bounded between its tail limit and the edge
            double edge = r * (num::normal_cdf(-ps) - 0.5);
            double tail = -0.5 * r;
            return {th.mu.at(0) + std::min(edge, tail), th.mu.at(0) + std::max(edge, tail),
                    false};
        }
        case Kind::IntervalTreatment: {
            double d_lo = cs.cell.d.at(0), d_hi = d_lo + 1.0;
            double ps = models::pi_shift(spec, th, cs.cell.z.at(0));
            auto sets = models::cf_interval_treatment(spec, th, d_lo, d_hi, cs.cell.z.at(0));
            double r = models::rho_checked(th);
            double m1 = th.mu.at(1);
            // mu1 d + lambda(v) with d = v + pi*; not monotone when the slopes fight
            models::LambdaHook f = [r, m1, ps](std::span<const double> v) {
                return m1 * (v[0] + ps) + r * (num::normal_cdf(v[0]) - 0.5);
            };
            auto mp = models::predict_additive_mean(spec, th, th.mu.at(0), sets.controls, f,
                                                    truncation);
            return {mp.lo, mp.hi, mp.truncated};
        }
        default: {
            if (!spec.continuous_outcome)
                throw std::invalid_argument("predicted_mean: outcome is not additive");
            auto cf = contain::control_set(spec, th, cs.cell);
            double mu = models::mu_scalar(th, cs.cell.d.at(0), cs.cell.x);
            auto mp = models::predict_additive_mean(spec, th, mu, cf, {}, truncation);
            return {mp.lo, mp.hi, mp.truncated};
        }
    }
}

// max over cells of max(E_lo - Ybar, Ybar - E_hi), joined with the propensity gap.
inline CheckResult aumann_check(const ModelSpec& spec, const ThetaPoint& th,
                                const cells::CellTable& table,
                                const cells::PropensityTable& prop,
                                const CheckOptions& opt = {}) {
    if (!spec.continuous_outcome)
        throw std::invalid_argument("aumann_check: needs an additive continuous outcome");
    CheckResult out;
    out.max_violation = -std::numeric_limits<double>::infinity();
    if (prop.applicable && !prop.rows.empty()) {
        out.max_violation = cells::pi_violation(spec, th, prop);
        out.worst = "propensity";
    }
    for (const auto& cs : table.cells) {
        auto m = predicted_mean(spec, th, cs, opt.truncation);
        double gap = std::max(m.lo - cs.y_mean, cs.y_mean - m.hi);
        if (gap > out.max_violation) {
            out.max_violation = gap;
            out.worst = cs.cell.to_string();
        }
    }
    out.pass = out.max_violation <= opt.slack;
    return out;
}

// ---- intersection bounds for the location parameter ------------------------------

struct BoundsInterval {
    double lo = 0.0, hi = 0.0;
    bool empty = false;
};

namespace detail {

// the location target the intersection bound brackets, per kind
inline double target_mu(const ModelSpec& spec, const ThetaPoint& th, const Cell& cell) {
    switch (spec.kind) {
        case Kind::EntryGame: return models::entry_mu(th, cell.d.at(0), cell.d.at(1));
        case Kind::CensoredSel:
        case Kind::IntervalTreatment: return th.mu.at(0);
        default: return models::mu_scalar(th, cell.d.at(0), cell.x);
    }
}

inline bool same_arm(const ModelSpec& spec, const Cell& a, const Cell& b) {
    if (spec.kind == Kind::EntryGame) return a.d == b.d;
    return a.d == b.d && a.x == b.x && a.v == b.v;
}

} // namespace detail

// Intersect [Ybar - lambda_U, Ybar - lambda_L] across the instrument cells that
// share the conditioning arm of `at`.  Empty output refutes (F, pi) jointly.
inline BoundsInterval intersection_bounds_mu(const ModelSpec& spec, const ThetaPoint& th,
                                             const Cell& at, const cells::CellTable& table,
                                             double truncation = num::kLatentTail) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    int matched = 0;
    for (const auto& cs : table.cells) {
        if (!detail::same_arm(spec, cs.cell, at)) continue;
        ++matched;
        auto m = predicted_mean(spec, th, cs, truncation);
        double t = detail::target_mu(spec, th, cs.cell);
        lo = std::max(lo, cs.y_mean - (m.hi - t));
        hi = std::min(hi, cs.y_mean - (m.lo - t));
    }
    if (matched == 0)
        throw std::invalid_argument("intersection_bounds_mu: no cells at the given arm");
    return {lo, hi, lo > hi};
}

// ---- region sweep ----------------------------------------------------------------

enum class Method { FullIndependence, MeanIndependence };

struct Constraints {
    bool mts = false; // monotone treatment selection: rho <= 0
    bool mtr = false; // monotone treatment response: mu1 >= 0
};

struct RegionOptions {
    Method method = Method::FullIndependence;
    double slack = -1.0; // negative: 2 * max cell SE
    Constraints constraints;
    int threads = 1;
    long mc_draws = 20000;
    unsigned seed = 1;
    double truncation = num::kLatentTail;
};

inline Method default_method(const ModelSpec& spec) {
    return spec.continuous_outcome ? Method::MeanIndependence : Method::FullIndependence;
}

struct IdentifiedRegion {
    std::vector<ThetaPoint> grid;
    std::vector<char> accepted;
    std::vector<double> max_violation;
    double slack = 0.0;
    Method method = Method::FullIndependence;
    Constraints constraints;

    long n_accepted() const { return std::count(accepted.begin(), accepted.end(), char(1)); }
    bool refuted() const { return n_accepted() == 0; }
};

// Constraint filtering happens before any testing; filtered points carry an
// infinite violation so the accepted <=> (violation <= slack) invariant holds.
inline IdentifiedRegion identified_region(const ModelSpec& spec,
                                          const std::vector<ThetaPoint>& grid,
                                          const cells::CellTable& table,
                                          const cells::PropensityTable& prop,
                                          const RegionOptions& opt = {}) {
    if (grid.empty()) throw std::invalid_argument("identified_region: empty grid");
    IdentifiedRegion out;
    out.grid = grid;
    out.method = opt.method;
    out.constraints = opt.constraints;
    out.slack = opt.slack >= 0.0 ? opt.slack : 2.0 * table.max_se();
    out.accepted.assign(grid.size(), 0);
    out.max_violation.assign(grid.size(), std::numeric_limits<double>::infinity());

    CheckOptions check{out.slack, opt.mc_draws, opt.seed, opt.truncation};
    auto eval = [&](std::size_t i) {
        const auto& th = out.grid[i];
        if (opt.constraints.mts && th.rho > 0.0) return;
        if (opt.constraints.mtr && th.mu.size() > 1 && th.mu[1] < 0.0) return;
        try {
            CheckResult r = opt.method == Method::FullIndependence
                                ? artstein_check(spec, th, table, prop, check)
                                : aumann_check(spec, th, table, prop, check);
            out.max_violation[i] = r.max_violation;
            out.accepted[i] = r.pass ? 1 : 0;
        } catch (const models::InfeasibleTheta&) {
            // stays rejected with infinite violation
        }
    };

    int threads = std::max(1, opt.threads);
    if (threads == 1 || grid.size() < 2) {
        for (std::size_t i = 0; i < grid.size(); ++i) eval(i);
    } else {
        // slot-per-point writes keep the result independent of the thread count
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = static_cast<std::size_t>(t); i < out.grid.size();
                     i += static_cast<std::size_t>(threads))
                    eval(i);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

// ---- theta grids -----------------------------------------------------------------

struct GridOptions {
    int n_mu = 21;
    int n_rho = 41;
    int n_cut = 7;        // per cutoff, ordered pairs only
    double mu_span = 3.0; // in units of the pooled outcome SD
    double rho_limit = 0.975;
};

namespace detail {

inline double pooled_outcome_sd(const ModelSpec& spec, const cells::CellTable& table) {
    double mean = 0.0, wsum = 0.0;
    std::vector<double> sup(spec.support.begin(), spec.support.end());
    auto cell_mean = [&](const cells::CellStats& cs) {
        if (spec.continuous_outcome) return cs.y_mean;
        double m = 0.0;
        for (std::size_t k = 0; k < cs.prob.size(); ++k) m += sup[k] * cs.prob[k];
        return m;
    };
    for (const auto& cs : table.cells) {
        mean += cs.weight * cell_mean(cs);
        wsum += cs.weight;
    }
    mean /= wsum;
    double var = 0.0;
    for (const auto& cs : table.cells) {
        if (spec.continuous_outcome) {
            double d = cs.y_mean - mean;
            var += cs.weight * (cs.y_sd * cs.y_sd + d * d);
        } else {
            for (std::size_t k = 0; k < cs.prob.size(); ++k) {
                double d = sup[k] - mean;
                var += cs.weight * cs.prob[k] * d * d;
            }
        }
    }
    var /= wsum;
    return std::sqrt(std::max(var, 1e-12));
}

} // namespace detail

// Product grid for the threshold-selection kinds: selection probabilities are
// pinned at their point-identified estimates, location coefficients sweep
// +-mu_span outcome SDs, the dependence parameter sweeps (-rho_limit, rho_limit),
// and ordered cutoffs sweep the location range keeping c_lo < c_hi.
inline std::vector<ThetaPoint> make_grid(const ModelSpec& spec, const cells::CellTable& table,
                                         const cells::PropensityTable& prop,
                                         const GridOptions& opt = {}) {
    if (spec.kind != Kind::BinaryRoy && spec.kind != Kind::OrderedChoice &&
        spec.kind != Kind::RandomCoef)
        throw std::invalid_argument("make_grid: only threshold-selection kinds have defaults");
    if (!prop.applicable || prop.rows.empty())
        throw std::invalid_argument("make_grid: needs an applicable propensity table");

    std::vector<double> pi(static_cast<std::size_t>(spec.n_z) * spec.n_x, 0.5);
    for (const auto& r : prop.rows)
        pi[static_cast<std::size_t>(r.levels.at(0)) +
           static_cast<std::size_t>(spec.n_z) * r.levels.at(1)] = r.p_hat;

    double sd = detail::pooled_outcome_sd(spec, table);
    auto mus = num::linspace(-opt.mu_span * sd, opt.mu_span * sd, opt.n_mu);
    auto rhos = num::linspace(-opt.rho_limit, opt.rho_limit, opt.n_rho);

    std::vector<ThetaPoint> grid;
    auto push = [&](double m0, double m1, double r, double clo, double chi) {
        ThetaPoint th;
        th.mu = {m0, m1};
        th.pi = pi;
        th.rho = r;
        th.c_lo = clo;
        th.c_hi = chi;
        grid.push_back(std::move(th));
    };
    if (spec.kind == Kind::OrderedChoice) {
        auto cuts = num::linspace(-opt.mu_span * sd, opt.mu_span * sd, opt.n_cut);
        for (double m0 : mus)
            for (double m1 : mus)
                for (double r : rhos)
                    for (std::size_t a = 0; a < cuts.size(); ++a)
                        for (std::size_t b = a + 1; b < cuts.size(); ++b)
                            push(m0, m1, r, cuts[a], cuts[b]);
    } else {
        for (double m0 : mus)
            for (double m1 : mus)
                for (double r : rhos) push(m0, m1, r, 0.0, 1.0);
    }
    return grid;
}

// ---- causal functionals over an accepted region ------------------------------------

struct Functional {
    enum class Type { ASF, DSF, QSF, PRSF, SWITCH } type = Type::ASF;
    int d = 1;        // ASF/DSF/QSF arm
    int x = -1;       // fixed covariate level, -1 averages over the empirical law
    double y = 0.0;   // DSF threshold
    double tau = 0.5; // QSF level
    int z = 0;        // PRSF policy instrument

    std::string id() const {
        switch (type) {
            case Type::ASF: return "ASF(d=" + std::to_string(d) + ")";
            case Type::DSF: return "DSF(y=" + std::to_string(y) + ",d=" + std::to_string(d) + ")";
            case Type::QSF:
                return "QSF(tau=" + std::to_string(tau) + ",d=" + std::to_string(d) + ")";
            case Type::PRSF: return "PRSF(z=" + std::to_string(z) + ")";
            case Type::SWITCH: return "SWITCH";
        }
        return "";
    }
};

struct FunctionalBounds {
    double lower = 0.0, upper = 0.0;
    std::string functional_id;
};

namespace detail {

// empirical covariate weights from the cell table
inline std::vector<double> x_weights(const ModelSpec& spec, const cells::CellTable& table) {
    std::vector<double> w(static_cast<std::size_t>(std::max(spec.n_x, 1)), 0.0);
    double tot = 0.0;
    for (const auto& cs : table.cells) {
        w.at(static_cast<std::size_t>(cs.cell.x)) += cs.weight;
        tot += cs.weight;
    }
    for (double& wi : w) wi /= tot;
    return w;
}

// E_eta[phi(outcome at (d, x, aggregate g))], the per-point structural integrand
// reduced to normal probabilities
struct LevelProbs {
    std::vector<double> p; // over the outcome support
};

inline LevelProbs levels_at(const ModelSpec& spec, const ThetaPoint& th, int d, int x, double g) {
    LevelProbs out;
    double s = models::sigma_of(th);
    double mu = models::mu_scalar(th, d, x);
    if (spec.kind == Kind::OrderedChoice) {
        models::check_cutoffs(th);
        double p0 = num::normal_cdf((th.c_lo - mu - g) / s);
        double p01 = num::normal_cdf((th.c_hi - mu - g) / s);
        out.p = {p0, p01 - p0, 1.0 - p01};
    } else {
        double p1 = num::normal_cdf((mu - g) / s);
        out.p = {1.0 - p1, p1};
    }
    return out;
}

// quadrature over the uniform controls; one axis per latent dimension
template <class F>
double v_integral(const ModelSpec& spec, const ThetaPoint& th, const F& f) {
    const auto& q = num::unit_quadrature64();
    if (spec.kind == Kind::RandomCoef) {
        double acc = 0.0;
        for (std::size_t a = 0; a < q.nodes.size(); ++a)
            for (std::size_t b = 0; b < q.nodes.size(); ++b) {
                double g = th.rho *
                           (num::latent_quantile(q.nodes[a]) + num::latent_quantile(q.nodes[b])) /
                           std::sqrt(2.0);
                acc += q.weights[a] * q.weights[b] * f(q.nodes[a], g);
            }
        return acc;
    }
    double acc = 0.0;
    for (std::size_t a = 0; a < q.nodes.size(); ++a) {
        double g = th.rho * num::latent_quantile(q.nodes[a]);
        acc += q.weights[a] * f(q.nodes[a], g);
    }
    return acc;
}

} // namespace detail

// Structural value of one functional at one parameter point.  Defined for the
// scalar-index outcome kinds where the control is normalized uniform, so the
// counterfactual law is a plain v-integral.
inline double kappa_value(const ModelSpec& spec, const ThetaPoint& th, const Functional& fn,
                          const std::vector<double>& x_weights) {
    if (spec.kind != Kind::BinaryRoy && spec.kind != Kind::OrderedChoice &&
        spec.kind != Kind::RandomCoef)
        throw std::invalid_argument("kappa_value: functional undefined for this kind");
    std::vector<double> sup(spec.support.begin(), spec.support.end());

    auto over_x = [&](auto&& per_x) {
        if (fn.x >= 0) return per_x(fn.x);
        double acc = 0.0;
        for (int x = 0; x < spec.n_x; ++x) acc += x_weights.at(x) * per_x(x);
        return acc;
    };

    switch (fn.type) {
        case Functional::Type::ASF:
            return over_x([&](int x) {
                return detail::v_integral(spec, th, [&](double, double g) {
                    auto lv = detail::levels_at(spec, th, fn.d, x, g);
                    double m = 0.0;
                    for (std::size_t k = 0; k < lv.p.size(); ++k) m += sup[k] * lv.p[k];
                    return m;
                });
            });
        case Functional::Type::DSF:
            return over_x([&](int x) {
                return detail::v_integral(spec, th, [&](double, double g) {
                    auto lv = detail::levels_at(spec, th, fn.d, x, g);
                    double acc = 0.0;
                    for (std::size_t k = 0; k < lv.p.size(); ++k)
                        if (sup[k] <= fn.y) acc += lv.p[k];
                    return acc;
                });
            });
        case Functional::Type::QSF: {
            if (!(fn.tau > 0.0 && fn.tau < 1.0))
                throw std::invalid_argument("kappa_value: QSF level outside (0,1)");
            for (double yk : sup) {
                Functional dsf = fn;
                dsf.type = Functional::Type::DSF;
                dsf.y = yk;
                if (kappa_value(spec, th, dsf, x_weights) >= fn.tau) return yk;
            }
            return sup.back();
        }
        case Functional::Type::PRSF:
            return over_x([&](int x) {
                double pi = models::pi_prob(spec, th, fn.z, x);
                return detail::v_integral(spec, th, [&](double v, double g) {
                    int d = pi >= v ? 1 : 0;
                    auto lv = detail::levels_at(spec, th, d, x, g);
                    double m = 0.0;
                    for (std::size_t k = 0; k < lv.p.size(); ++k) m += sup[k] * lv.p[k];
                    return m;
                });
            });
        case Functional::Type::SWITCH: {
            if (spec.support_size() != 2)
                throw std::invalid_argument("kappa_value: SWITCH needs a binary outcome");
            // share pushed across the threshold by the treatment arm; the clamp
            // sits inside the integral so opposite-signed regions cannot cancel
            return over_x([&](int x) {
                return detail::v_integral(spec, th, [&](double, double g) {
                    double h1 = detail::levels_at(spec, th, 1, x, g).p[1];
                    double h0 = detail::levels_at(spec, th, 0, x, g).p[1];
                    return std::max(h1 - h0, 0.0);
                });
            });
        }
    }
    throw std::logic_error("kappa_value: unhandled functional");
}

// min/max of the functional over the accepted region
inline FunctionalBounds kappa_bounds(const ModelSpec& spec, const IdentifiedRegion& region,
                                     const Functional& fn, const cells::CellTable& table) {
    if (region.refuted()) throw std::runtime_error("model refuted at given slack");
    auto xw = detail::x_weights(spec, table);
    FunctionalBounds out;
    out.functional_id = fn.id();
    out.lower = std::numeric_limits<double>::infinity();
    out.upper = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < region.grid.size(); ++i) {
        if (!region.accepted[i]) continue;
        double v = kappa_value(spec, region.grid[i], fn, xw);
        out.lower = std::min(out.lower, v);
        out.upper = std::max(out.upper, v);
    }
    return out;
}

} // namespace svcf::identify

#endif
