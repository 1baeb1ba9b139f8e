#ifndef SVCF_ORACLES_HPP
#define SVCF_ORACLES_HPP

// Brute-force reference implementations kept alongside the library: seeded
// frequency oracles for the containment functional, exact population cells,
// a simplex-grid least-favorable-density search, and an exhaustive region
// mask on population cells.  Tests and acceptance checks compare the fast
// analytic paths against these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "svcf/cells.hpp"
#include "svcf/containment.hpp"
#include "svcf/models.hpp"

namespace svcf::oracles {

using models::Cell;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

namespace detail {

// aggregate values achieved on a dense grid of the cell's control set;
// the spread of this list is all that the location family's outcome map sees
inline std::vector<double> aggregate_grid(const ModelSpec& spec, const ThetaPoint& th,
                                          const Cell& cell, int res) {
    std::vector<double> hs;
    auto lq = [](double p) { return num::latent_quantile(p); };
    auto seg = [](double a, double b, int k) {
        std::vector<double> out(k);
        for (int i = 0; i < k; ++i) out[i] = a + (b - a) * i / (k - 1.0);
        return out;
    };
    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice: {
            if (spec.observed_control) {
                hs.push_back(lq(spec.v_support.at(cell.v)));
                break;
            }
            double p = models::pi_prob(spec, th, cell.z.at(0), cell.x);
            for (double v : cell.d.at(0) == 1 ? seg(0.0, p, res) : seg(p, 1.0, res))
                hs.push_back(lq(v));
            break;
        }
        case Kind::RandomCoef:
        case Kind::Multinomial: {
            int z = cell.z.at(0), d = cell.d.at(0);
            double p = models::pi_prob(spec, th, z, cell.x);
            auto bound = d == 1 ? seg(0.0, p, res) : seg(p, 1.0, res);
            auto free = seg(0.0, 1.0, res);
            for (double b : bound)
                for (double f : free) hs.push_back((lq(b) + lq(f)) / std::sqrt(2.0));
            break;
        }
        case Kind::DynamicTwoPeriod: {
            int y1 = cell.d.at(0), d1 = cell.d.at(1), d2 = cell.d.at(2);
            auto side = [&](int hit, double cut) {
                return hit == 1 ? seg(0.0, cut, res) : seg(cut, 1.0, res);
            };
            auto gu = side(y1, models::dyn_mu1(th, d1));
            auto g1 = side(d1, models::dyn_pi1(spec, th, cell.z.at(0)));
            auto g2 = side(d2, models::dyn_pi2(spec, th, y1, d1, cell.z.at(1)));
            for (double a : gu)
                for (double b : g1)
                    for (double c : g2)
                        hs.push_back((lq(a) + lq(b) + lq(c)) / std::sqrt(3.0));
            break;
        }
        default: throw std::invalid_argument("oracle_containment: unsupported kind");
    }
    std::sort(hs.begin(), hs.end());
    hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
    return hs;
}

} // namespace detail

struct OracleOptions {
    int eta_draws = 100000;
    int v_resolution = 0; // 0: 400 for <=2 latent dims, 60 for 3
    unsigned seed = 1;
};

// Containment by definition: frequency, over eta draws, of the event that the
// prediction set collected across the whole control-set grid sits inside A.
// The outcome map is a monotone step in the scalar aggregate for every kind
// here except the multinomial, so the grid union is read off the extreme
// aggregate values; the multinomial scans the full list per draw.
inline std::map<std::uint32_t, double> oracle_containment(
    const ModelSpec& spec, const ThetaPoint& th, const Cell& cell,
    const std::vector<contain::Event>& events, const OracleOptions& opt = {}) {
    int res = opt.v_resolution;
    if (res == 0) res = spec.kind == Kind::DynamicTwoPeriod ? 60 : 400;
    auto hs = detail::aggregate_grid(spec, th, cell, res);
    const double h_lo = hs.front(), h_hi = hs.back();
    const double sig = models::sigma_of(th);

    std::mt19937_64 gen(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::map<std::uint32_t, long> hits;
    for (const auto& e : events) hits[e.mask] = 0;

    auto tally = [&](std::uint32_t pred) {
        for (const auto& e : events)
            if ((pred & ~e.mask) == 0) ++hits[e.mask];
    };

    if (spec.kind == Kind::Multinomial) {
        std::vector<double> a(spec.J), s(spec.J);
        for (int i = 0; i < opt.eta_draws; ++i) {
            for (int j = 1; j <= spec.J; ++j) {
                double r = models::rho_multi(spec, th, j);
                a[j - 1] = models::mu_multi(spec, th, j, cell.d.at(0)) +
                           std::sqrt(1.0 - r * r) * num::latent_quantile(unif(gen));
                s[j - 1] = r;
            }
            // j is predicted iff some grid aggregate lands in its optimality
            // interval; the interval endpoints are the pairwise line crossings
            std::uint32_t pred = 0;
            for (int j = 0; j < spec.J; ++j) {
                double lo = hs.front(), hi = hs.back();
                bool dead = false;
                for (int k = 0; k < spec.J && !dead; ++k) {
                    if (k == j) continue;
                    double gap = a[k] - a[j], den = s[j] - s[k];
                    if (den == 0.0) {
                        dead = gap > 0.0;
                        continue;
                    }
                    double hx = gap / den;
                    if (den > 0.0) lo = std::max(lo, hx);
                    else hi = std::min(hi, hx);
                }
                if (dead || lo > hi) continue;
                auto it = std::lower_bound(hs.begin(), hs.end(), lo);
                if (it != hs.end() && *it <= hi) pred |= 1u << j;
            }
            tally(pred);
        }
    } else {
        for (int i = 0; i < opt.eta_draws; ++i) {
            double e = num::latent_quantile(unif(gen));
            auto outcome = [&](double h) -> int {
                switch (spec.kind) {
                    case Kind::BinaryRoy:
                    case Kind::RandomCoef: {
                        double mu = models::mu_scalar(th, cell.d.at(0), cell.x);
                        return mu >= th.rho * h + sig * e ? 1 : 0;
                    }
                    case Kind::OrderedChoice: {
                        double lat =
                            models::mu_scalar(th, cell.d.at(0), cell.x) + th.rho * h + sig * e;
                        return lat <= th.c_lo ? 0 : lat <= th.c_hi ? 1 : 2;
                    }
                    case Kind::DynamicTwoPeriod: {
                        double mu2 =
                            models::dyn_mu2(th, cell.d.at(0), cell.d.at(1), cell.d.at(2));
                        return mu2 >= num::normal_cdf(th.rho * h + sig * e) ? 1 : 0;
                    }
                    default: return 0;
                }
            };
            int ya = outcome(h_lo), yb = outcome(h_hi);
            if (ya > yb) std::swap(ya, yb);
            std::uint32_t pred = 0;
            for (int k = ya; k <= yb; ++k) pred |= 1u << k;
            tally(pred);
        }
    }

    std::map<std::uint32_t, double> out;
    for (const auto& e : events)
        out[e.mask] = static_cast<double>(hits[e.mask]) / opt.eta_draws;
    return out;
}

// ---- exact population cells ----------------------------------------------------

// Conditional outcome laws under the true parameter, by quadrature over the
// latent region each cell realizes.  Cells carry their exact probability as
// weight and zero sampling error.
inline cells::CellTable population_cells(const ModelSpec& spec, const ThetaPoint& th,
                                         const std::vector<double>& z_weights = {},
                                         int nodes = 32) {
    cells::CellTable out;
    out.spec = spec;
    const auto quad = num::gauss_legendre_unit(nodes);
    auto zw = [&](int z) {
        if (z_weights.empty()) return 1.0 / spec.n_z;
        double tot = 0.0;
        for (double w : z_weights) tot += w;
        return z_weights.at(z) / tot;
    };
    const double sig = models::sigma_of(th);

    auto push = [&out](const Cell& cell, double weight, std::vector<double> prob) {
        if (weight <= 0.0) return;
        cells::CellStats cs;
        cs.cell = cell;
        cs.population = true;
        cs.count = 0;
        cs.weight = weight;
        cs.prob = std::move(prob);
        out.cells.push_back(std::move(cs));
    };

    // level probabilities at a fixed aggregate value
    auto levels_at = [&](int d, int x, double g) {
        std::vector<double> p(spec.support_size());
        double mu = models::mu_scalar(th, d, x);
        if (spec.kind == Kind::OrderedChoice) {
            models::check_cutoffs(th);
            double p0 = num::normal_cdf((th.c_lo - mu - g) / sig);
            double p01 = num::normal_cdf((th.c_hi - mu - g) / sig);
            p[0] = p0;
            p[1] = p01 - p0;
            p[2] = 1.0 - p01;
        } else {
            double p1 = num::normal_cdf((mu - g) / sig);
            p[0] = 1.0 - p1;
            p[1] = p1;
        }
        return p;
    };

    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice: {
            for (int x = 0; x < spec.n_x; ++x)
                for (int z = 0; z < spec.n_z; ++z) {
                    double pz = zw(z) / spec.n_x;
                    double pi = models::pi_prob(spec, th, z, x);
                    if (spec.observed_control) {
                        for (std::size_t vi = 0; vi < spec.v_support.size(); ++vi) {
                            double v = spec.v_support[vi];
                            int d = pi >= v ? 1 : 0;
                            Cell cell{{d}, x, {z}, static_cast<int>(vi)};
                            double g = th.rho * num::latent_quantile(v);
                            push(cell, pz / spec.v_support.size(), levels_at(d, x, g));
                        }
                        continue;
                    }
                    for (int d : {0, 1}) {
                        double lo = d == 1 ? 0.0 : pi;
                        double hi = d == 1 ? pi : 1.0;
                        double len = hi - lo;
                        if (len <= 0.0) continue;
                        std::vector<double> prob(spec.support_size(), 0.0);
                        for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
                            double v = lo + len * quad.nodes[q];
                            auto p = levels_at(d, x, th.rho * num::latent_quantile(v));
                            for (std::size_t k = 0; k < prob.size(); ++k)
                                prob[k] += quad.weights[q] * p[k];
                        }
                        push(Cell{{d}, x, {z}, -1}, pz * len, std::move(prob));
                    }
                }
            break;
        }
        case Kind::RandomCoef: {
            for (int x = 0; x < spec.n_x; ++x)
                for (int z = 0; z < 2; ++z) {
                    double pz = zw(z) / spec.n_x;
                    double pi = models::pi_prob(spec, th, z, x);
                    for (int d : {0, 1}) {
                        double lo = d == 1 ? 0.0 : pi;
                        double hi = d == 1 ? pi : 1.0;
                        double len = hi - lo;
                        if (len <= 0.0) continue;
                        std::vector<double> prob(spec.support_size(), 0.0);
                        double mu = models::mu_scalar(th, d, x);
                        for (std::size_t qa = 0; qa < quad.nodes.size(); ++qa) {
                            double vb = lo + len * quad.nodes[qa]; // the z-indexed shock
                            for (std::size_t qb = 0; qb < quad.nodes.size(); ++qb) {
                                double vf = quad.nodes[qb];
                                double g = th.rho *
                                           (num::latent_quantile(vb) + num::latent_quantile(vf)) /
                                           std::sqrt(2.0);
                                double p1 = num::normal_cdf((mu - g) / sig);
                                double w = quad.weights[qa] * quad.weights[qb];
                                prob[0] += w * (1.0 - p1);
                                prob[1] += w * p1;
                            }
                        }
                        push(Cell{{d}, x, {z}, -1}, pz * len, std::move(prob));
                    }
                }
            break;
        }
        case Kind::DynamicTwoPeriod: {
            for (int z1 = 0; z1 < spec.n_z; ++z1)
                for (int z2 = 0; z2 < spec.n_z; ++z2)
                    for (int y1 : {0, 1})
                        for (int d1 : {0, 1})
                            for (int d2 : {0, 1}) {
                                double m1 = models::dyn_mu1(th, d1);
                                double p1 = models::dyn_pi1(spec, th, z1);
                                double p2 = models::dyn_pi2(spec, th, y1, d1, z2);
                                auto side = [](int hit, double cut) {
                                    return hit == 1 ? std::pair<double, double>{0.0, cut}
                                                    : std::pair<double, double>{cut, 1.0};
                                };
                                auto [ulo, uhi] = side(y1, m1);
                                auto [alo, ahi] = side(d1, p1);
                                auto [blo, bhi] = side(d2, p2);
                                double vol = (uhi - ulo) * (ahi - alo) * (bhi - blo);
                                if (vol <= 0.0) continue;
                                double mu2 = models::dyn_mu2(th, y1, d1, d2);
                                double index = num::latent_quantile(mu2);
                                double p_hit = 0.0;
                                auto lqv = [&](double lo, double hi, std::size_t q) {
                                    return num::latent_quantile(lo + (hi - lo) * quad.nodes[q]);
                                };
                                for (std::size_t qa = 0; qa < quad.nodes.size(); ++qa)
                                    for (std::size_t qb = 0; qb < quad.nodes.size(); ++qb)
                                        for (std::size_t qc = 0; qc < quad.nodes.size(); ++qc) {
                                            double h = (lqv(ulo, uhi, qa) + lqv(alo, ahi, qb) +
                                                        lqv(blo, bhi, qc)) /
                                                       std::sqrt(3.0);
                                            p_hit += quad.weights[qa] * quad.weights[qb] *
                                                     quad.weights[qc] *
                                                     num::normal_cdf((index - th.rho * h) / sig);
                                        }
                                Cell cell{{y1, d1, d2}, 0, {z1, z2}, -1};
                                push(cell, zw(z1) * zw(z2) * vol, {1.0 - p_hit, p_hit});
                            }
            break;
        }
        default: throw std::invalid_argument("population_cells: unsupported kind");
    }
    return out;
}

// ---- least-favorable density by simplex grid search ------------------------------

// Maximize sum_y p_alt(y) log q(y) over the probability simplex subject to
// q(A) >= containment(A) for every event; grid search with local refinement.
inline std::vector<double> oracle_lfp(const std::vector<contain::Event>& events,
                                      const std::map<std::uint32_t, double>& containment,
                                      const std::vector<double>& p_alt) {
    const int n = static_cast<int>(p_alt.size());
    if (n < 2 || n > 3) throw std::invalid_argument("oracle_lfp: |support| must be 2 or 3");

    auto feasible = [&](const std::vector<double>& q, double tol) {
        for (const auto& e : events) {
            double qa = 0.0;
            for (int i = 0; i < n; ++i)
                if (e.has(i)) qa += q[i];
            auto it = containment.find(e.mask);
            if (it != containment.end() && qa < it->second - tol) return false;
        }
        return true;
    };
    auto objective = [&](const std::vector<double>& q) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += p_alt[i] * std::log(std::max(q[i], 1e-300));
        return s;
    };

    double best_obj = -1e300;
    std::vector<double> best;
    auto consider = [&](std::vector<double> q) {
        for (double& qi : q) qi = std::max(qi, 0.0);
        if (!feasible(q, 1e-12)) return;
        double o = objective(q);
        if (o > best_obj) {
            best_obj = o;
            best = q;
        }
    };

    if (n == 2) {
        const int steps = 10000;
        for (int i = 0; i <= steps; ++i) {
            double q0 = static_cast<double>(i) / steps;
            consider({q0, 1.0 - q0});
        }
    } else {
        double span = 1.0, step = 2e-3;
        double b0 = 1.0 / 3, b1 = 1.0 / 3;
        for (int round = 0; round < 3; ++round) {
            double lo0 = std::max(0.0, b0 - span), hi0 = std::min(1.0, b0 + span);
            double lo1 = std::max(0.0, b1 - span), hi1 = std::min(1.0, b1 + span);
            for (double q0 = lo0; q0 <= hi0 + 1e-15; q0 += step)
                for (double q1 = lo1; q1 <= hi1 + 1e-15 && q0 + q1 <= 1.0 + 1e-15; q1 += step)
                    consider({q0, q1, 1.0 - q0 - q1});
            if (best.empty()) break;
            b0 = best[0];
            b1 = best[1];
            span = step * 2;
            step /= 20;
        }
    }
    if (best.empty())
        throw models::InfeasibleTheta("oracle_lfp: containment constraints are infeasible");
    return best;
}

// ---- exhaustive region mask on population cells ---------------------------------

// Accepted iff every Artstein inequality holds within tol on the exact cells
// and the selection probabilities match the truth within tol.
inline std::vector<char> oracle_region_small(const ModelSpec& spec,
                                             const std::vector<ThetaPoint>& grid,
                                             const cells::CellTable& pop,
                                             const ThetaPoint& truth, double tol = 1e-9) {
    auto events = contain::event_class(spec);
    std::vector<char> mask(grid.size(), 0);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const auto& th = grid[gi];
        bool ok = true;
        for (std::size_t i = 0; i < th.pi.size() && ok; ++i)
            if (std::abs(th.pi[i] - truth.pi.at(i)) > tol) ok = false;
        for (const auto& cs : pop.cells) {
            if (!ok) break;
            for (const auto& e : events) {
                double c;
                try {
                    c = contain::containment_value(spec, th, cs.cell, e);
                } catch (const models::InfeasibleTheta&) {
                    ok = false;
                    break;
                }
                if (c - cs.prob_of(e.mask) > tol) {
                    ok = false;
                    break;
                }
            }
        }
        mask[gi] = ok ? 1 : 0;
    }
    return mask;
}

} // namespace svcf::oracles

#endif
