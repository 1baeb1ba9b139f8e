#ifndef SVCF_MODELS_HPP
#define SVCF_MODELS_HPP

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "svcf/extremize.hpp"
#include "svcf/set_expr.hpp"
#include "svcf/theta.hpp"

namespace svcf::models {

using rset::Box;
using rset::HalfPlaneClip;
using rset::Interval;
using rset::Mode;
using rset::Sense;
using rset::SetExpr;
using rset::TaggedUnion;

// ---- control-set constructors ----------------------------------------------

// D = 1{pi(z,x) >= V}:  d=1 -> [0, pi],  d=0 -> [pi, 1].
inline SetExpr cf_binary_roy(const ModelSpec& spec, const ThetaPoint& th, int d, int z, int x) {
    double p = pi_prob(spec, th, z, x);
    return SetExpr(d == 1 ? Interval::closed(0.0, p) : Interval::closed(p, 1.0));
}

inline SetExpr cf_observed_control(const ModelSpec& spec, const Cell& cell) {
    if (cell.v < 0 || cell.v >= static_cast<int>(spec.v_support.size()))
        throw std::invalid_argument("cf_observed_control: cell has no control level");
    double v = spec.v_support[cell.v];
    return SetExpr(Interval::closed(v, v));
}

// D(z) = 1{pi(z,x) >= V_z}, z in {0,1}; the realized (d,z) pins the sign of
// z(pi(1,x)-v1) + (1-z)(pi(0,x)-v0).
inline SetExpr cf_random_coef(const ModelSpec& spec, const ThetaPoint& th, int d, int z, int x) {
    if (spec.n_z != 2) throw std::invalid_argument("cf_random_coef: needs a binary instrument");
    if (z != 0 && z != 1) throw std::invalid_argument("cf_random_coef: z outside {0,1}");
    double p0 = pi_prob(spec, th, 0, x);
    double p1 = pi_prob(spec, th, 1, x);
    double tilde = p0 + z * (p1 - p0);
    try {
        return SetExpr(HalfPlaneClip(Box::unit_square(), tilde, -(1.0 - z), -static_cast<double>(z),
                                     d == 1 ? Sense::Geq : Sense::Leq));
    } catch (const rset::EmptySetError& e) {
        throw InfeasibleTheta(e.what());
    }
}

// (U1, V1, V2) box for a realized path (y1, d1, d2) at instruments (z1, z2).
inline SetExpr cf_dynamic(const ModelSpec& spec, const ThetaPoint& th, int y1, int d1, int d2,
                          int z1, int z2) {
    double m1 = dyn_mu1(th, d1);
    double p1 = dyn_pi1(spec, th, z1);
    double p2 = dyn_pi2(spec, th, y1, d1, z2);
    auto side = [](int hit, double cut) {
        return hit == 1 ? Interval::closed(0.0, cut) : Interval::closed(cut, 1.0);
    };
    return SetExpr(Box({side(y1, m1), side(d1, p1), side(d2, p2)}));
}

// ---- entry game --------------------------------------------------------------

struct EntryThresholds {
    double a1, b1, a2, b2; // a = pi_j(1, z_j), b = pi_j(0, z_j); a <= b under substitutes
};

inline EntryThresholds entry_thresholds(const ModelSpec& spec, const ThetaPoint& th, int z1,
                                        int z2) {
    EntryThresholds t{entry_pi(spec, th, 1, 1, z1), entry_pi(spec, th, 1, 0, z1),
                      entry_pi(spec, th, 2, 1, z2), entry_pi(spec, th, 2, 0, z2)};
    if (t.a1 > t.b1 || t.a2 > t.b2)
        throw InfeasibleTheta("entry game: strategic substitutes require pi_j(1) <= pi_j(0)");
    return t;
}

enum class EntryRegion { Neither, OnlyTwo, OnlyOne, Both, Multiple };

// Closed boxes whose union is the region; interiors are disjoint across regions
// and the five regions tile the unit square.
struct EntryRegions {
    std::vector<Box> neither, only_two, only_one, both, multiple;

    const std::vector<Box>& of(EntryRegion r) const {
        switch (r) {
            case EntryRegion::Neither: return neither;
            case EntryRegion::OnlyTwo: return only_two;
            case EntryRegion::OnlyOne: return only_one;
            case EntryRegion::Both: return both;
            case EntryRegion::Multiple: return multiple;
        }
        throw std::logic_error("EntryRegions::of");
    }
};

inline EntryRegions entry_regions(const ModelSpec& spec, const ThetaPoint& th, int z1, int z2) {
    const auto t = entry_thresholds(spec, th, z1, z2);
    auto box = [](double x0, double x1, double y0, double y1) {
        return Box({Interval::closed(x0, x1), Interval::closed(y0, y1)});
    };
    EntryRegions r;
    r.both = {box(0, t.a1, 0, t.a2)};
    r.neither = {box(t.b1, 1, t.b2, 1)};
    r.only_two = {box(t.a1, t.b1, 0, t.a2), box(t.b1, 1, 0, t.b2)};
    r.only_one = {box(0, t.a1, t.a2, 1), box(t.a1, t.b1, t.b2, 1)};
    r.multiple = {box(t.a1, t.b1, t.a2, t.b2)};
    return r;
}

// Exact half-open classification; used by the simulator so that the five
// regions partition the square with no boundary double counting.
inline EntryRegion entry_classify(const EntryThresholds& t, double v1, double v2) {
    if (v1 <= t.a1) return v2 <= t.a2 ? EntryRegion::Both : EntryRegion::OnlyOne;
    if (v1 <= t.b1) {
        if (v2 <= t.a2) return EntryRegion::OnlyTwo;
        if (v2 <= t.b2) return EntryRegion::Multiple;
        return EntryRegion::OnlyOne;
    }
    return v2 <= t.b2 ? EntryRegion::OnlyTwo : EntryRegion::Neither;
}

// (V1, V2, Vs) union for an observed action profile.  The tag is the
// equilibrium-selection label: in the multiplicity square, vs = 1 plays (1,0)
// and vs = 0 plays (0,1); elsewhere vs is unrestricted.
inline SetExpr cf_entry_game(const ModelSpec& spec, const ThetaPoint& th, int d1, int d2, int z1,
                             int z2) {
    const auto reg = entry_regions(spec, th, z1, z2);
    std::vector<SetExpr> parts;
    std::vector<int> tags;
    auto add = [&](const std::vector<Box>& boxes, std::initializer_list<int> ts) {
        for (const auto& b : boxes)
            for (int tag : ts) {
                parts.emplace_back(b);
                tags.push_back(tag);
            }
    };
    if (d1 == 0 && d2 == 0) {
        add(reg.neither, {0, 1});
    } else if (d1 == 0 && d2 == 1) {
        add(reg.only_two, {0, 1});
        add(reg.multiple, {0});
    } else if (d1 == 1 && d2 == 0) {
        add(reg.only_one, {0, 1});
        add(reg.multiple, {1});
    } else {
        add(reg.both, {0, 1});
    }
    return SetExpr(TaggedUnion(std::move(parts), std::move(tags), {0, 1}));
}

// ---- censored and interval-valued treatments ---------------------------------

// D = max(pi*(z,x) + V, 0):  observed d > 0 inverts to V = d - pi*; at the
// corner only V <= -pi* is learned.
inline SetExpr cf_censored(const ModelSpec& spec, const ThetaPoint& th, double d, int z) {
    double ps = pi_shift(spec, th, z);
    if (d < 0.0) throw std::invalid_argument("cf_censored: d < 0");
    if (d > 0.0) return SetExpr(Interval::closed(d - ps, d - ps));
    return SetExpr(Interval::at_most(-ps));
}

struct IntervalTreatmentSets {
    SetExpr controls;   // D^l - pi* <= V <= D^u - pi*
    SetExpr treatments; // [D^l, D^u]
};

inline IntervalTreatmentSets cf_interval_treatment(const ModelSpec& spec, const ThetaPoint& th,
                                                   double d_lo, double d_hi, int z) {
    if (d_lo > d_hi) throw std::invalid_argument("cf_interval_treatment: d_lo > d_hi");
    double ps = pi_shift(spec, th, z);
    return {SetExpr(Interval::closed(d_lo - ps, d_hi - ps)),
            SetExpr(Interval::closed(d_lo, d_hi))};
}

// ---- latent adjustment and predictions ---------------------------------------

// U = g(v) + sigma * Phi^{-1}(eta); standard normal marginal when the controls
// are independent uniforms.
inline double adjustment_q(const ThetaPoint& th, double eta, std::span<const double> v) {
    return g_shift(th, v) + sigma_of(th) * num::latent_quantile(eta);
}

inline std::vector<rset::Hint> monotone_hints(const ThetaPoint& th, int dim) {
    rset::Hint h = th.rho > 0.0   ? rset::Hint::Increasing
                   : th.rho < 0.0 ? rset::Hint::Decreasing
                                  : rset::Hint::None;
    // rho = 0: g is constant, any endpoint is exact, Increasing keeps the
    // vertex path instead of the dense grid.
    if (th.rho == 0.0) h = rset::Hint::Increasing;
    return std::vector<rset::Hint>(static_cast<std::size_t>(dim), h);
}

inline std::pair<double, double> g_range(const ThetaPoint& th, const SetExpr& cf) {
    auto f = [&th](std::span<const double> v) { return g_shift(th, v); };
    rset::ExtremizeOptions opt{.hints = monotone_hints(th, cf.dim())};
    return {rset::extremize(cf, f, Mode::Inf, opt), rset::extremize(cf, f, Mode::Sup, opt)};
}

// P(U <= index | v) for the location family.
inline double h_index(const ThetaPoint& th, double index, std::span<const double> v) {
    return num::normal_cdf((index - g_shift(th, v)) / sigma_of(th));
}

struct BinaryPrediction {
    double t_lo, t_hi; // inf/sup over the control set of H(d,x,v)

    std::vector<int> at(double eta) const {
        if (eta <= t_lo) return {1};
        if (eta > t_hi) return {0};
        return {0, 1};
    }
};

// Threshold pair for a binary threshold-crossing outcome with real-scale
// index mu(d,x).
inline BinaryPrediction predict_binary(const ModelSpec& spec, const ThetaPoint& th, int d, int x,
                                       const SetExpr& cf) {
    double index = mu_scalar(th, d, x);
    auto [glo, ghi] = g_range(th, cf);
    double s = sigma_of(th);
    (void)spec;
    return {num::normal_cdf((index - ghi) / s), num::normal_cdf((index - glo) / s)};
}

// Same on the uniform scale of the dynamic model (indices are probabilities).
inline BinaryPrediction predict_dynamic_y2(const ThetaPoint& th, double mu2, const SetExpr& cf) {
    double index = num::latent_quantile(mu2);
    auto [glo, ghi] = g_range(th, cf);
    double s = sigma_of(th);
    return {num::normal_cdf((index - ghi) / s), num::normal_cdf((index - glo) / s)};
}

struct OrderedThresholds {
    double c0;  // containment of {low}
    double c6;  // containment of {high}
    double cs0; // capacity of {low}
    double cs6; // capacity of {high}
};

inline OrderedThresholds predict_ordered(const ModelSpec& spec, const ThetaPoint& th, int d, int x,
                                         const SetExpr& cf) {
    check_cutoffs(th);
    double mu = mu_scalar(th, d, x);
    auto [glo, ghi] = g_range(th, cf);
    double s = sigma_of(th);
    auto F = [s](double t) { return num::normal_cdf(t / s); };
    (void)spec;
    return {F(th.c_lo - mu - ghi), 1.0 - F(th.c_hi - mu - glo), F(th.c_lo - mu - glo),
            1.0 - F(th.c_hi - mu - ghi)};
}

// Alternatives whose optimality region over the control set is nonempty.
// Utilities are mu_j + rho_j h(v) + sigma_j Phi^{-1}(eta_j); every alternative
// loads on the same scalar aggregate h(v), so the inner minimization is over
// the achievable range of h and the envelope is piecewise linear in h.
inline std::vector<int> predict_multinomial(const ModelSpec& spec, const ThetaPoint& th,
                                            std::span<const double> eta, int d, int x,
                                            const SetExpr& cf) {
    if (spec.J < 2) throw std::invalid_argument("predict_multinomial: needs J >= 2");
    if (static_cast<int>(eta.size()) != spec.J)
        throw std::invalid_argument("predict_multinomial: eta size != J");
    (void)x;
    const int dim = cf.dim();
    auto h_of = [](std::span<const double> v) {
        double s = 0.0;
        for (double vi : v) s += num::latent_quantile(vi);
        return s / std::sqrt(static_cast<double>(v.size()));
    };
    rset::ExtremizeOptions opt{
        .hints = std::vector<rset::Hint>(static_cast<std::size_t>(dim), rset::Hint::Increasing)};
    double h_lo = rset::extremize(cf, h_of, Mode::Inf, opt);
    double h_hi = rset::extremize(cf, h_of, Mode::Sup, opt);

    std::vector<double> a(spec.J), slope(spec.J);
    for (int j = 1; j <= spec.J; ++j) {
        double r = rho_multi(spec, th, j);
        a[j - 1] = mu_multi(spec, th, j, d) +
                   std::sqrt(1.0 - r * r) * num::latent_quantile(eta[j - 1]);
        slope[j - 1] = r;
    }

    std::vector<int> out;
    for (int j = 0; j < spec.J; ++j) {
        // phi(h) = max_{k != j} (a_k + s_k h) - (a_j + s_j h), convex piecewise
        // linear; its minimum over [h_lo, h_hi] sits at an endpoint or at a
        // crossing of two active lines.
        auto phi = [&](double h) {
            double m = -1e300;
            for (int k = 0; k < spec.J; ++k)
                if (k != j) m = std::max(m, a[k] + slope[k] * h);
            return m - (a[j] + slope[j] * h);
        };
        double best = std::min(phi(h_lo), phi(h_hi));
        for (int k = 0; k < spec.J && best > 0.0; ++k)
            for (int l = k + 1; l < spec.J; ++l) {
                if (slope[k] == slope[l]) continue;
                double hx = (a[l] - a[k]) / (slope[k] - slope[l]);
                if (hx > h_lo && hx < h_hi) best = std::min(best, phi(hx));
            }
        if (best <= 0.0) out.push_back(j + 1);
    }
    return out;
}

// ---- additive-mean prediction --------------------------------------------

using LambdaHook = std::function<double(std::span<const double>)>;

// E[U_d | X, V=v] defaults per kind; a caller-supplied hook overrides.
inline LambdaHook default_lambda(const ModelSpec& spec, const ThetaPoint& th) {
    switch (spec.kind) {
        case Kind::CensoredSel:
        case Kind::IntervalTreatment: {
            double r = rho_checked(th);
            // bounded monotone; limits -r/2 and +r/2 at the tails
            return [r](std::span<const double> v) {
                return r * (num::normal_cdf(v[0]) - 0.5);
            };
        }
        case Kind::EntryGame: {
            double r = rho_checked(th);
            double rs = entry_tag_loading(th);
            return [r, rs](std::span<const double> v) {
                return r * (num::latent_quantile(v[0]) + num::latent_quantile(v[1])) /
                           std::sqrt(2.0) +
                       rs * (v[2] - 0.5);
            };
        }
        default: {
            ThetaPoint copy = th;
            return [copy](std::span<const double> v) { return g_shift(copy, v); };
        }
    }
}

struct MeanPrediction {
    double lo, hi;   // mu + inf lambda, mu + sup lambda
    bool truncated = false;
};

inline MeanPrediction predict_additive_mean(const ModelSpec& spec, const ThetaPoint& th, double mu,
                                            const SetExpr& cf, const LambdaHook& hook = {},
                                            std::optional<double> truncation = std::nullopt) {
    LambdaHook lam = hook ? hook : default_lambda(spec, th);
    std::vector<rset::Hint> hints;
    if (!hook) {
        // every built-in lambda is monotone in each control coordinate
        rset::Hint h = th.rho > 0.0   ? rset::Hint::Increasing
                       : th.rho < 0.0 ? rset::Hint::Decreasing
                                      : rset::Hint::Increasing;
        hints.assign(static_cast<std::size_t>(cf.dim()), h);
        if (spec.kind == Kind::EntryGame) hints.back() = rset::Hint::None; // tag coordinate
    }
    rset::ExtremizeOptions opt{.hints = hints, .truncation = truncation};
    auto lo = rset::extremize_ex(cf, lam, Mode::Inf, opt);
    auto hi = rset::extremize_ex(cf, lam, Mode::Sup, opt);
    return {mu + lo.value, mu + hi.value, lo.truncated || hi.truncated};
}

} // namespace svcf::models

#endif
