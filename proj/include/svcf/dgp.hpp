#ifndef SVCF_DGP_HPP
#define SVCF_DGP_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svcf/models.hpp"

namespace svcf::dgp {

// Columns live in a deque so that references handed out by add() stay valid
// while further columns are appended.
struct Dataset {
    std::vector<std::string> names;
    std::deque<std::vector<double>> cols;

    std::size_t n() const { return cols.empty() ? 0 : cols[0].size(); }

    std::vector<double>& add(const std::string& name) {
        names.push_back(name);
        cols.emplace_back();
        return cols.back();
    }
    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
    const std::vector<double>& col(const std::string& name) const {
        int i = index_of(name);
        if (i < 0) throw std::invalid_argument("Dataset: no column named " + name);
        return cols[i];
    }
};

inline void write_csv(std::ostream& os, const Dataset& d) {
    for (std::size_t i = 0; i < d.names.size(); ++i) os << (i ? "," : "") << d.names[i];
    os << '\n';
    char buf[64];
    for (std::size_t r = 0; r < d.n(); ++r) {
        for (std::size_t c = 0; c < d.cols.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", d.cols[c][r]);
            os << (c ? "," : "") << buf;
        }
        os << '\n';
    }
}

struct SimConfig {
    models::ModelSpec spec;
    models::ThetaPoint theta;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::vector<double> z_weights; // per instrument level; empty = uniform
    std::vector<double> x_weights;
};

struct SimResult {
    Dataset data;    // observables
    Dataset latents; // true controls and shocks, never fed to estimation
};

namespace detail {

enum StreamTag : std::uint64_t {
    TagZ = 1, TagZ2, TagX, TagV1, TagV2, TagU1, TagEta, TagVs, TagVIdx
};

struct Streams {
    std::uint64_t seed;
    num::CounterRng of(StreamTag t) const { return num::CounterRng::keyed(seed, t); }
};

inline int categorical(double u, const std::vector<double>& w, int levels) {
    if (w.empty()) {
        int k = static_cast<int>(u * levels);
        return k >= levels ? levels - 1 : k;
    }
    if (static_cast<int>(w.size()) != levels)
        throw std::invalid_argument("simulate: weight vector does not match level count");
    double total = 0.0;
    for (double x : w) {
        if (x < 0.0) throw std::invalid_argument("simulate: negative level weight");
        total += x;
    }
    double acc = 0.0;
    for (int k = 0; k < levels; ++k) {
        acc += w[k] / total;
        if (u <= acc) return k;
    }
    return levels - 1;
}

// Additive-selection latents are snapped to a dyadic grid so that inverting
// the selection equation in doubles reproduces the stored latent exactly.
inline double dyadic(double x) { return std::round(x * 67108864.0) / 67108864.0; }

} // namespace detail

inline SimResult simulate(const SimConfig& cfg) {
    using namespace detail;
    using models::Kind;
    const auto& spec = cfg.spec;
    const auto& th = cfg.theta;
    Streams st{cfg.seed};
    auto rz = st.of(TagZ), rz2 = st.of(TagZ2), rx = st.of(TagX), rv1 = st.of(TagV1),
         rv2 = st.of(TagV2), ru1 = st.of(TagU1), re = st.of(TagEta), rvs = st.of(TagVs),
         rvi = st.of(TagVIdx);

    SimResult out;
    auto& d = out.data;
    auto& l = out.latents;

    switch (spec.kind) {
        case Kind::BinaryRoy:
        case Kind::OrderedChoice: {
            auto &cy = d.add("y"), &cd = d.add("d"), &cx = d.add("x"), &cz = d.add("z");
            std::vector<double>* cvidx = spec.observed_control ? &d.add("v_idx") : nullptr;
            auto &lu = l.add("u"), &leta = l.add("eta"), &lv = l.add("v");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                int x = categorical(rx.uniform(i), cfg.x_weights, spec.n_x);
                double v;
                if (spec.observed_control) {
                    int vi = categorical(rvi.uniform(i), {},
                                         static_cast<int>(spec.v_support.size()));
                    v = spec.v_support[vi];
                    cvidx->push_back(vi);
                } else {
                    v = rv1.uniform(i);
                }
                int dd = models::pi_prob(spec, th, z, x) >= v ? 1 : 0;
                double eta = re.uniform(i);
                double u = models::adjustment_q(th, eta, std::vector<double>{v});
                double index = models::mu_scalar(th, dd, x);
                double y;
                if (spec.kind == Kind::BinaryRoy) {
                    if (spec.continuous_outcome)
                        y = index + u;
                    else
                        y = index >= u ? 1.0 : 0.0;
                } else {
                    models::check_cutoffs(th);
                    double latent = index + u;
                    y = latent <= th.c_lo   ? spec.support.at(0)
                        : latent <= th.c_hi ? spec.support.at(1)
                                            : spec.support.at(2);
                }
                cy.push_back(y);
                cd.push_back(dd);
                cx.push_back(x);
                cz.push_back(z);
                lu.push_back(u);
                leta.push_back(eta);
                lv.push_back(v);
            }
            break;
        }
        case Kind::RandomCoef:
        case Kind::Multinomial: {
            auto &cy = d.add("y"), &cd = d.add("d"), &cx = d.add("x"), &cz = d.add("z");
            auto &lv0 = l.add("v0"), &lv1 = l.add("v1");
            std::vector<std::vector<double>*> letas;
            if (spec.kind == Kind::Multinomial)
                for (int j = 1; j <= spec.J; ++j) letas.push_back(&l.add("eta" + std::to_string(j)));
            else
                letas.push_back(&l.add("eta"));
            auto& lu = l.add("u");
            if (spec.n_z != 2)
                throw std::invalid_argument("simulate: pair-of-thresholds selection needs n_z = 2");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                int x = categorical(rx.uniform(i), cfg.x_weights, spec.n_x);
                double v0 = rv1.uniform(i), v1 = rv2.uniform(i);
                double vz = z == 0 ? v0 : v1;
                int dd = models::pi_prob(spec, th, z, x) >= vz ? 1 : 0;
                double h = (num::latent_quantile(v0) + num::latent_quantile(v1)) / std::sqrt(2.0);
                double y;
                if (spec.kind == Kind::Multinomial) {
                    int best = 1;
                    double best_u = -1e300;
                    for (int j = 1; j <= spec.J; ++j) {
                        double eta = re.uniform(i * spec.J + (j - 1));
                        letas[j - 1]->push_back(eta);
                        double r = models::rho_multi(spec, th, j);
                        double uj = models::mu_multi(spec, th, j, dd) + r * h +
                                    std::sqrt(1.0 - r * r) * num::latent_quantile(eta);
                        if (uj > best_u) { best_u = uj; best = j; }
                    }
                    y = best;
                    lu.push_back(best_u);
                } else {
                    double eta = re.uniform(i);
                    letas[0]->push_back(eta);
                    double u = th.rho * h + models::sigma_of(th) * num::latent_quantile(eta);
                    double index = models::mu_scalar(th, dd, x);
                    y = spec.continuous_outcome ? index + u : (index >= u ? 1.0 : 0.0);
                    lu.push_back(u);
                }
                cy.push_back(y);
                cd.push_back(dd);
                cx.push_back(x);
                cz.push_back(z);
                lv0.push_back(v0);
                lv1.push_back(v1);
            }
            break;
        }
        case Kind::DynamicTwoPeriod: {
            auto &cy1 = d.add("y1"), &cd1 = d.add("d1"), &cd2 = d.add("d2"), &cy2 = d.add("y2"),
                 &cz1 = d.add("z1"), &cz2 = d.add("z2");
            auto &lu1 = l.add("u1"), &lv1 = l.add("v1"), &lv2 = l.add("v2"),
                 &leta = l.add("eta"), &lu2 = l.add("u2");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z1 = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                int z2 = categorical(rz2.uniform(i), cfg.z_weights, spec.n_z);
                double v1 = rv1.uniform(i), u1 = ru1.uniform(i), v2 = rv2.uniform(i);
                int d1 = models::dyn_pi1(spec, th, z1) >= v1 ? 1 : 0;
                int y1 = models::dyn_mu1(th, d1) >= u1 ? 1 : 0;
                int d2 = models::dyn_pi2(spec, th, y1, d1, z2) >= v2 ? 1 : 0;
                double eta = re.uniform(i);
                double hh = (num::latent_quantile(u1) + num::latent_quantile(v1) +
                             num::latent_quantile(v2)) /
                            std::sqrt(3.0);
                double u2 = num::normal_cdf(th.rho * hh +
                                            models::sigma_of(th) * num::latent_quantile(eta));
                int y2 = models::dyn_mu2(th, y1, d1, d2) >= u2 ? 1 : 0;
                cy1.push_back(y1);
                cd1.push_back(d1);
                cd2.push_back(d2);
                cy2.push_back(y2);
                cz1.push_back(z1);
                cz2.push_back(z2);
                lu1.push_back(u1);
                lv1.push_back(v1);
                lv2.push_back(v2);
                leta.push_back(eta);
                lu2.push_back(u2);
            }
            break;
        }
        case Kind::EntryGame: {
            auto &cy = d.add("y"), &cd1 = d.add("d1"), &cd2 = d.add("d2"), &cz1 = d.add("z1"),
                 &cz2 = d.add("z2");
            auto &lv1 = l.add("v1"), &lv2 = l.add("v2"), &lvs = l.add("vs"), &leta = l.add("eta");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z1 = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                int z2 = categorical(rz2.uniform(i), cfg.z_weights, spec.n_z);
                double v1 = rv1.uniform(i), v2 = rv2.uniform(i);
                int vs = rvs.uniform(i) <= spec.p_s ? 1 : 0;
                auto t = models::entry_thresholds(spec, th, z1, z2);
                int d1 = 0, d2 = 0;
                switch (models::entry_classify(t, v1, v2)) {
                    case models::EntryRegion::Neither: d1 = 0; d2 = 0; break;
                    case models::EntryRegion::OnlyTwo: d1 = 0; d2 = 1; break;
                    case models::EntryRegion::OnlyOne: d1 = 1; d2 = 0; break;
                    case models::EntryRegion::Both: d1 = 1; d2 = 1; break;
                    case models::EntryRegion::Multiple:
                        d1 = vs;
                        d2 = 1 - vs;
                        break;
                }
                double eta = re.uniform(i);
                double lam = th.rho *
                                 (num::latent_quantile(v1) + num::latent_quantile(v2)) /
                                 std::sqrt(2.0) +
                             models::entry_tag_loading(th) * (vs - 0.5);
                double y = models::entry_mu(th, d1, d2) + lam +
                           models::sigma_of(th) * num::latent_quantile(eta);
                cy.push_back(y);
                cd1.push_back(d1);
                cd2.push_back(d2);
                cz1.push_back(z1);
                cz2.push_back(z2);
                lv1.push_back(v1);
                lv2.push_back(v2);
                lvs.push_back(vs);
                leta.push_back(eta);
            }
            break;
        }
        case Kind::CensoredSel: {
            auto &cy = d.add("y"), &cd = d.add("d"), &cz = d.add("z");
            auto &lv = l.add("v"), &leta = l.add("eta");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                double v = dyadic(num::normal_quantile(rv1.uniform(i)));
                double ps = models::pi_shift(spec, th, z);
                double dd = std::max(ps + v, 0.0);
                double eta = re.uniform(i);
                double lam = th.rho * (num::normal_cdf(v) - 0.5);
                double y = th.mu.at(0) + th.mu.at(1) * dd + lam +
                           models::sigma_of(th) * num::latent_quantile(eta);
                cy.push_back(y);
                cd.push_back(dd);
                cz.push_back(z);
                lv.push_back(v);
                leta.push_back(eta);
            }
            break;
        }
        case Kind::IntervalTreatment: {
            auto &cy = d.add("y"), &cdl = d.add("d_lo"), &cdh = d.add("d_hi"), &cz = d.add("z");
            auto &lds = l.add("dstar"), &lv = l.add("v"), &leta = l.add("eta");
            for (std::size_t i = 0; i < cfg.n; ++i) {
                int z = categorical(rz.uniform(i), cfg.z_weights, spec.n_z);
                double v = dyadic(num::normal_quantile(rv1.uniform(i)));
                double ps = models::pi_shift(spec, th, z);
                double dstar = ps + v;
                double dlo = std::floor(dstar), dhi = dlo + 1.0;
                double eta = re.uniform(i);
                double lam = th.rho * (num::normal_cdf(v) - 0.5);
                double y = th.mu.at(0) + th.mu.at(1) * dstar + lam +
                           models::sigma_of(th) * num::latent_quantile(eta);
                cy.push_back(y);
                cdl.push_back(dlo);
                cdh.push_back(dhi);
                cz.push_back(z);
                lds.push_back(dstar);
                lv.push_back(v);
                leta.push_back(eta);
            }
            break;
        }
        default:
            throw std::invalid_argument("simulate: kind handled elsewhere");
    }
    return out;
}

} // namespace svcf::dgp

#endif
