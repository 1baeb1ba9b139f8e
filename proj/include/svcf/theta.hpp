#ifndef SVCF_THETA_HPP
#define SVCF_THETA_HPP

#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "svcf/math.hpp"

namespace svcf::models {

enum class Kind {
    BinaryRoy,        // binary outcome, threshold selection on one instrument
    RandomCoef,       // binary treatment, instrument-specific selection shocks
    OrderedChoice,    // outcome in {0,3,6}, threshold selection
    DynamicTwoPeriod, // (Y1,D1,D2,Y2) with uniform-scale indices
    EntryGame,        // two players, strategic substitutes, continuous outcome
    Multinomial,      // J alternatives, selection as in RandomCoef
    CensoredSel,      // treatment censored at zero, continuous outcome
    IntervalTreatment,// treatment observed as an interval, continuous outcome
    SchoolMatch,      // handled by the dedicated school header
};

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::BinaryRoy: return "binary_roy";
        case Kind::RandomCoef: return "random_coef";
        case Kind::OrderedChoice: return "ordered_choice";
        case Kind::DynamicTwoPeriod: return "dynamic_two_period";
        case Kind::EntryGame: return "entry_game";
        case Kind::Multinomial: return "multinomial";
        case Kind::CensoredSel: return "censored_sel";
        case Kind::IntervalTreatment: return "interval_treatment";
        case Kind::SchoolMatch: return "school_match";
    }
    return "?";
}

// A parameter point that violates the family's own restrictions (selection
// probability outside [0,1], cutoffs out of order, ...).  Distinct from
// numeric errors: callers sweeping a grid treat it as "reject this point".
struct InfeasibleTheta : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ModelSpec {
    Kind kind = Kind::BinaryRoy;
    std::vector<double> support; // discrete outcome labels, low to high
    int n_z = 2;                 // instrument levels per selection node
    int n_x = 1;                 // covariate levels
    int J = 0;                   // multinomial alternatives
    bool continuous_outcome = false;
    // Observed-control variant: the scalar control is recorded in the data
    // and takes values in v_support, so every control set is a singleton.
    bool observed_control = false;
    std::vector<double> v_support;
    double p_s = 0.5; // tag weight in the equilibrium-selection draw

    int support_size() const { return static_cast<int>(support.size()); }

    int label_index(double y) const {
        for (std::size_t i = 0; i < support.size(); ++i)
            if (support[i] == y) return static_cast<int>(i);
        throw std::invalid_argument("ModelSpec: outcome value outside declared support");
    }
};

// Parameter layouts by kind
//
//   BinaryRoy / OrderedChoice:
//     mu = {mu0, mu1[, mu_x, mu_dx]}      mu(d,x) = mu0 + mu1 d + mu_x x + mu_dx d x
//     pi[z + n_z*x] in [0,1]
//   RandomCoef / Multinomial: pi as above with n_z = 2 (z indexes the shock)
//   Multinomial: mu[(j-1) + J*d], f_extra = {rho_1..rho_J}
//   DynamicTwoPeriod (n_x = 1, uniform-scale indices in [0,1]):
//     mu = {mu1(d1=0), mu1(1), mu2[y1 + 2 d1 + 4 d2] ...}   (2 + 8 entries)
//     pi = {pi1[z1] ..., pi2[y1 + 2 d1 + 4 z2] ...}          (n_z + 4 n_z entries)
//   EntryGame (n_x = 1):
//     pi[(j-1)*2*n_z + a*n_z + z] = pi_j(opponent action a, z_j)
//     mu[d1 + 2*d2] outcome level, f_extra = {rho_s} tag loading
//   CensoredSel / IntervalTreatment:
//     mu = {mu0, mu1}  mu(d) = mu0 + mu1 d,  pi = {pi*(z) ...} real-valued
struct ThetaPoint {
    std::vector<double> mu;
    std::vector<double> pi;
    double rho = 0.0;
    std::vector<double> f_extra;
    double c_lo = 0.0, c_hi = 0.0;

    std::uint64_t hash() const {
        std::uint64_t h = num::hash_doubles(mu, 0xcbf29ce484222325ull);
        h = num::hash_doubles(pi, h);
        h = num::hash_doubles({rho, c_lo, c_hi}, h);
        h = num::hash_doubles(f_extra, h);
        return h;
    }
};

// Conditioning cell: discrete treatment/outcome-history levels, a covariate
// level, instrument levels, and (observed-control variant only) the control
// level.  Continuous variables arrive here already binned.
struct Cell {
    std::vector<int> d;
    int x = 0;
    std::vector<int> z;
    int v = -1;

    auto tie() const { return std::tie(d, x, z, v); }
    bool operator==(const Cell& o) const { return tie() == o.tie(); }
    bool operator<(const Cell& o) const { return tie() < o.tie(); }

    std::string to_string() const {
        std::ostringstream os;
        os << "d=";
        for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
        os << ";x=" << x << ";z=";
        for (std::size_t i = 0; i < z.size(); ++i) os << (i ? "," : "") << z[i];
        if (v >= 0) os << ";v=" << v;
        return os.str();
    }

    std::uint64_t hash() const {
        std::vector<double> xs;
        for (int i : d) xs.push_back(i);
        xs.push_back(x);
        for (int i : z) xs.push_back(i);
        xs.push_back(v);
        return num::hash_doubles(xs, 0x9ae16a3b2f90404full);
    }
};

// ---- accessors -------------------------------------------------------------

inline double mu_scalar(const ThetaPoint& th, int d, int x) {
    if (th.mu.size() < 2) throw InfeasibleTheta("theta: mu needs at least {mu0, mu1}");
    double v = th.mu[0] + th.mu[1] * d;
    if (th.mu.size() > 2) v += th.mu[2] * x;
    if (th.mu.size() > 3) v += th.mu[3] * d * x;
    return v;
}

inline double pi_prob(const ModelSpec& spec, const ThetaPoint& th, int z, int x) {
    const std::size_t idx = static_cast<std::size_t>(z + spec.n_z * x);
    if (z < 0 || z >= spec.n_z || x < 0 || x >= spec.n_x || idx >= th.pi.size())
        throw std::invalid_argument("theta: pi index out of range");
    double p = th.pi[idx];
    if (!(p >= 0.0 && p <= 1.0)) throw InfeasibleTheta("theta: selection probability outside [0,1]");
    return p;
}

inline double rho_checked(const ThetaPoint& th) {
    if (!(th.rho > -1.0 && th.rho < 1.0)) throw InfeasibleTheta("theta: rho outside (-1,1)");
    return th.rho;
}

inline double sigma_of(const ThetaPoint& th) {
    double r = rho_checked(th);
    return std::sqrt(1.0 - r * r);
}

// location shift of the latent outcome error given controls, scaled so that
// independent uniform controls leave the error standard normal
inline double g_shift(const ThetaPoint& th, std::span<const double> v) {
    double r = rho_checked(th);
    if (r == 0.0) return 0.0;
    double s = 0.0;
    for (double vi : v) s += num::latent_quantile(vi);
    return r * s / std::sqrt(static_cast<double>(v.size()));
}

// multinomial
inline double mu_multi(const ModelSpec& spec, const ThetaPoint& th, int j, int d) {
    const std::size_t idx = static_cast<std::size_t>((j - 1) + spec.J * d);
    if (j < 1 || j > spec.J || idx >= th.mu.size())
        throw std::invalid_argument("theta: multinomial mu index out of range");
    return th.mu[idx];
}
inline double rho_multi(const ModelSpec& spec, const ThetaPoint& th, int j) {
    if (j < 1 || j > spec.J || th.f_extra.size() < static_cast<std::size_t>(spec.J))
        throw std::invalid_argument("theta: multinomial rho index out of range");
    double r = th.f_extra[j - 1];
    if (!(r > -1.0 && r < 1.0)) throw InfeasibleTheta("theta: alternative rho outside (-1,1)");
    return r;
}

// dynamic two-period
inline double unit_index(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0))
        throw InfeasibleTheta(std::string("theta: ") + what + " outside [0,1]");
    return p;
}
inline double dyn_mu1(const ThetaPoint& th, int d1) {
    if (th.mu.size() < 10) throw InfeasibleTheta("theta: dynamic mu needs 10 entries");
    return unit_index(th.mu[d1], "mu1");
}
inline double dyn_mu2(const ThetaPoint& th, int y1, int d1, int d2) {
    if (th.mu.size() < 10) throw InfeasibleTheta("theta: dynamic mu needs 10 entries");
    return unit_index(th.mu[2 + y1 + 2 * d1 + 4 * d2], "mu2");
}
inline double dyn_pi1(const ModelSpec& spec, const ThetaPoint& th, int z1) {
    if (th.pi.size() < static_cast<std::size_t>(5 * spec.n_z))
        throw InfeasibleTheta("theta: dynamic pi needs n_z + 4 n_z entries");
    return unit_index(th.pi[z1], "pi1");
}
inline double dyn_pi2(const ModelSpec& spec, const ThetaPoint& th, int y1, int d1, int z2) {
    if (th.pi.size() < static_cast<std::size_t>(5 * spec.n_z))
        throw InfeasibleTheta("theta: dynamic pi needs n_z + 4 n_z entries");
    return unit_index(th.pi[spec.n_z + y1 + 2 * d1 + 4 * z2], "pi2");
}

// entry game, players j in {1,2}, opponent action a
inline double entry_pi(const ModelSpec& spec, const ThetaPoint& th, int j, int a, int z) {
    const std::size_t idx = static_cast<std::size_t>((j - 1) * 2 * spec.n_z + a * spec.n_z + z);
    if (idx >= th.pi.size()) throw std::invalid_argument("theta: entry pi index out of range");
    return unit_index(th.pi[idx], "entry pi");
}
inline double entry_mu(const ThetaPoint& th, int d1, int d2) {
    if (th.mu.size() < 4) throw InfeasibleTheta("theta: entry mu needs 4 entries");
    return th.mu[d1 + 2 * d2];
}
inline double entry_tag_loading(const ThetaPoint& th) {
    return th.f_extra.empty() ? 0.0 : th.f_extra[0];
}

// censored / interval treatment
inline double pi_shift(const ModelSpec& spec, const ThetaPoint& th, int z) {
    if (z < 0 || z >= spec.n_z || static_cast<std::size_t>(z) >= th.pi.size())
        throw std::invalid_argument("theta: pi* index out of range");
    if (!std::isfinite(th.pi[z])) throw InfeasibleTheta("theta: pi* not finite");
    return th.pi[z];
}

inline void check_cutoffs(const ThetaPoint& th) {
    if (!(th.c_lo < th.c_hi)) throw InfeasibleTheta("theta: cutoffs must satisfy c_lo < c_hi");
}

} // namespace svcf::models

#endif
