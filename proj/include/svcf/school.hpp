#ifndef SVCF_SCHOOL_HPP
#define SVCF_SCHOOL_HPP

// School assignment under capacity constraints: students report a partial
// order of their true preferences, the mechanism matches them to the best
// feasible reported option, and the econometrician recovers a finite set of
// local preferences containing the truth.  Bounds on the cutoff contrast
// follow from one-sided limits of the outcome mean.

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "svcf/dgp.hpp"
#include "svcf/identify.hpp"
#include "svcf/set_expr.hpp"

namespace svcf::school {

// Preference orders are permutations of {0,...,J} listed best-first; option 0
// is the outside option.  Reports list school ids (1-based), best-first.

inline std::vector<int> feasible_set(const std::vector<double>& s, const std::vector<double>& c) {
    std::vector<int> b{0};
    for (std::size_t m = 0; m < c.size(); ++m)
        if (s[m] >= c[m]) b.push_back(static_cast<int>(m) + 1);
    return b;
}

namespace detail {

inline void check_no_ties(const std::vector<double>& s, const std::vector<double>& c) {
    if (s.size() != c.size())
        throw std::invalid_argument("school: scores and cutoffs differ in length");
    for (std::size_t m = 0; m < c.size(); ++m)
        if (s[m] == c[m])
            throw std::invalid_argument("school: placement score ties its cutoff");
}

inline int best_by_order(const std::vector<int>& order, const std::vector<int>& among) {
    for (int opt : order)
        if (std::find(among.begin(), among.end(), opt) != among.end()) return opt;
    throw std::logic_error("school: empty option set");
}

// best option per the report: listed schools in reported order, then the
// outside option; unlisted schools are never chosen over 0
inline int best_by_report(const std::vector<int>& report, const std::vector<int>& among) {
    for (int school : report)
        if (std::find(among.begin(), among.end(), school) != among.end()) return school;
    return 0;
}

} // namespace detail

// True local preference at school j: the best feasible-plus-j option and the
// best feasible-minus-j option under the full preference order.
inline std::pair<int, int> true_local_pref(const std::vector<int>& order,
                                           const std::vector<double>& s,
                                           const std::vector<double>& c, int j) {
    detail::check_no_ties(s, c);
    auto b = feasible_set(s, c);
    auto plus = b;
    if (std::find(plus.begin(), plus.end(), j) == plus.end()) plus.push_back(j);
    auto minus = b;
    minus.erase(std::remove(minus.begin(), minus.end(), j), minus.end());
    return {detail::best_by_order(order, plus), detail::best_by_order(order, minus)};
}

// The reported counterpart, reading the submitted list as the preference.
inline std::pair<int, int> reported_local_pref(const std::vector<int>& report,
                                               const std::vector<double>& s,
                                               const std::vector<double>& c, int j) {
    detail::check_no_ties(s, c);
    auto b = feasible_set(s, c);
    auto plus = b;
    if (std::find(plus.begin(), plus.end(), j) == plus.end()) plus.push_back(j);
    auto minus = b;
    minus.erase(std::remove(minus.begin(), minus.end(), j), minus.end());
    return {detail::best_by_report(report, plus), detail::best_by_report(report, minus)};
}

// Local preferences consistent with the observables: three branches keyed by
// the feasibility of j and the shape of the reported pair.  N- collects the
// feasible non-j schools the student stayed silent about, N+ additionally
// admits j itself.
inline rset::FiniteSet cf_local_pref(const std::vector<double>& s, const std::vector<int>& report,
                                     const std::vector<double>& c, int j) {
    detail::check_no_ties(s, c);
    if (j < 1 || j > static_cast<int>(c.size()))
        throw std::invalid_argument("school: school index out of range");
    auto [a, b] = reported_local_pref(report, s, c, j);
    auto bs = feasible_set(s, c);
    auto silent = [&](int m) {
        return m != 0 && std::find(report.begin(), report.end(), m) == report.end();
    };
    std::vector<int> n_minus, n_plus;
    for (int m : bs)
        if (m != j && silent(m)) n_minus.push_back(m);
    n_plus = n_minus;
    if (silent(j)) n_plus.push_back(j);
    bool j_feasible = std::find(bs.begin(), bs.end(), j) != bs.end();

    std::set<std::vector<int>> pairs;
    pairs.insert({a, b});
    if (j_feasible && a != b)
        for (int m : n_minus) pairs.insert({a, m});
    if (!j_feasible)
        for (int m : n_plus)
            if (std::find(n_minus.begin(), n_minus.end(), m) == n_minus.end())
                pairs.insert({m, b});
    return rset::FiniteSet(std::vector<std::vector<int>>(pairs.begin(), pairs.end()));
}

// Report validity: (i) an ordered sublist of the schools truly preferred to
// the outside option, at most K long; (ii) whenever the truly best feasible
// option is a school, that school is listed.  (ii) is what makes the
// three-branch set contain the truth; a truthful prefix that omits the best
// feasible school genuinely breaks containment.
inline bool valid_report(const std::vector<int>& report, const std::vector<int>& order,
                         const std::vector<double>& s, const std::vector<double>& c, int K) {
    if (static_cast<int>(report.size()) > K) return false;
    std::vector<int> acceptable; // schools preferred to 0, best first
    for (int opt : order) {
        if (opt == 0) break;
        acceptable.push_back(opt);
    }
    std::size_t pos = 0;
    for (int school : report) {
        auto it = std::find(acceptable.begin() + pos, acceptable.end(), school);
        if (it == acceptable.end()) return false;
        pos = static_cast<std::size_t>(it - acceptable.begin()) + 1;
    }
    int best = detail::best_by_order(order, feasible_set(s, c));
    if (best != 0 && std::find(report.begin(), report.end(), best) == report.end()) return false;
    return true;
}

inline std::vector<std::vector<int>> enumerate_reports(const std::vector<int>& order,
                                                       const std::vector<double>& s,
                                                       const std::vector<double>& c, int K) {
    std::vector<int> acceptable;
    for (int opt : order) {
        if (opt == 0) break;
        acceptable.push_back(opt);
    }
    std::vector<std::vector<int>> out;
    const int m = static_cast<int>(acceptable.size());
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> rep;
        for (int i = 0; i < m; ++i)
            if ((mask >> i) & 1u) rep.push_back(acceptable[i]);
        if (valid_report(rep, order, s, c, K)) out.push_back(std::move(rep));
    }
    return out;
}

inline int assigned_option(const std::vector<int>& report, const std::vector<double>& s,
                           const std::vector<double>& c) {
    return detail::best_by_report(report, feasible_set(s, c));
}

// ---- synthetic match data ---------------------------------------------------------

struct MatchConfig {
    int J = 3;
    int K = 1;
    std::vector<double> cutoffs;       // size J
    std::vector<double> mu1;           // size J+1, option values, index 0 = outside
    double rho = 0.0;                  // loading of the preference type in the outcome
    double sigma = 0.25;               // outcome noise scale
    bool all_acceptable = false;       // force the outside option last in every draw
    bool truthful = false;             // report the full acceptable list (needs K >= J)
    std::size_t n = 10000;
    std::uint64_t seed = 1;
};

// column layout: y, s1..sJ, assigned, p_len, p1..pK; latents: type, q0..qJ
inline dgp::SimResult simulate_match(const MatchConfig& cfg) {
    const int J = cfg.J;
    if (static_cast<int>(cfg.cutoffs.size()) != J)
        throw std::invalid_argument("simulate_match: cutoffs must have J entries");
    if (static_cast<int>(cfg.mu1.size()) != J + 1)
        throw std::invalid_argument("simulate_match: mu1 must have J+1 entries");
    if (cfg.truthful && cfg.K < J)
        throw std::invalid_argument("simulate_match: truthful reports need K >= J");

    dgp::SimResult out;
    auto& y = out.data.add("y");
    std::vector<std::vector<double>*> scol;
    for (int m = 1; m <= J; ++m) scol.push_back(&out.data.add("s" + std::to_string(m)));
    auto& assigned = out.data.add("assigned");
    auto& p_len = out.data.add("p_len");
    std::vector<std::vector<double>*> pcol;
    for (int m = 1; m <= cfg.K; ++m) pcol.push_back(&out.data.add("p" + std::to_string(m)));
    auto& type = out.latents.add("type");
    std::vector<std::vector<double>*> qcol;
    for (int r = 0; r <= J; ++r) qcol.push_back(&out.latents.add("q" + std::to_string(r)));

    auto rs = num::CounterRng::keyed(cfg.seed, 1);
    auto rq = num::CounterRng::keyed(cfg.seed, 2);
    auto rp = num::CounterRng::keyed(cfg.seed, 3);
    auto re = num::CounterRng::keyed(cfg.seed, 4);

    for (std::size_t i = 0; i < cfg.n; ++i) {
        std::vector<double> s(static_cast<std::size_t>(J));
        for (int m = 0; m < J; ++m) s[m] = rs.uniform(i * static_cast<std::size_t>(J) + m);

        // Fisher-Yates over the options; optionally pin the outside option last
        std::vector<int> order(static_cast<std::size_t>(J) + 1);
        for (int r = 0; r <= J; ++r) order[r] = r;
        int top = cfg.all_acceptable ? J : J + 1;
        for (int r = 0; r < top - 1; ++r) {
            double u = rq.uniform(i * static_cast<std::size_t>(J + 1) + r);
            int pick = r + static_cast<int>(u * (top - r));
            if (pick >= top) pick = top - 1;
            std::swap(order[r], order[pick]);
        }
        if (cfg.all_acceptable) {
            order.erase(std::remove(order.begin(), order.end(), 0), order.end());
            order.push_back(0);
        }

        std::vector<int> report;
        if (cfg.truthful) {
            for (int opt : order) {
                if (opt == 0) break;
                report.push_back(opt);
            }
        } else {
            auto valid = enumerate_reports(order, s, cfg.cutoffs, cfg.K);
            double u = rp.uniform(i);
            std::size_t pick = static_cast<std::size_t>(u * valid.size());
            if (pick >= valid.size()) pick = valid.size() - 1;
            report = valid[pick];
        }

        int d = assigned_option(report, s, cfg.cutoffs);
        // preference type: how high the outside option sits in the true order
        std::size_t pos0 = static_cast<std::size_t>(
            std::find(order.begin(), order.end(), 0) - order.begin());
        double t = static_cast<double>(pos0) / J - 0.5;
        double noise = num::latent_quantile(re.uniform(i));
        y.push_back(cfg.mu1[static_cast<std::size_t>(d)] + cfg.rho * t + cfg.sigma * noise);
        for (int m = 0; m < J; ++m) scol[m]->push_back(s[m]);
        assigned.push_back(d);
        p_len.push_back(static_cast<double>(report.size()));
        for (int m = 0; m < cfg.K; ++m)
            pcol[m]->push_back(m < static_cast<int>(report.size()) ? report[m] : 0.0);
        type.push_back(t);
        for (int r = 0; r <= J; ++r) qcol[r]->push_back(order[r]);
    }
    return out;
}

// ---- cutoff contrast bounds --------------------------------------------------------

// One-sided limits at the cutoff of school j among students reporting the
// local preference (j,k).  Above the cutoff every consistent local preference
// names j first, below it names k second, so the window means bracket
// mu1(j) + w and mu1(k) + w for the common nuisance level w = mu2 + lambda.
// At singleton selection sets the bracket is the mean itself and the nuisance
// cancels from the contrast; otherwise the level is only known to lie within
// the observed outcome range of the window.
struct SchoolBounds {
    double above_mean = 0.0, below_mean = 0.0;
    long n_above = 0, n_below = 0;
    bool singleton_above = true, singleton_below = true;
    double j_lo = 0.0, j_hi = 0.0; // bracket for mu1(j) + w at the cutoff
    double k_lo = 0.0, k_hi = 0.0; // bracket for mu1(k) + w
    identify::FunctionalBounds contrast;
};

inline SchoolBounds school_bounds(const dgp::Dataset& data, int J, int j, int k,
                                  const std::vector<double>& cutoffs, double bandwidth) {
    if (bandwidth <= 0.0) throw std::invalid_argument("school_bounds: bandwidth must be positive");
    if (j == k) throw std::invalid_argument("school_bounds: contrast needs two distinct options");
    const auto& y = data.col("y");
    std::vector<const std::vector<double>*> scol;
    for (int m = 1; m <= J; ++m) scol.push_back(&data.col("s" + std::to_string(m)));
    const auto& p_len = data.col("p_len");
    std::vector<const std::vector<double>*> pcol;
    for (int m = 1; data.index_of("p" + std::to_string(m)) >= 0; ++m)
        pcol.push_back(&data.col("p" + std::to_string(m)));

    SchoolBounds out;
    double cj = cutoffs.at(static_cast<std::size_t>(j) - 1);
    double ymin_a = 1e300, ymax_a = -1e300, ymin_b = 1e300, ymax_b = -1e300;
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        std::vector<double> s(static_cast<std::size_t>(J));
        for (int m = 0; m < J; ++m) s[m] = (*scol[m])[i];
        if (std::abs(s[static_cast<std::size_t>(j) - 1] - cj) > bandwidth) continue;
        std::vector<int> report;
        for (int m = 0; m < static_cast<int>(p_len[i]); ++m)
            report.push_back(static_cast<int>((*pcol[m])[i]));
        auto [a, b] = reported_local_pref(report, s, cutoffs, j);
        if (a != j || b != k) continue;
        auto cf = cf_local_pref(s, report, cutoffs, j);
        bool singleton = cf.elements.size() == 1;
        if (s[static_cast<std::size_t>(j) - 1] >= cj) {
            ++out.n_above;
            sum_a += y[i];
            ymin_a = std::min(ymin_a, y[i]);
            ymax_a = std::max(ymax_a, y[i]);
            out.singleton_above = out.singleton_above && singleton;
        } else {
            ++out.n_below;
            sum_b += y[i];
            ymin_b = std::min(ymin_b, y[i]);
            ymax_b = std::max(ymax_b, y[i]);
            out.singleton_below = out.singleton_below && singleton;
        }
    }
    if (out.n_above == 0 || out.n_below == 0)
        throw std::runtime_error("school_bounds: no observations within bandwidth on both sides");
    out.above_mean = sum_a / out.n_above;
    out.below_mean = sum_b / out.n_below;
    out.j_lo = out.singleton_above ? out.above_mean : ymin_a;
    out.j_hi = out.singleton_above ? out.above_mean : ymax_a;
    out.k_lo = out.singleton_below ? out.below_mean : ymin_b;
    out.k_hi = out.singleton_below ? out.below_mean : ymax_b;
    out.contrast.lower = out.j_lo - out.k_hi;
    out.contrast.upper = out.j_hi - out.k_lo;
    out.contrast.functional_id =
        "SCHOOL(j=" + std::to_string(j) + ",k=" + std::to_string(k) + ")";
    return out;
}

} // namespace svcf::school

#endif
