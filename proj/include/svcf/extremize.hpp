#ifndef SVCF_EXTREMIZE_HPP
#define SVCF_EXTREMIZE_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "svcf/set_expr.hpp"

namespace svcf::rset {

enum class Mode { Sup, Inf };
enum class Hint { None, Increasing, Decreasing };

struct ExtremizeOptions {
    // Per-coordinate of the point handed to f (tag coordinates included for
    // tagged unions; the tag hint is ignored).
    std::vector<Hint> hints;
    double tol = 1e-8;
    int resolution = 64;
    std::optional<double> truncation;
};

struct ExtremizeResult {
    double value = 0.0;
    Point arg;
    bool truncated = false; // optimum sits on a truncated half-line end
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

struct ContinuousAxis {
    double lo, hi;
    bool lo_truncated = false, hi_truncated = false;
    Hint hint = Hint::None;
};

// A tuple axis spans one or more coordinates that move together (finite label
// tuples); width 1 with a single candidate also models pinned coordinates.
struct TupleAxis {
    std::vector<std::vector<double>> candidates;
    int width;
};

struct Axis {
    bool continuous;
    ContinuousAxis c;
    TupleAxis t;
    int offset = 0;
};

struct ClipRef {
    const HalfPlaneClip* clip;
    int offset; // coordinate index of the clip's first coordinate
};

struct Flat {
    std::vector<Axis> axes;
    std::vector<ClipRef> clips;
    int dim = 0;
};

inline double checked_eval(const Objective& f, std::span<const double> p) {
    double v = f(p);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "extremize: objective non-finite at (";
        for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
        os << ")";
        throw std::runtime_error(os.str());
    }
    return v;
}

inline ContinuousAxis make_continuous(const Interval& iv, Hint hint,
                                      const std::optional<double>& trunc) {
    ContinuousAxis a;
    a.hint = hint;
    a.lo = iv.lo;
    a.hi = iv.hi;
    if (!std::isfinite(a.lo)) {
        if (trunc) { a.lo = -*trunc; a.lo_truncated = true; }
    }
    if (!std::isfinite(a.hi)) {
        if (trunc) { a.hi = *trunc; a.hi_truncated = true; }
    }
    return a;
}

inline void flatten(const SetExpr& s, const ExtremizeOptions& opt, int hint_offset, Flat& out) {
    auto hint_at = [&](int k) {
        int idx = hint_offset + k;
        return idx < static_cast<int>(opt.hints.size()) ? opt.hints[idx] : Hint::None;
    };
    if (const auto* iv = s.get_if<Interval>()) {
        out.axes.push_back({true, make_continuous(*iv, hint_at(0), opt.truncation), {}, out.dim});
        out.dim += 1;
    } else if (const auto* b = s.get_if<Box>()) {
        for (std::size_t k = 0; k < b->dims.size(); ++k) {
            out.axes.push_back({true,
                                make_continuous(b->dims[k], hint_at(static_cast<int>(k)),
                                                opt.truncation),
                                {}, out.dim});
            out.dim += 1;
        }
    } else if (const auto* c = s.get_if<HalfPlaneClip>()) {
        if (c->axis_aligned()) {
            flatten(SetExpr(c->as_box()), opt, hint_offset, out);
            return;
        }
        out.clips.push_back({c, out.dim});
        for (int k = 0; k < 2; ++k) {
            out.axes.push_back({true, make_continuous(c->base.dims[k], hint_at(k),
                                                      opt.truncation), {}, out.dim});
            out.dim += 1;
        }
    } else if (const auto* fs = s.get_if<FiniteSet>()) {
        TupleAxis t;
        t.width = static_cast<int>(fs->elements.front().size());
        for (const auto& e : fs->elements) {
            std::vector<double> c(e.begin(), e.end());
            t.candidates.push_back(std::move(c));
        }
        out.axes.push_back({false, {}, std::move(t), out.dim});
        out.dim += out.axes.back().t.width;
    } else if (s.get_if<Product>()) {
        for (const auto& f : std::get<Product>(s.node()).factors)
            flatten(f, opt, hint_offset + out.dim, out);
    } else {
        throw std::logic_error("extremize: tagged union must be handled by the caller");
    }
}

inline bool feasible(const Flat& fl, const Point& p) {
    for (const auto& cr : fl.clips)
        if (!cr.clip->satisfies(p[cr.offset], p[cr.offset + 1])) return false;
    return true;
}

// Feasible range of coordinate `idx` holding the others fixed.
inline std::pair<double, double> slice_range(const Flat& fl, const Axis& ax, int idx,
                                             const Point& p) {
    double lo = ax.c.lo, hi = ax.c.hi;
    for (const auto& cr : fl.clips) {
        if (idx != cr.offset && idx != cr.offset + 1) continue;
        const auto* c = cr.clip;
        double coef = (idx == cr.offset) ? c->a1 : c->a2;
        double rest = c->a0 + ((idx == cr.offset) ? c->a2 * p[cr.offset + 1]
                                                  : c->a1 * p[cr.offset]);
        if (coef == 0.0) {
            bool ok = (c->sense == Sense::Geq) ? rest >= 0.0 : rest <= 0.0;
            if (!ok) return {1.0, 0.0}; // empty
            continue;
        }
        double bound = -rest / coef;
        bool lower_side = (c->sense == Sense::Geq) == (coef > 0.0);
        if (lower_side) lo = std::max(lo, bound);
        else            hi = std::min(hi, bound);
    }
    return {lo, hi};
}

} // namespace detail

inline ExtremizeResult extremize_ex(const SetExpr& s, const Objective& f, Mode mode,
                                    const ExtremizeOptions& opt = {});

namespace detail {

inline ExtremizeResult extremize_flat(const Flat& fl, const Objective& f, Mode mode,
                                      const ExtremizeOptions& opt) {
    const double sign = (mode == Mode::Sup) ? 1.0 : -1.0;

    // Candidate values per axis.  Hinted or degenerate continuous axes
    // contribute endpoints only, which is exact for coordinatewise monotone
    // objectives; others get a dense grid refined afterwards.
    std::vector<std::vector<std::vector<double>>> cand(fl.axes.size());
    std::vector<bool> refine(fl.axes.size(), false);
    for (std::size_t a = 0; a < fl.axes.size(); ++a) {
        const auto& ax = fl.axes[a];
        if (!ax.continuous) {
            cand[a] = ax.t.candidates;
            continue;
        }
        const bool lo_ok = std::isfinite(ax.c.lo), hi_ok = std::isfinite(ax.c.hi);
        if (!lo_ok && !hi_ok)
            throw std::invalid_argument("extremize: unbounded axis needs a truncation bound");
        if (ax.c.hint != Hint::None) {
            // Monotone: only the favourable endpoint matters for this mode.
            bool hi_end = (mode == Mode::Sup) == (ax.c.hint == Hint::Increasing);
            double v = hi_end ? ax.c.hi : ax.c.lo;
            if (!std::isfinite(v))
                throw std::invalid_argument(
                    "extremize: monotone optimum lies on an unbounded end; supply truncation");
            cand[a] = {{v}};
            // Keep the other endpoint too when finite; harmless and makes the
            // vertex path exact under wrong-direction hints in tests.
            double w = hi_end ? ax.c.lo : ax.c.hi;
            if (std::isfinite(w) && w != v) cand[a].push_back({w});
        } else if (ax.c.lo == ax.c.hi) {
            cand[a] = {{ax.c.lo}};
        } else {
            if (!lo_ok || !hi_ok)
                throw std::invalid_argument(
                    "extremize: unbounded axis needs a monotone hint or truncation");
            for (double v : num::linspace(ax.c.lo, ax.c.hi, std::max(2, opt.resolution)))
                cand[a].push_back({v});
            refine[a] = true;
        }
    }

    ExtremizeResult best;
    double best_score = -std::numeric_limits<double>::infinity();
    Point p(fl.dim, 0.0);
    bool found = false;

    auto consider = [&](const Point& q) {
        if (!feasible(fl, q)) return;
        double val = checked_eval(f, q);
        double sc = sign * val;
        if (!found || sc > best_score) {
            found = true;
            best_score = sc;
            best.value = val;
            best.arg = q;
        }
    };

    std::vector<std::size_t> idx(fl.axes.size(), 0);
    std::size_t total = 1;
    for (const auto& c : cand) total *= c.size();
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        for (std::size_t a = 0; a < fl.axes.size(); ++a) {
            idx[a] = rem % cand[a].size();
            rem /= cand[a].size();
            const auto& tuple = cand[a][idx[a]];
            for (std::size_t k = 0; k < tuple.size(); ++k)
                p[fl.axes[a].offset + k] = tuple[k];
        }
        consider(p);
    }

    // Boundary-line vertices of genuine 2-d clips, crossed with the current
    // best for the remaining coordinates.
    if (found && !fl.clips.empty()) {
        for (const auto& cr : fl.clips) {
            for (const auto& v : clip_vertices(*cr.clip)) {
                Point q = best.arg;
                q[cr.offset] = v[0];
                q[cr.offset + 1] = v[1];
                consider(q);
            }
        }
    }

    if (!found) throw EmptySetError("extremize: no feasible point");

    // Pattern-search refinement on unhinted continuous coordinates.
    bool any_refine = false;
    for (bool r : refine) any_refine = any_refine || r;
    if (any_refine) {
        Point cur = best.arg;
        double step = 0.0;
        for (std::size_t a = 0; a < fl.axes.size(); ++a)
            if (refine[a])
                step = std::max(step, (fl.axes[a].c.hi - fl.axes[a].c.lo) /
                                          std::max(2, opt.resolution));
        while (step > opt.tol) {
            bool improved = false;
            for (std::size_t a = 0; a < fl.axes.size(); ++a) {
                if (!refine[a]) continue;
                const int i = fl.axes[a].offset;
                auto [lo, hi] = slice_range(fl, fl.axes[a], i, cur);
                if (lo > hi) continue;
                for (double dir : {-1.0, 1.0}) {
                    Point q = cur;
                    q[i] = std::min(hi, std::max(lo, cur[i] + dir * step));
                    if (q[i] == cur[i]) continue;
                    double val = checked_eval(f, q);
                    if (sign * val > best_score) {
                        best_score = sign * val;
                        best.value = val;
                        best.arg = q;
                        cur = q;
                        improved = true;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
    }

    for (std::size_t a = 0; a < fl.axes.size(); ++a) {
        const auto& ax = fl.axes[a];
        if (!ax.continuous) continue;
        double v = best.arg[ax.offset];
        if ((ax.c.lo_truncated && v == ax.c.lo) || (ax.c.hi_truncated && v == ax.c.hi))
            best.truncated = true;
    }
    return best;
}

} // namespace detail

inline ExtremizeResult extremize_ex(const SetExpr& s, const Objective& f, Mode mode,
                                    const ExtremizeOptions& opt) {
    if (const auto* u = s.get_if<TaggedUnion>()) {
        ExtremizeResult best;
        bool found = false;
        const double sign = (mode == Mode::Sup) ? 1.0 : -1.0;
        for (std::size_t k = 0; k < u->regions.size(); ++k) {
            const double tag = static_cast<double>(u->tags[k]);
            Objective g = [&f, tag](std::span<const double> base) {
                Point q(base.begin(), base.end());
                q.push_back(tag);
                return f(q);
            };
            ExtremizeResult r = extremize_ex(u->regions[k], g, mode, opt);
            if (!found || sign * r.value > sign * best.value) {
                found = true;
                best = r;
                best.arg.push_back(tag);
            } else if (r.truncated && sign * r.value == sign * best.value) {
                best.truncated = true;
            }
        }
        if (!found) throw EmptySetError("extremize: empty tagged union");
        return best;
    }
    detail::Flat fl;
    detail::flatten(s, opt, 0, fl);
    return detail::extremize_flat(fl, f, mode, opt);
}

inline double extremize(const SetExpr& s, const Objective& f, Mode mode,
                        const ExtremizeOptions& opt = {}) {
    return extremize_ex(s, f, mode, opt).value;
}

// Convenience for the common inf/sup pair.
inline std::pair<double, double> extremize_range(const SetExpr& s, const Objective& f,
                                                 const ExtremizeOptions& opt = {}) {
    return {extremize(s, f, Mode::Inf, opt), extremize(s, f, Mode::Sup, opt)};
}

} // namespace svcf::rset

#endif
