#ifndef SVCF_SET_EXPR_HPP
#define SVCF_SET_EXPR_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "svcf/math.hpp"

namespace svcf::rset {

using Point = std::vector<double>;

// Constructing an empty region is a model-side failure (infeasible parameter),
// not a numeric edge case, so it gets its own exception type.
struct EmptySetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class SetExpr;

// Closed interval.  Degenerate (lo == hi) is legal.  An infinite endpoint is
// legal only through the half-line factories so that callers opt in.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool half_line = false;

    static Interval closed(double lo, double hi) {
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument("Interval: non-finite bound without half_line tag");
        if (lo > hi) throw EmptySetError("Interval: lo > hi");
        return Interval{lo, hi, false};
    }
    static Interval at_most(double hi) {
        if (!std::isfinite(hi)) throw std::invalid_argument("Interval: hi must be finite");
        return Interval{-std::numeric_limits<double>::infinity(), hi, true};
    }
    static Interval at_least(double lo) {
        if (!std::isfinite(lo)) throw std::invalid_argument("Interval: lo must be finite");
        return Interval{lo, std::numeric_limits<double>::infinity(), true};
    }

    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    bool degenerate() const { return lo == hi; }
};

struct Box {
    std::vector<Interval> dims;

    explicit Box(std::vector<Interval> d) : dims(std::move(d)) {
        if (dims.empty()) throw std::invalid_argument("Box: no dimensions");
    }
    static Box unit_square() {
        return Box({Interval::closed(0, 1), Interval::closed(0, 1)});
    }
};

enum class Sense { Geq, Leq };

// {(v1,v2) in base : a0 + a1*v1 + a2*v2  sense  0}.  base is a finite 2-d box.
struct HalfPlaneClip {
    Box base;
    double a0, a1, a2;
    Sense sense;

    HalfPlaneClip(Box b, double c0, double c1, double c2, Sense s)
        : base(std::move(b)), a0(c0), a1(c1), a2(c2), sense(s) {
        if (base.dims.size() != 2)
            throw std::invalid_argument("HalfPlaneClip: base must be 2-dimensional");
        for (const auto& iv : base.dims)
            if (!iv.bounded())
                throw std::invalid_argument("HalfPlaneClip: base must be bounded");
        // Linear on a box attains its extremes at corners, so emptiness is a
        // pure vertex check.
        bool any = false;
        for (int i = 0; i < 4; ++i) {
            double v1 = (i & 1) ? base.dims[0].hi : base.dims[0].lo;
            double v2 = (i & 2) ? base.dims[1].hi : base.dims[1].lo;
            if (satisfies(v1, v2)) any = true;
        }
        if (!any) throw EmptySetError("HalfPlaneClip: constraint excludes the whole base");
    }

    bool satisfies(double v1, double v2) const {
        double t = a0 + a1 * v1 + a2 * v2;
        return sense == Sense::Geq ? t >= 0.0 : t <= 0.0;
    }

    // Degenerates to a box when the constraint involves one coordinate only.
    bool axis_aligned() const { return a1 == 0.0 || a2 == 0.0; }

    Box as_box() const {
        if (!axis_aligned())
            throw std::logic_error("HalfPlaneClip::as_box: constraint is not axis-aligned");
        Box b = base;
        if (a1 == 0.0 && a2 == 0.0) return b; // constraint vacuous (validated nonempty)
        int ax = (a1 != 0.0) ? 0 : 1;
        double coef = (ax == 0) ? a1 : a2;
        double bound = -a0 / coef;
        bool lower_side = (sense == Sense::Geq) == (coef > 0.0); // v >= bound
        Interval& iv = b.dims[ax];
        if (lower_side)
            iv = Interval::closed(std::max(iv.lo, bound), iv.hi);
        else
            iv = Interval::closed(iv.lo, std::min(iv.hi, bound));
        return b;
    }
};

// Finite collection of integer label tuples (single indices or pairs).
struct FiniteSet {
    std::vector<std::vector<int>> elements;

    explicit FiniteSet(std::vector<std::vector<int>> elems) : elements(std::move(elems)) {
        if (elements.empty()) throw EmptySetError("FiniteSet: no elements");
        const std::size_t d = elements.front().size();
        if (d == 0) throw std::invalid_argument("FiniteSet: zero-length labels");
        std::set<std::vector<int>> seen;
        for (const auto& e : elements) {
            if (e.size() != d)
                throw std::invalid_argument("FiniteSet: ragged label lengths");
            if (!seen.insert(e).second)
                throw std::invalid_argument("FiniteSet: duplicate label");
        }
    }
};

// Union of (region, tag) parts; a point is (v..., tag) with the tag as the
// trailing coordinate.  Parts may repeat a tag.
struct TaggedUnion {
    std::vector<SetExpr> regions;
    std::vector<int> tags;
    std::vector<int> labels;

    TaggedUnion(std::vector<SetExpr> r, std::vector<int> t, std::vector<int> declared);
};

struct Product {
    std::vector<SetExpr> factors;

    explicit Product(std::vector<SetExpr> f);
};

class SetExpr {
  public:
    using Node = std::variant<Interval, Box, HalfPlaneClip, FiniteSet, TaggedUnion, Product>;

    SetExpr(Interval x) : node_(std::move(x)) {}
    SetExpr(Box x) : node_(std::move(x)) {}
    SetExpr(HalfPlaneClip x) : node_(std::move(x)) {}
    SetExpr(FiniteSet x) : node_(std::move(x)) {}
    SetExpr(TaggedUnion x) : node_(std::move(x)) {}
    SetExpr(Product x) : node_(std::move(x)) {}

    const Node& node() const { return node_; }

    template <class T> const T* get_if() const { return std::get_if<T>(&node_); }

    int dim() const;
    bool contains(std::span<const double> p) const;
    bool contains(const Point& p) const { return contains(std::span<const double>(p)); }

  private:
    Node node_;
};

inline TaggedUnion::TaggedUnion(std::vector<SetExpr> r, std::vector<int> t,
                                std::vector<int> declared)
    : regions(std::move(r)), tags(std::move(t)), labels(std::move(declared)) {
    if (regions.empty()) throw EmptySetError("TaggedUnion: no parts");
    if (regions.size() != tags.size())
        throw std::invalid_argument("TaggedUnion: regions/tags size mismatch");
    if (labels.empty()) throw std::invalid_argument("TaggedUnion: empty label set");
    const int d = regions.front().dim();
    for (const auto& reg : regions)
        if (reg.dim() != d)
            throw std::invalid_argument("TaggedUnion: mixed part dimensions");
    for (int tag : tags)
        if (std::find(labels.begin(), labels.end(), tag) == labels.end())
            throw std::invalid_argument("TaggedUnion: tag outside declared label set");
}

inline Product::Product(std::vector<SetExpr> f) : factors(std::move(f)) {
    if (factors.empty()) throw std::invalid_argument("Product: no factors");
}

inline int SetExpr::dim() const {
    struct V {
        int operator()(const Interval&) const { return 1; }
        int operator()(const Box& b) const { return static_cast<int>(b.dims.size()); }
        int operator()(const HalfPlaneClip&) const { return 2; }
        int operator()(const FiniteSet& f) const {
            return static_cast<int>(f.elements.front().size());
        }
        int operator()(const TaggedUnion& u) const { return u.regions.front().dim() + 1; }
        int operator()(const Product& p) const {
            int d = 0;
            for (const auto& f : p.factors) d += f.dim();
            return d;
        }
    };
    return std::visit(V{}, node_);
}

namespace detail {

inline bool label_match(double coord, int label) {
    return std::fabs(coord - static_cast<double>(label)) <= 1e-9;
}

} // namespace detail

inline bool SetExpr::contains(std::span<const double> p) const {
    if (static_cast<int>(p.size()) != dim())
        throw std::invalid_argument("SetExpr::contains: point dimension mismatch");
    struct V {
        std::span<const double> p;
        bool operator()(const Interval& iv) const { return p[0] >= iv.lo && p[0] <= iv.hi; }
        bool operator()(const Box& b) const {
            for (std::size_t i = 0; i < b.dims.size(); ++i)
                if (p[i] < b.dims[i].lo || p[i] > b.dims[i].hi) return false;
            return true;
        }
        bool operator()(const HalfPlaneClip& c) const {
            return V{p}(c.base) && c.satisfies(p[0], p[1]);
        }
        bool operator()(const FiniteSet& f) const {
            for (const auto& e : f.elements) {
                bool ok = true;
                for (std::size_t i = 0; i < e.size(); ++i)
                    if (!detail::label_match(p[i], e[i])) { ok = false; break; }
                if (ok) return true;
            }
            return false;
        }
        bool operator()(const TaggedUnion& u) const {
            const double tagc = p.back();
            auto base = p.first(p.size() - 1);
            for (std::size_t k = 0; k < u.regions.size(); ++k)
                if (detail::label_match(tagc, u.tags[k]) && u.regions[k].contains(base))
                    return true;
            return false;
        }
        bool operator()(const Product& pr) const {
            std::size_t off = 0;
            for (const auto& f : pr.factors) {
                const auto d = static_cast<std::size_t>(f.dim());
                if (!f.contains(p.subspan(off, d))) return false;
                off += d;
            }
            return true;
        }
    };
    return std::visit(V{p}, node_);
}

// ---- deterministic grids ----------------------------------------------------

struct GridOptions {
    int resolution = 64;
    // Required when the expression has an unbounded side; the infinite end is
    // replaced by +/- truncation.
    std::optional<double> truncation;
};

namespace detail {

inline std::pair<double, double> effective_range(const Interval& iv,
                                                 const std::optional<double>& trunc) {
    double lo = iv.lo, hi = iv.hi;
    if (!std::isfinite(lo)) {
        if (!trunc) throw std::invalid_argument("grid over half-line needs a truncation bound");
        lo = -*trunc;
    }
    if (!std::isfinite(hi)) {
        if (!trunc) throw std::invalid_argument("grid over half-line needs a truncation bound");
        hi = *trunc;
    }
    if (lo > hi) throw std::invalid_argument("truncation bound inside the half-line");
    return {lo, hi};
}

inline std::vector<double> interval_grid(const Interval& iv, const GridOptions& opt) {
    auto [lo, hi] = effective_range(iv, opt.truncation);
    if (lo == hi) return {lo};
    return num::linspace(lo, hi, std::max(2, opt.resolution));
}

inline void cross(std::vector<Point>& acc, const std::vector<std::vector<double>>& axes) {
    acc.clear();
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    acc.reserve(total);
    Point p(axes.size());
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        for (std::size_t k = 0; k < axes.size(); ++k) {
            idx[k] = rem % axes[k].size();
            rem /= axes[k].size();
            p[k] = axes[k][idx[k]];
        }
        acc.push_back(p);
    }
}

// Corners of the clipped square plus intersections of the boundary line with
// the box edges; these are the polygon vertices of the feasible region.
inline std::vector<Point> clip_vertices(const HalfPlaneClip& c) {
    std::vector<Point> out;
    const auto& dx = c.base.dims[0];
    const auto& dy = c.base.dims[1];
    for (int i = 0; i < 4; ++i) {
        double x = (i & 1) ? dx.hi : dx.lo;
        double y = (i & 2) ? dy.hi : dy.lo;
        if (c.satisfies(x, y)) out.push_back({x, y});
    }
    auto push_if = [&](double x, double y) {
        if (x >= dx.lo && x <= dx.hi && y >= dy.lo && y <= dy.hi && c.satisfies(x, y))
            out.push_back({x, y});
    };
    if (c.a2 != 0.0) {
        push_if(dx.lo, -(c.a0 + c.a1 * dx.lo) / c.a2);
        push_if(dx.hi, -(c.a0 + c.a1 * dx.hi) / c.a2);
    }
    if (c.a1 != 0.0) {
        push_if(-(c.a0 + c.a2 * dy.lo) / c.a1, dy.lo);
        push_if(-(c.a0 + c.a2 * dy.hi) / c.a1, dy.hi);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace detail

inline std::vector<Point> sample_grid(const SetExpr& s, const GridOptions& opt = {}) {
    struct V {
        const GridOptions& opt;
        std::vector<Point> operator()(const Interval& iv) const {
            std::vector<Point> out;
            for (double x : detail::interval_grid(iv, opt)) out.push_back({x});
            return out;
        }
        std::vector<Point> operator()(const Box& b) const {
            std::vector<std::vector<double>> axes;
            for (const auto& iv : b.dims) axes.push_back(detail::interval_grid(iv, opt));
            std::vector<Point> out;
            detail::cross(out, axes);
            return out;
        }
        std::vector<Point> operator()(const HalfPlaneClip& c) const {
            std::vector<Point> pts = V{opt}(c.base);
            pts.erase(std::remove_if(pts.begin(), pts.end(),
                                     [&](const Point& p) { return !c.satisfies(p[0], p[1]); }),
                      pts.end());
            for (auto& v : detail::clip_vertices(c)) pts.push_back(std::move(v));
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
            if (pts.empty()) throw std::logic_error("sample_grid: clip produced no points");
            return pts;
        }
        std::vector<Point> operator()(const FiniteSet& f) const {
            std::vector<Point> out;
            for (const auto& e : f.elements) {
                Point p(e.size());
                std::transform(e.begin(), e.end(), p.begin(),
                               [](int v) { return static_cast<double>(v); });
                out.push_back(std::move(p));
            }
            return out;
        }
        std::vector<Point> operator()(const TaggedUnion& u) const {
            std::vector<Point> out;
            for (std::size_t k = 0; k < u.regions.size(); ++k) {
                for (auto& p : sample_grid(u.regions[k], opt)) {
                    p.push_back(static_cast<double>(u.tags[k]));
                    out.push_back(std::move(p));
                }
            }
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        }
        std::vector<Point> operator()(const Product& pr) const {
            std::vector<Point> acc = {{}};
            for (const auto& f : pr.factors) {
                auto part = sample_grid(f, opt);
                std::vector<Point> next;
                next.reserve(acc.size() * part.size());
                for (const auto& a : acc)
                    for (const auto& b : part) {
                        Point p = a;
                        p.insert(p.end(), b.begin(), b.end());
                        next.push_back(std::move(p));
                    }
                acc = std::move(next);
            }
            return acc;
        }
    };
    return std::visit(V{opt}, s.node());
}

} // namespace svcf::rset

#endif
