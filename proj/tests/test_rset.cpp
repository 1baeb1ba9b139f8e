#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "svcf/extremize.hpp"
#include "svcf/set_expr.hpp"

using namespace svcf::rset;

namespace {

SetExpr unit_clip(double a0, double a1, double a2, Sense s) {
    return SetExpr(HalfPlaneClip(Box::unit_square(), a0, a1, a2, s));
}

} // namespace

TEST_CASE("interval membership is closed at the endpoints") {
    SetExpr s(Interval::closed(0.2, 0.7));
    CHECK(s.contains({0.2}));
    CHECK(s.contains({0.7}));
    CHECK(s.contains({0.5}));
    CHECK_FALSE(s.contains({0.19999999}));
    CHECK_FALSE(s.contains({0.70000001}));
}

TEST_CASE("degenerate interval is a legal singleton") {
    SetExpr s(Interval::closed(0.4, 0.4));
    CHECK(s.contains({0.4}));
    CHECK_FALSE(s.contains({0.4001}));
    auto f = [](std::span<const double> p) { return 3.0 * p[0] + 1.0; };
    CHECK(extremize(s, f, Mode::Sup) == 3.0 * 0.4 + 1.0);
    CHECK(extremize(s, f, Mode::Inf) == 3.0 * 0.4 + 1.0);
}

TEST_CASE("box membership checks every coordinate, boundary inclusive") {
    SetExpr s(Box({Interval::closed(0.0, 0.4), Interval::closed(0.6, 1.0)}));
    CHECK(s.contains({0.4, 0.6}));
    CHECK_FALSE(s.contains({0.41, 0.6}));
    CHECK_FALSE(s.contains({0.4, 0.59}));
}

TEST_CASE("half-plane clip keeps the side of the constraint") {
    SetExpr s = unit_clip(-0.3, 1.0, 0.0, Sense::Geq); // v1 >= 0.3
    CHECK_FALSE(s.contains({0.2, 0.5}));
    CHECK(s.contains({0.3, 0.5}));
    CHECK(s.contains({0.9, 0.0}));
}

TEST_CASE("finite set membership matches labels exactly") {
    SetExpr s(FiniteSet({{1, 0}, {2, 0}}));
    CHECK(s.contains({1.0, 0.0}));
    CHECK(s.contains({2.0, 0.0}));
    CHECK_FALSE(s.contains({0.0, 1.0}));
    CHECK_FALSE(s.contains({1.0, 1.0}));
}

TEST_CASE("tagged union requires the trailing tag to match a part holding the point") {
    std::vector<SetExpr> regs;
    regs.emplace_back(Box({Interval::closed(0.0, 0.5), Interval::closed(0.0, 0.5)}));
    regs.emplace_back(Box({Interval::closed(0.5, 1.0), Interval::closed(0.5, 1.0)}));
    SetExpr s(TaggedUnion(std::move(regs), {0, 1}, {0, 1}));
    CHECK(s.contains({0.2, 0.2, 0.0}));
    CHECK_FALSE(s.contains({0.2, 0.2, 1.0}));
    CHECK(s.contains({0.7, 0.9, 1.0}));
    CHECK(s.dim() == 3);
}

TEST_CASE("product splits the point across factors") {
    std::vector<SetExpr> factors;
    factors.emplace_back(Interval::closed(0.0, 0.5));
    factors.emplace_back(FiniteSet({{3}, {6}}));
    SetExpr s(Product(std::move(factors)));
    CHECK(s.dim() == 2);
    CHECK(s.contains({0.25, 3.0}));
    CHECK_FALSE(s.contains({0.25, 4.0}));
    CHECK_FALSE(s.contains({0.75, 3.0}));
}

TEST_CASE("membership rejects points of the wrong dimension") {
    SetExpr s(Interval::closed(0.0, 1.0));
    CHECK_THROWS_AS(s.contains({0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("empty constructions fail loudly") {
    CHECK_THROWS_AS(Interval::closed(0.7, 0.2), EmptySetError);
    // v1 >= 2 never holds on the unit square
    CHECK_THROWS_AS(HalfPlaneClip(Box::unit_square(), -2.0, 1.0, 0.0, Sense::Geq),
                    EmptySetError);
    CHECK_THROWS_AS(FiniteSet({}), EmptySetError);
    CHECK_THROWS_AS(TaggedUnion({}, {}, {0, 1}), EmptySetError);
}

TEST_CASE("tags outside the declared label set are rejected") {
    std::vector<SetExpr> regs;
    regs.emplace_back(Interval::closed(0.0, 1.0));
    CHECK_THROWS_AS(TaggedUnion(std::move(regs), {2}, {0, 1}), std::invalid_argument);
}

TEST_CASE("interval grid includes both endpoints and is evenly spaced") {
    auto pts = sample_grid(SetExpr(Interval::closed(0.0, 1.0)), {.resolution = 3});
    REQUIRE(pts.size() == 3);
    CHECK(pts[0][0] == 0.0);
    CHECK(pts[1][0] == 0.5);
    CHECK(pts[2][0] == 1.0);
}

TEST_CASE("box grid at resolution 2 is the corner set") {
    SetExpr s(Box({Interval::closed(0.0, 1.0), Interval::closed(0.2, 0.8)}));
    auto pts = sample_grid(s, {.resolution = 2});
    REQUIRE(pts.size() == 4);
    for (const auto& p : pts) CHECK(s.contains(p));
}

TEST_CASE("clip grid points all satisfy the constraint and include the region vertices") {
    SetExpr s = unit_clip(-0.5, 1.0, 1.0, Sense::Geq); // v1 + v2 >= 0.5
    auto pts = sample_grid(s, {.resolution = 50});
    for (const auto& p : pts) CHECK(s.contains(p));
    auto has = [&](double x, double y) {
        for (const auto& p : pts)
            if (p[0] == x && p[1] == y) return true;
        return false;
    };
    CHECK(has(0.0, 0.5));
    CHECK(has(0.5, 0.0));
    CHECK(has(1.0, 1.0));
    // repeat call is bit-identical
    CHECK(pts == sample_grid(s, {.resolution = 50}));
}

TEST_CASE("grids over half-lines require a truncation bound") {
    SetExpr s(Interval::at_most(-0.3));
    CHECK_THROWS_AS(sample_grid(s, {.resolution = 10}), std::invalid_argument);
    auto pts = sample_grid(s, {.resolution = 10, .truncation = 10.0});
    CHECK(pts.front()[0] == -10.0);
    CHECK(pts.back()[0] == -0.3);
}

TEST_CASE("monotone hints reproduce exact vertex extrema on boxes") {
    std::mt19937 rng(91);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        int d = 1 + static_cast<int>(rng() % 3);
        std::vector<Interval> dims;
        std::vector<Hint> hints;
        std::vector<double> sign(d), scale(d);
        for (int k = 0; k < d; ++k) {
            double a = u(rng), b = u(rng);
            dims.push_back(Interval::closed(std::min(a, b), std::max(a, b)));
            sign[k] = (rng() & 1) ? 1.0 : -1.0;
            scale[k] = 0.5 + u(rng);
            hints.push_back(sign[k] > 0 ? Hint::Increasing : Hint::Decreasing);
        }
        SetExpr s{Box(dims)};
        auto f = [&](std::span<const double> p) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += sign[k] * std::exp(scale[k] * p[k]);
            return acc;
        };
        for (Mode mode : {Mode::Sup, Mode::Inf}) {
            double via_hints = extremize(s, f, mode, {.hints = hints});
            // independent corner enumeration
            double best = (mode == Mode::Sup) ? -1e300 : 1e300;
            for (int c = 0; c < (1 << d); ++c) {
                std::vector<double> p(d);
                for (int k = 0; k < d; ++k) p[k] = (c >> k & 1) ? dims[k].hi : dims[k].lo;
                double v = f(p);
                best = (mode == Mode::Sup) ? std::max(best, v) : std::min(best, v);
            }
            CHECK(via_hints == best);
        }
    }
}

TEST_CASE("clip infimum agrees with a dense independent enumeration") {
    // selection region for d=1 at a two-point instrument collapsed to a true
    // two-variable constraint: 0.55 - 0.5 v1 - 0.5 v2 >= 0
    SetExpr s = unit_clip(0.55, -0.5, -0.5, Sense::Geq);
    auto f = [](std::span<const double> p) { return p[0] + p[1]; };
    double impl_inf = extremize(s, f, Mode::Inf);
    double impl_sup = extremize(s, f, Mode::Sup);

    double oracle_inf = 1e300, oracle_sup = -1e300;
    const int n = 400;
    auto consider = [&](double x, double y) {
        if (0.55 - 0.5 * x - 0.5 * y < 0.0) return;
        oracle_inf = std::min(oracle_inf, x + y);
        oracle_sup = std::max(oracle_sup, x + y);
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            consider(i / (n - 1.0), j / (n - 1.0));
    // boundary-line corners of the region
    consider(1.0, 0.1);
    consider(0.1, 1.0);
    consider(0.0, 1.0);
    consider(1.0, 0.0);

    CHECK(std::fabs(impl_inf - oracle_inf) < 1e-6);
    CHECK(std::fabs(impl_sup - oracle_sup) < 1e-6);
}

TEST_CASE("unhinted refinement reaches interior optima to tolerance") {
    SetExpr s(Box({Interval::closed(0.0, 1.0), Interval::closed(0.0, 1.0)}));
    auto f = [](std::span<const double> p) {
        double dx = p[0] - 0.337, dy = p[1] - 0.713;
        return dx * dx + dy * dy;
    };
    auto r = extremize_ex(s, f, Mode::Inf, {.tol = 1e-8});
    CHECK(std::fabs(r.arg[0] - 0.337) < 1e-6);
    CHECK(std::fabs(r.arg[1] - 0.713) < 1e-6);
    CHECK(r.value < 1e-12);
}

TEST_CASE("tagged union extrema are the best over parts") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<SetExpr> regs;
        std::vector<int> tags;
        int parts = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < parts; ++k) {
            double a = u(rng), b = u(rng);
            regs.emplace_back(Interval::closed(std::min(a, b), std::max(a, b)));
            tags.push_back(static_cast<int>(rng() % 2));
        }
        auto f = [](std::span<const double> p) { return p[0] + 0.25 * p[1]; };
        double via_union = 0.0;
        {
            std::vector<SetExpr> copy = regs;
            SetExpr s(TaggedUnion(std::move(copy), tags, {0, 1}));
            via_union = extremize(s, f, Mode::Sup,
                                  {.hints = {Hint::Increasing, Hint::None}});
        }
        double best = -1e300;
        for (int k = 0; k < parts; ++k) {
            const auto& iv = std::get<Interval>(regs[k].node());
            best = std::max(best, iv.hi + 0.25 * tags[k]);
        }
        CHECK(via_union == Catch::Approx(best).margin(1e-12));
    }
}

TEST_CASE("half-line extremization demands a hint or truncation") {
    SetExpr s(Interval::at_most(-0.2));
    auto f = [](std::span<const double> p) { return p[0]; };
    CHECK_THROWS_AS(extremize(s, f, Mode::Inf), std::invalid_argument);
    // increasing objective, infimum pushed to the unbounded end
    CHECK_THROWS_AS(extremize(s, f, Mode::Inf, {.hints = {Hint::Increasing}}),
                    std::invalid_argument);
    // supremum of an increasing objective sits at the finite end, no truncation needed
    CHECK(extremize(s, f, Mode::Sup, {.hints = {Hint::Increasing}}) == -0.2);
    auto r = extremize_ex(s, f, Mode::Inf, {.hints = {Hint::Increasing}, .truncation = 10.0});
    CHECK(r.value == -10.0);
    CHECK(r.truncated);
}

TEST_CASE("non-finite objectives are reported with the offending point") {
    SetExpr s(Interval::closed(0.0, 1.0));
    auto f = [](std::span<const double> p) {
        return p[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : p[0];
    };
    CHECK_THROWS_AS(extremize(s, f, Mode::Sup), std::runtime_error);
}
