#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "svcf/containment.hpp"

using namespace svcf;
using contain::Event;
using models::Cell;
using models::Kind;
using models::ModelSpec;
using models::ThetaPoint;

namespace {

ModelSpec binary_spec() {
    ModelSpec s;
    s.kind = Kind::BinaryRoy;
    s.support = {0, 1};
    return s;
}

ModelSpec ordered_spec() {
    ModelSpec s;
    s.kind = Kind::OrderedChoice;
    s.support = {0, 3, 6};
    return s;
}

ModelSpec dynamic_spec() {
    ModelSpec s;
    s.kind = Kind::DynamicTwoPeriod;
    s.support = {0, 1};
    return s;
}

ModelSpec multi_spec() {
    ModelSpec s;
    s.kind = Kind::Multinomial;
    s.support = {1, 2, 3};
    s.J = 3;
    return s;
}

std::vector<Cell> binary_cells() {
    std::vector<Cell> cells;
    for (int d : {0, 1})
        for (int z : {0, 1}) cells.push_back(Cell{{d}, 0, {z}, -1});
    return cells;
}

} // namespace

TEST_CASE("binary containment matches an independent simulation") {
    auto spec = binary_spec();
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto events = contain::event_class(spec);
    for (int rep = 0; rep < 8; ++rep) {
        ThetaPoint th;
        th.mu = {unif(gen) - 0.5, unif(gen)};
        th.pi = {0.1 + 0.8 * unif(gen), 0.1 + 0.8 * unif(gen)};
        th.rho = unif(gen) * 1.7 - 0.85;
        for (const auto& cell : binary_cells()) {
            auto freq = oracle::mc_containment(spec, th, cell, events, 200000, 77 + rep);
            for (const auto& e : events) {
                double analytic = contain::containment_value(spec, th, cell, e);
                CHECK(analytic == Catch::Approx(freq[e.mask]).margin(0.006));
            }
        }
    }
}

TEST_CASE("ordered containment matches an independent simulation") {
    auto spec = ordered_spec();
    std::mt19937 gen(6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto events = contain::event_class(spec);
    REQUIRE(events.size() == 6);
    for (int rep = 0; rep < 6; ++rep) {
        ThetaPoint th;
        th.mu = {unif(gen) - 0.5, unif(gen)};
        th.pi = {0.1 + 0.8 * unif(gen), 0.1 + 0.8 * unif(gen)};
        th.rho = unif(gen) * 1.7 - 0.85;
        th.c_lo = -0.3 - unif(gen);
        th.c_hi = 0.3 + unif(gen);
        for (const auto& cell : binary_cells()) {
            auto freq = oracle::mc_containment(spec, th, cell, events, 200000, 911 + rep);
            for (const auto& e : events) {
                double analytic = contain::containment_value(spec, th, cell, e);
                CHECK(analytic == Catch::Approx(freq[e.mask]).margin(0.006));
            }
        }
    }
}

TEST_CASE("ordered closed forms reproduce brute-force aggregate extremes") {
    auto spec = ordered_spec();
    std::mt19937 gen(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        ThetaPoint th;
        th.mu = {unif(gen) - 0.5, unif(gen)};
        th.pi = {0.05 + 0.9 * unif(gen), 0.05 + 0.9 * unif(gen)};
        th.rho = unif(gen) * 1.8 - 0.9;
        th.c_lo = -0.3 - unif(gen);
        th.c_hi = 0.3 + unif(gen);
        Cell cell{{rep % 2}, 0, {(rep / 2) % 2}, -1};
        auto h = oracle::roy_h_range(spec, th, cell, 301);
        double glo = std::min(th.rho * h.lo, th.rho * h.hi);
        double ghi = std::max(th.rho * h.lo, th.rho * h.hi);
        double mu = th.mu[0] + th.mu[1] * cell.d[0];
        double s = std::sqrt(1.0 - th.rho * th.rho);
        auto F = [s](double t) { return num::normal_cdf(t / s); };
        auto C = [&](std::initializer_list<double> labels) {
            return contain::containment_value(spec, th, cell,
                                              Event::from_labels(spec, labels));
        };
        CHECK(C({0}) == Catch::Approx(F(th.c_lo - mu - ghi)).margin(1e-12));
        CHECK(C({6}) == Catch::Approx(1.0 - F(th.c_hi - mu - glo)).margin(1e-12));
        CHECK(C({0, 3}) == Catch::Approx(F(th.c_hi - mu - ghi)).margin(1e-12));
        CHECK(C({3, 6}) == Catch::Approx(1.0 - F(th.c_lo - mu - glo)).margin(1e-12));
        CHECK(C({0, 6}) == Catch::Approx(C({0}) + C({6})).margin(1e-15));
        CHECK(C({3}) ==
              Catch::Approx(std::max(0.0, F(th.c_hi - mu - ghi) - F(th.c_lo - mu - glo)))
                  .margin(1e-12));
    }
}

TEST_CASE("dynamic containment matches brute-force extremes and simulation") {
    auto spec = dynamic_spec();
    std::mt19937 gen(23);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto events = contain::event_class(spec);
    for (int rep = 0; rep < 6; ++rep) {
        ThetaPoint th;
        th.mu.resize(10);
        th.pi.resize(10);
        for (auto& m : th.mu) m = 0.1 + 0.8 * unif(gen);
        for (auto& p : th.pi) p = 0.1 + 0.8 * unif(gen);
        th.rho = unif(gen) * 1.6 - 0.8;
        Cell cell{{rep % 2, (rep / 2) % 2, (rep / 4) % 2}, 0, {0, 1}, -1};

        auto h = oracle::dynamic_h_range(spec, th, cell, 21);
        double ghi = std::max(th.rho * h.lo, th.rho * h.hi);
        double glo = std::min(th.rho * h.lo, th.rho * h.hi);
        double mu2 = th.mu[2 + cell.d[0] + 2 * cell.d[1] + 4 * cell.d[2]];
        double s = std::sqrt(1.0 - th.rho * th.rho);
        double c1 = contain::containment_value(spec, th, cell, Event::from_labels(spec, {1}));
        double c0 = contain::containment_value(spec, th, cell, Event::from_labels(spec, {0}));
        CHECK(c1 ==
              Catch::Approx(num::normal_cdf((num::latent_quantile(mu2) - ghi) / s)).margin(1e-12));
        CHECK(c0 ==
              Catch::Approx(1.0 - num::normal_cdf((num::latent_quantile(mu2) - glo) / s))
                  .margin(1e-12));

        auto freq = oracle::mc_containment(spec, th, cell, events, 200000, 1301 + rep);
        CHECK(c1 == Catch::Approx(freq[Event::from_labels(spec, {1}).mask]).margin(0.006));
        CHECK(c0 == Catch::Approx(freq[Event::from_labels(spec, {0}).mask]).margin(0.006));
    }
}

TEST_CASE("containment is monotone on the event lattice and dominated by capacity") {
    std::mt19937 gen(31);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto spec = ordered_spec();
    auto events = contain::event_class(spec);
    for (int rep = 0; rep < 30; ++rep) {
        ThetaPoint th;
        th.mu = {unif(gen) - 0.5, unif(gen)};
        th.pi = {0.05 + 0.9 * unif(gen), 0.05 + 0.9 * unif(gen)};
        th.rho = unif(gen) * 1.8 - 0.9;
        th.c_lo = -0.3 - unif(gen);
        th.c_hi = 0.3 + unif(gen);
        Cell cell{{rep % 2}, 0, {(rep / 2) % 2}, -1};
        for (const auto& a : events) {
            double ca = contain::containment_value(spec, th, cell, a);
            CHECK(ca <= contain::capacity_value(spec, th, cell, a) + 1e-12);
            for (const auto& b : events)
                if (a.subset_of(b))
                    CHECK(ca <= contain::containment_value(spec, th, cell, b) + 1e-12);
        }
        // disjoint unions can only gain mass
        double c0 = contain::containment_value(spec, th, cell, Event::from_labels(spec, {0}));
        double c3 = contain::containment_value(spec, th, cell, Event::from_labels(spec, {3}));
        double c03 = contain::containment_value(spec, th, cell, Event::from_labels(spec, {0, 3}));
        CHECK(c0 + c3 <= c03 + 1e-12);
    }
}

TEST_CASE("multinomial MC table keeps exact lattice identities under shared draws") {
    auto spec = multi_spec();
    ThetaPoint th;
    th.mu = {0.3, 0.0, -0.2, 0.8, 0.1, 0.4};
    th.pi = {0.4, 0.6};
    th.f_extra = {0.5, -0.3, 0.1};
    auto events = contain::event_class(spec);
    Cell cell{{1}, 0, {0}, -1};

    auto t1 = contain::mc_containment_table(spec, th, cell, events, 20000, 9);
    auto t2 = contain::mc_containment_table(spec, th, cell, events, 20000, 9);
    for (const auto& e : events) {
        REQUIRE(t1[e.mask].value == t2[e.mask].value);
        for (const auto& b : events)
            if (e.subset_of(b)) CHECK(t1[e.mask].value <= t1[b.mask].value);
    }

    // different cells use different streams
    Cell other{{1}, 0, {1}, -1};
    auto t3 = contain::mc_containment_table(spec, th, other, events, 20000, 9);
    bool any_diff = false;
    for (const auto& e : events) any_diff = any_diff || t3[e.mask].value != t1[e.mask].value;
    CHECK(any_diff);

    // table rows expose capacity as the exact conjugate of the shared draws
    auto rows = contain::containment_table(spec, th, {cell}, {.mc_draws = 20000, .seed = 9});
    REQUIRE(rows.size() == events.size());
    for (const auto& r : rows) {
        CHECK(r.has_se);
        CHECK(r.capacity == 1.0 - t1[r.event.complement().mask].value);
        CHECK(r.containment <= r.capacity + 1e-15);
    }
}

TEST_CASE("multinomial MC containment matches an independent oracle") {
    auto spec = multi_spec();
    std::mt19937 gen(41);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto events = contain::event_class(spec);
    for (int rep = 0; rep < 2; ++rep) {
        ThetaPoint th;
        th.mu = {unif(gen), unif(gen), unif(gen), unif(gen), unif(gen), unif(gen)};
        th.pi = {0.2 + 0.6 * unif(gen), 0.2 + 0.6 * unif(gen)};
        th.f_extra = {unif(gen) * 1.4 - 0.7, unif(gen) * 1.4 - 0.7, unif(gen) * 1.4 - 0.7};
        for (const auto& cell :
             {Cell{{1}, 0, {0}, -1}, Cell{{0}, 0, {1}, -1}}) {
            auto lib = contain::mc_containment_table(spec, th, cell, events, 20000, 5 + rep);
            auto ref = oracle::mc_containment_multinomial(spec, th, cell, events, 20000,
                                                          1000 + rep, 101);
            for (const auto& e : events)
                CHECK(lib[e.mask].value == Catch::Approx(ref[e.mask]).margin(0.02));
        }
    }
}

TEST_CASE("event class enumerates proper subsets and prunes redundant ordered events") {
    auto bspec = binary_spec();
    auto be = contain::event_class(bspec);
    REQUIRE(be.size() == 2);
    CHECK(be[0].mask == 0b01u);
    CHECK(be[1].mask == 0b10u);

    auto ospec = ordered_spec();
    CHECK(contain::event_class(ospec).size() == 6);
    auto pruned = contain::event_class(ospec, true);
    REQUIRE(pruned.size() == 4);
    CHECK(pruned[0].mask == 0b001u);
    CHECK(pruned[1].mask == 0b011u);
    CHECK(pruned[2].mask == 0b100u);
    CHECK(pruned[3].mask == 0b110u);

    CHECK(Event::from_labels(ospec, {0, 3}).label(ospec) == "{0,3}");
    CHECK(Event::from_labels(ospec, {6}).complement().label(ospec) == "{0,3}");

    ModelSpec wide;
    wide.kind = Kind::Multinomial;
    wide.support.assign(9, 0.0);
    CHECK_THROWS_AS(contain::event_class(wide), std::invalid_argument);

    ThetaPoint th;
    th.mu = {0.0, 1.0};
    th.pi = {0.5, 0.5};
    Cell cell{{1}, 0, {0}, -1};
    CHECK_THROWS_AS(
        contain::containment_value(bspec, th, cell, Event::from_indices(2, {0, 1})),
        std::invalid_argument);
}

TEST_CASE("containment table exports the documented csv shape") {
    auto spec = ordered_spec();
    ThetaPoint th;
    th.mu = {0.1, 0.4};
    th.pi = {0.3, 0.7};
    th.rho = 0.25;
    th.c_lo = -0.8;
    th.c_hi = 0.9;
    auto rows = contain::containment_table(spec, th, binary_cells(), {.prune = true});
    REQUIRE(rows.size() == 4 * 4);
    std::ostringstream os;
    contain::write_table_csv(os, spec, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "cell,event,containment,capacity,se");
    int count = 0;
    while (std::getline(is, line)) {
        ++count;
        CHECK(line.find("\"d=") == 0);
        CHECK(line.back() == ','); // closed forms leave the se field empty
    }
    CHECK(count == 16);
}
