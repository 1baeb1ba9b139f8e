#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "svcf/school.hpp"

using namespace svcf;

namespace {

bool holds_pair(const rset::FiniteSet& fs, int a, int b) {
    return std::find(fs.elements.begin(), fs.elements.end(), std::vector<int>{a, b}) !=
           fs.elements.end();
}

std::vector<std::vector<int>> all_orders(int J) {
    std::vector<int> opts(static_cast<std::size_t>(J) + 1);
    for (int r = 0; r <= J; ++r) opts[r] = r;
    std::vector<std::vector<int>> out;
    do out.push_back(opts);
    while (std::next_permutation(opts.begin(), opts.end()));
    return out;
}

} // namespace

TEST_CASE("local preference branches match the hand constructions") {
    std::vector<double> c{0.5, 0.5, 0.5};

    SECTION("feasible j with matching reported pair is a singleton") {
        // every school clears its cutoff, only school 1 is listed: at j = 2 the
        // best reported option with and without 2 is school 1 on both sides
        std::vector<double> s{0.9, 0.8, 0.7};
        auto [a, b] = school::reported_local_pref({1}, s, c, 2);
        REQUIRE(a == 1);
        REQUIRE(b == 1);
        auto fs = school::cf_local_pref(s, {1}, c, 2);
        REQUIRE(fs.elements.size() == 1);
        REQUIRE(holds_pair(fs, 1, 1));
    }

    SECTION("feasible j with a silent feasible rival adds one pair per rival") {
        // school 1 listed and feasible, school 2 blocked, school 3 feasible but
        // unlisted: reported pair (1,0), silent rivals {3}
        std::vector<double> s{0.9, 0.2, 0.7};
        auto [a, b] = school::reported_local_pref({1}, s, c, 1);
        REQUIRE(a == 1);
        REQUIRE(b == 0);
        auto fs = school::cf_local_pref(s, {1}, c, 1);
        REQUIRE(fs.elements.size() == 2);
        REQUIRE(holds_pair(fs, 1, 0));
        REQUIRE(holds_pair(fs, 1, 3));
    }

    SECTION("infeasible unlisted j pairs itself with the reported runner-up") {
        // school 2 misses its cutoff and is unlisted, school 1 listed and
        // feasible: reported pair (1,1); 2 may still be preferred to 1
        std::vector<double> s{0.9, 0.2, 0.3};
        auto [a, b] = school::reported_local_pref({1}, s, c, 2);
        REQUIRE(a == 1);
        REQUIRE(b == 1);
        auto fs = school::cf_local_pref(s, {1}, c, 2);
        REQUIRE(fs.elements.size() == 2);
        REQUIRE(holds_pair(fs, 1, 1));
        REQUIRE(holds_pair(fs, 2, 1));
    }

    SECTION("infeasible listed j stays a singleton") {
        // the student asked for 2 and was rejected: nothing was withheld
        std::vector<double> s{0.9, 0.2, 0.3};
        auto fs = school::cf_local_pref(s, {2}, c, 2);
        REQUIRE(fs.elements.size() == 1);
        REQUIRE(holds_pair(fs, 2, 0));
    }

    SECTION("ties between a score and its cutoff are rejected") {
        std::vector<double> s{0.5, 0.8, 0.7};
        CHECK_THROWS_AS(school::cf_local_pref(s, {1}, c, 2), std::invalid_argument);
        CHECK_THROWS_AS(school::true_local_pref({1, 2, 3, 0}, s, c, 1), std::invalid_argument);
        CHECK_THROWS_AS(school::cf_local_pref({0.9, 0.8}, {1}, c, 1), std::invalid_argument);
    }
}

TEST_CASE("exhaustive truth table: the true local preference is always in the set") {
    // J = 3: sweep every strict preference order, every feasibility pattern,
    // every valid report at each slot cap, every school
    const int J = 3;
    std::vector<double> c{0.5, 0.5, 0.5};
    long checked = 0;
    for (const auto& order : all_orders(J)) {
        for (int pat = 0; pat < (1 << J); ++pat) {
            std::vector<double> s(J);
            for (int m = 0; m < J; ++m) s[m] = ((pat >> m) & 1) ? 0.8 : 0.2;
            for (int K = 1; K <= J; ++K) {
                for (const auto& rep : school::enumerate_reports(order, s, c, K)) {
                    REQUIRE(school::valid_report(rep, order, s, c, K));
                    for (int j = 1; j <= J; ++j) {
                        auto truth = school::true_local_pref(order, s, c, j);
                        auto fs = school::cf_local_pref(s, rep, c, j);
                        if (!holds_pair(fs, truth.first, truth.second)) {
                            INFO("order " << order[0] << order[1] << order[2] << order[3]
                                          << " pat " << pat << " K " << K << " j " << j);
                            REQUIRE(false);
                        }
                        ++checked;
                    }
                }
            }
        }
    }
    REQUIRE(checked > 3000);

    SECTION("a report that hides the best feasible school is invalid") {
        // order 1 > 2 > 0 > 3, schools 1 and 2 feasible: listing only 2 skips
        // the best feasible school 1
        std::vector<int> order{1, 2, 0, 3};
        std::vector<double> s{0.8, 0.8, 0.2};
        REQUIRE_FALSE(school::valid_report({2}, order, s, c, 1));
        REQUIRE(school::valid_report({1}, order, s, c, 1));
        // out-of-order and unacceptable listings are invalid too
        REQUIRE_FALSE(school::valid_report({2, 1}, order, s, c, 2));
        REQUIRE_FALSE(school::valid_report({1, 3}, order, s, c, 2));
    }
}

TEST_CASE("simulated match data is internally consistent") {
    school::MatchConfig cfg;
    cfg.J = 3;
    cfg.K = 1;
    cfg.cutoffs = {0.55, 0.45, 0.6};
    cfg.mu1 = {0.0, 1.0, 0.4, -0.3};
    cfg.rho = 0.5;
    cfg.n = 2000;
    cfg.seed = 11;
    auto sim = school::simulate_match(cfg);
    REQUIRE(sim.data.n() == cfg.n);

    const auto& y = sim.data.col("y");
    const auto& assigned = sim.data.col("assigned");
    const auto& p_len = sim.data.col("p_len");
    for (std::size_t i = 0; i < cfg.n; ++i) {
        std::vector<double> s;
        for (int m = 1; m <= cfg.J; ++m) s.push_back(sim.data.col("s" + std::to_string(m))[i]);
        std::vector<int> order;
        for (int r = 0; r <= cfg.J; ++r)
            order.push_back(static_cast<int>(sim.latents.col("q" + std::to_string(r))[i]));
        std::vector<int> rep;
        for (int m = 1; m <= static_cast<int>(p_len[i]); ++m)
            rep.push_back(static_cast<int>(sim.data.col("p" + std::to_string(m))[i]));

        REQUIRE(school::valid_report(rep, order, s, cfg.cutoffs, cfg.K));
        REQUIRE(static_cast<int>(assigned[i]) == school::assigned_option(rep, s, cfg.cutoffs));
        REQUIRE(std::isfinite(y[i]));
        for (int j = 1; j <= cfg.J; ++j) {
            auto truth = school::true_local_pref(order, s, cfg.cutoffs, j);
            auto fs = school::cf_local_pref(s, rep, cfg.cutoffs, j);
            REQUIRE(holds_pair(fs, truth.first, truth.second));
        }
    }
}

TEST_CASE("truthful full reports collapse the cutoff contrast to a point") {
    school::MatchConfig cfg;
    cfg.J = 3;
    cfg.K = 3;
    cfg.cutoffs = {0.5, 0.5, 0.5};
    cfg.mu1 = {0.0, 1.0, 0.4, -0.3};
    cfg.rho = 0.4;
    cfg.sigma = 0.25;
    cfg.all_acceptable = true;
    cfg.truthful = true;
    cfg.n = 20000;
    cfg.seed = 7;
    auto sim = school::simulate_match(cfg);

    auto sb = school::school_bounds(sim.data, cfg.J, 1, 2, cfg.cutoffs, 0.08);
    REQUIRE(sb.n_above > 50);
    REQUIRE(sb.n_below > 50);
    // full truthful lists leave nothing silent, so every window set is {(1,2)}
    REQUIRE(sb.singleton_above);
    REQUIRE(sb.singleton_below);
    REQUIRE(sb.contrast.lower == sb.contrast.upper);
    REQUIRE(sb.contrast.lower == Catch::Approx(sb.above_mean - sb.below_mean));
    // the nuisance level is common across the cutoff, so the point contrast
    // recovers mu1(1) - mu1(2) up to sampling noise
    REQUIRE(std::abs(sb.contrast.lower - (cfg.mu1[1] - cfg.mu1[2])) < 0.12);
    REQUIRE(sb.contrast.functional_id == "SCHOOL(j=1,k=2)");
}

TEST_CASE("strategic single-slot reports keep a zero effect inside the bounds") {
    school::MatchConfig cfg;
    cfg.J = 3;
    cfg.K = 1;
    cfg.cutoffs = {0.5, 0.55, 0.45};
    cfg.mu1 = {0.3, 0.3, 0.3, 0.3};
    cfg.rho = 0.5;
    cfg.sigma = 0.25;
    cfg.n = 30000;
    cfg.seed = 3;
    auto sim = school::simulate_match(cfg);

    // with one slot the reported runner-up is always the outside option
    auto sb = school::school_bounds(sim.data, cfg.J, 1, 0, cfg.cutoffs, 0.1);
    REQUIRE(sb.contrast.lower <= sb.contrast.upper);
    REQUIRE(sb.contrast.lower <= 0.0);
    REQUIRE(sb.contrast.upper >= 0.0);
    // silent feasible rivals above the cutoff make the window sets non-singleton
    REQUIRE_FALSE(sb.singleton_above);
}

TEST_CASE("point bounds tighten toward the truth as the sample grows") {
    school::MatchConfig cfg;
    cfg.J = 3;
    cfg.K = 3;
    cfg.cutoffs = {0.5, 0.5, 0.5};
    cfg.mu1 = {0.0, 0.8, 0.2, -0.4};
    cfg.rho = 0.3;
    cfg.sigma = 0.25;
    cfg.all_acceptable = true;
    cfg.truthful = true;
    cfg.seed = 19;

    double truth = cfg.mu1[1] - cfg.mu1[2];
    cfg.n = 1000;
    auto small = school::school_bounds(school::simulate_match(cfg).data, cfg.J, 1, 2,
                                       cfg.cutoffs, 0.12);
    cfg.n = 10000;
    auto big = school::school_bounds(school::simulate_match(cfg).data, cfg.J, 1, 2,
                                     cfg.cutoffs, 0.12);
    double err_small = std::abs(small.contrast.lower - truth);
    double err_big = std::abs(big.contrast.lower - truth);
    REQUIRE(err_small < 0.35);
    REQUIRE(err_big < err_small + 0.05);
    REQUIRE(err_big < 0.12);
}

TEST_CASE("school_bounds input errors") {
    school::MatchConfig cfg;
    cfg.J = 2;
    cfg.K = 2;
    cfg.cutoffs = {0.5, 0.5};
    cfg.mu1 = {0.0, 0.5, 0.5};
    cfg.all_acceptable = true;
    cfg.truthful = true;
    cfg.n = 50;
    auto sim = school::simulate_match(cfg);

    CHECK_THROWS_AS(school::school_bounds(sim.data, cfg.J, 1, 2, cfg.cutoffs, -0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(school::school_bounds(sim.data, cfg.J, 1, 1, cfg.cutoffs, 0.1),
                    std::invalid_argument);
    // a vanishing window has no observations on either side
    CHECK_THROWS_AS(school::school_bounds(sim.data, cfg.J, 1, 2, cfg.cutoffs, 1e-9),
                    std::runtime_error);
}
