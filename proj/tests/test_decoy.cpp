#include "mdiq/model.hpp"

#include <doctest.h>

#include <random>

using namespace mdiq;

namespace {

YieldTable random_table(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    YieldTable t;
    t.n_max = 7;
    for (int n = 0; n <= 7; ++n)
        for (int m = 0; m <= 7; ++m) {
            t.Y[n][m] = u(rng);
            t.e[n][m] = 0.5 * u(rng);
        }
    return t;
}

} // namespace

TEST_CASE("all-zero gains give a zero yield bound") {
    BasisGains g;
    g.mu_a = g.mu_b = 0.4;
    g.nu_a = g.nu_b = 0.05;
    const DecoyBounds b = decoy_bounds(g);
    CHECK(b.Y11_lower == 0.0);
    CHECK(b.e11_upper == 1.0);
}

TEST_CASE("bounds bracket a hand-built table") {
    // oracle: mix a known table through Poisson statistics, then check the
    // estimates bracket the table's own (1,1) entries
    YieldTable t;
    t.n_max = 7;
    for (int n = 0; n <= 7; ++n)
        for (int m = 0; m <= 7; ++m) {
            t.Y[n][m] = 0.05 * (n + m);
            t.e[n][m] = 0.25;
        }
    t.Y[1][1] = 0.3;
    t.e[1][1] = 0.02;
    const BasisGains g = poisson_mixed_gains(t, 0.4, 0.05, 0.4, 0.05);
    const DecoyBounds b = decoy_bounds(g);
    CHECK(b.Y11_lower <= 0.3 + 1e-12);
    CHECK(b.e11_upper >= 0.02 - 1e-12);
    CHECK(b.Y11_lower > 0.0);
    CHECK(b.Y11_lower >= 0.0);
    CHECK(b.e11_upper <= 1.0);
}

TEST_CASE("bracketing holds over random tables") {
    std::mt19937_64 rng(4242);
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const YieldTable t = random_table(rng);
        const BasisGains g = poisson_mixed_gains(t, 0.4, 0.05, 0.4, 0.05);
        const DecoyBounds b = decoy_bounds(g);
        if (b.Y11_lower <= t.Y[1][1] + 1e-9 && b.e11_upper >= t.e[1][1] - 1e-9)
            ++ok;
    }
    CHECK(ok == 100);
}

TEST_CASE("bracketing holds for asymmetric intensities") {
    std::mt19937_64 rng(77);
    int ok = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const YieldTable t = random_table(rng);
        const BasisGains g = poisson_mixed_gains(t, 0.6, 0.11, 0.25, 0.03);
        const DecoyBounds b = decoy_bounds(g);
        if (b.Y11_lower <= t.Y[1][1] + 1e-9 && b.e11_upper >= t.e[1][1] - 1e-9)
            ++ok;
    }
    CHECK(ok == 50);
}

TEST_CASE("non-physical gains raise an estimation error") {
    BasisGains g;
    g.mu_a = g.mu_b = 0.4;
    g.nu_a = g.nu_b = 0.05;
    // vacuum rows produce announcements but the nu-nu pair never does:
    // impossible under Poisson mixing of any yield table
    g.Q[Vac][Nu] = 0.4;
    g.Q[Nu][Vac] = 0.4;
    g.Q[Nu][Nu] = 0.0;
    g.Q[Mu][Nu] = 0.5;
    g.Q[Nu][Mu] = 0.5;
    g.Q[Mu][Mu] = 0.5;
    CHECK_THROWS_AS(decoy_bounds(g), EstimationInfeasible);

    BasisGains h;
    h.mu_a = h.mu_b = 0.4;
    h.nu_a = h.nu_b = 0.05;
    h.Q[Nu][Nu] = 2.0; // gain outside [0, 1]
    CHECK_THROWS_AS(decoy_bounds(h), EstimationInfeasible);
}

TEST_CASE("degenerate intensities are a domain error") {
    BasisGains g;
    g.mu_a = 0.05;
    g.nu_a = 0.05; // needs mu > nu
    g.mu_b = 0.4;
    g.nu_b = 0.05;
    CHECK_THROWS_AS(decoy_bounds(g), std::domain_error);
    g.mu_a = 0.4;
    g.nu_a = 0.0; // needs a positive decoy
    CHECK_THROWS_AS(decoy_bounds(g), std::domain_error);
}

TEST_CASE("fluctuations only widen the bounds") {
    std::mt19937_64 rng(99);
    const YieldTable t = random_table(rng);
    const BasisGains g = poisson_mixed_gains(t, 0.4, 0.05, 0.4, 0.05);
    const DecoyBounds exact = decoy_bounds(g);

    Fluctuation f;
    f.N = 1e12;
    f.prob_a = {0.3, 0.1, 0.6};
    f.prob_b = {0.3, 0.1, 0.6};
    double prev_y = exact.Y11_lower;
    double prev_e = exact.e11_upper;
    for (double ns : {1.0, 3.0, 5.0, 10.0}) {
        f.n_sigma = ns;
        const DecoyBounds b = decoy_bounds(g, f);
        CHECK(b.Y11_lower <= prev_y + 1e-15);
        CHECK(b.e11_upper >= prev_e - 1e-15);
        CHECK(b.Y11_lower <= t.Y[1][1] + 1e-9); // still brackets
        CHECK(b.e11_upper >= t.e[1][1] - 1e-9);
        prev_y = b.Y11_lower;
        prev_e = b.e11_upper;
    }
}
