#include "mdiq/optimize.hpp"

#include "mdiq/model.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mdiq;

namespace {

SearchBox unit_box(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

} // namespace

TEST_CASE("lsa converges on a separable quadratic") {
    // known argmax at 0.3 per coordinate
    auto quad = [](const std::vector<double>& x) {
        double s = 0;
        for (double v : x) s -= (v - 0.3) * (v - 0.3);
        return s;
    };
    VectorLsaConfig cfg; // step 0.01
    auto r = lsa_search(quad, std::vector<double>(16, 0.5), unit_box(16), cfg);
    CHECK(r.converged);
    for (double v : r.x) CHECK(std::abs(v - 0.3) <= 0.01 + 1e-12);
}

TEST_CASE("lsa leaves a constant objective untouched") {
    auto cst = [](const std::vector<double>&) { return 1.0; };
    const std::vector<double> init(16, 0.5);
    auto r = lsa_search(cst, init, unit_box(16), {});
    CHECK(r.converged);
    CHECK(r.accepted_moves == 0);
    CHECK(r.x == init);
}

TEST_CASE("lsa at a local maximum accepts no move") {
    auto quad = [](const std::vector<double>& x) {
        double s = 0;
        for (double v : x) s -= (v - 0.5) * (v - 0.5);
        return s;
    };
    auto r = lsa_search(quad, std::vector<double>(4, 0.5), unit_box(4), {});
    CHECK(r.accepted_moves == 0);
    CHECK(r.converged);
}

TEST_CASE("lsa rejects an out-of-bounds start and respects max_evals") {
    auto cst = [](const std::vector<double>&) { return 1.0; };
    CHECK_THROWS_AS(lsa_search(cst, std::vector<double>(4, 2.0), unit_box(4), {}),
                    std::domain_error);

    auto slope = [](const std::vector<double>& x) { return x[0]; };
    VectorLsaConfig tiny;
    tiny.max_evals = 10;
    auto r = lsa_search(slope, std::vector<double>(4, 0.1), unit_box(4), tiny);
    CHECK_FALSE(r.converged);
    CHECK(r.eval_count <= 10);
}

TEST_CASE("pso finds the sphere optimum with default settings") {
    std::vector<double> c(16);
    for (int i = 0; i < 16; ++i) c[i] = 0.2 + 0.04 * i;
    auto sphere = [&](const std::vector<double>& x) {
        double s = 0;
        for (int i = 0; i < 16; ++i) s -= (x[i] - c[i]) * (x[i] - c[i]);
        return s;
    };
    VectorPsoConfig cfg;
    cfg.seed = 7;
    auto r = pso_search(sphere, unit_box(16), cfg);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(r.x[i] - c[i]) < 1e-3);
}

TEST_CASE("pso is deterministic given the seed") {
    auto obj = [](const std::vector<double>& x) {
        return -(x[0] - 0.4) * (x[0] - 0.4) + std::sin(5 * x[1]);
    };
    VectorPsoConfig cfg;
    cfg.seed = 42;
    cfg.swarm_size = 12;
    cfg.iterations = 40;
    auto a = pso_search(obj, unit_box(2), cfg);
    auto b = pso_search(obj, unit_box(2), cfg);
    CHECK(a.x == b.x); // bit-identical
    CHECK(a.value == b.value);
    CHECK(a.eval_count == b.eval_count);
}

TEST_CASE("degenerate pso run returns the best initial particle") {
    auto obj = [](const std::vector<double>& x) { return x[0]; };
    VectorPsoConfig cfg;
    cfg.swarm_size = 2;
    cfg.iterations = 1;
    cfg.seed = 3;
    auto r = pso_search(obj, unit_box(3), cfg);
    CHECK(r.eval_count == 2);
    CHECK(r.value == r.x[0]); // value is the objective at the returned point
}

TEST_CASE("pso best value never decreases with more iterations") {
    auto obj = [](const std::vector<double>& x) {
        return std::sin(7 * x[0]) * std::cos(3 * x[1]) - (x[2] - 0.6) * (x[2] - 0.6);
    };
    double prev = -1e18;
    for (std::size_t it : {1u, 5u, 20u, 60u}) {
        VectorPsoConfig cfg;
        cfg.seed = 11;
        cfg.swarm_size = 16;
        cfg.iterations = it;
        auto r = pso_search(obj, unit_box(3), cfg);
        CHECK(r.value >= prev - 1e-15);
        prev = r.value;
    }
}

TEST_CASE("pso evaluates only points inside the box") {
    bool violated = false;
    auto obj = [&](const std::vector<double>& x) {
        for (double v : x)
            if (v < -1e-12 || v > 1.0 + 1e-12) violated = true;
        return -x[0];
    };
    VectorPsoConfig cfg;
    cfg.seed = 5;
    cfg.swarm_size = 10;
    cfg.iterations = 30;
    pso_search(obj, unit_box(5), cfg);
    CHECK_FALSE(violated);
}

TEST_CASE("repair always lands in the feasible search set") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    const ParamBounds b = ParamBounds::defaults();
    for (int t = 0; t < 5000; ++t) {
        std::array<double, 16> v;
        for (auto& x : v) x = u(rng);
        const ProtocolParams p = repair_feasible(ProtocolParams::from_array(v), b);
        CHECK(search_feasible(p, b));
    }
    // a feasible point passes through unchanged
    const ProtocolParams good = default_initial(b);
    const ProtocolParams same = repair_feasible(good, b);
    CHECK(good.to_array() == same.to_array());
}

TEST_CASE("symmetric projection ties Bob to Alice") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<double, 16> v;
    for (auto& x : v) x = u(rng);
    const ProtocolParams p = ProtocolParams::from_array(v);
    const ProtocolParams s = symmetric_project(p);
    const auto w = s.to_array();
    for (int i = 0; i < 8; ++i) {
        CHECK(w[i] == v[i]);
        CHECK(w[i + 8] == v[i]);
    }
    CHECK(symmetric_project(s).to_array() == w); // idempotent
}

TEST_CASE("typed optimizers keep every evaluated point feasible") {
    const ParamBounds b = ParamBounds::defaults();
    bool all_ok = true;
    auto objective = [&](const ProtocolParams& p) {
        if (!search_feasible(p, b)) all_ok = false;
        const auto v = p.to_array();
        double s = 0;
        for (double x : v) s -= (x - 0.2) * (x - 0.2);
        return s;
    };
    PsoConfig cfg;
    cfg.swarm_size = 12;
    cfg.iterations = 25;
    cfg.seed = 13;
    pso_optimize(objective, cfg);
    CHECK(all_ok);

    all_ok = true;
    LsaConfig lcfg;
    lcfg.max_evals = 3000;
    lsa_optimize(objective, default_initial(b), lcfg);
    CHECK(all_ok);

    ProtocolParams infeasible; // zero everywhere: violates signal > decoy
    CHECK_THROWS_AS(lsa_optimize(objective, infeasible, lcfg), std::domain_error);
}

TEST_CASE("lsa certificate survives the 32-probe check on the key-rate objective") {
    CharlieConditions charlie;
    const UserConditions users{12, 26, 0.2};
    const MisalignmentState mis{0.015, 0.0};
    auto objective = [&](const ProtocolParams& p) {
        return key_rate(p, charlie, users, mis);
    };
    LsaConfig cfg;
    const OptResult r = lsa_optimize(objective, default_initial(cfg.bounds), cfg);
    CHECK(r.converged);
    CHECK(r.rate == doctest::Approx(objective(r.params)).epsilon(1e-12));

    auto v = r.params.to_array();
    const SearchBox box = cfg.bounds.box16();
    int improving = 0;
    for (int c = 0; c < 16; ++c) {
        for (double dir : {1.0, -1.0}) {
            auto w = v;
            w[c] += dir * cfg.step * (box.hi[c] - box.lo[c]);
            if (w[c] < box.lo[c] || w[c] > box.hi[c]) continue;
            const ProtocolParams q = ProtocolParams::from_array(w);
            if (!search_feasible(q, cfg.bounds)) continue;
            if (objective(q) > r.rate + cfg.tolerance) ++improving;
        }
    }
    CHECK(improving == 0);
}

TEST_CASE("asymmetric search never loses to the tied search") {
    CharlieConditions charlie;
    const MisalignmentState mis{0.015, 0.0};
    PsoConfig pc;
    pc.swarm_size = 20;
    pc.iterations = 60;
    pc.seed = 21;
    OptimizeStrategy strategy = OptimizeStrategy::pso_with(pc);
    strategy.lsa.max_evals = 30000;
    for (const auto& [la, lb] : {std::pair{8.0, 8.0}, {5.0, 30.0}, {25.0, 12.0}}) {
        const UserConditions users{la, lb, 0.2};
        const OptResult asym =
            optimize_pair(charlie, users, mis, SearchMode::Asymmetric, strategy);
        const OptResult sym =
            optimize_pair(charlie, users, mis, SearchMode::Symmetric, strategy);
        CHECK(asym.rate >= sym.rate - 1e-12);
        // symmetric mode really returns tied parameters
        const auto v = sym.params.to_array();
        for (int i = 0; i < 8; ++i) CHECK(v[i] == v[i + 8]);
    }
}
