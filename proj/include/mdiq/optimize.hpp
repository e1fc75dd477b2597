#pragma once

#include "mdiq/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

// Black-box maximization over the 16-parameter space: coordinate local
// search with step refinement, and global-best particle swarm. Both are
// built on generic vector cores (also used for the tied 8-parameter
// symmetric search) with a ProtocolParams layer on top that enforces the
// search-space invariants.

namespace mdiq {

struct SearchBox {
    std::vector<double> lo, hi;
    std::size_t dim() const { return lo.size(); }
};

using VectorObjective = std::function<double(const std::vector<double>&)>;
using FeasiblePredicate = std::function<bool(const std::vector<double>&)>;
using RepairFn = std::function<void(std::vector<double>&)>;

struct VectorSearchResult {
    std::vector<double> x;
    double value = 0;
    std::uint64_t eval_count = 0;
    std::uint64_t accepted_moves = 0;
    bool converged = false;
};

// Per-coordinate step sizes are config.step in normalized units (fraction
// of the box width). A sweep cycles coordinates in order, probing +-step;
// a move is accepted when it improves the objective by more than
// `tolerance`. When a full sweep accepts nothing the step halves, down to
// step/256; the result is then re-certified at the original step, so the
// returned point admits no single-coordinate +-step move that improves by
// more than `tolerance`. Objective exceptions count as value 0.
struct VectorLsaConfig {
    double step = 0.01;
    double tolerance = 1e-12;
    std::uint64_t max_evals = 200000;
};

VectorSearchResult lsa_search(const VectorObjective& objective,
                              std::vector<double> initial, const SearchBox& box,
                              const VectorLsaConfig& config,
                              const FeasiblePredicate& feasible = nullptr);

// `iterations` counts objective sweeps over the swarm including the seeded
// initial evaluation, so iterations = 1 returns the best initial particle.
// Deterministic given seed; velocity clamped to velocity_clamp * box width.
struct VectorPsoConfig {
    std::size_t swarm_size = 50;
    std::size_t iterations = 200;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    double velocity_clamp = 0.2;
    std::uint64_t seed = 1;
};

// warm_starts, when given, preset the positions of the first particles
// (repaired like any other position); the rest initialize uniformly.
VectorSearchResult pso_search(const VectorObjective& objective,
                              const SearchBox& box,
                              const VectorPsoConfig& config,
                              const RepairFn& repair = nullptr,
                              const FeasiblePredicate& feasible = nullptr,
                              const std::vector<std::vector<double>>& warm_starts = {});

// ---------------------------------------------------------------------
// ProtocolParams layer

// Box in ProtocolParams array order plus the joint cap on each user's four
// setting probabilities (keeps the implied vacuum probability usable) and a
// minimum signal-decoy separation (the decoy estimate degenerates
// numerically as mu -> nu, which a rate maximizer would otherwise exploit).
struct ParamBounds {
    std::array<double, 16> lo{}, hi{};
    double prob_sum_max = 0.99;
    double min_intensity_gap = 0.01;
    static ParamBounds defaults(); // intensities [1e-4, 1], probabilities [1e-4, 0.99]
    SearchBox box16() const;
    SearchBox box8() const; // Alice-side coordinates, for the tied search
};

bool search_feasible(const ProtocolParams& p, const ParamBounds& b);

// Clip to bounds, restore signal > decoy by swapping, shed any probability
// mass above prob_sum_max proportionally to each coordinate's headroom.
ProtocolParams repair_feasible(ProtocolParams p, const ParamBounds& b);

// Interior cold-start point.
ProtocolParams default_initial(const ParamBounds& b = ParamBounds::defaults());

// Ties Bob's eight fields to Alice's (the 8-parameter baseline protocol).
ProtocolParams symmetric_project(const ProtocolParams& p);

using ParamObjective = std::function<double(const ProtocolParams&)>;

struct LsaConfig {
    double step = 0.01;
    double tolerance = 1e-12;
    std::uint64_t max_evals = 200000;
    ParamBounds bounds = ParamBounds::defaults();
};

struct PsoConfig {
    std::size_t swarm_size = 50;
    std::size_t iterations = 200;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    double velocity_clamp = 0.2;
    ParamBounds bounds = ParamBounds::defaults();
    std::uint64_t seed = 1;
    // start one particle at default_initial(bounds); the key-rate landscape
    // is mostly a zero plateau in finite-size mode, so a random swarm can
    // otherwise miss the positive basin entirely
    bool seed_heuristic = true;
};

struct OptResult {
    ProtocolParams params;
    double rate = 0;
    std::uint64_t eval_count = 0;
    std::uint64_t accepted_moves = 0;
    bool converged = false;
};

// Throws std::domain_error when the initial point is infeasible.
OptResult lsa_optimize(const ParamObjective& objective,
                       const ProtocolParams& initial, const LsaConfig& config);

OptResult pso_optimize(const ParamObjective& objective, const PsoConfig& config);

enum class SearchMode { Asymmetric, Symmetric };

struct OptimizeStrategy {
    enum class Kind { Lsa, Pso };
    Kind kind = Kind::Pso;
    ProtocolParams initial; // LSA start
    LsaConfig lsa;
    PsoConfig pso;

    static OptimizeStrategy lsa_from(const ProtocolParams& init,
                                     const LsaConfig& cfg = {});
    static OptimizeStrategy pso_with(const PsoConfig& cfg = {});
};

// Maximizes key_rate at the given conditions. Symmetric mode searches the
// tied subspace only. Asymmetric mode additionally polishes the tied
// result in the full space and returns the better candidate, so its rate
// never falls below the symmetric mode's for the same strategy and seed.
OptResult optimize_pair(const CharlieConditions& charlie,
                        const UserConditions& users,
                        const MisalignmentState& mis, SearchMode mode,
                        const OptimizeStrategy& strategy, double n_sigma = 0);

} // namespace mdiq
