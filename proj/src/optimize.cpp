#include "mdiq/optimize.hpp"

#include "mdiq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mdiq {

namespace {

double guarded_eval(const VectorObjective& objective,
                    const std::vector<double>& x) {
    try {
        const double v = objective(x);
        return std::isfinite(v) ? v : 0.0;
    } catch (const std::exception&) {
        return 0.0; // failed evaluations never attract the search
    }
}

constexpr int kRefineLevels = 8;

} // namespace

VectorSearchResult lsa_search(const VectorObjective& objective,
                              std::vector<double> initial,
                              const SearchBox& box,
                              const VectorLsaConfig& config,
                              const FeasiblePredicate& feasible) {
    const std::size_t dim = box.dim();
    if (initial.size() != dim)
        throw std::domain_error("initial point dimension mismatch");
    if (!(config.step > 0.0) || !(config.tolerance >= 0.0) ||
        config.max_evals < 1)
        throw std::domain_error("invalid LSA configuration");
    for (std::size_t c = 0; c < dim; ++c) {
        if (!(box.lo[c] < box.hi[c]))
            throw std::domain_error("search box has empty coordinate range");
        if (initial[c] < box.lo[c] || initial[c] > box.hi[c])
            throw std::domain_error("initial point outside bounds");
    }
    if (feasible && !feasible(initial))
        throw std::domain_error("initial point infeasible");

    VectorSearchResult res;
    res.x = std::move(initial);
    res.value = guarded_eval(objective, res.x);
    res.eval_count = 1;

    const double min_step = config.step / double(1 << kRefineLevels);

    // One coordinate cycle at the given normalized step. Returns true when
    // some move improved by more than the tolerance.
    auto sweep = [&](double step) -> bool {
        bool accepted = false;
        std::vector<double> cand = res.x;
        for (std::size_t c = 0; c < dim && res.eval_count < config.max_evals;
             ++c) {
            const double width = box.hi[c] - box.lo[c];
            double best_val = res.value;
            double best_pos = res.x[c];
            // probe order: +step first so ties break toward it
            for (double dir : {+1.0, -1.0}) {
                const double pos = res.x[c] + dir * step * width;
                if (pos < box.lo[c] || pos > box.hi[c]) continue;
                cand[c] = pos;
                if (feasible && !feasible(cand)) continue;
                if (res.eval_count >= config.max_evals) break;
                const double v = guarded_eval(objective, cand);
                ++res.eval_count;
                if (v > best_val) {
                    best_val = v;
                    best_pos = pos;
                }
            }
            cand[c] = res.x[c];
            if (best_val > res.value + config.tolerance) {
                res.x[c] = best_pos;
                cand[c] = best_pos;
                res.value = best_val;
                ++res.accepted_moves;
                accepted = true;
            }
        }
        return accepted;
    };

    double step = config.step;
    while (res.eval_count < config.max_evals) {
        if (sweep(step)) continue;
        if (step > min_step) {
            step *= 0.5;
            continue;
        }
        // refinement exhausted: re-certify at the configured step
        if (sweep(config.step)) {
            step = config.step;
            continue;
        }
        res.converged = true;
        break;
    }
    return res;
}

VectorSearchResult pso_search(const VectorObjective& objective,
                              const SearchBox& box,
                              const VectorPsoConfig& config,
                              const RepairFn& repair,
                              const FeasiblePredicate& feasible,
                              const std::vector<std::vector<double>>& warm_starts) {
    const std::size_t dim = box.dim();
    if (config.swarm_size < 2 || config.iterations < 1)
        throw std::domain_error("swarm_size >= 2 and iterations >= 1 required");
    if (!(config.inertia >= 0.0 && config.inertia <= 1.0) ||
        config.cognitive < 0.0 || config.social < 0.0)
        throw std::domain_error("invalid PSO coefficients");
    for (std::size_t c = 0; c < dim; ++c)
        if (!(box.lo[c] < box.hi[c]))
            throw std::domain_error("search box has empty coordinate range");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    auto eval_point = [&](const std::vector<double>& x) -> double {
        if (feasible && !feasible(x)) return 0.0;
        return guarded_eval(objective, x);
    };

    const std::size_t n = config.swarm_size;
    std::vector<std::vector<double>> pos(n, std::vector<double>(dim));
    std::vector<std::vector<double>> vel(n, std::vector<double>(dim));
    std::vector<std::vector<double>> pbest_x(n);
    std::vector<double> pbest_v(n);

    VectorSearchResult res;
    for (std::size_t i = 0; i < n; ++i) {
        const bool preset = i < warm_starts.size();
        if (preset && warm_starts[i].size() != dim)
            throw std::domain_error("warm start dimension mismatch");
        for (std::size_t c = 0; c < dim; ++c) {
            const double width = box.hi[c] - box.lo[c];
            pos[i][c] = preset ? std::clamp(warm_starts[i][c], box.lo[c], box.hi[c])
                               : box.lo[c] + u01(rng) * width;
            vel[i][c] = (2.0 * u01(rng) - 1.0) * config.velocity_clamp * width;
        }
        if (repair) repair(pos[i]);
        pbest_x[i] = pos[i];
        pbest_v[i] = eval_point(pos[i]);
        ++res.eval_count;
        if (res.x.empty() || pbest_v[i] > res.value) {
            res.x = pos[i];
            res.value = pbest_v[i];
        }
    }

    for (std::size_t it = 1; it < config.iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < dim; ++c) {
                const double width = box.hi[c] - box.lo[c];
                const double r1 = u01(rng), r2 = u01(rng);
                double v = config.inertia * vel[i][c] +
                           config.cognitive * r1 * (pbest_x[i][c] - pos[i][c]) +
                           config.social * r2 * (res.x[c] - pos[i][c]);
                const double vmax = config.velocity_clamp * width;
                v = std::clamp(v, -vmax, vmax);
                vel[i][c] = v;
                pos[i][c] = std::clamp(pos[i][c] + v, box.lo[c], box.hi[c]);
            }
            if (repair) repair(pos[i]);
            const double val = eval_point(pos[i]);
            ++res.eval_count;
            if (val > pbest_v[i]) {
                pbest_v[i] = val;
                pbest_x[i] = pos[i];
            }
            if (val > res.value) { // global best updated in particle order
                res.value = val;
                res.x = pos[i];
                ++res.accepted_moves;
            }
        }
    }
    res.converged = true;
    return res;
}

// ---------------------------------------------------------------------

ParamBounds ParamBounds::defaults() {
    ParamBounds b;
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        for (std::size_t i = 0; i < 4; ++i) {
            b.lo[o + i] = 1e-4;
            b.hi[o + i] = 1.0;
        }
        for (std::size_t i = 4; i < 8; ++i) {
            b.lo[o + i] = 1e-4;
            b.hi[o + i] = 0.99;
        }
    }
    return b;
}

SearchBox ParamBounds::box16() const {
    return {std::vector<double>(lo.begin(), lo.end()),
            std::vector<double>(hi.begin(), hi.end())};
}

SearchBox ParamBounds::box8() const {
    return {std::vector<double>(lo.begin(), lo.begin() + 8),
            std::vector<double>(hi.begin(), hi.begin() + 8)};
}

bool search_feasible(const ProtocolParams& p, const ParamBounds& b) {
    const auto v = p.to_array();
    for (std::size_t i = 0; i < 16; ++i)
        if (v[i] < b.lo[i] || v[i] > b.hi[i]) return false;
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        if (v[o + 0] - v[o + 1] < b.min_intensity_gap) return false;
        if (v[o + 2] - v[o + 3] < b.min_intensity_gap) return false;
    }
    const double sum_a = p.P_Za_mu + p.P_Za_nu + p.P_Xa_mu + p.P_Xa_nu;
    const double sum_b = p.P_Zb_mu + p.P_Zb_nu + p.P_Xb_mu + p.P_Xb_nu;
    if (sum_a > b.prob_sum_max || sum_b > b.prob_sum_max) return false;
    return is_feasible(p);
}

namespace {

void fix_intensity_order(double& mu, double& nu, double lo_mu, double hi_mu,
                         double lo_nu, double hi_nu, double gap) {
    if (mu < nu) std::swap(mu, nu);
    mu = std::clamp(mu, lo_mu, hi_mu);
    nu = std::clamp(nu, lo_nu, hi_nu);
    if (mu - nu < gap) {
        // aim slightly inside the constraint so rounding cannot re-violate it
        const double target = gap * (1.0 + 1e-9);
        nu = std::max(lo_nu, mu - target);
        if (mu - nu < gap) mu = std::min(hi_mu, nu + target);
        if (mu - nu < gap) nu = std::max(lo_nu, mu - target); // box narrower than gap
    }
}

void shed_probability_excess(double* probs, const double* lo, double cap) {
    double sum = probs[0] + probs[1] + probs[2] + probs[3];
    if (sum <= cap) return;
    double headroom = 0.0;
    for (int i = 0; i < 4; ++i) headroom += probs[i] - lo[i];
    if (headroom <= 0.0) return;
    const double excess = (sum - cap) + 1e-12 * cap; // land strictly inside
    for (int i = 0; i < 4; ++i)
        probs[i] -= std::min(1.0, excess / headroom) * (probs[i] - lo[i]);
}

} // namespace

ProtocolParams repair_feasible(ProtocolParams p, const ParamBounds& b) {
    auto v = p.to_array();
    for (std::size_t i = 0; i < 16; ++i) v[i] = std::clamp(v[i], b.lo[i], b.hi[i]);
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        fix_intensity_order(v[o + 0], v[o + 1], b.lo[o + 0], b.hi[o + 0],
                            b.lo[o + 1], b.hi[o + 1], b.min_intensity_gap);
        fix_intensity_order(v[o + 2], v[o + 3], b.lo[o + 2], b.hi[o + 2],
                            b.lo[o + 3], b.hi[o + 3], b.min_intensity_gap);
        shed_probability_excess(&v[o + 4], &b.lo[o + 4], b.prob_sum_max);
    }
    return ProtocolParams::from_array(v);
}

ProtocolParams default_initial(const ParamBounds& b) {
    auto at = [&](std::size_t i, double t) {
        return b.lo[i] + t * (b.hi[i] - b.lo[i]);
    };
    std::array<double, 16> v;
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        v[o + 0] = at(o + 0, 0.45); // signal intensities
        v[o + 1] = at(o + 1, 0.05);
        v[o + 2] = at(o + 2, 0.30);
        v[o + 3] = at(o + 3, 0.05);
        v[o + 4] = at(o + 4, 0.35); // setting probabilities
        v[o + 5] = at(o + 5, 0.10);
        v[o + 6] = at(o + 6, 0.25);
        v[o + 7] = at(o + 7, 0.10);
    }
    return repair_feasible(ProtocolParams::from_array(v), b);
}

ProtocolParams symmetric_project(const ProtocolParams& p) {
    auto v = p.to_array();
    for (std::size_t i = 0; i < 8; ++i) v[i + 8] = v[i];
    return ProtocolParams::from_array(v);
}

namespace {

ProtocolParams from_vec16(const std::vector<double>& x) {
    std::array<double, 16> a;
    std::copy(x.begin(), x.end(), a.begin());
    return ProtocolParams::from_array(a);
}

ProtocolParams from_vec8(const std::vector<double>& x) {
    std::array<double, 16> a;
    for (std::size_t i = 0; i < 8; ++i) {
        a[i] = x[i];
        a[i + 8] = x[i];
    }
    return ProtocolParams::from_array(a);
}

OptResult to_opt_result(const VectorSearchResult& r, bool tied) {
    OptResult out;
    out.params = tied ? from_vec8(r.x) : from_vec16(r.x);
    out.rate = r.value;
    out.eval_count = r.eval_count;
    out.accepted_moves = r.accepted_moves;
    out.converged = r.converged;
    return out;
}

} // namespace

OptResult lsa_optimize(const ParamObjective& objective,
                       const ProtocolParams& initial, const LsaConfig& config) {
    const ParamBounds& b = config.bounds;
    if (!search_feasible(initial, b))
        throw std::domain_error("LSA initial point infeasible");
    auto vec_obj = [&](const std::vector<double>& x) {
        return objective(from_vec16(x));
    };
    auto vec_feas = [&](const std::vector<double>& x) {
        return search_feasible(from_vec16(x), b);
    };
    const auto arr = initial.to_array();
    VectorLsaConfig core{config.step, config.tolerance, config.max_evals};
    auto r = lsa_search(vec_obj, std::vector<double>(arr.begin(), arr.end()),
                        b.box16(), core, vec_feas);
    return to_opt_result(r, false);
}

OptResult pso_optimize(const ParamObjective& objective, const PsoConfig& config) {
    const ParamBounds& b = config.bounds;
    auto vec_obj = [&](const std::vector<double>& x) {
        return objective(from_vec16(x));
    };
    auto vec_feas = [&](const std::vector<double>& x) {
        return search_feasible(from_vec16(x), b);
    };
    auto vec_repair = [&](std::vector<double>& x) {
        const auto rep = repair_feasible(from_vec16(x), b).to_array();
        x.assign(rep.begin(), rep.end());
    };
    VectorPsoConfig core{config.swarm_size, config.iterations, config.inertia,
                         config.cognitive,  config.social,     config.velocity_clamp,
                         config.seed};
    std::vector<std::vector<double>> warm;
    if (config.seed_heuristic) {
        const auto h = default_initial(b).to_array();
        warm.push_back(std::vector<double>(h.begin(), h.end()));
    }
    auto r = pso_search(vec_obj, b.box16(), core, vec_repair, vec_feas, warm);
    return to_opt_result(r, false);
}

OptimizeStrategy OptimizeStrategy::lsa_from(const ProtocolParams& init,
                                            const LsaConfig& cfg) {
    OptimizeStrategy s;
    s.kind = Kind::Lsa;
    s.initial = init;
    s.lsa = cfg;
    return s;
}

OptimizeStrategy OptimizeStrategy::pso_with(const PsoConfig& cfg) {
    OptimizeStrategy s;
    s.kind = Kind::Pso;
    s.pso = cfg;
    return s;
}

namespace {

// Tied (8-coordinate) search shared by the symmetric mode and the
// asymmetric mode's subspace candidate; identical seeds keep the two
// bit-identical, which is what makes asymmetric >= symmetric structural.
VectorSearchResult tied_search(const ParamObjective& objective,
                               const OptimizeStrategy& strategy) {
    const ParamBounds& b =
        strategy.kind == OptimizeStrategy::Kind::Lsa ? strategy.lsa.bounds
                                                     : strategy.pso.bounds;
    auto vec_obj = [&](const std::vector<double>& x) {
        return objective(from_vec8(x));
    };
    auto vec_feas = [&](const std::vector<double>& x) {
        return search_feasible(from_vec8(x), b);
    };
    const SearchBox box = b.box8();

    if (strategy.kind == OptimizeStrategy::Kind::Lsa) {
        const auto arr = symmetric_project(strategy.initial).to_array();
        VectorLsaConfig core{strategy.lsa.step, strategy.lsa.tolerance,
                             strategy.lsa.max_evals};
        return lsa_search(vec_obj, std::vector<double>(arr.begin(), arr.begin() + 8),
                          box, core, vec_feas);
    }
    auto vec_repair = [&](std::vector<double>& x) {
        const auto rep = repair_feasible(from_vec8(x), b).to_array();
        x.assign(rep.begin(), rep.begin() + 8);
    };
    VectorPsoConfig core{strategy.pso.swarm_size, strategy.pso.iterations,
                         strategy.pso.inertia,    strategy.pso.cognitive,
                         strategy.pso.social,     strategy.pso.velocity_clamp,
                         strategy.pso.seed};
    std::vector<std::vector<double>> warm;
    if (strategy.pso.seed_heuristic) {
        const auto h = default_initial(b).to_array();
        warm.push_back(std::vector<double>(h.begin(), h.begin() + 8));
    }
    auto r = pso_search(vec_obj, box, core, vec_repair, vec_feas, warm);
    // polish in the tied subspace
    VectorLsaConfig polish{strategy.lsa.step, strategy.lsa.tolerance,
                           strategy.lsa.max_evals};
    auto p = lsa_search(vec_obj, r.x, box, polish, vec_feas);
    p.eval_count += r.eval_count;
    return p;
}

} // namespace

OptResult optimize_pair(const CharlieConditions& charlie,
                        const UserConditions& users,
                        const MisalignmentState& mis, SearchMode mode,
                        const OptimizeStrategy& strategy, double n_sigma) {
    validate(charlie);
    validate(users);
    validate(mis);
    ParamObjective objective = [&](const ProtocolParams& p) {
        return key_rate(p, charlie, users, mis, n_sigma);
    };

    const VectorSearchResult tied = tied_search(objective, strategy);
    if (mode == SearchMode::Symmetric) return to_opt_result(tied, true);

    OptResult full;
    if (strategy.kind == OptimizeStrategy::Kind::Lsa) {
        full = lsa_optimize(objective, strategy.initial, strategy.lsa);
    } else {
        full = pso_optimize(objective, strategy.pso);
        OptResult polished =
            lsa_optimize(objective, full.params, strategy.lsa);
        polished.eval_count += full.eval_count;
        full = polished;
    }

    OptResult lifted = lsa_optimize(objective, from_vec8(tied.x), strategy.lsa);
    lifted.eval_count += tied.eval_count;

    OptResult& best = lifted.rate > full.rate ? lifted : full;
    best.eval_count = full.eval_count + lifted.eval_count;
    return best;
}

} // namespace mdiq
