#include "mdiq/netsim.hpp"

#include "mdiq/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mdiq {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

double reflect(double x, double lo, double hi) {
    if (!(hi > lo)) return lo;
    const double span = hi - lo;
    double t = std::fmod(x - lo, 2.0 * span);
    if (t < 0) t += 2.0 * span;
    return t <= span ? lo + t : hi - (t - span);
}

const NetUser& user_by_id(const NetworkState& state, std::uint64_t id) {
    for (const auto& u : state.users)
        if (u.id == id) return u;
    throw std::domain_error("unknown user id");
}

} // namespace

UserConditions pair_conditions(const NetUser& a, const NetUser& b, double alpha) {
    const NetUser& first = a.id < b.id ? a : b;
    const NetUser& second = a.id < b.id ? b : a;
    return {first.L, second.L, alpha};
}

double pair_intrinsic_ed(const NetUser& a, const NetUser& b) {
    // independent flips: error when exactly one side flips
    return a.e_d * (1.0 - b.e_d) + b.e_d * (1.0 - a.e_d);
}

void user_join(NetworkState& state, const NetUser& user,
               const ProvisionStrategy& strategy, const NetsimEnv& env) {
    for (const auto& u : state.users)
        if (u.id == user.id) throw std::domain_error("duplicate user id");

    double joined_latency = 0;
    for (const auto& other : state.users) {
        const PairKey key{std::min(other.id, user.id), std::max(other.id, user.id)};
        const UserConditions uc = pair_conditions(other, user, env.alpha);
        const double ed0 = pair_intrinsic_ed(other, user);
        const MisalignmentState baseline{ed0, 0.0};

        PairEntry entry;
        const auto t0 = std::chrono::steady_clock::now();
        switch (strategy.kind) {
        case ProvisionStrategy::Kind::Predictor: {
            if (!strategy.predictor)
                throw std::domain_error("predictor strategy without a predictor");
            entry.params =
                predict_params(*strategy.predictor, uc.L_a, uc.L_b, ed0).params;
            entry.strategy = "predictor";
            entry.sim_latency_s = strategy.predictor_cost_s;
            break;
        }
        case ProvisionStrategy::Kind::Lsa: {
            auto obj = [&](const ProtocolParams& p) {
                return key_rate(p, env.charlie, uc, baseline, env.n_sigma);
            };
            const OptResult r = lsa_optimize(
                obj, default_initial(strategy.lsa.bounds), strategy.lsa);
            entry.params = r.params;
            entry.eval_count = r.eval_count;
            entry.strategy = "lsa";
            entry.sim_latency_s = double(r.eval_count) * strategy.per_eval_cost_s;
            break;
        }
        case ProvisionStrategy::Kind::Pso: {
            auto obj = [&](const ProtocolParams& p) {
                return key_rate(p, env.charlie, uc, baseline, env.n_sigma);
            };
            PsoConfig pso = strategy.pso;
            pso.seed = mix(strategy.pso.seed, key.a * 1000003 + key.b);
            OptResult r = pso_optimize(obj, pso);
            r = lsa_optimize(obj, r.params, strategy.lsa);
            entry.params = r.params;
            entry.eval_count = r.eval_count;
            entry.strategy = "pso";
            entry.sim_latency_s = double(r.eval_count) * strategy.per_eval_cost_s;
            break;
        }
        }
        entry.wall_latency_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        joined_latency += entry.sim_latency_s;
        state.pair_table[key] = std::move(entry);
        state.drift_table[key] = MisalignmentState{ed0, 0.0};
    }
    state.users.push_back(user);
    state.clock += joined_latency;
}

void drift_tick(NetworkState& state, const DriftModel& model,
                std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& [key, mis] : state.drift_table) {
        const double dphi = gauss(rng);
        const double ded = gauss(rng);
        mis.delta_phi =
            reflect(mis.delta_phi + model.sigma_phi * dphi, model.phi_lo, model.phi_hi);
        mis.e_d = reflect(mis.e_d + model.sigma_ed * ded, model.ed_lo, model.ed_hi);
    }
}

RecalReport recalibrate_pair(NetworkState& state, const PairKey& key,
                             const CalibEstimator& est, const NetsimEnv& env) {
    const auto pair_it = state.pair_table.find(key);
    const auto drift_it = state.drift_table.find(key);
    if (pair_it == state.pair_table.end() || drift_it == state.drift_table.end())
        throw std::domain_error("unknown pair");

    const UserConditions uc = pair_conditions(
        user_by_id(state, key.a), user_by_id(state, key.b), env.alpha);
    MisalignmentState& drift = drift_it->second;

    RecalReport rep;
    rep.pair = key;
    rep.phi_true = drift.delta_phi;
    rep.ed_true = drift.e_d;

    const ObservedStats obs = observed_summary(pair_it->second.params,
                                               env.charlie, uc, drift,
                                               env.n_sigma);
    rep.pre_rate = obs.rate;
    if (!(obs.rate > 0.0)) {
        rep.feasible = false; // state unchanged
        rep.post_rate = obs.rate;
        return rep;
    }

    const MisalignmentEstimate e =
        estimate_misalignment(est, obs.e11_X, obs.E_mu_Z, obs.rate);
    rep.feasible = true;
    rep.phi_est = e.delta_phi;
    rep.ed_est = e.e_d;

    drift.delta_phi = std::max(0.0, drift.delta_phi - e.delta_phi);
    drift.e_d = std::max(est.ed_lo, drift.e_d - (e.e_d - est.ed_lo));

    rep.post_rate = key_rate(pair_it->second.params, env.charlie, uc, drift,
                             env.n_sigma);
    return rep;
}

ScenarioMetrics run_scenario(const ScenarioConfig& config,
                             const ProvisionStrategy& strategy,
                             const CalibEstimator* estimator,
                             const NetsimEnv& env) {
    NetworkState state;
    std::mt19937_64 place_rng(mix(config.seed, 0x05E2ULL));
    auto uniform = [&](double lo, double hi) {
        const double u =
            std::uniform_real_distribution<double>(0.0, 1.0)(place_rng);
        return lo + u * (hi - lo);
    };
    for (std::size_t i = 0; i < config.n_users; ++i) {
        NetUser u;
        u.id = i + 1;
        u.L = uniform(config.L_min, config.L_max);
        u.e_d = uniform(config.user_ed_min, config.user_ed_max);
        user_join(state, u, strategy, env);
    }

    ScenarioMetrics out;
    out.pair_count = state.pair_table.size();
    for (const auto& [key, entry] : state.pair_table) {
        out.total_sim_latency_s += entry.sim_latency_s;
        out.total_wall_latency_s += entry.wall_latency_s;
    }

    std::mt19937_64 drift_rng(mix(config.seed, 0xD21F7ULL));
    double rate_sum_over_ticks = 0;
    for (std::size_t tick = 1; tick <= config.ticks; ++tick) {
        drift_tick(state, config.drift, drift_rng);
        state.clock += config.tick_seconds;

        TickMetric tm;
        tm.tick = tick;

        if (estimator && config.recal_period > 0 &&
            tick % config.recal_period == 0) {
            double phi_res = 0, ed_res = 0;
            for (const auto& [key, entry] : state.pair_table) {
                RecalReport rep = recalibrate_pair(state, key, *estimator, env);
                if (rep.feasible) {
                    ++tm.recalibrated;
                    phi_res += std::abs(rep.phi_true - rep.phi_est);
                    ed_res += std::abs(rep.ed_true - rep.ed_est);
                }
                out.recal_reports.push_back(rep);
            }
            if (tm.recalibrated > 0) {
                tm.mean_abs_phi_residual = phi_res / double(tm.recalibrated);
                tm.mean_abs_ed_residual = ed_res / double(tm.recalibrated);
            }
        }

        double rate_sum = 0;
        for (const auto& [key, entry] : state.pair_table) {
            const UserConditions uc = pair_conditions(
                user_by_id(state, key.a), user_by_id(state, key.b), env.alpha);
            rate_sum += key_rate(entry.params, env.charlie, uc,
                                 state.drift_table.at(key), env.n_sigma);
        }
        tm.mean_rate = state.pair_table.empty()
                           ? 0.0
                           : rate_sum / double(state.pair_table.size());
        rate_sum_over_ticks += tm.mean_rate;
        out.per_tick.push_back(tm);
    }
    out.time_avg_rate =
        config.ticks > 0 ? rate_sum_over_ticks / double(config.ticks) : 0.0;
    return out;
}

} // namespace mdiq
