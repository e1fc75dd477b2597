#pragma once

#include "mdiq/predictor.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

// Star-network provisioning and drift-recalibration simulation: n users
// connect to one untrusted relay, every unordered user pair keeps its own
// protocol parameters, misalignment drifts as a reflecting random walk and
// the estimator drives periodic recalibration.
//
// Latency accounting: wall latency is measured and informational; the
// event clock advances by a modeled latency (objective evaluations times a
// configured per-evaluation cost) so scenario outputs stay deterministic.

namespace mdiq {

struct NetUser {
    std::uint64_t id = 0;
    double L = 0;   // km to the relay
    double e_d = 0; // intrinsic preparation misalignment
};

struct PairKey {
    std::uint64_t a = 0, b = 0; // a < b
    auto operator<=>(const PairKey&) const = default;
};

struct PairEntry {
    ProtocolParams params;
    std::string strategy;
    double sim_latency_s = 0;
    double wall_latency_s = 0;
    std::uint64_t eval_count = 0;
};

struct NetworkState {
    std::vector<NetUser> users;
    std::map<PairKey, PairEntry> pair_table;
    std::map<PairKey, MisalignmentState> drift_table;
    double clock = 0; // seconds of modeled time
};

struct DriftModel {
    double sigma_phi = 0; // radians per tick
    double sigma_ed = 0;  // per tick
    // reflecting boundaries; defaults match the estimator training envelope
    double phi_lo = 0.0, phi_hi = 0.5;
    double ed_lo = 0.002, ed_hi = 0.02;
};

struct ProvisionStrategy {
    enum class Kind { Predictor, Lsa, Pso };
    Kind kind = Kind::Lsa;
    const ParamPredictor* predictor = nullptr; // required for Kind::Predictor
    LsaConfig lsa;
    PsoConfig pso;
    double per_eval_cost_s = 5e-6;  // modeled cost per objective evaluation
    double predictor_cost_s = 1e-4; // modeled cost per prediction
};

struct NetsimEnv {
    CharlieConditions charlie;
    double alpha = 0.2;
    double n_sigma = 0;
};

// Conditions a pair operates under: lengths by id order, intrinsic
// misalignment from composing the two users' independent flip rates.
UserConditions pair_conditions(const NetUser& a, const NetUser& b, double alpha);
double pair_intrinsic_ed(const NetUser& a, const NetUser& b);

// Provisions one pair per existing user; throws std::domain_error on a
// duplicate id. Advances the clock by the total modeled latency.
void user_join(NetworkState& state, const NetUser& user,
               const ProvisionStrategy& strategy, const NetsimEnv& env);

// One reflecting random-walk step for every pair, in canonical pair order.
void drift_tick(NetworkState& state, const DriftModel& model,
                std::mt19937_64& rng);

struct RecalReport {
    PairKey pair;
    bool feasible = false;
    double phi_true = 0, ed_true = 0;
    double phi_est = 0, ed_est = 0;
    double pre_rate = 0, post_rate = 0;
};

// Runs the estimator on the pair's current observed statistics and subtracts
// the estimate from the true drift (residual = estimation error). The e_d
// correction can only reach the estimator's training floor.
RecalReport recalibrate_pair(NetworkState& state, const PairKey& key,
                             const CalibEstimator& est, const NetsimEnv& env);

struct ScenarioConfig {
    std::size_t n_users = 10;
    std::size_t ticks = 50;
    std::size_t recal_period = 0; // in ticks; 0 disables recalibration
    DriftModel drift;
    double L_min = 5, L_max = 40;           // user placement range
    double user_ed_min = 0.0005, user_ed_max = 0.0015;
    double tick_seconds = 1.0;
    std::uint64_t seed = 1;
};

struct TickMetric {
    std::size_t tick = 0;
    double mean_rate = 0;
    std::size_t recalibrated = 0;
    double mean_abs_phi_residual = 0;
    double mean_abs_ed_residual = 0;
};

struct ScenarioMetrics {
    std::size_t pair_count = 0;
    double total_sim_latency_s = 0;
    double total_wall_latency_s = 0;
    double time_avg_rate = 0;
    std::vector<TickMetric> per_tick;
    std::vector<RecalReport> recal_reports;
};

// Provisions n users, then advances the drift for `ticks` steps with
// periodic recalibration. Deterministic given the seed (wall latency
// totals excepted).
ScenarioMetrics run_scenario(const ScenarioConfig& config,
                             const ProvisionStrategy& strategy,
                             const CalibEstimator* estimator,
                             const NetsimEnv& env);

} // namespace mdiq
