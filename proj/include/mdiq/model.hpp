#pragma once

#include "mdiq/types.hpp"

#include <stdexcept>

// Analytical weak-coherent-pulse MDI-QKD model: 50/50 beamsplitter
// Bell-state measurement between two threshold detectors with efficiency
// eta_d and dark count probability dc. Phase drift enters the X basis only,
// as an effective misalignment e_X = e_d + (1 - 2 e_d) sin^2(delta_phi / 2).

namespace mdiq {

// Raised when observed statistics cannot have come from Poisson mixing of
// any yield table (decoy estimation has no feasible answer).
struct EstimationInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// eta_d * 10^(-alpha L / 10)
double channel_transmittance(double L_km, double alpha_db_per_km, double eta_d);

// H(x) = -x log2 x - (1-x) log2(1-x), with H(0) = H(1) = 0.
double binary_entropy(double x);

// Modified Bessel function of the first kind, order zero (series).
double bessel_i0(double x);

// Gain/QBER model for one intensity pair in one basis. ia, ib are the mean
// photon numbers leaving the sources; eta_a, eta_b the end-to-end
// transmittances (detector efficiency included); e_x the effective X-basis
// misalignment described above.
PairStats z_pair_stats(double ia, double ib, double eta_a, double eta_b,
                       double dc, double e_d);
PairStats x_pair_stats(double ia, double ib, double eta_a, double eta_b,
                       double dc, double e_x);

// Fills the per-setting gain/QBER tables for both bases (summary fields are
// left zero; observed_summary computes them). Pure in all inputs.
ObservedStats gains_and_errors(const ProtocolParams& p,
                               const CharlieConditions& charlie,
                               const UserConditions& users,
                               const MisalignmentState& mis);

// Inputs of the decoy estimation for one basis: the 3x3 gain and
// error-weighted-gain tables over settings {mu, nu, vacuum} and the two
// users' signal/decoy intensities.
struct BasisGains {
    double Q[3][3]{};  // gains
    double EQ[3][3]{}; // QBER * gain
    double mu_a = 0, nu_a = 0;
    double mu_b = 0, nu_b = 0;
};

// Optional statistical-fluctuation knob: when n_sigma > 0, every observed
// gain is widened to a +- n_sigma standard-deviation interval using the
// pulse-pair counts N * prob_a[i] * prob_b[j] before the bounds are formed.
// n_sigma = 0 is the asymptotic mode used by default.
struct Fluctuation {
    double n_sigma = 0;
    double N = 0;
    std::array<double, 3> prob_a{}; // probability of each setting, {mu, nu, vac}
    std::array<double, 3> prob_b{};
};

struct DecoyBounds {
    double Y11_lower = 0; // lower bound on the single-photon-pair yield
    double e11_upper = 1; // upper bound on the single-photon-pair error
};

// Three-intensity decoy estimation. Valid for any gains produced by Poisson
// mixing of a yield table: Y11_lower <= Y[1][1] and e11_upper >= e[1][1],
// both clamped to [0, 1]. Throws EstimationInfeasible when the gains violate
// the mixing inequalities beyond numerical noise (asymptotic mode only).
DecoyBounds decoy_bounds(const BasisGains& g, const Fluctuation& fluct = {});

// Extracts one basis' decoy inputs from a full stats table.
BasisGains basis_gains(const ObservedStats& stats, Basis basis,
                       const ProtocolParams& p);

// Secure key rate per pulse pair, >= 0. Composes gains_and_errors,
// decoy_bounds and binary_entropy.
double key_rate(const ProtocolParams& p, const CharlieConditions& charlie,
                const UserConditions& users, const MisalignmentState& mis,
                double n_sigma = 0);

// Full statistics including the (e11_X, E_mu_Z, rate) summary triple.
ObservedStats observed_summary(const ProtocolParams& p,
                               const CharlieConditions& charlie,
                               const UserConditions& users,
                               const MisalignmentState& mis,
                               double n_sigma = 0);

// Poisson mixing of a synthetic yield table into per-setting gains: the
// decoy-oracle substrate. Settings are {mu, nu, 0} per user.
BasisGains poisson_mixed_gains(const YieldTable& t, double mu_a, double nu_a,
                               double mu_b, double nu_b);

} // namespace mdiq
