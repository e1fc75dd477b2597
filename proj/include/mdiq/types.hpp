#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace mdiq {

// The 16-element decision vector: intensities and basis/intensity choice
// probabilities for both users. Array order (used by the optimizer sweep,
// the dataset columns and the predictor targets) is
//   [mu_Za, nu_Za, mu_Xa, nu_Xa, P_Za_mu, P_Za_nu, P_Xa_mu, P_Xa_nu,
//    mu_Zb, nu_Zb, mu_Xb, nu_Xb, P_Zb_mu, P_Zb_nu, P_Xb_mu, P_Xb_nu]
struct ProtocolParams {
    double mu_Za = 0, nu_Za = 0, mu_Xa = 0, nu_Xa = 0;
    double P_Za_mu = 0, P_Za_nu = 0, P_Xa_mu = 0, P_Xa_nu = 0;
    double mu_Zb = 0, nu_Zb = 0, mu_Xb = 0, nu_Xb = 0;
    double P_Zb_mu = 0, P_Zb_nu = 0, P_Xb_mu = 0, P_Xb_nu = 0;

    std::array<double, 16> to_array() const;
    static ProtocolParams from_array(const std::array<double, 16>& v);

    // Implied probability of sending vacuum (no basis attached).
    double vacuum_prob_a() const { return 1.0 - (P_Za_mu + P_Za_nu + P_Xa_mu + P_Xa_nu); }
    double vacuum_prob_b() const { return 1.0 - (P_Zb_mu + P_Zb_nu + P_Xb_mu + P_Xb_nu); }

    ProtocolParams swapped() const; // Alice <-> Bob
};

// Field names in array order, as used by the dataset CSV header.
const std::array<std::string, 16>& param_field_names();

// Relay-side fixed conditions.
struct CharlieConditions {
    double dc = 6.02e-8; // dark count probability per detector per gate
    double eta_d = 0.7;  // detector efficiency
    double f_ec = 1.16;  // error-correction inefficiency
    double N = 1e12;     // total pulse-pair count
};

struct UserConditions {
    double L_a = 0;      // km, Alice to relay
    double L_b = 0;      // km, Bob to relay
    double alpha = 0.2;  // fiber attenuation, dB/km
};

struct MisalignmentState {
    double e_d = 0;       // state-preparation misalignment probability
    double delta_phi = 0; // reference phase difference, radians
    bool operator==(const MisalignmentState&) const = default;
};

enum class Basis { Z, X };

// Intensity-setting index into the per-basis gain/QBER tables.
// Mu = signal, Nu = decoy, Vac = vacuum (shared between bases).
enum Intensity : std::size_t { Mu = 0, Nu = 1, Vac = 2 };

struct PairStats {
    double gain = 0; // announcement probability given the setting pair
    double qber = 0; // error rate among announced rounds, in [0, 0.5]
};

// Per-round statistics the protocol produces, plus the summary triple
// consumed by the calibration estimator.
struct ObservedStats {
    PairStats z[3][3]; // [alice setting][bob setting]
    PairStats x[3][3];
    double e11_X = 0;  // decoy upper bound on the single-photon X error
    double E_mu_Z = 0; // signal-signal Z-basis QBER
    double rate = 0;   // secure key rate per pulse pair
};

// Synthetic photon-number-pair yield/error table. Substrate for the decoy
// estimation oracle: gains are produced from it by Poisson mixing and the
// decoy bounds must bracket Y[1][1] and e[1][1].
struct YieldTable {
    std::size_t n_max = 0;
    std::array<std::array<double, 8>, 8> Y{}; // yield of (n, m) photon pair
    std::array<std::array<double, 8>, 8> e{}; // error rate of (n, m)
};

// Domain validation: throws std::domain_error on violations. These accept
// boundary cases (zero intensities) that the model can still evaluate.
void validate(const CharlieConditions& c);
void validate(const UserConditions& u);
void validate(const MisalignmentState& m);
void validate_domain(const ProtocolParams& p);

// Strict search-space feasibility: signal > decoy per user and basis,
// probabilities in (0,1) with strictly positive implied vacuum probability.
bool is_feasible(const ProtocolParams& p);
void validate_feasible(const ProtocolParams& p); // throws with field detail

} // namespace mdiq
