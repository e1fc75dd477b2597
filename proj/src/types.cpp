#include "mdiq/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mdiq {

std::array<double, 16> ProtocolParams::to_array() const {
    return {mu_Za, nu_Za, mu_Xa, nu_Xa, P_Za_mu, P_Za_nu, P_Xa_mu, P_Xa_nu,
            mu_Zb, nu_Zb, mu_Xb, nu_Xb, P_Zb_mu, P_Zb_nu, P_Xb_mu, P_Xb_nu};
}

ProtocolParams ProtocolParams::from_array(const std::array<double, 16>& v) {
    ProtocolParams p;
    p.mu_Za = v[0];
    p.nu_Za = v[1];
    p.mu_Xa = v[2];
    p.nu_Xa = v[3];
    p.P_Za_mu = v[4];
    p.P_Za_nu = v[5];
    p.P_Xa_mu = v[6];
    p.P_Xa_nu = v[7];
    p.mu_Zb = v[8];
    p.nu_Zb = v[9];
    p.mu_Xb = v[10];
    p.nu_Xb = v[11];
    p.P_Zb_mu = v[12];
    p.P_Zb_nu = v[13];
    p.P_Xb_mu = v[14];
    p.P_Xb_nu = v[15];
    return p;
}

ProtocolParams ProtocolParams::swapped() const {
    const auto v = to_array();
    std::array<double, 16> w;
    for (std::size_t i = 0; i < 8; ++i) {
        w[i] = v[i + 8];
        w[i + 8] = v[i];
    }
    return from_array(w);
}

const std::array<std::string, 16>& param_field_names() {
    static const std::array<std::string, 16> names = {
        "mu_Za", "nu_Za", "mu_Xa", "nu_Xa",
        "P_Za_mu", "P_Za_nu", "P_Xa_mu", "P_Xa_nu",
        "mu_Zb", "nu_Zb", "mu_Xb", "nu_Xb",
        "P_Zb_mu", "P_Zb_nu", "P_Xb_mu", "P_Xb_nu"};
    return names;
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::domain_error(what);
}

bool finite(double v) { return std::isfinite(v); }

} // namespace

void validate(const CharlieConditions& c) {
    require(finite(c.dc) && c.dc >= 0.0 && c.dc < 1.0, "dc must be in [0, 1)");
    require(finite(c.eta_d) && c.eta_d >= 0.0 && c.eta_d <= 1.0,
            "eta_d must be in [0, 1]");
    require(finite(c.f_ec) && c.f_ec >= 1.0, "f_ec must be >= 1");
    require(finite(c.N) && c.N >= 1.0, "N must be >= 1");
}

void validate(const UserConditions& u) {
    require(finite(u.L_a) && u.L_a >= 0.0, "L_a must be >= 0");
    require(finite(u.L_b) && u.L_b >= 0.0, "L_b must be >= 0");
    require(finite(u.alpha) && u.alpha > 0.0, "alpha must be > 0");
}

void validate(const MisalignmentState& m) {
    require(finite(m.e_d) && m.e_d >= 0.0 && m.e_d <= 0.5,
            "e_d must be in [0, 0.5]");
    require(finite(m.delta_phi) && m.delta_phi >= 0.0 &&
                m.delta_phi <= 3.14159265358979323846 + 1e-12,
            "delta_phi must be in [0, pi]");
}

void validate_domain(const ProtocolParams& p) {
    const auto v = p.to_array();
    const auto& names = param_field_names();
    for (std::size_t i = 0; i < 16; ++i)
        require(finite(v[i]), names[i] + " must be finite");
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        for (std::size_t i = 0; i < 4; ++i)
            require(v[o + i] >= 0.0, names[o + i] + " must be >= 0");
        for (std::size_t i = 4; i < 8; ++i)
            require(v[o + i] >= 0.0 && v[o + i] <= 1.0,
                    names[o + i] + " must be in [0, 1]");
    }
    require(p.vacuum_prob_a() >= 0.0, "Alice setting probabilities exceed 1");
    require(p.vacuum_prob_b() >= 0.0, "Bob setting probabilities exceed 1");
}

bool is_feasible(const ProtocolParams& p) {
    const auto v = p.to_array();
    for (double x : v)
        if (!finite(x)) return false;
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t o = side * 8;
        if (!(v[o + 0] > v[o + 1] && v[o + 1] >= 0.0)) return false; // Z: mu > nu
        if (!(v[o + 2] > v[o + 3] && v[o + 3] >= 0.0)) return false; // X: mu > nu
        double sum = 0;
        for (std::size_t i = 4; i < 8; ++i) {
            if (!(v[o + i] > 0.0 && v[o + i] < 1.0)) return false;
            sum += v[o + i];
        }
        if (!(sum < 1.0)) return false; // vacuum probability strictly positive
    }
    return true;
}

void validate_feasible(const ProtocolParams& p) {
    validate_domain(p);
    if (!is_feasible(p))
        throw std::domain_error(
            "params violate search-space invariants (signal > decoy and "
            "positive vacuum probability required)");
}

} // namespace mdiq
