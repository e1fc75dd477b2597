#include "mdiq/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdiq {

double channel_transmittance(double L_km, double alpha_db_per_km, double eta_d) {
    if (!(L_km >= 0.0) || !std::isfinite(L_km))
        throw std::domain_error("fiber length must be >= 0");
    if (!(alpha_db_per_km > 0.0))
        throw std::domain_error("attenuation must be > 0");
    if (!(eta_d >= 0.0 && eta_d <= 1.0))
        throw std::domain_error("detector efficiency must be in [0, 1]");
    return eta_d * std::pow(10.0, -alpha_db_per_km * L_km / 10.0);
}

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("binary_entropy argument must be in [0, 1]");
    double h = 0.0;
    if (x > 0.0) h -= x * std::log2(x);
    if (x < 1.0) h -= (1.0 - x) * std::log2(1.0 - x);
    return h;
}

double bessel_i0(double x) {
    const double t = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= t / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

namespace {

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

inline double normalized_qber(double eq, double q) {
    if (q <= 0.0) return 0.0;
    return std::min(0.5, std::max(0.0, eq / q));
}

inline double pois0(double lam) { return std::exp(-lam); }
inline double pois1(double lam) { return lam * std::exp(-lam); }
inline double pois2(double lam) { return 0.5 * lam * lam * std::exp(-lam); }

inline double poisson_pmf(int n, double lam) {
    if (lam == 0.0) return n == 0 ? 1.0 : 0.0;
    double p = std::exp(-lam);
    for (int k = 1; k <= n; ++k) p *= lam / k;
    return p;
}

} // namespace

PairStats z_pair_stats(double ia, double ib, double eta_a, double eta_b,
                       double dc, double e_d) {
    const double la = eta_a * ia;
    const double lb = eta_b * ib;
    const double mu_tot = la + lb;
    const double x = 0.5 * std::sqrt(la * lb);
    const double nd = 1.0 - dc;

    const double qc = 2.0 * nd * nd * std::exp(-0.5 * mu_tot) *
                      (1.0 - nd * std::exp(-0.5 * la)) *
                      (1.0 - nd * std::exp(-0.5 * lb));
    const double qe = 2.0 * dc * nd * nd * std::exp(-0.5 * mu_tot) *
                      (bessel_i0(2.0 * x) - nd * std::exp(-0.5 * mu_tot));

    PairStats s;
    s.gain = clamp01(qc + qe);
    s.qber = normalized_qber(e_d * qc + (1.0 - e_d) * qe, qc + qe);
    return s;
}

PairStats x_pair_stats(double ia, double ib, double eta_a, double eta_b,
                       double dc, double e_x) {
    const double la = eta_a * ia;
    const double lb = eta_b * ib;
    const double mu_tot = la + lb;
    const double x = 0.5 * std::sqrt(la * lb);
    const double y = (1.0 - dc) * std::exp(-0.25 * mu_tot);
    const double i0x = bessel_i0(x);
    const double i02x = bessel_i0(2.0 * x);

    const double q = 2.0 * y * y * (1.0 + 2.0 * y * y - 4.0 * y * i0x + i02x);
    const double eq = 0.5 * q - 2.0 * (0.5 - e_x) * y * y * (i02x - 1.0);

    PairStats s;
    s.gain = clamp01(q);
    s.qber = normalized_qber(eq, q);
    return s;
}

ObservedStats gains_and_errors(const ProtocolParams& p,
                               const CharlieConditions& charlie,
                               const UserConditions& users,
                               const MisalignmentState& mis) {
    validate_domain(p);
    validate(charlie);
    validate(users);
    validate(mis);

    const double eta_a = channel_transmittance(users.L_a, users.alpha, charlie.eta_d);
    const double eta_b = channel_transmittance(users.L_b, users.alpha, charlie.eta_d);

    const double sp = std::sin(0.5 * mis.delta_phi);
    const double e_x = mis.e_d + (1.0 - 2.0 * mis.e_d) * sp * sp;

    const double ints_z_a[3] = {p.mu_Za, p.nu_Za, 0.0};
    const double ints_z_b[3] = {p.mu_Zb, p.nu_Zb, 0.0};
    const double ints_x_a[3] = {p.mu_Xa, p.nu_Xa, 0.0};
    const double ints_x_b[3] = {p.mu_Xb, p.nu_Xb, 0.0};

    ObservedStats out;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            out.z[i][j] = z_pair_stats(ints_z_a[i], ints_z_b[j], eta_a, eta_b,
                                       charlie.dc, mis.e_d);
            out.x[i][j] = x_pair_stats(ints_x_a[i], ints_x_b[j], eta_a, eta_b,
                                       charlie.dc, e_x);
        }
    }
    return out;
}

namespace {

struct Interval {
    double lo = 0, hi = 0;
};

// Widens an observed proportion by n_sigma binomial standard deviations.
Interval widen(double q, double n_pairs, double n_sigma) {
    if (n_sigma <= 0.0) return {q, q};
    if (!(n_pairs >= 1.0)) return {0.0, 1.0};
    const double sd = std::sqrt(std::max(q * (1.0 - q), 0.0) / n_pairs);
    return {std::max(0.0, q - n_sigma * sd), std::min(1.0, q + n_sigma * sd)};
}

} // namespace

DecoyBounds decoy_bounds(const BasisGains& g, const Fluctuation& fluct) {
    if (!(g.nu_a > 0.0 && g.nu_b > 0.0 && g.mu_a > g.nu_a && g.mu_b > g.nu_b))
        throw std::domain_error("decoy estimation needs mu > nu > 0 per user");
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (!(g.Q[i][j] >= 0.0 && g.Q[i][j] <= 1.0))
                throw EstimationInfeasible("gain outside [0, 1]");
            if (!(g.EQ[i][j] >= -1e-15 && g.EQ[i][j] <= g.Q[i][j] + 1e-15))
                throw EstimationInfeasible("error-weighted gain outside [0, gain]");
        }

    Interval Q[3][3], EQ[3][3];
    const bool fs = fluct.n_sigma > 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double n_pairs =
                fs ? fluct.N * fluct.prob_a[i] * fluct.prob_b[j] : 0.0;
            Q[i][j] = widen(g.Q[i][j], n_pairs, fluct.n_sigma);
            EQ[i][j] = widen(g.EQ[i][j], n_pairs, fluct.n_sigma);
        }

    const double ia[2] = {g.mu_a, g.nu_a}; // index 0 = mu, 1 = nu
    const double ib[2] = {g.mu_b, g.nu_b};

    // Vacuum-subtracted gains: both users sent at least one photon.
    // qt(i, j) = Q_ij - e^-ia Q_vj - e^-ib Q_iv + e^-(ia+ib) Q_vv
    auto qt = [&](std::size_t i, std::size_t j) -> Interval {
        const double ea = pois0(ia[i]);
        const double eb = pois0(ib[j]);
        Interval r;
        r.lo = Q[i][j].lo - ea * Q[Vac][j].hi - eb * Q[i][Vac].hi +
               ea * eb * Q[Vac][Vac].lo;
        r.hi = Q[i][j].hi - ea * Q[Vac][j].lo - eb * Q[i][Vac].lo +
               ea * eb * Q[Vac][Vac].hi;
        return r;
    };

    double max_q = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) max_q = std::max(max_q, g.Q[i][j]);
    const double tol = 1e-12 * max_q + 1e-18;

    Interval qt_nn = qt(Nu, Nu), qt_mn = qt(Mu, Nu), qt_nm = qt(Nu, Mu);
    for (Interval* iv : {&qt_nn, &qt_mn, &qt_nm}) {
        if (!fs && iv->lo < -tol)
            throw EstimationInfeasible(
                "gains violate Poisson mixing inequalities");
        iv->lo = std::max(0.0, iv->lo);
        iv->hi = std::max(0.0, iv->hi);
    }

    const double a1 = pois1(g.nu_a), a2 = pois2(g.nu_a);
    const double a1p = pois1(g.mu_a), a2p = pois2(g.mu_a);
    const double b1 = pois1(g.nu_b), b2 = pois2(g.nu_b);
    const double b1p = pois1(g.mu_b), b2p = pois2(g.mu_b);
    const double den_a = a1 * a2p - a2 * a1p; // > 0 for mu > nu
    const double den_b = b1 * b2p - b2 * b1p;

    // Two-stage single-photon isolation, Alice reduced first: bound
    // W1(j) = sum_m P_j(m) Y_1m from the nu/mu rows, then apply the same
    // decoy step on Bob's side. The symmetric order is also formed and the
    // tighter (larger) of the two valid lower bounds kept.
    const double w1l = std::max(0.0, (a2p * qt_nn.lo - a2 * qt_mn.hi) / den_a);
    const double w1u = qt_nm.hi / a1;
    const double y11_ab = (b2p * w1l - b2 * w1u) / den_b;

    const double v1l = std::max(0.0, (b2p * qt_nn.lo - b2 * qt_nm.hi) / den_b);
    const double v1u = qt_mn.hi / b1;
    const double y11_ba = (a2p * v1l - a2 * v1u) / den_a;

    DecoyBounds out;
    out.Y11_lower = clamp01(std::max(y11_ab, y11_ba));

    // e11 Y11 <= vacuum-subtracted (E Q)_nu_nu / (a1 b1)
    const double ea = pois0(g.nu_a), eb = pois0(g.nu_b);
    double eqt_hi = EQ[Nu][Nu].hi - ea * EQ[Vac][Nu].lo - eb * EQ[Nu][Vac].lo +
                    ea * eb * EQ[Vac][Vac].hi;
    if (!fs && eqt_hi < -tol)
        throw EstimationInfeasible(
            "error statistics violate Poisson mixing inequalities");
    eqt_hi = std::max(0.0, eqt_hi);
    out.e11_upper = out.Y11_lower > 0.0
                        ? clamp01(eqt_hi / (a1 * b1 * out.Y11_lower))
                        : 1.0;
    return out;
}

BasisGains basis_gains(const ObservedStats& stats, Basis basis,
                       const ProtocolParams& p) {
    BasisGains g;
    const PairStats(*tab)[3] = basis == Basis::Z ? stats.z : stats.x;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            g.Q[i][j] = tab[i][j].gain;
            g.EQ[i][j] = tab[i][j].qber * tab[i][j].gain;
        }
    if (basis == Basis::Z) {
        g.mu_a = p.mu_Za;
        g.nu_a = p.nu_Za;
        g.mu_b = p.mu_Zb;
        g.nu_b = p.nu_Zb;
    } else {
        g.mu_a = p.mu_Xa;
        g.nu_a = p.nu_Xa;
        g.mu_b = p.mu_Xb;
        g.nu_b = p.nu_Xb;
    }
    return g;
}

namespace {

bool decoy_degenerate(const ProtocolParams& p) {
    return !(p.nu_Za > 0.0 && p.mu_Za > p.nu_Za && p.nu_Zb > 0.0 &&
             p.mu_Zb > p.nu_Zb && p.nu_Xa > 0.0 && p.mu_Xa > p.nu_Xa &&
             p.nu_Xb > 0.0 && p.mu_Xb > p.nu_Xb);
}

Fluctuation make_fluct(const ProtocolParams& p, const CharlieConditions& c,
                       Basis basis, double n_sigma) {
    Fluctuation f;
    f.n_sigma = n_sigma;
    f.N = c.N;
    if (basis == Basis::Z) {
        f.prob_a = {p.P_Za_mu, p.P_Za_nu, p.vacuum_prob_a()};
        f.prob_b = {p.P_Zb_mu, p.P_Zb_nu, p.vacuum_prob_b()};
    } else {
        f.prob_a = {p.P_Xa_mu, p.P_Xa_nu, p.vacuum_prob_a()};
        f.prob_b = {p.P_Xb_mu, p.P_Xb_nu, p.vacuum_prob_b()};
    }
    return f;
}

} // namespace

ObservedStats observed_summary(const ProtocolParams& p,
                               const CharlieConditions& charlie,
                               const UserConditions& users,
                               const MisalignmentState& mis, double n_sigma) {
    ObservedStats stats = gains_and_errors(p, charlie, users, mis);
    stats.E_mu_Z = stats.z[Mu][Mu].qber;

    if (decoy_degenerate(p)) {
        // No usable decoy structure: the single-photon term is vacuous.
        stats.e11_X = 1.0;
        stats.rate = 0.0;
        return stats;
    }

    const DecoyBounds bz = decoy_bounds(basis_gains(stats, Basis::Z, p),
                                        make_fluct(p, charlie, Basis::Z, n_sigma));
    const DecoyBounds bx = decoy_bounds(basis_gains(stats, Basis::X, p),
                                        make_fluct(p, charlie, Basis::X, n_sigma));
    stats.e11_X = bx.e11_upper;

    // an error bound at or above 1/2 yields no single-photon credit
    const double e11_capped = std::min(bx.e11_upper, 0.5);
    const double single = pois1(p.mu_Za) * pois1(p.mu_Zb) * bz.Y11_lower *
                          (1.0 - binary_entropy(e11_capped));
    const double ec_cost = charlie.f_ec * stats.z[Mu][Mu].gain *
                           binary_entropy(stats.z[Mu][Mu].qber);
    stats.rate =
        std::max(0.0, p.P_Za_mu * p.P_Zb_mu * (single - ec_cost));
    return stats;
}

double key_rate(const ProtocolParams& p, const CharlieConditions& charlie,
                const UserConditions& users, const MisalignmentState& mis,
                double n_sigma) {
    return observed_summary(p, charlie, users, mis, n_sigma).rate;
}

BasisGains poisson_mixed_gains(const YieldTable& t, double mu_a, double nu_a,
                               double mu_b, double nu_b) {
    BasisGains g;
    g.mu_a = mu_a;
    g.nu_a = nu_a;
    g.mu_b = mu_b;
    g.nu_b = nu_b;
    const double ints_a[3] = {mu_a, nu_a, 0.0};
    const double ints_b[3] = {mu_b, nu_b, 0.0};
    const int nmax = static_cast<int>(t.n_max);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double q = 0.0, eq = 0.0;
            for (int n = 0; n <= nmax; ++n)
                for (int m = 0; m <= nmax; ++m) {
                    const double w = poisson_pmf(n, ints_a[i]) *
                                     poisson_pmf(m, ints_b[j]) * t.Y[n][m];
                    q += w;
                    eq += w * t.e[n][m];
                }
            g.Q[i][j] = q;
            g.EQ[i][j] = eq;
        }
    return g;
}

} // namespace mdiq
