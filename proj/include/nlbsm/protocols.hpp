#pragma once

// Closed-form fidelities and rates of SFG-heralded teleportation and of
// entanglement swapping with linear-optical (LO) and nonlinear-optical (NLO)
// Bell state measurements. Inputs are single-pair probabilities p_si and
// linear channel transmissions eta.

#include <algorithm>
#include <cmath>
#include <string_view>

#include "nlbsm/errors.hpp"
#include "nlbsm/sources.hpp"

namespace nlbsm::protocols {

enum class LossMode { Lossless, Balanced, Unbalanced };

inline std::string_view to_string(LossMode m) {
    switch (m) {
    case LossMode::Lossless: return "lossless";
    case LossMode::Balanced: return "balanced";
    case LossMode::Unbalanced: return "unbalanced";
    }
    return "?";
}

namespace detail {
inline void require_p(double p, bool allow_zero = true) {
    if (!(p <= 0.25) || !(allow_zero ? p >= 0.0 : p > 0.0)) {
        throw InvalidParameter(allow_zero ? "p_si must lie in [0, 1/4]" : "p_si must lie in (0, 1/4]");
    }
}
inline void require_eta(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidParameter("transmission must lie in [0, 1]");
}
inline double one_minus_eps(double p) { return 1.0 - epsilon_from_p_si(p); }
} // namespace detail

// ((1 + sqrt(1 - 4p)) / 2)^2 = (1 - e)^2
inline double teleport_fidelity_nlo(double p_si) {
    detail::require_p(p_si);
    const double h = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * p_si));
    return h * h;
}

// Pair probability at which the teleportation fidelity falls to `level`,
// by bisection on [0, 1/4].
inline double teleport_threshold_p_si(double level = 2.0 / 3.0, double tol = 1e-14) {
    if (!(level > teleport_fidelity_nlo(0.25) && level < 1.0)) throw InvalidParameter("level must lie in (1/4, 1)");
    double lo = 0.0;
    double hi = 0.25;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (teleport_fidelity_nlo(mid) > level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Leading order, two photons, lossless.
inline double swap_fidelity_lo_leading(double p_a, double p_b) {
    detail::require_p(p_a);
    detail::require_p(p_b);
    if (p_a == 0.0 && p_b == 0.0) throw InvalidParameter("both pair probabilities vanish");
    return p_a * p_b / (p_a * p_b + p_a * p_a + p_b * p_b);
}

struct FidelityForms {
    double exact = 0.0;        // before the eta << 1 approximation
    double approximate = 0.0;  // eta << 1 limit
    double approximation_error() const { return approximate - exact; }
};

// Both channels with transmission eta, events with exactly two photons at
// the analyzer; arbitrary pair numbers at the sources.
inline double lo_balanced_fidelity(double eps_a, double eps_b, double eta) {
    const double a = 1.0 - eps_a * (1.0 - eta);
    const double b = 1.0 - eps_b * (1.0 - eta);
    const double denom = eps_a * eps_a / (a * a * a) / b + eps_a / (a * a) * eps_b / (b * b) +
                         1.0 / a * eps_b * eps_b / (b * b * b);
    return eps_a * eps_b / denom;
}

inline FidelityForms swap_fidelity_lo_balanced_forms(double p_si, double eta) {
    detail::require_p(p_si, false);
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidParameter("eta must lie in (0, 1]");
    const double e = epsilon_from_p_si(p_si);
    const double q = 1.0 - e;
    return {lo_balanced_fidelity(e, e, eta), q * q * q * q / 3.0};
}

inline double swap_fidelity_lo_balanced(double p_si, double eta) {
    return swap_fidelity_lo_balanced_forms(p_si, eta).exact;
}

// Source A lossless (and attenuated), source B behind transmission eta.
inline double lo_unbalanced_fidelity(double eps_a, double eps_b, double eta) {
    const double b = 1.0 - eps_b * (1.0 - eta);
    const double denom = eta * eta * eps_b * eps_b / (b * b * b) + eta * eps_a * eps_b / (b * b) + eps_a * eps_a / b;
    return eta * eps_a * eps_b / denom;
}

struct UnbalancedOptimum {
    double fidelity = 0.0;
    double epsilon_a_opt = 0.0;
    double approximate = 0.0;  // (1/3)(1 - e_B)^2
};

// Maximizes lo_unbalanced_fidelity over the attenuation of source A:
// e_A = eta e_B / (1 - e_B (1 - eta)) gives (1/3)(1 - e_B (1 - eta))^2.
inline UnbalancedOptimum swap_fidelity_lo_unbalanced(double p_b, double eta) {
    detail::require_p(p_b, false);
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidParameter("eta must lie in (0, 1)");
    const double eb = epsilon_from_p_si(p_b);
    const double b = 1.0 - eb * (1.0 - eta);
    UnbalancedOptimum r;
    r.epsilon_a_opt = eta * eb / b;
    r.fidelity = lo_unbalanced_fidelity(r.epsilon_a_opt, eb, eta);
    r.approximate = (1.0 - eb) * (1.0 - eb) / 3.0;
    return r;
}

// Loss-corrected forms for events with one photon from each side reaching
// the nonlinear element.
inline double swap_fidelity_nlo_two_photon(double p_a, double p_b, double eta, LossMode mode) {
    detail::require_p(p_a);
    detail::require_p(p_b);
    detail::require_eta(eta);
    const double ea = epsilon_from_p_si(p_a);
    const double eb = epsilon_from_p_si(p_b);
    double fa = 1.0 - ea;
    double fb = 1.0 - eb;
    if (mode == LossMode::Balanced) fa = 1.0 - ea * (1.0 - eta);
    if (mode != LossMode::Lossless) fb = 1.0 - eb * (1.0 - eta);
    return fa * fa * fb * fb;
}

// Product of the two teleportation fidelities; the same for every loss mode.
inline double swap_fidelity_nlo(double p_a, double p_b, double eta = 1.0, LossMode mode = LossMode::Lossless) {
    detail::require_eta(eta);
    (void)mode;
    return teleport_fidelity_nlo(p_a) * teleport_fidelity_nlo(p_b);
}

inline FidelityForms swap_fidelity_nlo_forms(double p_a, double p_b, double eta, LossMode mode) {
    return {swap_fidelity_nlo_two_photon(p_a, p_b, eta, mode), swap_fidelity_nlo(p_a, p_b, eta, mode)};
}

struct Rates {
    double r_lo = 0.0;
    double r_nlo = 0.0;
};

// Unbalanced-loss swapping rates; LO attenuates source A to p_A = eta p_B.
inline Rates entanglement_rates(double p_b, double eta, double p_sfg, double clock) {
    detail::require_p(p_b);
    detail::require_eta(eta);
    if (!(p_sfg >= 0.0 && p_sfg <= 1.0)) throw InvalidParameter("p_sfg must lie in [0, 1]");
    if (!(clock >= 0.0)) throw InvalidParameter("clock rate must be non-negative");
    return {eta * eta * p_b * p_b * clock, p_sfg * eta * p_b * p_b * clock};
}

// Transmissions and detector efficiencies of the teleportation setup.
struct SystemEfficiencies {
    double t_A = 1.0;
    double t_s = 1.0;
    double t_i = 1.0;
    double t_Sigma = 1.0;
    double eta_i = 1.0;
    double eta_Sigma = 1.0;
    double p_si = 0.0;
    double p_sfg = 1.0;
    double mean_photon_number = 1.0;  // |alpha_A|^2 in the cavity

    void validate() const {
        for (double v : {t_A, t_s, t_i, t_Sigma, eta_i, eta_Sigma, p_sfg}) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("efficiencies must lie in [0, 1]");
        }
        detail::require_p(p_si);
        if (!(mean_photon_number >= 0.0)) throw InvalidParameter("mean photon number must be non-negative");
    }
};

// Heralded-coincidence event probabilities with at most two source pairs;
// primes mark the (1,1) survivors of a two-pair emission.
struct CoincidenceEvents {
    double p_1s_1i = 0.0;
    double p_2s_1i = 0.0;
    double p_1s_2i = 0.0;
    double p_2s_2i = 0.0;
    double p_1s_1i_prime = 0.0;
};

struct EstimatedFidelity {
    double f_superposition = 0.0;  // |+>, |->, |L>, |R>
    double f_poles = 0.0;          // |e>, |l>
    CoincidenceEvents events;
};

inline EstimatedFidelity estimated_teleport_fidelity(const SystemEfficiencies& sys) {
    sys.validate();
    const double p = sys.p_si;
    const double ts = sys.t_s;
    const double d = sys.t_i * sys.eta_i;
    const double common = 0.25 * sys.mean_photon_number * sys.p_sfg * sys.t_Sigma * sys.eta_Sigma;

    EstimatedFidelity r;
    CoincidenceEvents& ev = r.events;
    ev.p_1s_1i = common * p * ts * d;
    ev.p_2s_1i = common * p * p * 2.0 * ts * ts * 2.0 * d * (1.0 - d);
    ev.p_1s_2i = common * p * p * 2.0 * ts * (1.0 - ts) * d * d;
    ev.p_2s_2i = common * p * p * 2.0 * ts * ts * d * d;
    ev.p_1s_1i_prime = common * p * p * 2.0 * ts * (1.0 - ts) * 2.0 * d * (1.0 - d);

    const double denom = 1.0 + 2.0 * p * (2.0 - d);
    r.f_superposition = (1.0 + 2.0 * p) / denom;
    r.f_poles = (1.0 + p * (3.0 - d)) / denom;
    return r;
}

// Event-sum form of the same estimate, desired weights 1/2 (superposition)
// and 3/4 (poles) on the events with an unpaired signal-idler combination.
inline EstimatedFidelity estimated_teleport_fidelity_from_events(const CoincidenceEvents& ev) {
    const double all = ev.p_1s_1i + ev.p_2s_1i + ev.p_1s_2i + ev.p_2s_2i + ev.p_1s_1i_prime;
    const double sure = ev.p_1s_1i + ev.p_1s_2i + ev.p_2s_2i;
    EstimatedFidelity r;
    r.events = ev;
    if (all > 0.0) {
        r.f_superposition = (sure + 0.5 * (ev.p_2s_1i + ev.p_1s_1i_prime)) / all;
        r.f_poles = (sure + 0.75 * (ev.p_2s_1i + ev.p_1s_1i_prime)) / all;
    }
    return r;
}

// F = (1 + V) / 2
inline double fidelity_from_visibility(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("visibility must lie in [0, 1]");
    return 0.5 * (1.0 + v);
}

} // namespace nlbsm::protocols
