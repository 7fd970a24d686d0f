#pragma once

// Coupled-mode model of a triply resonant chi(2) microring driven at modes a
// and b and emitting the sum frequency in mode c. All rates are angular
// (rad/s); wavelengths are in meters.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/qubits.hpp"

namespace nlbsm::cavity {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kHbar = 1.054571817e-34;

inline double angular_frequency(double wavelength) { return 2.0 * kPi * kSpeedOfLight / wavelength; }

struct CavityMode {
    double wavelength = 0.0;
    double kappa_total = 0.0;
    double kappa_external = 0.0;
    std::optional<int> azimuthal_number;

    double omega() const { return angular_frequency(wavelength); }
    double quality_factor() const { return omega() / kappa_total; }

    // kappa = omega / Q
    static CavityMode from_quality_factor(double wavelength, double q, double external_fraction,
                                          std::optional<int> m = std::nullopt) {
        if (!(wavelength > 0.0) || !(q > 0.0)) throw InvalidParameter("wavelength and Q must be positive");
        CavityMode mode;
        mode.wavelength = wavelength;
        mode.kappa_total = angular_frequency(wavelength) / q;
        mode.kappa_external = external_fraction * mode.kappa_total;
        mode.azimuthal_number = m;
        mode.validate();
        return mode;
    }

    void validate() const {
        if (!(wavelength > 0.0)) throw InvalidParameter("mode wavelength must be positive");
        if (!(kappa_external > 0.0 && kappa_external <= kappa_total)) {
            throw InvalidParameter("mode rates must satisfy 0 < kappa_external <= kappa_total");
        }
    }
};

enum class KappaAverage { ArithmeticMean, ModeAOnly };

struct CavityParams {
    CavityMode mode_a;
    CavityMode mode_b;
    CavityMode mode_c;
    double g = 0.0;  // single-photon nonlinear coupling, rad/s
    // When set, omega_c is treated as omega_a + omega_b and the measured
    // wavelengths must agree with that to within the tolerance.
    bool frequency_matched = true;
    double matching_tolerance = 2.0 * kPi * 5e9;

    double mismatch() const { return mode_c.omega() - mode_a.omega() - mode_b.omega(); }

    void validate() const {
        mode_a.validate();
        mode_b.validate();
        mode_c.validate();
        if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidParameter("nonlinear coupling g must be non-negative");
        if (frequency_matched && std::abs(mismatch()) > matching_tolerance) {
            throw InvalidParameter("mode frequencies violate omega_c = omega_a + omega_b");
        }
        if (mode_a.azimuthal_number && mode_b.azimuthal_number && mode_c.azimuthal_number) {
            const int d = *mode_c.azimuthal_number - *mode_a.azimuthal_number - *mode_b.azimuthal_number;
            if (d != 2 && d != -2) throw InvalidParameter("azimuthal numbers violate m_c = m_a + m_b +- 2");
        }
    }

    // omega_c - omega_pa - omega_pb for the given pump offsets.
    double sum_detuning(double delta_a, double delta_b) const {
        return (frequency_matched ? 0.0 : mismatch()) + delta_a + delta_b;
    }
};

// Pump offsets omega_a - omega_pa and omega_b - omega_pb.
struct Detunings {
    double delta_a = 0.0;
    double delta_b = 0.0;
};

struct SteadyState {
    cplx a;
    cplx b;
    cplx c;
    double output_power_c = 0.0;  // (kappa_ce/2) hbar omega_c |c|^2
    // Largest ratio of the neglected back-action terms g|b||c|, g|a||c| to
    // the linear damping of the pumped modes.
    double backaction_ratio = 0.0;
    bool weak_conversion = true;
};

// Leading order in g/kappa.
inline SteadyState steady_state(const CavityParams& p, const Detunings& det, double power_a, double power_b) {
    if (!(power_a >= 0.0) || !(power_b >= 0.0)) throw InvalidParameter("input powers must be non-negative");
    p.validate();
    const cplx i(0.0, 1.0);
    const double wa = p.mode_a.omega();
    const double wb = p.mode_b.omega();
    const double wc = p.mode_c.omega();
    const double a_in = std::sqrt(power_a / (kHbar * wa));
    const double b_in = std::sqrt(power_b / (kHbar * wb));

    SteadyState s;
    s.a = -i * std::sqrt(p.mode_a.kappa_external / 2.0) / (i * det.delta_a + p.mode_a.kappa_total / 2.0) * a_in;
    s.b = -i * std::sqrt(p.mode_b.kappa_external / 2.0) / (i * det.delta_b + p.mode_b.kappa_total / 2.0) * b_in;
    s.c = i * p.g * s.a * s.b / (i * p.sum_detuning(det.delta_a, det.delta_b) + p.mode_c.kappa_total / 2.0);
    s.output_power_c = p.mode_c.kappa_external / 2.0 * kHbar * wc * std::norm(s.c);

    const double abs_c = std::abs(s.c);
    double ratio = 0.0;
    if (std::abs(s.a) > 0.0) ratio = std::max(ratio, p.g * std::abs(s.b) * abs_c / (p.mode_a.kappa_total / 2.0 * std::abs(s.a)));
    if (std::abs(s.b) > 0.0) ratio = std::max(ratio, p.g * std::abs(s.a) * abs_c / (p.mode_b.kappa_total / 2.0 * std::abs(s.b)));
    s.backaction_ratio = ratio;
    s.weak_conversion = ratio < 0.1;
    return s;
}

namespace detail {
inline double lorentzian(double kappa_external, double kappa_total, double detuning) {
    return (kappa_external / 2.0) / (detuning * detuning + (kappa_total / 2.0) * (kappa_total / 2.0));
}
} // namespace detail

// P_c = eta P_a P_b, in 1/W.
inline double sfg_efficiency(const CavityParams& p, const Detunings& det = {}) {
    p.validate();
    const double wa = p.mode_a.omega();
    const double wb = p.mode_b.omega();
    const double wc = p.mode_c.omega();
    return p.g * p.g * detail::lorentzian(p.mode_a.kappa_external, p.mode_a.kappa_total, det.delta_a) *
           detail::lorentzian(p.mode_b.kappa_external, p.mode_b.kappa_total, det.delta_b) *
           detail::lorentzian(p.mode_c.kappa_external, p.mode_c.kappa_total, p.sum_detuning(det.delta_a, det.delta_b)) *
           wc / (kHbar * wa * wb);
}

// 4 g^2 / (kappa_ab kappa_c)
inline double single_photon_sfg_probability(const CavityParams& p, KappaAverage avg = KappaAverage::ArithmeticMean) {
    p.validate();
    const double kappa_ab = avg == KappaAverage::ArithmeticMean
                                ? 0.5 * (p.mode_a.kappa_total + p.mode_b.kappa_total)
                                : p.mode_a.kappa_total;
    return 4.0 * p.g * p.g / (kappa_ab * p.mode_c.kappa_total);
}

// Both sides of the conversion between the classical efficiency and the
// single-photon probability: lhs = 4g^2/(kappa_a kappa_c), rhs built from the
// on-resonance efficiency and the mode rates.
inline std::pair<double, double> efficiency_probability_relation(const CavityParams& p) {
    const double eta = sfg_efficiency(p, {});
    const double ka = p.mode_a.kappa_total;
    const double kb = p.mode_b.kappa_total;
    const double kc = p.mode_c.kappa_total;
    const double kae = p.mode_a.kappa_external;
    const double kbe = p.mode_b.kappa_external;
    const double kce = p.mode_c.kappa_external;
    const double rhs = eta * (ka / 2.0) * (ka / 2.0) / (kae / 2.0) * (kb / 2.0) * (kb / 2.0) / (kbe / 2.0) * kc /
                       (ka * kce / 2.0) * kHbar * p.mode_a.omega() * p.mode_b.omega() / p.mode_c.omega();
    const double lhs = single_photon_sfg_probability(p, KappaAverage::ModeAOnly);
    return {lhs, rhs};
}

// Intracavity photon number of a resonantly driven mode.
inline double driven_photon_number(const CavityMode& mode, double power, double detuning = 0.0) {
    return detail::lorentzian(mode.kappa_external, mode.kappa_total, detuning) * power / (kHbar * mode.omega());
}

// ---------------------------------------------------------------------------
// Wavelength bookkeeping of the teleportation setup.

struct WavelengthSetup {
    double alice = 0.0;
    double sigma = 0.0;
    double signal = 0.0;
    double idler = 0.0;
    double pump = 0.0;
};

struct WavelengthLimits {
    double fsr_ring = 11.9e-9;
    double fsr_ffp = 9.1e-9;
    double pump_min = 770.5e-9;
    double pump_max = 773.5e-9;
    double wdm_channel_width = 20e-9;
    double wdm_grid_center = 1271e-9;     // any channel center of the coarse WDM grid
    double alignment_tolerance = 0.05e-9; // about one cavity linewidth
    double fsr_fraction_tolerance = 0.1;
    double energy_tolerance = 0.01e-9;
};

struct ConditionResult {
    std::string name;
    bool passed = false;
    double value = 0.0;  // measured quantity (meters or multiple of an FSR)
    std::string detail;
};

struct WavelengthReport {
    std::vector<ConditionResult> conditions;

    bool all_passed() const {
        for (const auto& c : conditions)
            if (!c.passed) return false;
        return true;
    }
    const ConditionResult* find(const std::string& name) const {
        for (const auto& c : conditions)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {
inline ConditionResult fsr_multiple(std::string name, double span, double fsr, double fraction_tol) {
    ConditionResult r;
    r.name = std::move(name);
    r.value = span / fsr;
    const double nearest = std::round(r.value);
    r.passed = nearest != 0.0 && std::abs(r.value - nearest) <= fraction_tol;
    r.detail = "nearest integer multiple " + std::to_string(static_cast<long>(nearest));
    return r;
}

inline long wdm_channel(double wavelength, const WavelengthLimits& lim) {
    return static_cast<long>(std::floor((wavelength - lim.wdm_grid_center) / lim.wdm_channel_width + 0.5));
}
} // namespace detail

inline WavelengthReport check_wavelength_conditions(const WavelengthSetup& w, const WavelengthLimits& lim = {}) {
    if (!(w.alice > 0 && w.sigma > 0 && w.signal > 0 && w.idler > 0 && w.pump > 0)) {
        throw InvalidParameter("all wavelengths must be positive");
    }
    WavelengthReport rep;

    {
        ConditionResult r{"signal_alignment", false, 0.0, ""};
        const double expected = 1.0 / (1.0 / w.sigma - 1.0 / w.alice);
        r.value = expected - w.signal;
        r.passed = expected > 0.0 && std::abs(r.value) <= lim.alignment_tolerance;
        r.detail = "1/lambda_sigma - 1/lambda_A vs 1/lambda_s";
        rep.conditions.push_back(r);
    }
    rep.conditions.push_back(
        detail::fsr_multiple("ring_fsr_multiple", w.signal - w.alice, lim.fsr_ring, lim.fsr_fraction_tolerance));
    rep.conditions.push_back(
        detail::fsr_multiple("ffp_fsr_multiple", w.alice - w.idler, lim.fsr_ffp, lim.fsr_fraction_tolerance));
    {
        ConditionResult r{"energy_conservation", false, 0.0, ""};
        const double expected = 1.0 / (1.0 / w.signal + 1.0 / w.idler);
        r.value = expected - w.pump;
        r.passed = std::abs(r.value) <= lim.energy_tolerance;
        r.detail = "1/lambda_p vs 1/lambda_s + 1/lambda_i";
        rep.conditions.push_back(r);
    }
    {
        ConditionResult r{"pump_in_range", false, w.pump, ""};
        r.passed = w.pump >= lim.pump_min && w.pump <= lim.pump_max;
        r.detail = "pump tuning range of the down-converter";
        rep.conditions.push_back(r);
    }
    {
        ConditionResult r{"wdm_separation", false, 0.0, ""};
        const long ca = detail::wdm_channel(w.alice, lim);
        const long cs = detail::wdm_channel(w.signal, lim);
        const long ci = detail::wdm_channel(w.idler, lim);
        r.passed = ca != cs && ca != ci && cs != ci;
        r.value = static_cast<double>(std::min({std::abs(ca - cs), std::abs(ca - ci), std::abs(cs - ci)}));
        r.detail = "coarse WDM channels A/s/i = " + std::to_string(ca) + "/" + std::to_string(cs) + "/" +
                   std::to_string(ci);
        rep.conditions.push_back(r);
    }
    return rep;
}

} // namespace nlbsm::cavity
