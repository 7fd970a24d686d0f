#pragma once

// Mapping from configuration sections to the library types. Section names
// follow the type names; every transmission accepts "<x> dB" or a linear
// value.

#include <cstdint>
#include <string>
#include <vector>

#include "nlbsm/bsm.hpp"
#include "nlbsm/cavity.hpp"
#include "nlbsm/cli/config.hpp"
#include "nlbsm/montecarlo.hpp"
#include "nlbsm/protocols.hpp"
#include "nlbsm/sources.hpp"

namespace nlbsm::cli {

inline const std::vector<std::string>& known_sections() {
    static const std::vector<std::string> names{"run",         "PairSource",       "AliceSource",     "SystemEfficiencies",
                                                "InterferometerBank", "ScenarioConfig", "SwapScenario", "sweep",
                                                "rates",       "CavityParams",     "WavelengthSetup", "tomography",
                                                "simulate"};
    return names;
}

inline void check_sections(const Config& cfg) {
    for (const auto& [k, v] : cfg.table()) {
        const std::string key(k.str());
        const auto& names = known_sections();
        if (std::find(names.begin(), names.end(), key) == names.end()) {
            std::string where = cfg.source();
            if (v.source().begin.line > 0) where += ":" + std::to_string(v.source().begin.line);
            throw ConfigError(where + ": unknown section '" + key + "'");
        }
    }
}

inline double read_p_si(const Config& c, const std::string& path, double fallback) {
    return c.number_in(path, 0.0, 0.25, fallback);
}

inline PairSource read_pair_source(const Config& c) {
    return PairSource::from_p_si(read_p_si(c, "PairSource.p_si", 0.0));
}

inline AliceSource read_alice(const Config& c) {
    const double n = c.number("AliceSource.mean_photon_number", 1.0);
    if (!(n >= 0.0)) throw ConfigError(c.source() + ": field 'AliceSource.mean_photon_number': must be non-negative");
    return AliceSource::coherent(n);
}

inline protocols::SystemEfficiencies read_system(const Config& c) {
    protocols::SystemEfficiencies s;
    s.t_A = c.transmission("SystemEfficiencies.t_A", 1.0);
    s.t_s = c.transmission("SystemEfficiencies.t_s", 1.0);
    s.t_i = c.transmission("SystemEfficiencies.t_i", 1.0);
    s.t_Sigma = c.transmission("SystemEfficiencies.t_Sigma", 1.0);
    s.eta_i = c.transmission("SystemEfficiencies.eta_i", 1.0);
    s.eta_Sigma = c.transmission("SystemEfficiencies.eta_Sigma", 1.0);
    s.p_sfg = c.number_in("SystemEfficiencies.p_sfg", 0.0, 1.0, 1e-3);
    s.p_si = read_pair_source(c).p_si();
    s.mean_photon_number = read_alice(c).mean_photon_number();
    return s;
}

inline bsm::InterferometerBank read_bank(const Config& c) {
    bsm::InterferometerBank b;
    const std::string model = c.choice("InterferometerBank.model", {"product", "min", "explicit"}, "product");
    b.model = model == "product" ? bsm::VisibilityModel::Product
              : model == "min"   ? bsm::VisibilityModel::Min
                                 : bsm::VisibilityModel::Explicit;
    b.V_A = c.number_in("InterferometerBank.V_A", 0.0, 1.0, 1.0);
    b.V_Sigma = c.number_in("InterferometerBank.V_Sigma", 0.0, 1.0, 1.0);
    b.V_B = c.number_in("InterferometerBank.V_B", 0.0, 1.0, 1.0);
    b.V_explicit = c.number_in("InterferometerBank.V_explicit", 0.0, 1.0, 1.0);
    b.phi_A = c.number("InterferometerBank.phi_A", 0.0);
    b.phi_Sigma = c.number("InterferometerBank.phi_Sigma", 0.0);
    b.phi_B = c.number("InterferometerBank.phi_B", 0.0);
    return b;
}

// Options of ScenarioConfig shared by teleportation and swapping.
inline void read_scenario_options(const Config& c, mc::ScenarioConfig& s) {
    s.bsm = c.choice("ScenarioConfig.bsm", {"nlo", "lo"}, "nlo") == "nlo" ? mc::BsmType::Nlo : mc::BsmType::Lo;
    s.clock = c.number("ScenarioConfig.clock_hz", 1e9);
    s.integration_time_s = c.number("ScenarioConfig.integration_time_s", 3600.0);
    s.pair_model = c.choice("ScenarioConfig.pair_model", {"thermal", "truncated"}, "thermal") == "thermal"
                       ? mc::PairModel::Thermal
                       : mc::PairModel::TruncatedTwoPair;
    s.teleport_mode = c.choice("ScenarioConfig.teleport_mode", {"non_postselected", "coincidence"}, "non_postselected") ==
                              "coincidence"
                          ? mc::TeleportMode::Coincidence
                          : mc::TeleportMode::NonPostselected;
    s.lo_rule = c.choice("ScenarioConfig.lo_rule", {"exactly_two", "at_least_two"}, "exactly_two") == "exactly_two"
                    ? mc::LoHeraldRule::ExactlyTwo
                    : mc::LoHeraldRule::AtLeastTwo;
    s.nlo_conversion = c.choice("ScenarioConfig.nlo_conversion", {"linear", "single_per_side"}, "linear") == "linear"
                           ? mc::NloConversion::Linear
                           : mc::NloConversion::SinglePerSide;
    s.dark.enabled = c.boolean("ScenarioConfig.dark_counts.enabled", false);
    s.dark.spad_hz = c.number("ScenarioConfig.dark_counts.spad_hz", s.dark.spad_hz);
    s.dark.snspd_hz = c.number("ScenarioConfig.dark_counts.snspd_hz", s.dark.snspd_hz);
    s.dark.bin_width_s = c.number("ScenarioConfig.dark_counts.bin_width_s", s.dark.bin_width_s);
    s.bank = read_bank(c);
}

inline mc::ScenarioConfig read_teleport_scenario(const Config& c) {
    const protocols::SystemEfficiencies sys = read_system(c);
    mc::ScenarioConfig s = mc::ScenarioConfig::teleport(sys.p_si, sys.p_sfg, sys.mean_photon_number);
    s.t_A = sys.t_A;
    s.t_s = sys.t_s;
    s.t_i = sys.t_i;
    s.t_Sigma = sys.t_Sigma;
    s.eta_i = sys.eta_i;
    s.eta_Sigma = sys.eta_Sigma;
    read_scenario_options(c, s);
    s.validate();
    return s;
}

struct SwapSpec {
    double p_a = 0.0;
    double p_b = 0.0;
    double eta = 1.0;
    protocols::LossMode mode = protocols::LossMode::Lossless;
    bool optimal_attenuation = false;  // LO, unbalanced: p_a from the optimum
};

inline SwapSpec read_swap(const Config& c) {
    SwapSpec s;
    const std::string mode = c.choice("SwapScenario.loss_mode", {"lossless", "balanced", "unbalanced"}, "balanced");
    s.mode = mode == "lossless"   ? protocols::LossMode::Lossless
             : mode == "balanced" ? protocols::LossMode::Balanced
                                  : protocols::LossMode::Unbalanced;
    s.eta = c.transmission("SwapScenario.eta", 0.01);
    s.p_b = read_p_si(c, "SwapScenario.p_b_si", 0.01);
    s.optimal_attenuation = !c.has("SwapScenario.p_a_si") && s.mode == protocols::LossMode::Unbalanced;
    s.p_a = read_p_si(c, "SwapScenario.p_a_si", s.p_b);
    return s;
}

inline mc::ScenarioConfig swap_scenario(const Config& c, const SwapSpec& spec) {
    mc::ScenarioConfig s;
    read_scenario_options(c, s);
    double p_a = spec.p_a;
    if (spec.optimal_attenuation && s.bsm == mc::BsmType::Lo) {
        p_a = p_si_from_epsilon(protocols::swap_fidelity_lo_unbalanced(spec.p_b, spec.eta).epsilon_a_opt);
    }
    mc::ScenarioConfig base = mc::ScenarioConfig::swap(p_a, spec.p_b, spec.eta, spec.mode, s.bsm);
    base.bsm = s.bsm;
    base.clock = s.clock;
    base.integration_time_s = s.integration_time_s;
    base.pair_model = s.pair_model;
    base.lo_rule = s.lo_rule;
    base.nlo_conversion = s.nlo_conversion;
    base.dark = s.dark;
    base.bank = s.bank;
    base.p_sfg = c.number_in("SystemEfficiencies.p_sfg", 0.0, 1.0, 1e-3);
    base.validate();
    return base;
}

inline cavity::CavityMode read_mode(const Config& c, const std::string& name) {
    const std::string p = "CavityParams." + name + ".";
    const double wl = c.number(p + "wavelength_nm") * 1e-9;
    const double q = c.number(p + "quality_factor");
    const double frac = c.number_in(p + "external_fraction", 0.0, 1.0, 0.5);
    std::optional<int> m;
    if (c.has(p + "azimuthal_number")) m = static_cast<int>(c.integer(p + "azimuthal_number"));
    try {
        return cavity::CavityMode::from_quality_factor(wl, q, frac, m);
    } catch (const InvalidParameter& e) {
        throw ConfigError(c.source() + ": section 'CavityParams." + name + "': " + e.what());
    }
}

inline cavity::CavityParams read_cavity(const Config& c) {
    cavity::CavityParams p;
    p.mode_a = read_mode(c, "mode_a");
    p.mode_b = read_mode(c, "mode_b");
    p.mode_c = read_mode(c, "mode_c");
    p.g = 2.0 * kPi * c.number("CavityParams.g_over_2pi_hz");
    p.frequency_matched = c.boolean("CavityParams.frequency_matched", true);
    p.matching_tolerance = 2.0 * kPi * c.number("CavityParams.matching_tolerance_hz", 5e9);
    try {
        p.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(c.source() + ": section 'CavityParams': " + e.what());
    }
    return p;
}

inline cavity::KappaAverage read_kappa_average(const Config& c) {
    return c.choice("CavityParams.kappa_average", {"arithmetic", "mode_a"}, "arithmetic") == "arithmetic"
               ? cavity::KappaAverage::ArithmeticMean
               : cavity::KappaAverage::ModeAOnly;
}

inline cavity::WavelengthSetup read_wavelengths(const Config& c) {
    cavity::WavelengthSetup w;
    w.alice = c.number("WavelengthSetup.alice_nm") * 1e-9;
    w.sigma = c.number("WavelengthSetup.sigma_nm") * 1e-9;
    w.signal = c.number("WavelengthSetup.signal_nm") * 1e-9;
    w.idler = c.number("WavelengthSetup.idler_nm") * 1e-9;
    w.pump = c.number("WavelengthSetup.pump_nm") * 1e-9;
    return w;
}

inline TimeBinQubit state_by_name(const std::string& name) {
    if (name == "e") return TimeBinQubit::early();
    if (name == "l") return TimeBinQubit::late();
    if (name == "+") return TimeBinQubit::plus();
    if (name == "-") return TimeBinQubit::minus();
    if (name == "L") return TimeBinQubit::left();
    if (name == "R") return TimeBinQubit::right();
    throw InvalidParameter("unknown state '" + name + "' (use e, l, +, -, L or R)");
}

inline std::string state_file_tag(const std::string& name) {
    if (name == "+") return "plus";
    if (name == "-") return "minus";
    return name;
}

} // namespace nlbsm::cli
