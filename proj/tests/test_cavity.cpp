#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nlbsm/cavity.hpp"

using namespace nlbsm;
using namespace nlbsm::cavity;

namespace {

constexpr double kTwoPi = 2.0 * kPi;

CavityParams device(double g_hz = 14e6, double qa = 4.4e4, double qb = 4.7e4, double qc = 1e5) {
    CavityParams p;
    p.mode_a = CavityMode::from_quality_factor(1541.010e-9, qa, 0.5);
    p.mode_b = CavityMode::from_quality_factor(1565.392e-9, qb, 0.5);
    p.mode_c = CavityMode::from_quality_factor(776.553e-9, qc, 0.03);
    p.g = kTwoPi * g_hz;
    return p;
}

// kappa = 2 pi c / (lambda Q), written out independently of the library.
double kappa(double lambda, double q) { return kTwoPi * 299792458.0 / lambda / q; }

} // namespace

TEST(Cavity, DeviceSfgProbabilityMatchesHandComputation) {
    const double ka = kappa(1541.010e-9, 4.4e4);
    const double kb = kappa(1565.392e-9, 4.7e4);
    const double kc = kappa(776.553e-9, 1e5);
    const double g = kTwoPi * 14e6;
    const double oracle = 4.0 * g * g / (0.5 * (ka + kb) * kc);
    const double p = single_photon_sfg_probability(device());
    EXPECT_NEAR(p / oracle, 1.0, 1e-12);
    EXPECT_GE(p, 3.5e-5);
    EXPECT_LE(p, 5.5e-5);
    EXPECT_NEAR(single_photon_sfg_probability(device(), KappaAverage::ModeAOnly) / (4.0 * g * g / (ka * kc)), 1.0,
                1e-12);
}

TEST(Cavity, OptimizedDeviceReachesPerMilleLevel) {
    const double p = single_photon_sfg_probability(device(20e6, 4e5, 4e5, 2e5));
    EXPECT_GE(p, 0.8e-3);
    EXPECT_LE(p, 2.5e-3);
}

TEST(Cavity, LinewidthsAreAboutFourGigahertz) {
    const CavityParams p = device();
    for (const CavityMode* m : {&p.mode_a, &p.mode_b, &p.mode_c}) {
        EXPECT_GT(m->kappa_total / kTwoPi, 3.5e9);
        EXPECT_LT(m->kappa_total / kTwoPi, 4.6e9);
    }
}

TEST(Cavity, EfficiencyWithinFactorTwoOfMeasurement) {
    const double eta_percent = 100.0 * sfg_efficiency(device());
    EXPECT_GT(eta_percent, 4.4e4 / 2.0);
    EXPECT_LT(eta_percent, 4.4e4 * 2.0);
}

TEST(Cavity, SteadyStateOutputEqualsEfficiencyTimesPowers) {
    const CavityParams p = device();
    const double pa = 1e-6;
    const double pb = 2e-6;
    for (double da : {0.0, 1e9, -3e9}) {
        const Detunings det{da, 0.5 * da};
        const SteadyState s = steady_state(p, det, pa, pb);
        EXPECT_NEAR(s.output_power_c / (sfg_efficiency(p, det) * pa * pb), 1.0, 1e-12);
        EXPECT_TRUE(s.weak_conversion);
    }
}

TEST(Cavity, SfgRateLinearInEachPump) {
    const CavityParams p = device();
    const double base = std::norm(steady_state(p, {}, 1e-6, 1e-6).c);
    EXPECT_NEAR(std::norm(steady_state(p, {}, 2e-6, 1e-6).c) / base, 2.0, 1e-12);
    EXPECT_NEAR(std::norm(steady_state(p, {}, 1e-6, 2e-6).c) / base, 2.0, 1e-12);
}

TEST(Cavity, EfficiencyPeaksAtZeroDetuning) {
    const CavityParams p = device();
    const double peak = sfg_efficiency(p);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 5e9);
    for (int k = 0; k < 200; ++k) EXPECT_LE(sfg_efficiency(p, {n(rng), n(rng)}), peak);
}

TEST(Cavity, EfficiencyProbabilityRelationIsAnIdentity) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> q(1e4, 1e6);
    std::uniform_real_distribution<double> f(0.05, 1.0);
    std::uniform_real_distribution<double> g(1e6, 1e8);
    for (int k = 0; k < 100; ++k) {
        CavityParams p;
        p.mode_a = CavityMode::from_quality_factor(1541.010e-9, q(rng), f(rng));
        p.mode_b = CavityMode::from_quality_factor(1565.392e-9, q(rng), f(rng));
        p.mode_c = CavityMode::from_quality_factor(776.553e-9, q(rng), f(rng));
        p.g = kTwoPi * g(rng);
        const auto [lhs, rhs] = efficiency_probability_relation(p);
        EXPECT_NEAR(rhs / lhs, 1.0, 1e-10);
    }
}

TEST(Cavity, ValidationRejectsMismatchedModes) {
    CavityParams p = device();
    p.mode_c = CavityMode::from_quality_factor(780.0e-9, 1e5, 0.03);
    EXPECT_THROW(single_photon_sfg_probability(p), InvalidParameter);
    p.frequency_matched = false;
    EXPECT_NO_THROW(single_photon_sfg_probability(p));
    // A detuned sum frequency lowers the classical efficiency.
    EXPECT_LT(sfg_efficiency(p), sfg_efficiency(device()));

    CavityParams m = device();
    m.mode_a.azimuthal_number = 100;
    m.mode_b.azimuthal_number = 98;
    m.mode_c.azimuthal_number = 200;
    EXPECT_NO_THROW(m.validate());
    m.mode_c.azimuthal_number = 199;
    EXPECT_THROW(m.validate(), InvalidParameter);

    EXPECT_THROW(CavityMode::from_quality_factor(1.5e-6, 0.0, 0.5), InvalidParameter);
    EXPECT_THROW(CavityMode::from_quality_factor(1.5e-6, 1e4, 0.0), InvalidParameter);
}

TEST(Cavity, DrivenPhotonNumberOnResonance) {
    const CavityMode m = CavityMode::from_quality_factor(1541.010e-9, 4.4e4, 0.5);
    const double p = 1e-9;
    // Critical coupling: <n> = P / (hbar omega kappa).
    const double oracle = p / (kHbar * m.omega() * m.kappa_total);
    EXPECT_NEAR(driven_photon_number(m, p) / oracle, 1.0, 1e-12);
}

TEST(Wavelengths, DeviceSetupSatisfiesAllConditions) {
    const WavelengthSetup w{1541.010e-9, 776.557e-9, 1565.392e-9, 1522.870e-9, 771.921e-9};
    const WavelengthReport rep = check_wavelength_conditions(w);
    for (const auto& c : rep.conditions) EXPECT_TRUE(c.passed) << c.name << ": " << c.value << " " << c.detail;
    EXPECT_TRUE(rep.all_passed());
    EXPECT_EQ(rep.conditions.size(), 6u);
    ASSERT_NE(rep.find("ring_fsr_multiple"), nullptr);
    EXPECT_NEAR(rep.find("ring_fsr_multiple")->value, 2.0, 0.1);
}

TEST(Wavelengths, DetectsViolations) {
    WavelengthSetup w{1541.010e-9, 776.557e-9, 1565.392e-9, 1522.870e-9, 771.921e-9};
    w.pump = 772.5e-9;
    auto rep = check_wavelength_conditions(w);
    EXPECT_FALSE(rep.find("energy_conservation")->passed);
    EXPECT_TRUE(rep.find("pump_in_range")->passed);

    w = {1541.010e-9, 776.557e-9, 1565.392e-9, 1522.870e-9, 775.0e-9};
    EXPECT_FALSE(check_wavelength_conditions(w).find("pump_in_range")->passed);

    w = {1541.010e-9, 776.557e-9, 1545.0e-9, 1522.870e-9, 771.921e-9};
    rep = check_wavelength_conditions(w);
    EXPECT_FALSE(rep.find("signal_alignment")->passed);
    EXPECT_FALSE(rep.find("wdm_separation")->passed);
    EXPECT_FALSE(rep.all_passed());

    EXPECT_THROW(check_wavelength_conditions({}), InvalidParameter);
}
