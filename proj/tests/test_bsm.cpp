#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nlbsm/bsm.hpp"

using namespace nlbsm;
using namespace nlbsm::bsm;

namespace {

TimeBinQubit random_qubit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return make_qubit({n(rng), n(rng)}, {n(rng), n(rng)});
}

} // namespace

TEST(NloHerald, BranchProbabilitiesAreExact) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ph(-kPi, kPi);
    for (int k = 0; k < 500; ++k) {
        const auto branches = nlo_herald(random_qubit(rng), ph(rng));
        EXPECT_EQ(branches[0].probability, 0.25);
        EXPECT_EQ(branches[1].probability, 0.25);
        EXPECT_EQ(branches[2].probability, 0.5);
        EXPECT_FALSE(branches[2].idler.has_value());
        EXPECT_FALSE(branches[2].outcome.phase_sigma.has_value());
    }
}

TEST(NloHerald, IdlerCarriesInputUpToSigmaPhase) {
    std::mt19937_64 rng(32);
    for (int k = 0; k < 200; ++k) {
        const auto q = random_qubit(rng);
        const auto at_zero = nlo_herald(q, 0.0);
        EXPECT_TRUE(same_ray(*at_zero[0].idler, q));
        EXPECT_TRUE(same_ray(*at_zero[1].idler, apply_correction(q, PauliCorrection::Z)));
        // Phase phi on the sum-frequency analyzer rotates the idler by e^{-i phi} on |l>.
        const double phi = 0.3 * k;
        const auto rotated = nlo_herald(q, phi);
        EXPECT_TRUE(same_ray(*rotated[0].idler, make_qubit(q.alpha(), q.beta() * std::polar(1.0, -phi))));
    }
}

TEST(Fringe, PeriodicAndNonNegative) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> ph(-10.0, 10.0);
    for (int k = 0; k < 500; ++k) {
        InterferometerBank b;
        b.V_A = u(rng);
        b.V_Sigma = u(rng);
        b.V_B = u(rng);
        b.phi_A = ph(rng);
        b.phi_Sigma = ph(rng);
        b.phi_B = ph(rng);
        const double n0 = 100.0 * u(rng);
        for (int port : {1, -1}) {
            const double c = fringe_coincidences(n0, b, port);
            EXPECT_GE(c, 0.0);
            InterferometerBank shifted = b;
            shifted.phi_A += 2.0 * kPi;
            EXPECT_NEAR(fringe_coincidences(n0, shifted, port), c, 1e-9);
            shifted = b;
            shifted.phi_B -= 2.0 * kPi;
            EXPECT_NEAR(fringe_coincidences(n0, shifted, port), c, 1e-9);
        }
        // The two ports are complementary.
        EXPECT_NEAR(fringe_coincidences(n0, b, 1) + fringe_coincidences(n0, b, -1), 2.0 * n0, 1e-9);
    }
}

TEST(Fringe, VisibilityModels) {
    InterferometerBank b;
    b.V_A = 0.95;
    b.V_Sigma = 0.97;
    b.V_B = 0.98;
    EXPECT_NEAR(b.effective_visibility(), 0.95 * 0.97 * 0.98, 1e-15);
    b.model = VisibilityModel::Min;
    EXPECT_EQ(b.effective_visibility(), 0.95);
    b.model = VisibilityModel::Explicit;
    b.V_explicit = 0.905;
    EXPECT_EQ(b.effective_visibility(), 0.905);
    // Fringe maximum and minimum give back the visibility.
    const double hi = fringe_coincidences(10.0, b, 1);
    const double lo = fringe_coincidences(10.0, b, -1);
    EXPECT_NEAR((hi - lo) / (hi + lo), 0.905, 1e-15);
    b.V_B = 1.2;
    EXPECT_THROW(b.effective_visibility(), InvalidParameter);
    EXPECT_THROW(fringe_coincidences(1.0, InterferometerBank{}, 0), InvalidParameter);
    EXPECT_THROW(fringe_coincidences(-1.0, InterferometerBank{}, 1), InvalidParameter);
}

TEST(CompleteAnalyzer, MapAssignsDistinctDetectors) {
    EXPECT_EQ(complete_bsa_map(BellLabel::PhiPlus).detector, SfgDetector::Sigma1Plus);
    EXPECT_EQ(complete_bsa_map(BellLabel::PhiMinus).correction, PauliCorrection::Z);
    EXPECT_EQ(complete_bsa_map(BellLabel::PsiPlus).correction, PauliCorrection::X);
    EXPECT_EQ(complete_bsa_map(BellLabel::PsiMinus).detector, SfgDetector::Sigma2Minus);
    EXPECT_EQ(complete_bsa_map(BellLabel::PsiMinus).correction, PauliCorrection::XZ);
}

TEST(CompleteAnalyzer, SwitchedSchemeRecoversEveryInput) {
    std::mt19937_64 rng(34);
    for (int k = 0; k < 1000; ++k) {
        const auto q = random_qubit(rng);
        const auto r = complete_teleport(q, AnalyzerScheme::Switched);
        ASSERT_EQ(r.branches.size(), 4u);
        double total = 0.0;
        for (const auto& b : r.branches) {
            EXPECT_NEAR(b.probability, 0.25, 1e-12);
            EXPECT_NEAR(b.recovery_fidelity, 1.0, 1e-12);
            total += b.probability;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
        EXPECT_NEAR(r.no_click_probability, 0.0, 1e-12);
    }
}

TEST(CompleteAnalyzer, SplitterSchemesLoseHalfOfPsiSector) {
    const auto q = TimeBinQubit::plus();
    for (auto scheme : {AnalyzerScheme::SplitterDelay, AnalyzerScheme::SplitterBinShift}) {
        const auto r = complete_teleport(q, scheme);
        double phi = 0.0;
        double psi = 0.0;
        for (const auto& b : r.branches) {
            const bool is_psi = b.label == BellLabel::PsiPlus || b.label == BellLabel::PsiMinus;
            (is_psi ? psi : phi) += b.probability;
            EXPECT_NEAR(b.recovery_fidelity, 1.0, 1e-12);
        }
        EXPECT_NEAR(phi, 0.5, 1e-15);
        EXPECT_NEAR(psi, 0.25, 1e-15);
        EXPECT_NEAR(r.no_click_probability, 0.25, 1e-15);
    }
}
