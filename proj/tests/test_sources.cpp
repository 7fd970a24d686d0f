#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nlbsm/sources.hpp"

using namespace nlbsm;

TEST(PairSource, EpsilonRoundTripOnWeakPumpBranch) {
    for (int k = 0; k <= 500; ++k) {
        const double e = 0.5 * k / 500.0;
        EXPECT_NEAR(epsilon_from_p_si(p_si_from_epsilon(e)), e, 1e-12) << "e = " << e;
    }
    EXPECT_NEAR(epsilon_from_p_si(0.25), 0.5, 1e-15);
    // Small p keeps full relative precision: e = p + p^2 + O(p^3).
    EXPECT_NEAR(epsilon_from_p_si(1e-12) / 1e-12, 1.0 + 1e-12, 1e-15);
}

TEST(PairSource, RejectsOutOfRange) {
    EXPECT_THROW(epsilon_from_p_si(0.2500001), InvalidParameter);
    EXPECT_THROW(epsilon_from_p_si(-1e-3), InvalidParameter);
    EXPECT_THROW(PairSource::from_epsilon(1.0), InvalidParameter);
}

TEST(PairSource, ThermalLawMatchesGeometricSeries) {
    const PairSource s = PairSource::from_p_si(0.1);
    const double e = s.epsilon();
    EXPECT_NEAR(s.p_si(), 0.1, 1e-15);
    EXPECT_NEAR(s.probability(0), 1.0 - e, 1e-15);
    EXPECT_NEAR(s.probability(3), (1.0 - e) * e * e * e, 1e-15);
    EXPECT_EQ(s.probability(-1), 0.0);
}

TEST(SpdcDistribution, MonotoneAndNormalizedWithTail) {
    for (double e : {1e-4, 0.01, 0.1, 0.3, 0.45, 0.499}) {
        const auto d = spdc_distribution(PairSource::from_epsilon(e), 64);
        double sum = d.tail;
        for (std::size_t n = 0; n < d.probabilities.size(); ++n) {
            sum += d.probabilities[n];
            if (n > 0) {
                EXPECT_LT(d.probabilities[n], d.probabilities[n - 1]);
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-12) << "e = " << e;
        EXPECT_NEAR(d.tail / std::pow(e, 65), 1.0, 1e-12);
    }
}

TEST(SpdcDistribution, DefaultCutoffKeepsTailNegligible) {
    EXPECT_LT(spdc_distribution(PairSource::from_p_si(0.1)).tail, 1e-12);
}

TEST(AliceSource, MeanPhotonNumber) {
    EXPECT_EQ(AliceSource::coherent(0.8).mean_photon_number(), 0.8);
    EXPECT_TRUE(AliceSource::coherent(1.0).is_coherent());
    const auto f = AliceSource::fock_superposition({std::sqrt(0.5), 0.0, std::sqrt(0.5)});
    EXPECT_NEAR(f.mean_photon_number(), 1.0, 1e-15);
    EXPECT_FALSE(f.is_coherent());
    EXPECT_NEAR(AliceSource::single_photon().mean_photon_number(), 1.0, 1e-15);
    EXPECT_THROW(AliceSource::fock_superposition({1.0, 1.0}), InvalidParameter);
    EXPECT_THROW(AliceSource::coherent(-1.0), InvalidParameter);
}

TEST(AliceEventWeight, LinearInSfgProbabilityAndPhotonNumber) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 3; ++k) {
        const double p = u(rng) * 0.5;
        const double n = u(rng) * 50.0;
        const double e = u(rng) * 0.5;
        const double g = alice_event_weight(AliceSource::coherent(n), p, e);
        EXPECT_NEAR(alice_event_weight(AliceSource::coherent(n), 2.0 * p, e), 2.0 * g, 1e-15 * (1.0 + g));
        EXPECT_NEAR(alice_event_weight(AliceSource::coherent(3.0 * n), p, e), 3.0 * g, 1e-15 * (1.0 + g));
        EXPECT_NEAR(g, p * (1.0 - e) * n, 1e-15 * (1.0 + g));
    }
    EXPECT_THROW(alice_event_weight(AliceSource::coherent(1.0), 1.5, 0.1), InvalidParameter);
}
