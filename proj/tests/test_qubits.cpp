#include <array>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "nlbsm/bsm.hpp"
#include "nlbsm/qubits.hpp"

using namespace nlbsm;

namespace {

TimeBinQubit random_qubit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return make_qubit({n(rng), n(rng)}, {n(rng), n(rng)});
}

// Amplitudes over (A, s, i), index 4A + 2s + i with e = 0, l = 1.
using Vec8 = std::array<cplx, 8>;

Vec8 alice_times_phi_plus(const TimeBinQubit& q) {
    Vec8 v{};
    const double r = 1.0 / std::sqrt(2.0);
    const cplx amp[2] = {q.alpha(), q.beta()};
    for (int a = 0; a < 2; ++a)
        for (int k = 0; k < 2; ++k) v[static_cast<std::size_t>(4 * a + 2 * k + k)] = amp[a] * r;
    return v;
}

// <B|_{As} applied to v: the unnormalized idler left behind.
std::array<cplx, 2> project_bell(const Vec8& v, const std::array<cplx, 4>& bell_as) {
    std::array<cplx, 2> out{};
    for (int as = 0; as < 4; ++as)
        for (int i = 0; i < 2; ++i) out[static_cast<std::size_t>(i)] += std::conj(bell_as[static_cast<std::size_t>(as)]) * v[static_cast<std::size_t>(2 * as + i)];
    return out;
}

} // namespace

TEST(TimeBinQubit, NormalizesAndRejectsZero) {
    const TimeBinQubit q = make_qubit(3.0, cplx(0.0, 4.0));
    EXPECT_NEAR(std::norm(q.alpha()) + std::norm(q.beta()), 1.0, 1e-15);
    EXPECT_NEAR(q.alpha().real(), 0.6, 1e-15);
    EXPECT_THROW(make_qubit(0.0, 0.0), InvalidState);
}

TEST(TimeBinQubit, CardinalStatesAreMutuallyUnbiased) {
    const auto e = TimeBinQubit::early();
    const auto p = TimeBinQubit::plus();
    const auto l = TimeBinQubit::left();
    EXPECT_NEAR(overlap(e, p), 0.5, 1e-15);
    EXPECT_NEAR(overlap(e, l), 0.5, 1e-15);
    EXPECT_NEAR(overlap(p, l), 0.5, 1e-15);
    EXPECT_NEAR(overlap(TimeBinQubit::left(), TimeBinQubit::right()), 0.0, 1e-15);
    EXPECT_NEAR(TimeBinQubit::left().beta().imag(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(TimeBinQubit, SameRayIgnoresGlobalPhase) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 100; ++k) {
        const auto q = random_qubit(rng);
        const cplx ph = std::polar(1.0, 0.37 * k);
        EXPECT_TRUE(same_ray(q, make_qubit(ph * q.alpha(), ph * q.beta())));
    }
    EXPECT_FALSE(same_ray(TimeBinQubit::plus(), TimeBinQubit::minus()));
}

TEST(BellDecomposition, MatchesExplicitTensorProjection) {
    const double r = 1.0 / std::sqrt(2.0);
    // (A, s) basis order ee, el, le, ll.
    const std::array<std::array<cplx, 4>, 4> bell{{
        {r, 0.0, 0.0, r},
        {r, 0.0, 0.0, -r},
        {0.0, r, r, 0.0},
        {0.0, r, -r, 0.0},
    }};
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto q = random_qubit(rng);
        const auto branches = bell_decompose(q);
        const Vec8 v = alice_times_phi_plus(q);
        for (std::size_t b = 0; b < 4; ++b) {
            const auto idler = project_bell(v, bell[b]);
            EXPECT_EQ(branches[b].amplitude, 0.5);
            EXPECT_NEAR(std::abs(idler[0] - 0.5 * branches[b].idler.alpha()), 0.0, 1e-14);
            EXPECT_NEAR(std::abs(idler[1] - 0.5 * branches[b].idler.beta()), 0.0, 1e-14);
        }
    }
}

TEST(BellDecomposition, CorrectionsRecoverInputForRandomStates) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto q = random_qubit(rng);
        for (const BellBranch& br : bell_decompose(q)) {
            const auto fixed = apply_correction(br.idler, bsm::complete_bsa_map(br.label).correction);
            EXPECT_GT(overlap(fixed, q), 1.0 - 1e-12);
        }
    }
}

TEST(PauliCorrection, ComposesByXor) {
    EXPECT_EQ(compose(PauliCorrection::X, PauliCorrection::Z), PauliCorrection::XZ);
    EXPECT_EQ(compose(PauliCorrection::XZ, PauliCorrection::Z), PauliCorrection::X);
    EXPECT_EQ(compose(PauliCorrection::X, PauliCorrection::X), PauliCorrection::Identity);
    std::mt19937_64 rng(4);
    const PauliCorrection all[] = {PauliCorrection::Identity, PauliCorrection::Z, PauliCorrection::X,
                                   PauliCorrection::XZ};
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = random_qubit(rng);
        for (auto a : all)
            for (auto b : all) {
                const auto seq = apply_correction(apply_correction(q, a), b);
                EXPECT_TRUE(same_ray(seq, apply_correction(q, compose(a, b))));
            }
    }
}

TEST(DensityMatrix, PureStateFidelityAndPurityBounds) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto q = random_qubit(rng);
        const auto rho = DensityMatrix2::projector(q);
        EXPECT_NEAR(fidelity_pure(rho, q), 1.0, 1e-12);
        EXPECT_NEAR(purity(rho), 1.0, 1e-12);

        double x = u(rng), y = u(rng), z = u(rng);
        const double n = std::sqrt(x * x + y * y + z * z);
        if (n > 1.0) x /= n, y /= n, z /= n;
        const auto mixed = DensityMatrix2::from_bloch(x, y, z);
        EXPECT_GE(purity(mixed), 0.5 - 1e-12);
        EXPECT_LE(purity(mixed), 1.0 + 1e-12);
    }
}

TEST(DensityMatrix, RejectsInvalidMatrices) {
    EXPECT_THROW(DensityMatrix2(Matrix2::from_bloch(0.0, 0.0, 1.0 + 3e-10)), InvalidDensityMatrix);
    EXPECT_NO_THROW(DensityMatrix2(Matrix2::from_bloch(0.0, 0.0, 1.0 + 1e-11)));
    Matrix2 not_hermitian = Matrix2::from_bloch(0.2, 0.0, 0.0);
    not_hermitian(0, 1) += 0.1;
    EXPECT_THROW(DensityMatrix2{not_hermitian}, InvalidDensityMatrix);
    Matrix2 bad_trace = Matrix2::from_bloch(0.0, 0.0, 0.0);
    bad_trace(0, 0) += 0.01;
    EXPECT_THROW(DensityMatrix2{bad_trace}, InvalidDensityMatrix);
}

TEST(DensityMatrix, TraceDistanceOfOrthogonalStatesIsOne) {
    EXPECT_NEAR(trace_distance(DensityMatrix2::projector(TimeBinQubit::plus()),
                               DensityMatrix2::projector(TimeBinQubit::minus())),
                1.0, 1e-15);
    EXPECT_NEAR(trace_distance(DensityMatrix2::maximally_mixed(), DensityMatrix2::projector(TimeBinQubit::early())),
                0.5, 1e-15);
}
