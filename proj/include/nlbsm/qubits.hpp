#pragma once

// Time-bin qubit algebra over the basis {|e>, |l>}.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string_view>

#include "nlbsm/errors.hpp"

namespace nlbsm {

using cplx = std::complex<double>;

inline constexpr double kExactTol = 1e-12;
inline constexpr double kEigenTol = 1e-10;
inline constexpr double kPi = 3.14159265358979323846;

class TimeBinQubit {
public:
    cplx alpha() const noexcept { return alpha_; }
    cplx beta() const noexcept { return beta_; }

    // Normalizes (alpha, beta). The global phase is kept as given.
    static TimeBinQubit make(cplx alpha, cplx beta) {
        const double norm2 = std::norm(alpha) + std::norm(beta);
        if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
            throw InvalidState("time-bin qubit amplitudes must not both vanish");
        }
        const double inv = 1.0 / std::sqrt(norm2);
        return TimeBinQubit(alpha * inv, beta * inv);
    }

    static TimeBinQubit early() { return {1.0, 0.0}; }
    static TimeBinQubit late() { return {0.0, 1.0}; }
    static TimeBinQubit plus() { return make(1.0, 1.0); }
    static TimeBinQubit minus() { return make(1.0, -1.0); }
    // |L> = (|e> + i|l>)/sqrt2 is the +1 eigenstate of sigma_y.
    static TimeBinQubit left() { return make(1.0, cplx(0.0, 1.0)); }
    static TimeBinQubit right() { return make(1.0, cplx(0.0, -1.0)); }

    // (|e> + e^{i phase}|l>)/sqrt2
    static TimeBinQubit equator(double phase) { return make(1.0, std::polar(1.0, phase)); }

private:
    TimeBinQubit(cplx a, cplx b) : alpha_(a), beta_(b) {}

    cplx alpha_;
    cplx beta_;
};

inline TimeBinQubit make_qubit(cplx alpha, cplx beta) { return TimeBinQubit::make(alpha, beta); }

inline cplx inner(const TimeBinQubit& a, const TimeBinQubit& b) {
    return std::conj(a.alpha()) * b.alpha() + std::conj(a.beta()) * b.beta();
}

inline double overlap(const TimeBinQubit& a, const TimeBinQubit& b) { return std::norm(inner(a, b)); }

// Qubits are rays: equality ignores the global phase.
inline bool same_ray(const TimeBinQubit& a, const TimeBinQubit& b, double tol = kEigenTol) {
    return overlap(a, b) > 1.0 - tol;
}

enum class BellLabel { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline constexpr std::array<BellLabel, 4> kBellLabels{BellLabel::PhiPlus, BellLabel::PhiMinus,
                                                      BellLabel::PsiPlus, BellLabel::PsiMinus};

inline std::string_view to_string(BellLabel label) {
    switch (label) {
    case BellLabel::PhiPlus: return "PhiPlus";
    case BellLabel::PhiMinus: return "PhiMinus";
    case BellLabel::PsiPlus: return "PsiPlus";
    case BellLabel::PsiMinus: return "PsiMinus";
    }
    return "?";
}

// Single-qubit Pauli group modulo phase. Bit 0 carries Z, bit 1 carries X;
// XZ means Z is applied first.
enum class PauliCorrection : unsigned { Identity = 0, Z = 1, X = 2, XZ = 3 };

inline PauliCorrection compose(PauliCorrection first, PauliCorrection second) {
    return static_cast<PauliCorrection>(static_cast<unsigned>(first) ^ static_cast<unsigned>(second));
}

inline std::string_view to_string(PauliCorrection c) {
    switch (c) {
    case PauliCorrection::Identity: return "I";
    case PauliCorrection::Z: return "Z";
    case PauliCorrection::X: return "X";
    case PauliCorrection::XZ: return "XZ";
    }
    return "?";
}

inline TimeBinQubit apply_correction(const TimeBinQubit& q, PauliCorrection c) {
    const cplx a = q.alpha();
    const cplx b = q.beta();
    switch (c) {
    case PauliCorrection::Identity: return make_qubit(a, b);
    case PauliCorrection::Z: return make_qubit(a, -b);
    case PauliCorrection::X: return make_qubit(b, a);
    case PauliCorrection::XZ: return make_qubit(-b, a);
    }
    return q;
}

struct BellBranch {
    BellLabel label;
    TimeBinQubit idler;
    double amplitude;
};

// Decomposition of |psi>_A (x) |Phi+>_si in the Bell basis of (A, s). The
// conditional idler states keep the sign convention of the joint-state
// expansion: (a,b), (a,-b), (b,a), (-b,a).
inline std::array<BellBranch, 4> bell_decompose(const TimeBinQubit& alice) {
    const cplx a = alice.alpha();
    const cplx b = alice.beta();
    return {{
        {BellLabel::PhiPlus, make_qubit(a, b), 0.5},
        {BellLabel::PhiMinus, make_qubit(a, -b), 0.5},
        {BellLabel::PsiPlus, make_qubit(b, a), 0.5},
        {BellLabel::PsiMinus, make_qubit(-b, a), 0.5},
    }};
}

// Plain 2x2 complex matrix, row-major over {|e>, |l>}.
struct Matrix2 {
    std::array<cplx, 4> m{};

    cplx operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }
    cplx& operator()(int r, int c) { return m[static_cast<std::size_t>(2 * r + c)]; }

    cplx trace() const { return m[0] + m[3]; }

    double hermiticity_error() const {
        return std::max({std::abs(m[0].imag()), std::abs(m[3].imag()), std::abs(m[1] - std::conj(m[2]))});
    }

    // Eigenvalues of the Hermitian part, ascending.
    std::array<double, 2> eigenvalues() const {
        const double a = m[0].real();
        const double d = m[3].real();
        const cplx off = 0.5 * (m[1] + std::conj(m[2]));
        const double mean = 0.5 * (a + d);
        const double rad = std::hypot(0.5 * (a - d), std::abs(off));
        return {mean - rad, mean + rad};
    }

    // Bloch components <sigma_x>, <sigma_y>, <sigma_z> of the Hermitian part.
    std::array<double, 3> bloch() const {
        const cplx off = 0.5 * (m[1] + std::conj(m[2]));
        return {2.0 * off.real(), -2.0 * off.imag(), m[0].real() - m[3].real()};
    }

    static Matrix2 from_bloch(double x, double y, double z) {
        Matrix2 r;
        r.m = {cplx(0.5 * (1.0 + z), 0.0), cplx(0.5 * x, -0.5 * y), cplx(0.5 * x, 0.5 * y),
               cplx(0.5 * (1.0 - z), 0.0)};
        return r;
    }
};

class DensityMatrix2 {
public:
    explicit DensityMatrix2(const Matrix2& m) : m_(m) {
        if (m.hermiticity_error() > kExactTol) {
            throw InvalidDensityMatrix("density matrix is not Hermitian");
        }
        if (std::abs(m.trace() - 1.0) > kExactTol) {
            throw InvalidDensityMatrix("density matrix trace differs from 1");
        }
        if (m.eigenvalues()[0] < -kEigenTol) {
            throw InvalidDensityMatrix("density matrix has a negative eigenvalue");
        }
    }

    static DensityMatrix2 projector(const TimeBinQubit& q) {
        Matrix2 r;
        r(0, 0) = std::norm(q.alpha());
        r(0, 1) = q.alpha() * std::conj(q.beta());
        r(1, 0) = q.beta() * std::conj(q.alpha());
        r(1, 1) = std::norm(q.beta());
        return DensityMatrix2(r);
    }

    static DensityMatrix2 maximally_mixed() { return DensityMatrix2(Matrix2::from_bloch(0.0, 0.0, 0.0)); }

    static DensityMatrix2 from_bloch(double x, double y, double z) {
        return DensityMatrix2(Matrix2::from_bloch(x, y, z));
    }

    const Matrix2& matrix() const noexcept { return m_; }
    cplx operator()(int r, int c) const { return m_(r, c); }
    std::array<double, 2> eigenvalues() const { return m_.eigenvalues(); }
    std::array<double, 3> bloch() const { return m_.bloch(); }

private:
    Matrix2 m_;
};

// <psi| rho |psi>
inline double expectation(const Matrix2& rho, const TimeBinQubit& psi) {
    const cplx a = psi.alpha();
    const cplx b = psi.beta();
    const cplx v = std::conj(a) * (rho(0, 0) * a + rho(0, 1) * b) + std::conj(b) * (rho(1, 0) * a + rho(1, 1) * b);
    return v.real();
}

inline double fidelity_pure(const DensityMatrix2& rho, const TimeBinQubit& target) {
    return std::clamp(expectation(rho.matrix(), target), 0.0, 1.0);
}

inline double purity(const DensityMatrix2& rho) {
    const Matrix2& m = rho.matrix();
    double s = 0.0;
    for (const cplx& v : m.m) s += std::norm(v);
    return s;
}

inline double trace_distance(const Matrix2& a, const Matrix2& b) {
    const auto ba = a.bloch();
    const auto bb = b.bloch();
    const double tr_diff = a.trace().real() - b.trace().real();
    // Hermitian 2x2 difference: eigenvalues t/2 +- |r|/2.
    const double r = std::hypot(ba[0] - bb[0], ba[1] - bb[1], ba[2] - bb[2]) * 0.5;
    return 0.5 * (std::abs(0.5 * tr_diff + r) + std::abs(0.5 * tr_diff - r));
}

inline double trace_distance(const DensityMatrix2& a, const DensityMatrix2& b) {
    return trace_distance(a.matrix(), b.matrix());
}

} // namespace nlbsm
