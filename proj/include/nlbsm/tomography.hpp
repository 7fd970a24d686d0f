#pragma once

// Reconstruction of a time-bin qubit from six projection counts: bin-count
// mapping, Stokes parameters, linear inversion, maximum-likelihood fit and
// Monte Carlo error propagation over shot noise and interferometer phase.

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nlbsm/detail/parallel.hpp"
#include "nlbsm/detail/rng.hpp"
#include "nlbsm/errors.hpp"
#include "nlbsm/qubits.hpp"

namespace nlbsm::tomo {

// Order used by every per-projection array below.
enum Projection : int { kEarly = 0, kLate = 1, kPlus = 2, kMinus = 3, kLeft = 4, kRight = 5 };

inline const std::array<TimeBinQubit, 6>& projection_states() {
    static const std::array<TimeBinQubit, 6> states{TimeBinQubit::early(), TimeBinQubit::late(),
                                                    TimeBinQubit::plus(),  TimeBinQubit::minus(),
                                                    TimeBinQubit::left(),  TimeBinQubit::right()};
    return states;
}

struct ProjectionCounts {
    double n0 = 0.0;
    double n1 = 0.0;
    double n_plus = 0.0;
    double n_minus = 0.0;
    double n_left = 0.0;
    double n_right = 0.0;

    std::array<double, 6> as_array() const { return {n0, n1, n_plus, n_minus, n_left, n_right}; }

    static ProjectionCounts from_array(const std::array<double, 6>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }

    void validate() const {
        for (double v : as_array()) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParameter("projection counts must be finite and non-negative");
        }
    }
};

enum class Bin : int { Early = 0, Late = 1, LateLate = 2 };

// n[phase][detector][bin]: phase index 0 is phi_B = 0, index 1 is pi/2;
// detector index 0 is SNSPD 1, index 1 is SNSPD 2.
struct RawBinCounts {
    std::array<std::array<std::array<double, 3>, 2>, 2> n{};

    double& at(int phase, int detector, Bin bin) {
        return n.at(static_cast<std::size_t>(phase)).at(static_cast<std::size_t>(detector - 1)).at(static_cast<std::size_t>(bin));
    }
    double at(int phase, int detector, Bin bin) const {
        return n.at(static_cast<std::size_t>(phase)).at(static_cast<std::size_t>(detector - 1)).at(static_cast<std::size_t>(bin));
    }

    void validate() const {
        for (const auto& ph : n)
            for (const auto& det : ph)
                for (double v : det)
                    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParameter("bin counts must be finite and non-negative");
    }
};

inline ProjectionCounts projections_from_bins(const RawBinCounts& raw) {
    raw.validate();
    ProjectionCounts c;
    c.n0 = raw.at(0, 1, Bin::Early) + raw.at(0, 2, Bin::Early);
    c.n1 = raw.at(0, 1, Bin::LateLate) + raw.at(0, 2, Bin::LateLate);
    c.n_minus = raw.at(0, 1, Bin::Late);
    c.n_plus = raw.at(0, 2, Bin::Late);
    c.n_left = raw.at(1, 1, Bin::Late);
    c.n_right = raw.at(1, 2, Bin::Late);
    return c;
}

struct Stokes {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;
};

inline Stokes stokes(const ProjectionCounts& c) {
    c.validate();
    const double s0 = c.n0 + c.n1;
    if (!(s0 > 0.0)) throw DegenerateData("no counts in the time basis (S0 = 0)");
    return {s0, c.n_plus - c.n_minus, c.n_left - c.n_right, c.n0 - c.n1};
}

struct LinearInversion {
    Matrix2 rho;
    bool physical = true;
    double min_eigenvalue = 0.0;
};

// rho = (I + sum_i (s_i/s0) sigma_i) / 2; may have a negative eigenvalue.
inline LinearInversion rho_linear(const Stokes& s) {
    if (!(s.s0 > 0.0)) throw DegenerateData("S0 must be positive");
    LinearInversion r;
    r.rho = Matrix2::from_bloch(s.s1 / s.s0, s.s2 / s.s0, s.s3 / s.s0);
    r.min_eigenvalue = r.rho.eigenvalues()[0];
    r.physical = r.min_eigenvalue >= -kEigenTol;
    return r;
}

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, const Matrix2& best, int iterations)
        : Error(what), best_(best), iterations_(iterations) {}
    const Matrix2& best_iterate() const noexcept { return best_; }
    int iterations() const noexcept { return iterations_; }

private:
    Matrix2 best_;
    int iterations_;
};

struct MleOptions {
    int max_iterations = 500;
    // Relative detection efficiency of each projection; the expected count of
    // projection i is C * weights[i] * <psi_i|rho|psi_i>.
    std::array<double, 6> weights{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
};

struct MleResult {
    Matrix2 rho;
    int iterations = 0;
    double objective = 0.0;      // profiled negative log-likelihood per count
    double gradient_norm = 0.0;  // tangential part when the fit is pure
};

namespace detail {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 clamp_to_ball(Vec3 b) {
    const double r = std::sqrt(dot(b, b));
    if (r > 1.0) {
        for (double& v : b) v /= r;
    }
    return b;
}

// Each projection pair measures one Bloch axis, a_i = (1 +- b_k) / 2. With
// counts normalised to unit total the fit minimises
//   f(b) = -sum_i n_i log a_i + log(sum_j w_j a_j)   over |b| <= 1.
// The first term separates by axis, and stationarity reads
//   -P_k / (1 + b_k) + M_k / (1 - b_k) + nu u_k + 2 mu b_k = 0
// with nu = 1 / sum_j w_j a_j, u = sum_j w_j m_j / 2 and mu >= 0 the ball
// multiplier. Every unknown is then found by a bracketed scalar root search.
class BlochFit {
public:
    BlochFit(const std::array<double, 6>& counts, const std::array<double, 6>& weights) {
        const auto& states = projection_states();
        double total = 0.0;
        for (double v : counts) total += v;
        for (std::size_t i = 0; i < 6; ++i) {
            n_[i] = counts[i] / total;
            dirs_[i] = DensityMatrix2::projector(states[i]).bloch();
            wsum_ += 0.5 * weights[i];
            for (std::size_t k = 0; k < 3; ++k) {
                u_[k] += 0.5 * weights[i] * dirs_[i][k];
                if (dirs_[i][k] > 0.5) plus_[k] = n_[i];
                if (dirs_[i][k] < -0.5) minus_[k] = n_[i];
            }
        }
        const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
        // 3 min(w) <= sum_j w_j a_j <= 3 max(w) because sum_j a_j = 3.
        nu_lo_ = 1.0 / (3.0 * *hi);
        nu_hi_ = 1.0 / (3.0 * *lo);
    }

    double value(const Vec3& b, Vec3* grad = nullptr) const {
        double f = 0.0;
        Vec3 g{};
        for (std::size_t i = 0; i < 6; ++i) {
            if (n_[i] == 0.0) continue;
            const double a = 0.5 * (1.0 + dot(dirs_[i], b));
            f -= n_[i] * std::log(a);
            for (std::size_t k = 0; k < 3; ++k) g[k] -= 0.5 * n_[i] * dirs_[i][k] / a;
        }
        const double d = wsum_ + dot(u_, b);
        f += std::log(d);
        for (std::size_t k = 0; k < 3; ++k) g[k] += u_[k] / d;
        if (grad) *grad = g;
        return f;
    }

    // Runs the fit; false when the budget runs out, with best() still valid.
    // The budget applies to the multiplier search, and with unequal weights
    // also to the outer search for nu.
    bool run(int max_iterations) {
        budget_ = max_iterations;
        if (dot(u_, u_) == 0.0) {
            const int steps = solve_ball(0.0);
            iterations_ = steps < 0 ? budget_ : steps;
            return steps >= 0;
        }
        // nu D(b(nu)) - 1 changes sign across [nu_lo, nu_hi]; Illinois false position.
        auto evaluate = [&](double nu, double& residual) {
            if (iterations_ >= budget_ || solve_ball(nu) < 0) return false;
            ++iterations_;
            residual = nu * (wsum_ + dot(u_, best_)) - 1.0;
            return true;
        };
        double a = nu_lo_;
        double b = nu_hi_;
        double ra = 0.0;
        double rb = 0.0;
        if (!evaluate(a, ra)) return false;
        if (ra == 0.0) return true;
        if (!evaluate(b, rb)) return false;
        if (rb == 0.0) return true;
        int side = 0;
        while (true) {
            const double c = (a * rb - b * ra) / (rb - ra);
            if (!(c > std::min(a, b) && c < std::max(a, b)) || std::nextafter(a, b) == b) return true;
            double rc = 0.0;
            if (!evaluate(c, rc)) return false;
            if (rc == 0.0) return true;
            if ((rc > 0.0) == (rb > 0.0)) {
                b = c;
                rb = rc;
                if (side == -1) ra *= 0.5;
                side = -1;
            } else {
                a = c;
                ra = rc;
                if (side == 1) rb *= 0.5;
                side = 1;
            }
        }
    }

    const Vec3& best() const noexcept { return best_; }
    bool on_sphere() const noexcept { return mu_ > 0.0; }
    int iterations() const noexcept { return iterations_; }

private:
    // h_k(x) = -P/(1+x) + M/(1-x) + c + 2 mu x and its derivative.
    double h(std::size_t k, double x, double c, double mu) const {
        return -plus_[k] / (1.0 + x) + minus_[k] / (1.0 - x) + c + 2.0 * mu * x;
    }
    double dh(std::size_t k, double x, double mu) const {
        return plus_[k] / ((1.0 + x) * (1.0 + x)) + minus_[k] / ((1.0 - x) * (1.0 - x)) + 2.0 * mu;
    }

    // Root of the increasing function h_k on [-1, 1].
    double solve_axis(std::size_t k, double c, double mu) const {
        const double p = plus_[k];
        const double m = minus_[k];
        if (p == 0.0 && m == 0.0 && mu == 0.0) return c > 0.0 ? -1.0 : (c < 0.0 ? 1.0 : 0.0);
        if (c == 0.0 && mu == 0.0) return (p - m) / (p + m);
        if (p == 0.0 && m / 2.0 + c - 2.0 * mu >= 0.0) return -1.0;
        if (m == 0.0 && -p / 2.0 + c + 2.0 * mu <= 0.0) return 1.0;
        double lo = -1.0;
        double hi = 1.0;
        double x = p + m > 0.0 ? (p - m) / (p + m) : 0.0;
        if (!(x > lo && x < hi)) x = 0.0;
        for (int i = 0; i < 2000; ++i) {
            const double v = h(k, x, c, mu);
            if (v == 0.0) return x;
            (v > 0.0 ? hi : lo) = x;
            double next = x - v / dh(k, x, mu);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (next == x || std::nextafter(lo, hi) >= hi) return next;
            x = next;
        }
        return x;
    }

    Vec3 solve(double nu, double mu) const {
        Vec3 b{};
        for (std::size_t k = 0; k < 3; ++k) b[k] = solve_axis(k, nu * u_[k], mu);
        return b;
    }

    // Finds mu >= 0 with |b| <= 1 and mu (|b|^2 - 1) = 0 at fixed nu. The
    // function phi(mu) = 1/|b(mu)| - 1 increases and is close to linear, so
    // Newton on phi does most of the work, safeguarded by bisection; wide
    // brackets are split geometrically since mu can sit many decades below 1.
    // Convergence is judged on mu: a residual test on |b| would accept
    // iterates whose weakly determined components are still moving.
    // Returns the number of steps, or -1 when the budget runs out.
    int solve_ball(double nu) {
        mu_ = 0.0;
        const Vec3 free = solve(nu, 0.0);
        best_ = clamp_to_ball(free);
        // A pure-state optimum lands on the sphere up to rounding.
        if (dot(free, free) <= 1.0 + 8.0 * std::numeric_limits<double>::epsilon()) return 0;
        double lo = 0.0;
        double hi = 0.0;
        double mu = 1.0;
        double last_step = INFINITY;
        for (int steps = 1; steps <= budget_; ++steps) {
            const Vec3 b = solve(nu, mu);
            const double s = dot(b, b) - 1.0;
            best_ = clamp_to_ball(b);
            mu_ = mu;
            if (s == 0.0) return steps;
            (s > 0.0 ? lo : hi) = mu;
            if (hi == 0.0) {
                mu *= 4.0;  // not yet bracketed
                continue;
            }
            if (lo == 0.0 && hi < std::numeric_limits<double>::min()) return steps;
            if (std::nextafter(lo, hi) >= hi) return steps;
            double dsdmu = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                if (std::abs(b[k]) < 1.0) dsdmu -= 4.0 * b[k] * b[k] / dh(k, b[k], mu);
            }
            const double r = std::sqrt(s + 1.0);
            const double slope = -0.5 * dsdmu / (r * r * r);
            const double step = slope > 0.0 ? (1.0 / r - 1.0) / slope : INFINITY;
            if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * mu) return steps;
            double next = mu - step;
            if (!(next > lo && next < hi) || std::abs(step) > 0.5 * last_step) {
                if (lo == 0.0) {
                    next = hi / 64.0;
                } else if (hi > 4.0 * lo) {
                    next = std::sqrt(lo * hi);
                } else {
                    next = 0.5 * (lo + hi);
                }
                last_step = std::abs(next - mu);
            } else {
                last_step = std::abs(step);
            }
            mu = next;
        }
        return -1;
    }

    std::array<double, 6> n_{};
    std::array<Vec3, 6> dirs_{};
    Vec3 plus_{};
    Vec3 minus_{};
    Vec3 u_{};
    double wsum_ = 0.0;
    double nu_lo_ = 0.0;
    double nu_hi_ = 0.0;
    int budget_ = 0;
    int iterations_ = 0;
    double mu_ = 0.0;
    Vec3 best_{};
};

} // namespace detail

inline MleResult mle_fit(const ProjectionCounts& counts, const MleOptions& opt = {}) {
    stokes(counts);
    for (double w : opt.weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw InvalidParameter("projection weights must be positive");
    }
    detail::BlochFit fit(counts.as_array(), opt.weights);
    const bool ok = fit.run(opt.max_iterations);
    const detail::Vec3 b = fit.best();
    const Matrix2 rho = Matrix2::from_bloch(b[0], b[1], b[2]);
    if (!ok) {
        throw ConvergenceError("maximum-likelihood fit did not converge in " + std::to_string(opt.max_iterations) +
                                   " iterations",
                               rho, fit.iterations());
    }
    // Residual of the optimality conditions: the gradient, or its tangential
    // part on the pure-state sphere.
    detail::Vec3 g{};
    const double f = fit.value(b, &g);
    if (fit.on_sphere()) {
        const double gb = detail::dot(g, b);
        for (std::size_t k = 0; k < 3; ++k) g[k] -= gb * b[k];
    }
    return {rho, fit.iterations(), f, std::sqrt(detail::dot(g, g))};
}

inline DensityMatrix2 mle_rho(const ProjectionCounts& counts, const MleOptions& opt = {}) {
    return DensityMatrix2(mle_fit(counts, opt).rho);
}

// Expected counts sum_pair * <psi_i|rho|psi_i> with both time-basis counts
// and each superposition pair sharing one total.
inline ProjectionCounts expected_counts(const Matrix2& rho, double per_basis_total) {
    const auto& states = projection_states();
    std::array<double, 6> a{};
    for (std::size_t i = 0; i < 6; ++i) a[i] = per_basis_total * expectation(rho, states[i]);
    return ProjectionCounts::from_array(a);
}

// dN_i/dtheta for a common phase offset of Bob's analyzer. Zero for the
// time-basis projections; N(theta) = S (1 + 2 Re(e^{i theta} rho_el)) / 2.
inline std::array<double, 6> phase_derivative(const ProjectionCounts& c) {
    c.validate();
    const double s_pm = c.n_plus + c.n_minus;
    const double s_lr = c.n_left + c.n_right;
    const double x = s_pm > 0.0 ? (c.n_plus - c.n_minus) / s_pm : 0.0;
    const double y = s_lr > 0.0 ? (c.n_left - c.n_right) / s_lr : 0.0;
    const cplx rho_el(0.5 * x, -0.5 * y);
    auto d = [&](double total, double theta) { return -total * (std::polar(1.0, theta) * rho_el).imag(); };
    return {0.0, 0.0, d(s_pm, 0.0), d(s_pm, kPi), d(s_lr, 0.5 * kPi), d(s_lr, 1.5 * kPi)};
}

inline double joint_phase_error(std::initializer_list<double> components) {
    double s = 0.0;
    for (double c : components) s += c * c;
    return std::sqrt(s);
}

struct FidelityErrorOptions {
    bool shot_noise = true;
    unsigned threads = 0;
    MleOptions mle{};
};

struct FidelityErrorResult {
    double f_mean = 0.0;
    double f_std = 0.0;
    double f_nominal = 0.0;  // reconstruction of the unperturbed counts
    double purity_mean = 0.0;
    double purity_std = 0.0;
    int trials = 0;
};

inline constexpr std::uint64_t kTomographyStream = 0x746f6d6f67726166ULL;

// Each trial resamples every count from a Poisson law (if enabled), shifts
// the superposition counts by dN/dtheta * delta with an independent
// Gaussian delta per phi_B setting, and refits.
inline FidelityErrorResult fidelity_error(const ProjectionCounts& counts, const TimeBinQubit& target, double delta_theta,
                                          int trials, std::uint64_t seed, const FidelityErrorOptions& opt = {}) {
    if (trials < 1000) throw InvalidParameter("fidelity_error needs at least 1000 trials");
    if (!(delta_theta >= 0.0) || !std::isfinite(delta_theta)) throw InvalidParameter("phase error must be non-negative");
    stokes(counts);
    const auto base = counts.as_array();
    const auto dphase = phase_derivative(counts);

    std::vector<double> fid(static_cast<std::size_t>(trials));
    std::vector<double> pur(fid.size());
    nlbsm::detail::parallel_for(fid.size(), opt.threads, [&](std::size_t trial) {
        nlbsm::detail::SplitMix64 rng(seed, kTomographyStream, trial);
        std::array<double, 6> c = base;
        if (opt.shot_noise) {
            for (double& v : c) {
                if (v > 0.0) v = static_cast<double>(std::poisson_distribution<long long>(v)(rng));
            }
        }
        if (delta_theta > 0.0) {
            std::normal_distribution<double> normal(0.0, delta_theta);
            const double d0 = normal(rng);
            const double d1 = normal(rng);
            const std::array<double, 6> shift{0.0, 0.0, d0, d0, d1, d1};
            for (std::size_t i = 0; i < 6; ++i) c[i] = std::max(0.0, c[i] + dphase[i] * shift[i]);
        }
        const DensityMatrix2 rho = mle_rho(ProjectionCounts::from_array(c), opt.mle);
        fid[trial] = fidelity_pure(rho, target);
        pur[trial] = purity(rho);
    });

    auto mean_std = [](const std::vector<double>& v) {
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::pair{mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
    };
    FidelityErrorResult r;
    r.trials = trials;
    std::tie(r.f_mean, r.f_std) = mean_std(fid);
    std::tie(r.purity_mean, r.purity_std) = mean_std(pur);
    r.f_nominal = fidelity_pure(mle_rho(counts, opt.mle), target);
    return r;
}

} // namespace nlbsm::tomo
