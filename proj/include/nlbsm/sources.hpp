#pragma once

// Photon-number statistics of SPDC pair sources and of Alice's input state.

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/qubits.hpp"

namespace nlbsm {

inline constexpr int kDefaultPairCutoff = 64;

inline double p_si_from_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidParameter("pump conversion efficiency must lie in [0, 1)");
    return (1.0 - epsilon) * epsilon;
}

// Lower root of p = (1 - e) e; the weak-pump branch e <= 1/2.
inline double epsilon_from_p_si(double p_si) {
    if (!(p_si >= 0.0)) throw InvalidParameter("single-pair probability must be non-negative");
    if (p_si > 0.25) throw InvalidParameter("single-pair probability above 1/4 is unreachable for a thermal source");
    // 2p / (1 + sqrt(1 - 4p)) avoids the cancellation in (1 - sqrt(1 - 4p)) / 2.
    return 2.0 * p_si / (1.0 + std::sqrt(1.0 - 4.0 * p_si));
}

class PairSource {
public:
    static PairSource from_epsilon(double epsilon) {
        p_si_from_epsilon(epsilon);
        return PairSource(epsilon);
    }
    static PairSource from_p_si(double p_si) { return PairSource(epsilon_from_p_si(p_si)); }

    double epsilon() const noexcept { return epsilon_; }
    double p_si() const noexcept { return (1.0 - epsilon_) * epsilon_; }

    // (1 - e) e^n
    double probability(int n) const {
        if (n < 0) return 0.0;
        return (1.0 - epsilon_) * std::pow(epsilon_, n);
    }

private:
    explicit PairSource(double epsilon) : epsilon_(epsilon) {}
    double epsilon_;
};

struct PairDistribution {
    std::vector<double> probabilities;  // P(0..n_max)
    double tail;                        // P(n > n_max) = e^(n_max+1)
};

inline PairDistribution spdc_distribution(const PairSource& source, int n_max = kDefaultPairCutoff) {
    if (n_max < 0) throw InvalidParameter("n_max must be non-negative");
    PairDistribution d;
    d.probabilities.resize(static_cast<std::size_t>(n_max) + 1);
    const double e = source.epsilon();
    double pw = 1.0;
    for (int n = 0; n <= n_max; ++n) {
        d.probabilities[static_cast<std::size_t>(n)] = (1.0 - e) * pw;
        pw *= e;
    }
    d.tail = pw;
    return d;
}

// Alice's input: a coherent state known by its mean photon number, or an
// arbitrary pure state given by Fock amplitudes c_m.
class AliceSource {
public:
    static AliceSource coherent(double mean_photon_number) {
        if (!(mean_photon_number >= 0.0) || !std::isfinite(mean_photon_number)) {
            throw InvalidParameter("mean photon number must be finite and non-negative");
        }
        return AliceSource(mean_photon_number, std::nullopt);
    }

    static AliceSource fock_superposition(std::vector<cplx> amplitudes) {
        double norm = 0.0;
        double mean = 0.0;
        for (std::size_t m = 0; m < amplitudes.size(); ++m) {
            norm += std::norm(amplitudes[m]);
            mean += std::norm(amplitudes[m]) * static_cast<double>(m);
        }
        if (std::abs(norm - 1.0) > 1e-10) throw InvalidParameter("Fock amplitudes must be normalized");
        return AliceSource(mean, std::move(amplitudes));
    }

    static AliceSource single_photon() { return fock_superposition({0.0, 1.0}); }

    double mean_photon_number() const noexcept { return mean_; }
    bool is_coherent() const noexcept { return !amplitudes_.has_value(); }
    std::span<const cplx> amplitudes() const {
        return amplitudes_ ? std::span<const cplx>(*amplitudes_) : std::span<const cplx>();
    }

private:
    AliceSource(double mean, std::optional<std::vector<cplx>> amps) : mean_(mean), amplitudes_(std::move(amps)) {}

    double mean_;
    std::optional<std::vector<cplx>> amplitudes_;
};

// Gamma = p_SFG (1 - e) sum_m |c_m|^2 m, the common factor of every
// heralding event weight Gamma e^n n.
inline double alice_event_weight(const AliceSource& alice, double p_sfg, double epsilon) {
    if (!(p_sfg >= 0.0 && p_sfg <= 1.0)) throw InvalidParameter("p_sfg must lie in [0, 1]");
    return p_sfg * (1.0 - epsilon) * alice.mean_photon_number();
}

} // namespace nlbsm
