#pragma once

// Bell state measurements built from sum-frequency generation: the single
// SFG element heralding the Phi sector, the coincidence fringe, and the
// complete four-outcome analyzer made of two SFG elements.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "nlbsm/errors.hpp"
#include "nlbsm/qubits.hpp"

namespace nlbsm::bsm {

enum class SfgDetector { Sigma1Plus, Sigma1Minus, Sigma2Plus, Sigma2Minus, NoClick };

struct SfgOutcome {
    SfgDetector detector = SfgDetector::NoClick;
    std::optional<double> phase_sigma;  // absent for NoClick
};

struct HeraldBranch {
    SfgOutcome outcome;
    double probability = 0.0;
    std::optional<TimeBinQubit> idler;  // absent when nothing is heralded
};

// Single SFG element projecting the sum-frequency photon onto
// |Sigma+-> = (|e> +- e^{i phi}|l>)/sqrt2. Only |Phi+->_As up-convert;
// the Psi sector leaves no SFG photon. Probabilities are conditional on the
// conversion having happened.
inline std::array<HeraldBranch, 3> nlo_herald(const TimeBinQubit& alice, double phi_sigma) {
    const cplx a = alice.alpha();
    const cplx b = alice.beta() * std::polar(1.0, -phi_sigma);
    return {{
        {{SfgDetector::Sigma1Plus, phi_sigma}, 0.25, make_qubit(a, b)},
        {{SfgDetector::Sigma1Minus, phi_sigma}, 0.25, make_qubit(a, -b)},
        {{SfgDetector::NoClick, std::nullopt}, 0.5, std::nullopt},
    }};
}

enum class VisibilityModel { Product, Min, Explicit };

struct InterferometerBank {
    double phi_A = 0.0;
    double phi_Sigma = 0.0;
    double phi_B = 0.0;
    double V_A = 1.0;
    double V_Sigma = 1.0;
    double V_B = 1.0;
    VisibilityModel model = VisibilityModel::Product;
    double V_explicit = 1.0;

    void validate() const {
        for (double v : {V_A, V_Sigma, V_B, V_explicit}) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("visibilities must lie in [0, 1]");
        }
    }

    double effective_visibility() const {
        validate();
        switch (model) {
        case VisibilityModel::Product: return V_A * V_Sigma * V_B;
        case VisibilityModel::Min: return std::min({V_A, V_Sigma, V_B});
        case VisibilityModel::Explicit: return V_explicit;
        }
        return 1.0;
    }
};

// N0 (1 +- V cos(phi_A - phi_Sigma - phi_B)); port is +1 or -1.
inline double fringe_coincidences(double n0, const InterferometerBank& bank, int port) {
    if (!(n0 >= 0.0)) throw InvalidParameter("mean coincidence count must be non-negative");
    if (port != 1 && port != -1) throw InvalidParameter("port must be +1 or -1");
    const double v = bank.effective_visibility();
    return n0 * (1.0 + port * v * std::cos(bank.phi_A - bank.phi_Sigma - bank.phi_B));
}

// ---------------------------------------------------------------------------
// Complete analyzer: the first element converts e-e / l-l coincidences, the
// second (after bin-shifting delay lines) converts e-l / l-e.

struct AnalyzerEntry {
    SfgDetector detector;
    PauliCorrection correction;
};

inline AnalyzerEntry complete_bsa_map(BellLabel label) {
    switch (label) {
    case BellLabel::PhiPlus: return {SfgDetector::Sigma1Plus, PauliCorrection::Identity};
    case BellLabel::PhiMinus: return {SfgDetector::Sigma1Minus, PauliCorrection::Z};
    case BellLabel::PsiPlus: return {SfgDetector::Sigma2Plus, PauliCorrection::X};
    case BellLabel::PsiMinus: return {SfgDetector::Sigma2Minus, PauliCorrection::XZ};
    }
    throw InvalidParameter("unknown Bell label");
}

// Routing between the two elements. The beamsplitter variants lose half of
// the Psi-sector events; the switched variant loses none.
enum class AnalyzerScheme { SplitterDelay, SplitterBinShift, Switched };

inline double psi_sector_efficiency(AnalyzerScheme scheme) {
    return scheme == AnalyzerScheme::Switched ? 1.0 : 0.5;
}

struct TeleportBranch {
    BellLabel label;
    SfgDetector detector;
    double probability;
    TimeBinQubit conditional;
    PauliCorrection correction;
    TimeBinQubit corrected;
    double recovery_fidelity;
};

struct CompleteTeleportResult {
    std::vector<TeleportBranch> branches;
    double no_click_probability = 0.0;
};

inline CompleteTeleportResult complete_teleport(const TimeBinQubit& alice,
                                                AnalyzerScheme scheme = AnalyzerScheme::Switched) {
    CompleteTeleportResult result;
    const double psi_eff = psi_sector_efficiency(scheme);
    for (const BellBranch& br : bell_decompose(alice)) {
        const AnalyzerEntry entry = complete_bsa_map(br.label);
        const bool psi_sector = br.label == BellLabel::PsiPlus || br.label == BellLabel::PsiMinus;
        const double p = br.amplitude * br.amplitude * (psi_sector ? psi_eff : 1.0);
        const TimeBinQubit fixed = apply_correction(br.idler, entry.correction);
        result.branches.push_back({br.label, entry.detector, p, br.idler, entry.correction, fixed, overlap(fixed, alice)});
        result.no_click_probability += br.amplitude * br.amplitude - p;
    }
    return result;
}

} // namespace nlbsm::bsm
