#pragma once

// Event-level Monte Carlo and exact enumeration of SFG-heralded
// teleportation and of entanglement swapping.
//
// Every shot draws pair numbers, per-photon losses and detections from
// proposal laws and carries the likelihood ratio as its weight; the herald
// probability of a shot is folded into that weight. Fidelities are weighted
// ratio estimates. Shots are grouped in fixed chunks that are merged in
// order, and each shot owns a counter-based random stream, so results do not
// depend on the number of worker threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "nlbsm/bsm.hpp"
#include "nlbsm/detail/parallel.hpp"
#include "nlbsm/detail/rng.hpp"
#include "nlbsm/errors.hpp"
#include "nlbsm/protocols.hpp"
#include "nlbsm/qubits.hpp"
#include "nlbsm/sources.hpp"
#include "nlbsm/tomography.hpp"

namespace nlbsm::mc {

using protocols::LossMode;

enum class BsmType { Nlo, Lo };

// Thermal: P(n) = (1 - e) e^n. TruncatedTwoPair: n <= 2 with relative
// weights 1 : p_si : p_si^2, the bookkeeping of the estimated-fidelity model.
enum class PairModel { Thermal, TruncatedTwoPair };

// NonPostselected: a herald is desired iff exactly one pair was emitted.
// Coincidence: an idler click is required; the event is desired iff the
// partner of the converted signal is among the detected idlers (pole
// targets also accept unrelated idlers found in the converted signal's bin).
enum class TeleportMode { NonPostselected, Coincidence };

enum class LoHeraldRule { ExactlyTwo, AtLeastTwo };
enum class NloConversion { Linear, SinglePerSide };

struct DarkCounts {
    bool enabled = false;
    double spad_hz = 60.0;
    double snspd_hz = 100.0;
    double bin_width_s = 350e-12;
};

// For swapping, t_A is the channel of source A's BSM photon and t_s the
// channel of source B's. For teleportation source_a is Alice, whose mean
// photon number is taken inside the cavity.
struct ScenarioConfig {
    std::variant<AliceSource, PairSource> source_a = AliceSource::coherent(1.0);
    PairSource source_b = PairSource::from_p_si(0.0);
    double p_sfg = 1e-3;
    double t_A = 1.0;
    double t_s = 1.0;
    double t_i = 1.0;
    double t_Sigma = 1.0;
    double eta_i = 1.0;
    double eta_Sigma = 1.0;
    BsmType bsm = BsmType::Nlo;
    double clock = 1e9;
    DarkCounts dark{};

    PairModel pair_model = PairModel::Thermal;
    TeleportMode teleport_mode = TeleportMode::NonPostselected;
    LoHeraldRule lo_rule = LoHeraldRule::ExactlyTwo;
    NloConversion nlo_conversion = NloConversion::Linear;
    bsm::InterferometerBank bank{};
    double integration_time_s = 3600.0;

    void validate() const {
        for (double v : {p_sfg, t_A, t_s, t_i, t_Sigma, eta_i, eta_Sigma}) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("probabilities and transmissions must lie in [0, 1]");
        }
        if (!(clock > 0.0) || !std::isfinite(clock)) throw InvalidParameter("clock must be positive");
        if (!(integration_time_s > 0.0)) throw InvalidParameter("integration time must be positive");
        if (dark.enabled && !(dark.spad_hz >= 0.0 && dark.snspd_hz >= 0.0 && dark.bin_width_s > 0.0)) {
            throw InvalidParameter("dark count rates must be non-negative");
        }
        bank.validate();
    }

    const AliceSource& alice() const {
        if (const auto* a = std::get_if<AliceSource>(&source_a)) return *a;
        throw InvalidParameter("teleportation needs an Alice source");
    }
    const PairSource& pair_a() const {
        if (const auto* a = std::get_if<PairSource>(&source_a)) return *a;
        throw InvalidParameter("swapping needs a pair source on side A");
    }

    static ScenarioConfig teleport(double p_si, double p_sfg = 1e-3, double mean_photon_number = 1.0) {
        ScenarioConfig c;
        c.source_a = AliceSource::coherent(mean_photon_number);
        c.source_b = PairSource::from_p_si(p_si);
        c.p_sfg = p_sfg;
        return c;
    }

    static ScenarioConfig swap(double p_a, double p_b, double eta, LossMode mode, BsmType type) {
        ScenarioConfig c;
        c.source_a = PairSource::from_p_si(p_a);
        c.source_b = PairSource::from_p_si(p_b);
        c.bsm = type;
        c.t_A = mode == LossMode::Balanced ? eta : 1.0;
        c.t_s = mode == LossMode::Lossless ? 1.0 : eta;
        return c;
    }
};

struct ImportancePlan {
    bool enabled = true;
    double source_floor = 0.25;       // proposal e' = max(e, floor)
    double loss_floor = 0.5;          // proposal survival q = max(t, floor)
    double max_second_moment = 0.5;   // bound on the per-pair weight growth
};

struct RunOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    ImportancePlan plan{};
    std::size_t record_limit = 0;  // keep the first N trial records
};

enum class Classification { Desired, Undesired, NoHerald };

struct TrialRecord {
    int pairs_a = 0;  // zero for teleportation (Alice is not sampled)
    int pairs_b = 0;
    int survivals_a = 0;
    int survivals_b = 0;
    int idlers_detected = 0;
    bool herald = false;
    Classification classification = Classification::NoHerald;
    double weight = 0.0;
};

struct RecordsSummary {
    std::uint64_t shots = 0;
    std::uint64_t heralded = 0;
    std::uint64_t desired = 0;
    std::uint64_t undesired = 0;
    std::uint64_t saturated = 0;  // shots whose conversion weight was clamped to 1
    double herald_weight = 0.0;
    double desired_weight = 0.0;
    double effective_sample_size = 0.0;
    std::array<double, 9> herald_weight_by_pairs{};  // index: total pairs, last bin open
};

struct SimulationSummary {
    double f_hat = 0.0;
    double std_error = 0.0;
    double f_hat_poles = 0.0;  // pole-target classification (teleport coincidence)
    double std_error_poles = 0.0;
    RecordsSummary records;
    std::vector<TrialRecord> trials;
};

namespace detail {

inline constexpr std::uint64_t kChunk = 1u << 15;
inline constexpr int kMaxPairs = 100000;
inline constexpr std::uint64_t kTeleportStream = 1;
inline constexpr std::uint64_t kSwapStream = 2;
inline constexpr std::uint64_t kExperimentStream = 3;

using nlbsm::detail::SplitMix64;

// Pair-number sampler with likelihood-ratio weights relative to the target
// law. With at_least_one the target is restricted to n >= 1 and divided by
// P(n = 1)/(1 - e) (thermal) or p_si (truncated); `absolute_scale` undoes it.
class PairSampler {
public:
    PairSampler(PairModel model, double epsilon, bool at_least_one, double proposal_epsilon, bool proposal_enabled)
        : model_(model), eps_(epsilon), p_(epsilon * (1.0 - epsilon)), at_least_one_(at_least_one) {
        if (model_ == PairModel::Thermal) {
            prop_ = proposal_enabled ? std::max(epsilon, proposal_epsilon) : epsilon;
            ratio_ = prop_ > 0.0 ? eps_ / prop_ : 0.0;
            base_ = (1.0 - eps_) / (1.0 - prop_);
            log_prop_ = prop_ > 0.0 ? std::log(prop_) : 0.0;
        } else {
            uniform_ = proposal_enabled;
            const double z = at_least_one_ ? p_ + p_ * p_ : 1.0 + p_ + p_ * p_;
            first_ = at_least_one_ ? 1 : 0;
            for (int n = first_; n <= 2; ++n) {
                probs_[static_cast<std::size_t>(n)] = uniform_ ? 1.0 / (3 - first_) : std::pow(p_, n) / z;
            }
            if (!uniform_ && !(z > 0.0)) probs_[static_cast<std::size_t>(first_)] = 1.0;
        }
    }

    double proposal_epsilon() const { return prop_; }

    // Multiplies relative weights into absolute per-gate probabilities.
    double absolute_scale() const {
        if (!at_least_one_) return model_ == PairModel::Thermal ? 1.0 : 1.0 / (1.0 + p_ + p_ * p_);
        return model_ == PairModel::Thermal ? eps_ : p_ / (1.0 + p_ + p_ * p_);
    }

    // Mean pair number of the target law.
    double mean_pairs() const {
        if (model_ == PairModel::Thermal) return eps_ / (1.0 - eps_);
        return (p_ + 2.0 * p_ * p_) / (1.0 + p_ + p_ * p_);
    }

    int sample(SplitMix64& rng, double& weight) const {
        if (model_ == PairModel::Thermal) {
            int n = 0;
            if (prop_ > 0.0) {
                const double draw = std::floor(std::log(rng.uniform()) / log_prop_);
                n = draw > kMaxPairs ? kMaxPairs : static_cast<int>(draw);
            }
            if (at_least_one_) {
                weight *= base_ * std::pow(ratio_, n);
                return n + 1;
            }
            weight *= base_ * std::pow(ratio_, n);
            return n;
        }
        const double u = rng.uniform();
        int n = first_;
        double acc = probs_[static_cast<std::size_t>(n)];
        while (n < 2 && u >= acc) {
            ++n;
            acc += probs_[static_cast<std::size_t>(n)];
        }
        weight *= std::pow(p_, n - first_) / probs_[static_cast<std::size_t>(n)];
        return n;
    }

private:
    PairModel model_;
    double eps_;
    double p_;
    bool at_least_one_;
    double prop_ = 0.0;
    double ratio_ = 0.0;
    double base_ = 1.0;
    double log_prop_ = 0.0;
    bool uniform_ = false;
    int first_ = 0;
    std::array<double, 3> probs_{};
};

// Independent per-photon Bernoulli(t) thinning drawn from Bernoulli(q).
struct Thinning {
    double t = 1.0;
    double q = 1.0;

    static Thinning make(double t, double floor, bool enabled) {
        if (!enabled || t <= 0.0 || t >= 1.0) return {t, t};
        return {t, std::max(t, floor)};
    }

    // Second moment of the weight per photon.
    double second_moment() const {
        if (q == t) return 1.0;
        return t * t / q + (1.0 - t) * (1.0 - t) / (1.0 - q);
    }

    bool keep(SplitMix64& rng, double& weight) const {
        if (q == t) return t >= 1.0 || (t > 0.0 && rng.uniform() < t);
        if (rng.uniform() < q) {
            weight *= t / q;
            return true;
        }
        weight *= (1.0 - t) / (1.0 - q);
        return false;
    }

    int survivors(int n, SplitMix64& rng, double& weight) const {
        int k = 0;
        for (int i = 0; i < n; ++i) k += keep(rng, weight) ? 1 : 0;
        return k;
    }
};

struct SourcePlan {
    PairSampler sampler;
    std::vector<Thinning> channels;
};

inline SourcePlan plan_source(PairModel model, double eps, bool at_least_one, std::vector<double> transmissions,
                              const ImportancePlan& plan) {
    bool thin = plan.enabled;
    bool boost = plan.enabled;
    for (int attempt = 0; attempt < 3; ++attempt) {
        PairSampler s(model, eps, at_least_one, plan.source_floor, boost);
        std::vector<Thinning> ch;
        double moment = 1.0;
        for (double t : transmissions) {
            ch.push_back(Thinning::make(t, plan.loss_floor, thin));
            moment *= ch.back().second_moment();
        }
        const double prop = s.proposal_epsilon();
        const double r = model == PairModel::Thermal && prop > 0.0 ? eps * eps / prop * moment : 0.0;
        if (r < plan.max_second_moment || attempt == 2) return {s, ch};
        if (thin) {
            thin = false;
        } else {
            boost = false;
        }
    }
    return {PairSampler(model, eps, at_least_one, 0.0, false), {}};
}

struct Accumulator {
    std::uint64_t shots = 0;
    std::uint64_t heralded = 0;
    std::uint64_t desired = 0;
    std::uint64_t undesired = 0;
    std::uint64_t saturated = 0;
    double sw = 0.0;
    double sw2 = 0.0;
    double swd = 0.0;
    double sw2d = 0.0;
    double swp = 0.0;
    double sw2p = 0.0;
    std::array<double, 9> by_pairs{};

    void add(double w, bool herald, bool desired_sup, bool desired_pole, int total_pairs) {
        ++shots;
        if (!herald || w == 0.0) return;
        ++heralded;
        ++(desired_sup ? desired : undesired);
        sw += w;
        sw2 += w * w;
        if (desired_sup) {
            swd += w;
            sw2d += w * w;
        }
        if (desired_pole) {
            swp += w;
            sw2p += w * w;
        }
        by_pairs[static_cast<std::size_t>(std::min(total_pairs, 8))] += w;
    }

    void merge(const Accumulator& o) {
        shots += o.shots;
        heralded += o.heralded;
        desired += o.desired;
        undesired += o.undesired;
        saturated += o.saturated;
        sw += o.sw;
        sw2 += o.sw2;
        swd += o.swd;
        sw2d += o.sw2d;
        swp += o.swp;
        sw2p += o.sw2p;
        for (std::size_t i = 0; i < by_pairs.size(); ++i) by_pairs[i] += o.by_pairs[i];
    }
};

// Weighted ratio estimate with its delta-method standard error.
inline std::pair<double, double> ratio_estimate(double sw, double sw2, double swd, double sw2d) {
    if (!(sw > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double f = swd / sw;
    const double var = (1.0 - 2.0 * f) * sw2d + f * f * sw2;
    return {f, std::sqrt(std::max(var, 0.0)) / sw};
}

inline SimulationSummary summarize(const std::vector<Accumulator>& chunks, std::vector<TrialRecord> trials) {
    Accumulator a;
    for (const auto& c : chunks) a.merge(c);
    SimulationSummary s;
    std::tie(s.f_hat, s.std_error) = ratio_estimate(a.sw, a.sw2, a.swd, a.sw2d);
    std::tie(s.f_hat_poles, s.std_error_poles) = ratio_estimate(a.sw, a.sw2, a.swp, a.sw2p);
    RecordsSummary& r = s.records;
    r.shots = a.shots;
    r.heralded = a.heralded;
    r.desired = a.desired;
    r.undesired = a.undesired;
    r.saturated = a.saturated;
    r.herald_weight = a.sw;
    r.desired_weight = a.swd;
    r.effective_sample_size = a.sw2 > 0.0 ? a.sw * a.sw / a.sw2 : 0.0;
    r.herald_weight_by_pairs = a.by_pairs;
    s.trials = std::move(trials);
    return s;
}

template <class ShotFn>
std::vector<Accumulator> run_chunks(std::uint64_t shots, unsigned threads, ShotFn&& shot_fn) {
    const std::uint64_t chunks = (shots + kChunk - 1) / kChunk;
    std::vector<Accumulator> acc(static_cast<std::size_t>(chunks));
    nlbsm::detail::parallel_for(acc.size(), threads, [&](std::size_t c) {
        const std::uint64_t begin = c * kChunk;
        const std::uint64_t end = std::min(shots, begin + kChunk);
        for (std::uint64_t shot = begin; shot < end; ++shot) shot_fn(shot, acc[c]);
    });
    return acc;
}

inline void require_shots(std::uint64_t shots) {
    if (shots < 1) throw InvalidParameter("shots must be at least 1");
}

// Converted-signal bookkeeping shared by the teleportation simulators.
struct TeleportShot {
    int pairs = 0;
    int signals = 0;
    int idlers = 0;
    bool converted = false;
    bool saturated = false;
    bool partner_detected = false;
    bool bins_agree = false;  // every detected unrelated idler shares the converted signal's bin
    double weight = 1.0;
};

struct TeleportKernel {
    SourcePlan plan;
    double conversion_scale = 0.0;  // p_sfg * <n_A>
    double detection = 1.0;         // t_Sigma eta_Sigma / 4
    bool coincidence = false;

    TeleportShot run(SplitMix64& rng, std::vector<std::uint8_t>& scratch) const {
        TeleportShot s;
        s.pairs = plan.sampler.sample(rng, s.weight);
        if (s.pairs == 0) return s;
        const auto n = static_cast<std::size_t>(s.pairs);
        // scratch[j]: bit 0 signal survived, bit 1 idler detected, bit 2 time bin.
        scratch.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (plan.channels[0].keep(rng, s.weight)) {
                scratch[j] |= 1;
                ++s.signals;
            }
        }
        if (s.signals == 0) return s;
        const double h = conversion_scale * s.signals;
        s.saturated = h > 1.0;
        s.weight *= std::min(h, 1.0) * detection;
        if (s.weight == 0.0) return s;
        s.converted = true;

        // The converted signal is uniform among the survivors.
        int pick = static_cast<int>(rng.uniform() * s.signals);
        std::size_t conv = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if ((scratch[j] & 1) && pick-- == 0) {
                conv = j;
                break;
            }
        }
        if (!coincidence) return s;
        for (std::size_t j = 0; j < n; ++j) {
            if (plan.channels[1].keep(rng, s.weight)) {
                scratch[j] |= 2;
                ++s.idlers;
            }
            if (rng.uniform() < 0.5) scratch[j] |= 4;
        }
        s.partner_detected = (scratch[conv] & 2) != 0;
        s.bins_agree = true;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != conv && (scratch[j] & 2) && ((scratch[j] & 4) != (scratch[conv] & 4))) s.bins_agree = false;
        }
        return s;
    }
};

inline TeleportKernel make_teleport_kernel(const ScenarioConfig& cfg, const ImportancePlan& plan) {
    cfg.validate();
    const AliceSource& alice = cfg.alice();
    const bool coincidence = cfg.teleport_mode == TeleportMode::Coincidence;
    std::vector<double> channels{cfg.t_s};
    channels.push_back(coincidence ? cfg.t_i * cfg.eta_i : 1.0);
    TeleportKernel k{plan_source(cfg.pair_model, cfg.source_b.epsilon(), true, channels, plan),
                     cfg.p_sfg * alice.mean_photon_number(), 0.25 * cfg.t_Sigma * cfg.eta_Sigma, coincidence};
    return k;
}

} // namespace detail

inline SimulationSummary simulate_teleport(const ScenarioConfig& cfg, std::uint64_t shots, std::uint64_t seed,
                                           const RunOptions& opt = {}) {
    detail::require_shots(shots);
    const detail::TeleportKernel kernel = detail::make_teleport_kernel(cfg, opt.plan);
    std::vector<TrialRecord> trials(std::min<std::uint64_t>(opt.record_limit, shots));

    auto acc = detail::run_chunks(shots, opt.threads, [&](std::uint64_t shot, detail::Accumulator& a) {
        thread_local std::vector<std::uint8_t> scratch;
        detail::SplitMix64 rng(seed, detail::kTeleportStream, shot);
        const detail::TeleportShot s = kernel.run(rng, scratch);
        const bool herald = s.converted && (!kernel.coincidence || s.idlers > 0);
        bool sup = false;
        bool pole = false;
        if (herald) {
            if (kernel.coincidence) {
                sup = s.partner_detected;
                pole = s.partner_detected || s.bins_agree;
            } else {
                sup = pole = s.pairs == 1;
            }
        }
        a.saturated += s.saturated ? 1 : 0;
        a.add(s.weight, herald, sup, pole, s.pairs);
        if (shot < trials.size()) {
            trials[shot] = {0, s.pairs, 0, s.signals, s.idlers, herald,
                            herald ? (sup ? Classification::Desired : Classification::Undesired) : Classification::NoHerald,
                            herald ? s.weight : 0.0};
        }
    });
    return detail::summarize(acc, std::move(trials));
}

inline SimulationSummary simulate_swap(const ScenarioConfig& cfg, std::uint64_t shots, std::uint64_t seed,
                                       const RunOptions& opt = {}) {
    detail::require_shots(shots);
    cfg.validate();
    const bool nlo = cfg.bsm == BsmType::Nlo;
    const detail::SourcePlan pa = detail::plan_source(cfg.pair_model, cfg.pair_a().epsilon(), nlo, {cfg.t_A}, opt.plan);
    const detail::SourcePlan pb = detail::plan_source(cfg.pair_model, cfg.source_b.epsilon(), nlo, {cfg.t_s}, opt.plan);
    std::vector<TrialRecord> trials(std::min<std::uint64_t>(opt.record_limit, shots));

    auto acc = detail::run_chunks(shots, opt.threads, [&](std::uint64_t shot, detail::Accumulator& a) {
        detail::SplitMix64 rng(seed, detail::kSwapStream, shot);
        double w = 1.0;
        const int na = pa.sampler.sample(rng, w);
        const int nb = pb.sampler.sample(rng, w);
        const int ka = pa.channels[0].survivors(na, rng, w);
        const int kb = pb.channels[0].survivors(nb, rng, w);
        bool herald = false;
        if (nlo) {
            double h = 0.0;
            if (ka > 0 && kb > 0) {
                h = cfg.nlo_conversion == NloConversion::Linear ? cfg.p_sfg * ka * kb : cfg.p_sfg;
            }
            if (h > 1.0) {
                ++a.saturated;
                h = 1.0;
            }
            w *= h;
            herald = h > 0.0;
        } else {
            herald = cfg.lo_rule == LoHeraldRule::ExactlyTwo ? ka + kb == 2 : ka + kb >= 2;
        }
        const bool desired = herald && na == 1 && nb == 1 && ka == 1 && kb == 1;
        a.add(w, herald, desired, desired, na + nb);
        if (shot < trials.size()) {
            trials[shot] = {na, nb, ka, kb, 0, herald,
                            herald ? (desired ? Classification::Desired : Classification::Undesired)
                                   : Classification::NoHerald,
                            herald ? w : 0.0};
        }
    });
    return detail::summarize(acc, std::move(trials));
}

struct BruteForceResult {
    double fidelity = 0.0;
    double fidelity_poles = 0.0;
    double tail_bound = 0.0;     // upper bound on the truncation error (truncated minus exact)
    double heralded_mass = 0.0;  // herald probability summed inside the truncation
    int n_max = 0;
};

namespace detail {

// P(n) of the configured law for n = 0..n_max.
inline std::vector<double> pair_law(PairModel model, const PairSource& src, int n_max) {
    std::vector<double> p(static_cast<std::size_t>(n_max) + 1, 0.0);
    if (model == PairModel::Thermal) {
        p = spdc_distribution(src, n_max).probabilities;
    } else {
        const double ps = src.p_si();
        const double z = 1.0 + ps + ps * ps;
        for (int n = 0; n <= std::min(n_max, 2); ++n) p[static_cast<std::size_t>(n)] = std::pow(ps, n) / z;
    }
    return p;
}

// Binomial pmf rows B[n][k] built by the Pascal recursion.
inline std::vector<std::vector<double>> binomial_rows(int n_max, double t) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n_max) + 1);
    rows[0] = {1.0};
    for (int n = 1; n <= n_max; ++n) {
        const auto& prev = rows[static_cast<std::size_t>(n - 1)];
        auto& row = rows[static_cast<std::size_t>(n)];
        row.assign(static_cast<std::size_t>(n) + 1, 0.0);
        for (int k = 0; k < n; ++k) {
            row[static_cast<std::size_t>(k)] += prev[static_cast<std::size_t>(k)] * (1.0 - t);
            row[static_cast<std::size_t>(k) + 1] += prev[static_cast<std::size_t>(k)] * t;
        }
    }
    return rows;
}

// sum_{n > n_max} P(n) and sum_{n > n_max} n P(n) for the configured law.
inline std::pair<double, double> pair_tail(PairModel model, const PairSource& src, int n_max) {
    if (model == PairModel::TruncatedTwoPair) {
        if (n_max >= 2) return {0.0, 0.0};
        const double ps = src.p_si();
        const double z = 1.0 + ps + ps * ps;
        double mass = 0.0;
        double first = 0.0;
        for (int n = n_max + 1; n <= 2; ++n) {
            mass += std::pow(ps, n) / z;
            first += n * std::pow(ps, n) / z;
        }
        return {mass, first};
    }
    const double e = src.epsilon();
    const double m = n_max + 1.0;
    const double mass = std::pow(e, m);
    const double first = std::pow(e, m) * (m * (1.0 - e) + e) / (1.0 - e);
    return {mass, first};
}

inline double total_first_moment(PairModel model, const PairSource& src) {
    if (model == PairModel::Thermal) return src.epsilon() / (1.0 - src.epsilon());
    const double ps = src.p_si();
    return (ps + 2.0 * ps * ps) / (1.0 + ps + ps * ps);
}

} // namespace detail

inline BruteForceResult brute_force_teleport(const ScenarioConfig& cfg, int n_max) {
    if (n_max < 1) throw InvalidParameter("n_max must be at least 1");
    cfg.validate();
    const double scale = cfg.p_sfg * cfg.alice().mean_photon_number();
    const bool coincidence = cfg.teleport_mode == TeleportMode::Coincidence;
    const double d = cfg.t_i * cfg.eta_i;
    const auto law = detail::pair_law(cfg.pair_model, cfg.source_b, n_max);
    const auto sig = detail::binomial_rows(n_max, cfg.t_s);
    const auto idl = detail::binomial_rows(n_max, d);

    double h_sum = 0.0;
    double d_sup = 0.0;
    double d_pole = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double pn = law[static_cast<std::size_t>(n)];
        if (pn == 0.0) continue;
        double conv = 0.0;
        for (int k = 1; k <= n; ++k) {
            conv += sig[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)] * std::min(1.0, scale * k);
        }
        if (!coincidence) {
            h_sum += pn * conv;
            if (n == 1) d_sup = d_pole = pn * conv;
            continue;
        }
        for (int j = 1; j <= n; ++j) {
            const double pj = pn * conv * idl[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)];
            const double partner = static_cast<double>(j) / n;
            h_sum += pj;
            d_sup += pj * partner;
            d_pole += pj * (partner + (1.0 - partner) * std::pow(0.5, j));
        }
    }
    if (!(h_sum > 0.0)) throw InvalidParameter("no heralded events in the configured scenario");
    BruteForceResult r;
    r.n_max = n_max;
    r.heralded_mass = h_sum;
    r.fidelity = d_sup / h_sum;
    r.fidelity_poles = d_pole / h_sum;
    const double omitted = scale * cfg.t_s * detail::pair_tail(cfg.pair_model, cfg.source_b, n_max).second;
    r.tail_bound = std::max(r.fidelity, r.fidelity_poles) * omitted / h_sum;
    return r;
}

inline BruteForceResult brute_force_swap(const ScenarioConfig& cfg, int n_max) {
    if (n_max < 1) throw InvalidParameter("n_max must be at least 1");
    cfg.validate();
    const PairSource& sa = cfg.pair_a();
    const PairSource& sb = cfg.source_b;
    const auto la = detail::pair_law(cfg.pair_model, sa, n_max);
    const auto lb = detail::pair_law(cfg.pair_model, sb, n_max);
    const auto ba = detail::binomial_rows(n_max, cfg.t_A);
    const auto bb = detail::binomial_rows(n_max, cfg.t_s);
    const bool nlo = cfg.bsm == BsmType::Nlo;

    auto herald = [&](int ka, int kb) -> double {
        if (nlo) {
            if (ka == 0 || kb == 0) return 0.0;
            return std::min(1.0, cfg.nlo_conversion == NloConversion::Linear ? cfg.p_sfg * ka * kb : cfg.p_sfg);
        }
        return (cfg.lo_rule == LoHeraldRule::ExactlyTwo ? ka + kb == 2 : ka + kb >= 2) ? 1.0 : 0.0;
    };

    double h_sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double pn = la[static_cast<std::size_t>(n)];
        if (pn == 0.0) continue;
        for (int m = 0; m <= n_max; ++m) {
            const double pm = lb[static_cast<std::size_t>(m)];
            if (pm == 0.0) continue;
            double inner = 0.0;
            for (int ka = 0; ka <= n; ++ka) {
                const double pa = ba[static_cast<std::size_t>(n)][static_cast<std::size_t>(ka)];
                // Under the exactly-two rule only kb = 2 - ka can herald.
                for (int kb = 0; kb <= m; ++kb) {
                    const double h = herald(ka, kb);
                    if (h != 0.0) inner += pa * bb[static_cast<std::size_t>(m)][static_cast<std::size_t>(kb)] * h;
                }
            }
            h_sum += pn * pm * inner;
        }
    }
    const double desired = la[1] * lb[1] * cfg.t_A * cfg.t_s * herald(1, 1);
    if (!(h_sum > 0.0)) throw InvalidParameter("no heralded events in the configured scenario");

    BruteForceResult r;
    r.n_max = n_max;
    r.heralded_mass = h_sum;
    r.fidelity = r.fidelity_poles = desired / h_sum;

    const auto [tail_a, first_a] = detail::pair_tail(cfg.pair_model, sa, n_max);
    const auto [tail_b, first_b] = detail::pair_tail(cfg.pair_model, sb, n_max);
    double omitted = 0.0;
    if (nlo && cfg.nlo_conversion == NloConversion::Linear) {
        const double ma = detail::total_first_moment(cfg.pair_model, sa);
        const double mb = detail::total_first_moment(cfg.pair_model, sb);
        omitted = cfg.p_sfg * cfg.t_A * cfg.t_s * (ma * mb - (ma - first_a) * (mb - first_b));
    } else {
        const double c = nlo ? cfg.p_sfg : 1.0;
        omitted = c * (1.0 - (1.0 - tail_a) * (1.0 - tail_b));
    }
    r.tail_bound = r.fidelity * omitted / h_sum;
    return r;
}

// Dispatches on the scenario: swapping when side A is a pair source.
inline BruteForceResult brute_force_fidelity(const ScenarioConfig& cfg, int n_max = 40) {
    if (std::holds_alternative<PairSource>(cfg.source_a)) return brute_force_swap(cfg, n_max);
    return brute_force_teleport(cfg, n_max);
}

struct FullExperimentResult {
    tomo::RawBinCounts counts;        // expected counts over the integration time
    double gates = 0.0;               // clock * integration time
    double herald_probability = 0.0;  // SFG detections per gate
    double accidental_counts = 0.0;   // dark-count contribution included in counts
    RecordsSummary records;
};

namespace detail {

// Bob's analyzer at phase phi: per detector, the e and ll bins receive
// rho_ee/4 and rho_ll/4; the middle bin of detector 2 (1) projects onto
// (|e> + (-) e^{-i phi}|l>)/sqrt2 with weight 1/2. Visibility v scales the
// coherence.
inline std::array<std::array<double, 3>, 2> analyzer_bins(const Matrix2& rho, double phi, double v) {
    const double ee = rho(0, 0).real();
    const double ll = rho(1, 1).real();
    const cplx coh = v * rho(0, 1) * std::polar(1.0, -phi);
    const double mid2 = 0.25 * (ee + ll + 2.0 * coh.real());
    const double mid1 = 0.25 * (ee + ll - 2.0 * coh.real());
    return {{{0.25 * ee, mid1, 0.25 * ll}, {0.25 * ee, mid2, 0.25 * ll}}};
}

} // namespace detail

// Detector-level bin counts for phi_B in {0, pi/2}; shots alternate between
// the two settings. Heralds come from the single SFG detector (Sigma1+).
inline FullExperimentResult simulate_full_experiment(const ScenarioConfig& base_cfg, const TimeBinQubit& alice,
                                                     std::uint64_t shots, std::uint64_t seed,
                                                     const RunOptions& opt = {}) {
    if (shots < 2) throw InvalidParameter("full experiment needs at least 2 shots");
    ScenarioConfig cfg = base_cfg;
    cfg.teleport_mode = TeleportMode::Coincidence;
    const detail::TeleportKernel kernel = detail::make_teleport_kernel(cfg, opt.plan);
    const double v = cfg.bank.effective_visibility();
    const TimeBinQubit heralded = *bsm::nlo_herald(alice, cfg.bank.phi_Sigma)[0].idler;
    const Matrix2 partner = DensityMatrix2::projector(heralded).matrix();
    const Matrix2 mixed = Matrix2::from_bloch(0.0, 0.0, 0.0);
    std::array<std::array<std::array<double, 3>, 2>, 2> p_partner{};
    std::array<std::array<std::array<double, 3>, 2>, 2> p_mixed{};
    for (int s = 0; s < 2; ++s) {
        const double phi = cfg.bank.phi_B + 0.5 * kPi * s;
        p_partner[static_cast<std::size_t>(s)] = detail::analyzer_bins(partner, phi, v);
        p_mixed[static_cast<std::size_t>(s)] = detail::analyzer_bins(mixed, phi, v);
    }

    struct Chunk {
        detail::Accumulator acc;
        std::array<std::array<std::array<double, 3>, 2>, 2> counts{};
        double sfg = 0.0;  // SFG detections irrespective of idlers
    };
    const std::uint64_t n_chunks = (shots + detail::kChunk - 1) / detail::kChunk;
    std::vector<Chunk> chunks(static_cast<std::size_t>(n_chunks));
    nlbsm::detail::parallel_for(chunks.size(), opt.threads, [&](std::size_t c) {
        std::vector<std::uint8_t> scratch;
        Chunk& out = chunks[c];
        const std::uint64_t begin = c * detail::kChunk;
        const std::uint64_t end = std::min(shots, begin + detail::kChunk);
        for (std::uint64_t shot = begin; shot < end; ++shot) {
            detail::SplitMix64 rng(seed, detail::kExperimentStream, shot);
            const detail::TeleportShot s = kernel.run(rng, scratch);
            const std::size_t setting = shot & 1U;
            if (s.converted) out.sfg += s.weight;
            const bool herald = s.converted && s.idlers > 0;
            out.acc.saturated += s.saturated ? 1 : 0;
            out.acc.add(s.weight, herald, s.partner_detected, s.partner_detected || s.bins_agree, s.pairs);
            if (!herald) continue;
            const int unrelated = s.idlers - (s.partner_detected ? 1 : 0);
            for (std::size_t det = 0; det < 2; ++det) {
                for (std::size_t bin = 0; bin < 3; ++bin) {
                    double p = unrelated * p_mixed[setting][det][bin];
                    if (s.partner_detected) p += p_partner[setting][det][bin];
                    out.counts[setting][det][bin] += s.weight * p;
                }
            }
        }
    });

    FullExperimentResult r;
    r.gates = cfg.clock * cfg.integration_time_s;
    const double scale = kernel.plan.sampler.absolute_scale();
    // Each setting receives half of the shots and half of the gates.
    const double per_shot = r.gates / static_cast<double>(shots) * scale;
    double sfg = 0.0;
    detail::Accumulator total;
    for (const Chunk& c : chunks) {
        total.merge(c.acc);
        sfg += c.sfg;
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t det = 0; det < 2; ++det)
                for (std::size_t bin = 0; bin < 3; ++bin) r.counts.n[s][det][bin] += c.counts[s][det][bin] * per_shot;
    }
    r.herald_probability = sfg * scale / static_cast<double>(shots);

    if (cfg.dark.enabled) {
        const double dark_sfg = cfg.dark.spad_hz * cfg.dark.bin_width_s;
        const double dark_idler = cfg.dark.snspd_hz * cfg.dark.bin_width_s;
        const double idler_clicks = kernel.plan.sampler.mean_pairs() * cfg.t_i * cfg.eta_i;
        for (std::size_t s = 0; s < 2; ++s) {
            for (std::size_t det = 0; det < 2; ++det) {
                for (std::size_t bin = 0; bin < 3; ++bin) {
                    const double acc = 0.5 * r.gates *
                                       (dark_sfg * idler_clicks * p_mixed[s][det][bin] +
                                        (r.herald_probability + dark_sfg) * dark_idler);
                    r.counts.n[s][det][bin] += acc;
                    r.accidental_counts += acc;
                }
            }
        }
    }
    r.records = detail::summarize({total}, {}).records;
    return r;
}

} // namespace nlbsm::mc
