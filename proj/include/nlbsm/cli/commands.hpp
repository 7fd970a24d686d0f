#pragma once

// Subcommands of the nlbsm tool. Each one reads its sections of the run
// configuration, writes CSV/JSON artifacts into the output directory and a
// manifest.json describing them.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlbsm/bsm.hpp"
#include "nlbsm/cavity.hpp"
#include "nlbsm/cli/config.hpp"
#include "nlbsm/cli/manifest.hpp"
#include "nlbsm/cli/schema.hpp"
#include "nlbsm/io/counts_csv.hpp"
#include "nlbsm/io/table.hpp"
#include "nlbsm/montecarlo.hpp"
#include "nlbsm/protocols.hpp"
#include "nlbsm/tomography.hpp"

namespace nlbsm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

class NumericalFailure : public Error {
public:
    using Error::Error;
};

struct RunRequest {
    std::string command;
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> shots;
    std::optional<std::string> format;  // "csv" or "json"
    std::optional<unsigned> threads;
};

struct RunResult {
    int status = kExitOk;
    std::string message;
    std::vector<std::filesystem::path> artifacts;
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"teleport-curve", "swap-curves", "rates", "cavity", "tomo", "simulate"};
    return names;
}

namespace detail {

using json = nlohmann::ordered_json;

inline double finite(double v, const std::string& what) {
    if (!std::isfinite(v)) throw NumericalFailure("non-finite result for " + what);
    return v;
}

inline json matrix_json(const Matrix2& m) {
    json re = json::array();
    json im = json::array();
    for (int r = 0; r < 2; ++r) {
        re.push_back(json::array({m(r, 0).real(), m(r, 1).real()}));
        im.push_back(json::array({m(r, 0).imag(), m(r, 1).imag()}));
    }
    return json{{"real", re}, {"imag", im}};
}

class Context {
public:
    Context(const Config& cfg, const RunRequest& req, std::ostream& log) : cfg_(cfg), req_(req), log_(log) {
        // The run section is read even when flags override it.
        const std::string cfg_format = cfg.choice("run.format", {"csv", "json"}, "csv");
        const std::int64_t cfg_seed = cfg.integer("run.seed", 1);
        const std::int64_t cfg_shots = cfg.integer("run.shots", 1000000);
        const std::int64_t cfg_threads = cfg.integer("run.threads", 0);
        if (cfg_seed < 0) throw ConfigError(cfg.source() + ": field 'run.seed': must be non-negative");
        if (cfg_shots <= 0) throw ConfigError(cfg.source() + ": field 'run.shots': must be positive");
        if (cfg_threads < 0) throw ConfigError(cfg.source() + ": field 'run.threads': must be non-negative");
        format_ = req.format.value_or(cfg_format);
        if (format_ != "csv" && format_ != "json") throw ConfigError("--format must be csv or json");
        seed_ = req.seed.value_or(static_cast<std::uint64_t>(cfg_seed));
        shots_ = req.shots.value_or(static_cast<std::uint64_t>(cfg_shots));
        if (shots_ == 0) throw ConfigError("--shots must be positive");
        threads_ = req.threads.value_or(static_cast<unsigned>(cfg_threads));
        manifest_.command = req.command;
        manifest_.config_digest = sha256_hex(cfg.canonical());
        std::filesystem::create_directories(req.out_dir);
    }

    const Config& cfg() const { return cfg_; }
    std::ostream& log() { return log_; }
    std::uint64_t seed() {
        manifest_.seed = seed_;
        return seed_;
    }
    std::uint64_t shots() {
        manifest_.shots = shots_;
        return shots_;
    }
    unsigned threads() const { return threads_; }
    std::filesystem::path config_dir() const { return req_.config_path.parent_path(); }

    void table(const std::string& stem, const io::Table& t) {
        for (const auto& row : t.rows)
            for (std::size_t c = 0; c < row.size(); ++c) finite(row[c], stem + "." + t.columns[c]);
        const std::string file = stem + "." + format_;
        std::ofstream out = open(file);
        if (format_ == "csv") {
            io::write_csv(out, t);
        } else {
            io::write_json(out, io::to_json(t));
        }
        manifest_.artifacts.push_back({file, t.columns});
    }

    void report(const std::string& stem, const json& j) {
        const std::string file = stem + ".json";
        std::ofstream out = open(file);
        io::write_json(out, j);
        manifest_.artifacts.push_back({file, {}});
    }

    void counts(const std::string& stem, const tomo::RawBinCounts& raw) {
        const std::string file = stem + ".csv";
        std::ofstream out = open(file);
        io::write_counts_csv(out, raw);
        manifest_.artifacts.push_back({file, {"phase_setting", "detector", "bin", "counts"}});
    }

    RunResult finish() {
        manifest_.timestamp = utc_timestamp();
        std::ofstream out = open("manifest.json");
        io::write_json(out, manifest_.to_json());
        RunResult r;
        for (const auto& a : manifest_.artifacts) r.artifacts.push_back(req_.out_dir / a.file);
        r.artifacts.push_back(req_.out_dir / "manifest.json");
        return r;
    }

private:
    const Config& cfg_;
    const RunRequest& req_;
    std::ostream& log_;
    std::string format_;
    std::uint64_t seed_ = 1;
    std::uint64_t shots_ = 0;
    unsigned threads_ = 0;
    RunManifest manifest_;

    std::ofstream open(const std::string& file) const {
        std::ofstream out(req_.out_dir / file, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + (req_.out_dir / file).string());
        return out;
    }
};

inline std::vector<double> sweep_grid(const Config& c, double lo_default, double hi_default, int points_default) {
    const double lo = c.number_in("sweep.p_si_min", 0.0, 0.25, lo_default);
    const double hi = c.number_in("sweep.p_si_max", 0.0, 0.25, hi_default);
    const std::int64_t n = c.integer("sweep.points", points_default);
    const std::string spacing = c.choice("sweep.spacing", {"log", "linear"}, "log");
    if (n < 2) throw ConfigError(c.source() + ": field 'sweep.points': need at least 2 points");
    if (!(hi > lo)) throw ConfigError(c.source() + ": sweep needs p_si_max > p_si_min");
    if (spacing == "log" && !(lo > 0.0)) throw ConfigError(c.source() + ": log spacing needs p_si_min > 0");
    std::vector<double> grid;
    for (std::int64_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        grid.push_back(spacing == "log" ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u);
    }
    grid.back() = hi;
    return grid;
}

inline void teleport_curve(Context& ctx) {
    const Config& c = ctx.cfg();
    mc::ScenarioConfig base = read_teleport_scenario(c);
    const protocols::SystemEfficiencies sys = read_system(c);
    const auto grid = sweep_grid(c, 1e-4, 0.25, 25);
    const int n_max = static_cast<int>(c.integer("sweep.n_max", 60));

    io::Table curve{{"p_si", "fidelity_closed_form", "fidelity_brute_force", "brute_force_tail_bound"}, {}};
    for (double p : grid) {
        mc::ScenarioConfig s = base;
        s.source_b = PairSource::from_p_si(p);
        s.teleport_mode = mc::TeleportMode::NonPostselected;
        s.pair_model = mc::PairModel::Thermal;
        const mc::BruteForceResult bf = mc::brute_force_teleport(s, n_max);
        curve.add_row({p, protocols::teleport_fidelity_nlo(p), bf.fidelity, bf.tail_bound});
    }
    ctx.table("teleport_curve", curve);

    const double v = base.bank.effective_visibility();
    const auto means = c.numbers("sweep.mean_photon_numbers", std::vector<double>{0.8, 8.0, 80.0});
    io::Table photons{{"mean_photon_number", "fidelity_visibility", "fidelity_estimated_superposition",
                       "fidelity_estimated_poles", "coincidence_probability"},
                      {}};
    for (double n : means) {
        protocols::SystemEfficiencies s = sys;
        s.mean_photon_number = n;
        const protocols::EstimatedFidelity est = protocols::estimated_teleport_fidelity(s);
        const auto& ev = est.events;
        photons.add_row({n, protocols::fidelity_from_visibility(v), est.f_superposition, est.f_poles,
                         ev.p_1s_1i + ev.p_2s_1i + ev.p_1s_2i + ev.p_2s_2i + ev.p_1s_1i_prime});
    }
    ctx.table("teleport_vs_photon_number", photons);
    ctx.log() << "F = 2/3 at p_si = " << io::format_double(protocols::teleport_threshold_p_si()) << "\n";
}

inline void swap_curves(Context& ctx) {
    const Config& c = ctx.cfg();
    const SwapSpec spec = read_swap(c);
    const auto grid = sweep_grid(c, 1e-4, 0.2, 41);
    io::Table t{{"p_si", "nlo", "nlo_two_photon", "lo_balanced", "lo_balanced_approx", "lo_unbalanced",
                 "lo_unbalanced_approx", "lo_unbalanced_epsilon_a", "classical_bound"},
                {}};
    for (double p : grid) {
        const protocols::FidelityForms nlo = protocols::swap_fidelity_nlo_forms(p, p, spec.eta, protocols::LossMode::Balanced);
        const protocols::FidelityForms lob = protocols::swap_fidelity_lo_balanced_forms(p, spec.eta);
        const protocols::UnbalancedOptimum lou = protocols::swap_fidelity_lo_unbalanced(p, spec.eta);
        t.add_row({p, nlo.approximate, nlo.exact, lob.exact, lob.approximate, lou.fidelity, lou.approximate,
                   lou.epsilon_a_opt, 1.0 / 3.0});
    }
    ctx.table("swap_curves", t);
    ctx.log() << "swap curves at eta = " << io::format_double(spec.eta) << " over " << grid.size() << " points\n";
}

inline void rates(Context& ctx) {
    const Config& c = ctx.cfg();
    const double p_b = read_p_si(c, "rates.p_b_si", 0.01);
    const double clock = c.number("rates.clock_hz", 1e9);
    std::vector<double> etas;
    std::vector<double> losses;
    if (c.has("rates.eta")) {
        etas = c.numbers("rates.eta");
        for (double e : etas) {
            if (!(e > 0.0 && e <= 1.0)) throw ConfigError(c.source() + ": field 'rates.eta': values must lie in (0, 1]");
            losses.push_back(-10.0 * std::log10(e));
        }
    } else {
        losses = c.numbers("rates.loss_db", std::vector<double>{0, 10, 20, 30, 40, 50, 60, 70});
        for (double l : losses) {
            if (!(l >= 0.0)) throw ConfigError(c.source() + ": field 'rates.loss_db': losses must be non-negative");
            etas.push_back(std::pow(10.0, -l / 10.0));
        }
    }
    const auto sfg = c.numbers("rates.p_sfg", std::vector<double>{4e-5, 1e-3});
    io::Table t{{"p_sfg", "loss_db", "eta", "r_lo_hz", "r_nlo_hz", "nlo_over_lo", "nlo_faster"}, {}};
    for (double ps : sfg) {
        for (std::size_t i = 0; i < etas.size(); ++i) {
            const protocols::Rates r = protocols::entanglement_rates(p_b, etas[i], ps, clock);
            const double ratio = r.r_lo > 0.0 ? r.r_nlo / r.r_lo : std::numeric_limits<double>::infinity();
            t.add_row({ps, losses[i], etas[i], r.r_lo, r.r_nlo, std::isfinite(ratio) ? ratio : 0.0,
                       r.r_nlo > r.r_lo ? 1.0 : 0.0});
        }
        ctx.log() << "p_sfg = " << io::format_double(ps) << ": crossover at eta = " << io::format_double(ps) << " ("
                  << io::format_double(-10.0 * std::log10(ps)) << " dB)\n";
    }
    ctx.table("rates", t);
}

inline void cavity_report(Context& ctx) {
    const Config& c = ctx.cfg();
    const cavity::CavityParams p = read_cavity(c);
    const cavity::KappaAverage avg = read_kappa_average(c);
    const double p_sfg = finite(cavity::single_photon_sfg_probability(p, avg), "p_sfg");
    const double eta = finite(cavity::sfg_efficiency(p), "eta_sfg");
    const auto [lhs, rhs] = cavity::efficiency_probability_relation(p);

    json j;
    j["p_sfg"] = p_sfg;
    j["p_sfg_mode_a_only"] = cavity::single_photon_sfg_probability(p, cavity::KappaAverage::ModeAOnly);
    j["eta_sfg_per_watt"] = eta;
    j["eta_sfg_percent_per_watt"] = 100.0 * eta;
    j["relation"] = json{{"lhs", lhs}, {"rhs", rhs}, {"relative_difference", (rhs - lhs) / lhs}};
    json modes = json::object();
    const std::pair<const char*, const cavity::CavityMode*> named[] = {
        {"mode_a", &p.mode_a}, {"mode_b", &p.mode_b}, {"mode_c", &p.mode_c}};
    for (const auto& [name, m] : named) {
        modes[name] = json{{"wavelength_nm", m->wavelength * 1e9},
                           {"quality_factor", m->quality_factor()},
                           {"kappa_total_over_2pi_hz", m->kappa_total / (2.0 * kPi)},
                           {"kappa_external_over_2pi_hz", m->kappa_external / (2.0 * kPi)}};
    }
    j["modes"] = modes;
    j["frequency_mismatch_over_2pi_hz"] = p.mismatch() / (2.0 * kPi);

    if (c.has("WavelengthSetup")) {
        const cavity::WavelengthReport rep = cavity::check_wavelength_conditions(read_wavelengths(c));
        json conds = json::array();
        for (const auto& cond : rep.conditions) {
            conds.push_back(
                json{{"name", cond.name}, {"passed", cond.passed}, {"value", cond.value}, {"detail", cond.detail}});
        }
        j["wavelength_conditions"] = json{{"all_passed", rep.all_passed()}, {"conditions", conds}};
    }
    ctx.report("cavity", j);
    ctx.log() << "p_sfg = " << io::format_double(p_sfg) << ", eta_sfg = " << io::format_double(100.0 * eta)
              << " %/W\n";
}

inline tomo::RawBinCounts load_counts(const Context& ctx, const std::string& field) {
    const std::filesystem::path rel = ctx.cfg().string(field);
    const std::filesystem::path path = rel.is_absolute() ? rel : ctx.config_dir() / rel;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(ctx.cfg().source() + ": field '" + field + "': cannot open " + path.string());
    return io::read_counts_csv(in, path.string());
}

inline double read_delta_theta(const Config& c) {
    if (c.has("tomography.delta_theta_pi")) return kPi * c.number_in("tomography.delta_theta_pi", 0.0, 1.0);
    return c.number_in("tomography.delta_theta_rad", 0.0, kPi, 2.9e-3 * kPi);
}

inline tomo::MleOptions read_mle(const Config& c) {
    tomo::MleOptions o;
    const auto w = c.numbers("tomography.weights", std::vector<double>(o.weights.begin(), o.weights.end()));
    if (w.size() != 6) throw ConfigError(c.source() + ": field 'tomography.weights': expected 6 values");
    for (std::size_t i = 0; i < 6; ++i) {
        if (!(w[i] > 0.0)) throw ConfigError(c.source() + ": field 'tomography.weights': values must be positive");
        o.weights[i] = w[i];
    }
    return o;
}

inline json reconstruct(Context& ctx, const tomo::RawBinCounts& raw, const TimeBinQubit& target, double delta_theta,
                        int trials, bool shot_noise, const tomo::MleOptions& mle) {
    const tomo::ProjectionCounts pc = tomo::projections_from_bins(raw);
    const tomo::Stokes s = tomo::stokes(pc);
    const tomo::LinearInversion lin = tomo::rho_linear(s);
    const tomo::MleResult fit = tomo::mle_fit(pc, mle);
    const DensityMatrix2 rho(fit.rho);
    tomo::FidelityErrorOptions fo;
    fo.shot_noise = shot_noise;
    fo.threads = ctx.threads();
    fo.mle = mle;
    const tomo::FidelityErrorResult err = tomo::fidelity_error(pc, target, delta_theta, trials, ctx.seed(), fo);

    json j;
    j["projections"] = json{{"e", pc.n0},       {"l", pc.n1},      {"+", pc.n_plus},
                            {"-", pc.n_minus},  {"L", pc.n_left},  {"R", pc.n_right}};
    j["stokes"] = json{{"s0", s.s0}, {"s1", s.s1}, {"s2", s.s2}, {"s3", s.s3}};
    j["linear_inversion"] = json{{"rho", matrix_json(lin.rho)},
                                 {"physical", lin.physical},
                                 {"min_eigenvalue", lin.min_eigenvalue}};
    j["mle"] = json{{"rho", matrix_json(fit.rho)},
                    {"iterations", fit.iterations},
                    {"objective", fit.objective},
                    {"gradient_norm", fit.gradient_norm}};
    j["fidelity"] = finite(fidelity_pure(rho, target), "fidelity");
    j["purity"] = finite(purity(rho), "purity");
    j["uncertainty"] = json{{"delta_theta_rad", delta_theta}, {"trials", err.trials},      {"shot_noise", shot_noise},
                            {"fidelity_mean", err.f_mean},   {"fidelity_std", err.f_std}, {"purity_mean", err.purity_mean},
                            {"purity_std", err.purity_std}};
    return j;
}

inline void tomo_command(Context& ctx) {
    const Config& c = ctx.cfg();
    const tomo::RawBinCounts raw = load_counts(ctx, "tomography.counts_csv");
    const std::string target = c.choice("tomography.target", {"e", "l", "+", "-", "L", "R"});
    const double dt = read_delta_theta(c);
    const int trials = static_cast<int>(c.integer("tomography.trials", 2000));
    if (trials < 1000) throw ConfigError(c.source() + ": field 'tomography.trials': need at least 1000 trials");
    const bool shot_noise = c.boolean("tomography.shot_noise", true);
    const tomo::MleOptions mle = read_mle(c);

    json j;
    j["target"] = target;
    json rec = reconstruct(ctx, raw, state_by_name(target), dt, trials, shot_noise, mle);
    for (auto& [k, v] : rec.items()) j[k] = v;
    ctx.report("tomo", j);
    ctx.log() << "fidelity " << io::format_double(j["fidelity"].get<double>()) << " +- "
              << io::format_double(j["uncertainty"]["fidelity_std"].get<double>()) << ", purity "
              << io::format_double(j["purity"].get<double>()) << "\n";
}

inline json records_json(const mc::RecordsSummary& r) {
    return json{{"shots", r.shots},
                {"heralded", r.heralded},
                {"desired", r.desired},
                {"undesired", r.undesired},
                {"saturated", r.saturated},
                {"herald_weight", r.herald_weight},
                {"desired_weight", r.desired_weight},
                {"effective_sample_size", r.effective_sample_size},
                {"herald_weight_by_pairs", r.herald_weight_by_pairs}};
}

inline void trial_table(Context& ctx, const std::vector<mc::TrialRecord>& trials) {
    if (trials.empty()) return;
    io::Table t{{"shot", "pairs_a", "pairs_b", "survivals_a", "survivals_b", "idlers_detected", "herald",
                 "classification", "weight"},
                {}};
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& r = trials[i];
        t.add_row({static_cast<double>(i), double(r.pairs_a), double(r.pairs_b), double(r.survivals_a),
                   double(r.survivals_b), double(r.idlers_detected), r.herald ? 1.0 : 0.0,
                   static_cast<double>(static_cast<int>(r.classification)), r.weight});
    }
    ctx.table("trials", t);
}

inline json summary_json(const mc::SimulationSummary& s) {
    return json{{"f_hat", finite(s.f_hat, "f_hat")},
                {"std_error", s.std_error},
                {"f_hat_poles", s.f_hat_poles},
                {"std_error_poles", s.std_error_poles},
                {"records", records_json(s.records)}};
}

inline json brute_json(const mc::BruteForceResult& b) {
    return json{{"fidelity", b.fidelity},
                {"fidelity_poles", b.fidelity_poles},
                {"tail_bound", b.tail_bound},
                {"heralded_mass", b.heralded_mass},
                {"n_max", b.n_max}};
}

inline void simulate_teleport(Context& ctx, mc::RunOptions opt, int n_max) {
    const Config& c = ctx.cfg();
    const mc::ScenarioConfig s = read_teleport_scenario(c);
    const mc::SimulationSummary sum = mc::simulate_teleport(s, ctx.shots(), ctx.seed(), opt);
    json j;
    j["protocol"] = "teleport";
    j["monte_carlo"] = summary_json(sum);
    j["brute_force"] = brute_json(mc::brute_force_teleport(s, n_max));
    if (s.teleport_mode == mc::TeleportMode::NonPostselected && s.pair_model == mc::PairModel::Thermal) {
        j["closed_form"] = json{{"fidelity", protocols::teleport_fidelity_nlo(s.source_b.p_si())}};
    } else if (s.teleport_mode == mc::TeleportMode::Coincidence) {
        const auto est = protocols::estimated_teleport_fidelity(read_system(c));
        j["closed_form"] = json{{"fidelity", est.f_superposition}, {"fidelity_poles", est.f_poles}};
    }
    ctx.report("simulate", j);
    trial_table(ctx, sum.trials);
    ctx.log() << "teleport: F = " << io::format_double(sum.f_hat) << " +- " << io::format_double(sum.std_error) << "\n";
}

inline void simulate_swap(Context& ctx, mc::RunOptions opt, int n_max) {
    const Config& c = ctx.cfg();
    const SwapSpec spec = read_swap(c);
    const mc::ScenarioConfig s = swap_scenario(c, spec);
    const mc::SimulationSummary sum = mc::simulate_swap(s, ctx.shots(), ctx.seed(), opt);
    const double ea = s.pair_a().epsilon();
    const double eb = s.source_b.epsilon();
    double closed = 0.0;
    if (s.bsm == mc::BsmType::Nlo) {
        closed = protocols::swap_fidelity_nlo(s.pair_a().p_si(), s.source_b.p_si(), spec.eta, spec.mode);
    } else if (spec.mode == protocols::LossMode::Unbalanced) {
        closed = protocols::lo_unbalanced_fidelity(ea, eb, spec.eta);
    } else {
        closed = protocols::lo_balanced_fidelity(ea, eb, spec.mode == protocols::LossMode::Balanced ? spec.eta : 1.0);
    }
    json j;
    j["protocol"] = "swap";
    j["bsm"] = s.bsm == mc::BsmType::Nlo ? "nlo" : "lo";
    j["loss_mode"] = std::string(protocols::to_string(spec.mode));
    j["p_a_si"] = s.pair_a().p_si();
    j["p_b_si"] = s.source_b.p_si();
    j["eta"] = spec.eta;
    j["monte_carlo"] = summary_json(sum);
    j["brute_force"] = brute_json(mc::brute_force_swap(s, n_max));
    j["closed_form"] = json{{"fidelity", closed}};
    ctx.report("simulate", j);
    trial_table(ctx, sum.trials);
    ctx.log() << "swap: F = " << io::format_double(sum.f_hat) << " +- " << io::format_double(sum.std_error)
              << " (closed form " << io::format_double(closed) << ")\n";
}

inline void simulate_experiment(Context& ctx, mc::RunOptions opt) {
    const Config& c = ctx.cfg();
    const mc::ScenarioConfig s = read_teleport_scenario(c);
    const auto states = c.strings("simulate.states", std::vector<std::string>{"e", "l", "+", "-", "L", "R"});
    if (states.empty()) throw ConfigError(c.source() + ": field 'simulate.states': empty list");
    const int trials = static_cast<int>(c.integer("tomography.trials", 1000));
    if (trials < 1000) throw ConfigError(c.source() + ": field 'tomography.trials': need at least 1000 trials");
    const double dt = read_delta_theta(c);
    const tomo::MleOptions mle = read_mle(c);
    const std::uint64_t shots = ctx.shots();
    const std::uint64_t seed = ctx.seed();

    json j;
    j["protocol"] = "full-experiment";
    j["effective_visibility"] = s.bank.effective_visibility();
    json per_state = json::object();
    double sum_f = 0.0;
    for (const std::string& name : states) {
        const TimeBinQubit target = state_by_name(name);
        const mc::FullExperimentResult r = mc::simulate_full_experiment(s, target, shots, seed, opt);
        ctx.counts("counts_" + state_file_tag(name), r.counts);
        json e = reconstruct(ctx, r.counts, target, dt, trials, true, mle);
        e["herald_probability"] = r.herald_probability;
        e["accidental_counts"] = r.accidental_counts;
        sum_f += e["fidelity"].get<double>();
        per_state[name] = e;
    }
    j["states"] = per_state;
    j["average_fidelity"] = sum_f / static_cast<double>(states.size());
    ctx.report("simulate", j);
    ctx.log() << "full experiment: average fidelity " << io::format_double(j["average_fidelity"].get<double>())
              << "\n";
}

inline void simulate(Context& ctx) {
    const Config& c = ctx.cfg();
    const std::string protocol = c.choice("simulate.protocol", {"teleport", "swap", "full-experiment"}, "teleport");
    mc::RunOptions opt;
    opt.threads = ctx.threads();
    opt.plan.enabled = c.boolean("simulate.importance_sampling", true);
    const std::int64_t limit = c.integer("simulate.record_limit", 0);
    if (limit < 0) throw ConfigError(c.source() + ": field 'simulate.record_limit': must be non-negative");
    opt.record_limit = static_cast<std::size_t>(limit);
    const int n_max = static_cast<int>(c.integer("simulate.n_max", 40));
    if (protocol == "teleport") {
        simulate_teleport(ctx, opt, n_max);
    } else if (protocol == "swap") {
        simulate_swap(ctx, opt, n_max);
    } else {
        simulate_experiment(ctx, opt);
    }
}

} // namespace detail

// Runs one subcommand; errors are mapped to exit codes and reported on err.
inline RunResult run(const RunRequest& req, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    static const std::map<std::string, std::function<void(detail::Context&)>> table{
        {"teleport-curve", detail::teleport_curve}, {"swap-curves", detail::swap_curves},
        {"rates", detail::rates},                   {"cavity", detail::cavity_report},
        {"tomo", detail::tomo_command},             {"simulate", detail::simulate}};
    RunResult result;
    auto fail = [&](int status, const std::string& msg) {
        result.status = status;
        result.message = msg;
        err << "error: " << msg << "\n";
        return result;
    };
    const auto it = table.find(req.command);
    if (it == table.end()) return fail(kExitConfig, "unknown command '" + req.command + "'");
    try {
        const Config cfg = Config::parse_file(req.config_path);
        check_sections(cfg);
        detail::Context ctx(cfg, req, log);
        it->second(ctx);
        cfg.check_unknown();
        return ctx.finish();
    } catch (const ConfigError& e) {
        return fail(kExitConfig, e.what());
    } catch (const io::CsvError& e) {
        return fail(kExitConfig, e.what());
    } catch (const InvalidParameter& e) {
        return fail(kExitConfig, std::string("invalid parameter: ") + e.what());
    } catch (const tomo::ConvergenceError& e) {
        return fail(kExitNumerical, std::string("reconstruction did not converge after ") +
                                        std::to_string(e.iterations()) + " iterations: " + e.what());
    } catch (const DegenerateData& e) {
        return fail(kExitNumerical, std::string("degenerate data: ") + e.what());
    } catch (const NumericalFailure& e) {
        return fail(kExitNumerical, e.what());
    } catch (const std::exception& e) {
        return fail(1, e.what());
    }
}

} // namespace nlbsm::cli
