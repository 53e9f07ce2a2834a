// Command-line surface: ties scenario files to the analysis pipeline and
// emits machine-readable CSV plus sidecar metadata.

#include "vstab/anchor_solver.hpp"
#include "vstab/csv.hpp"
#include "vstab/manifold_margin.hpp"
#include "vstab/scenario_io.hpp"
#include "vstab/simulator.hpp"
#include "vstab/singularity.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vstab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitAnalysis = 5;

struct RunConfig {
    std::string scenario_path;
    std::string out_dir;
    std::string traj_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    Real t_lo = 0.01;
    Real t_hi = 0.5;
    Real cct_tol = 0.005;
    int threads = 1;
};

Thresholds apply_overrides(const std::vector<std::string>& overrides) {
    Thresholds th;
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ParseError("override '" + kv + "' is not of the form key=value");
        }
        th.set(kv.substr(0, eq), std::stod(kv.substr(eq + 1)));
    }
    return th;
}

void log_thresholds(const Thresholds& th, json& meta) {
    json jt;
    for (const auto& [key, value] : th.to_map()) {
        std::cerr << "threshold " << key << " = " << format_real(value) << "\n";
        jt[key] = value;
    }
    meta["thresholds"] = jt;
}

// Buffered output: nothing touches the filesystem until the run succeeded.
struct OutputSet {
    std::vector<std::pair<std::string, std::string>> files;

    void add(const std::string& name, const std::string& body) { files.emplace_back(name, body); }

    void write_all(const std::string& out_dir) const {
        fs::create_directories(out_dir);
        for (const auto& [name, body] : files) {
            std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
            if (!os) throw Error("cannot open output file '" + name + "'");
            os << body;
        }
    }
};

std::string meta_string(const json& meta) { return meta.dump(2) + "\n"; }

std::string trajectory_csv_string(const Trajectory& traj, const BuiltScenario& built) {
    std::ostringstream os;
    write_trajectory_csv(os, traj, built.scenario.devices, built.bus_names);
    return os.str();
}

json trajectory_meta(const Trajectory& traj, const BuiltScenario& built) {
    json meta;
    meta["scenario"] = built.scenario.name;
    meta["termination"] = to_string(traj.termination);
    meta["detail"] = traj.detail;
    meta["steps"] = traj.size();
    meta["t_last"] = traj.times.empty() ? 0.0 : traj.times.back();
    meta["t_fail"] = traj.t_fail;
    return meta;
}

Trajectory load_trajectory(const std::string& path, const BuiltScenario& built) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open trajectory file '" + path + "'");
    Trajectory traj = read_trajectory_csv(is, built.scenario.layout());

    fs::path meta_path = fs::path(path);
    meta_path.replace_extension(".meta.json");
    std::ifstream ms(meta_path);
    if (ms) {
        json meta = json::parse(ms, nullptr, false);
        if (!meta.is_discarded()) {
            traj.t_fail = meta.value("t_fail", 0.0);
            const std::string term = meta.value("termination", "Completed");
            if (term == "SingularSurface") traj.termination = Termination::SingularSurface;
            else if (term == "Divergence") traj.termination = Termination::Divergence;
            else if (term == "GuardTripped") traj.termination = Termination::GuardTripped;
        }
    }
    return traj;
}

// --- subcommands -------------------------------------------------------------

int run_simulate(const RunConfig& cfg) {
    const Thresholds th = apply_overrides(cfg.overrides);
    const BuiltScenario built = load_scenario(cfg.scenario_path, th);

    SimOptions opts;
    opts.thresholds = th;
    const Trajectory traj = simulate(built.scenario, opts);

    json meta = trajectory_meta(traj, built);
    log_thresholds(th, meta);
    meta["seed"] = cfg.seed;

    OutputSet out;
    out.add("trajectory.csv", trajectory_csv_string(traj, built));
    out.add("trajectory.meta.json", meta_string(meta));
    out.write_all(cfg.out_dir);
    std::cerr << "termination: " << to_string(traj.termination) << "\n";
    return kExitOk;
}

PseudoSaddle solve_saddle_pipeline(const RunConfig& cfg, const Thresholds& th,
                                   const BuiltScenario& built, Trajectory& traj_out,
                                   SingularHit& hit_out) {
    if (!cfg.traj_path.empty()) {
        traj_out = load_trajectory(cfg.traj_path, built);
    } else {
        SimOptions opts;
        opts.thresholds = th;
        traj_out = simulate(built.scenario, opts);
    }
    hit_out = detect_singular_hit(traj_out, built.scenario, th);
    SaddleSolveOptions sopts;
    sopts.seed = cfg.seed;
    return controlling_pseudo_saddle(hit_out, built.scenario.network_at(hit_out.t_hit),
                                     built.scenario.devices, th, sopts);
}

std::string saddle_csv_string(const PseudoSaddle& ps, const SingularHit& hit) {
    std::ostringstream os;
    os << "t_hit,lambda1_at_hit,distance,mu_unstable,nu_stable,g_norm,lambda1,kappa_norm,"
          "iterations\n";
    os << format_real(hit.t_hit) << "," << format_real(hit.lambda1_at_hit) << ","
       << format_real(ps.distance) << "," << format_real(ps.mu_unstable) << ","
       << format_real(ps.nu_stable) << "," << format_real(ps.g_norm) << ","
       << format_real(ps.lambda1) << "," << format_real(ps.kappa_norm) << "," << ps.iterations
       << "\n";
    return os.str();
}

std::string saddle_text_string(const PseudoSaddle& ps, const SingularHit& hit,
                               const BuiltScenario& built) {
    std::ostringstream os;
    os << "controlling pseudo-saddle for scenario '" << built.scenario.name << "'\n"
       << "  surface hit:  t = " << format_real(hit.t_hit)
       << " s, lambda1 = " << format_real(hit.lambda1_at_hit) << "\n"
       << "  distance:     " << format_real(ps.distance) << "\n"
       << "  eigenvalues:  mu = " << format_real(ps.mu_unstable)
       << ", nu = " << format_real(ps.nu_stable) << "\n"
       << "  residuals:    |g| = " << format_real(ps.g_norm)
       << ", lambda1 = " << format_real(ps.lambda1)
       << ", kappa = " << format_real(ps.kappa_norm) << "\n"
       << "  state (x then y):\n";
    const Vector z = ps.z_cps.z();
    for (Index i = 0; i < z.size(); ++i) os << "    " << format_real(z[i]) << "\n";
    return os.str();
}

int run_saddle(const RunConfig& cfg) {
    const Thresholds th = apply_overrides(cfg.overrides);
    const BuiltScenario built = load_scenario(cfg.scenario_path, th);
    Trajectory traj;
    SingularHit hit;
    const PseudoSaddle ps = solve_saddle_pipeline(cfg, th, built, traj, hit);

    json meta;
    meta["scenario"] = built.scenario.name;
    meta["t_hit"] = hit.t_hit;
    meta["distance"] = ps.distance;
    meta["mu_unstable"] = ps.mu_unstable;
    meta["nu_stable"] = ps.nu_stable;
    log_thresholds(th, meta);
    meta["seed"] = cfg.seed;

    OutputSet out;
    out.add("saddle.csv", saddle_csv_string(ps, hit));
    out.add("saddle.txt", saddle_text_string(ps, hit, built));
    out.add("saddle.meta.json", meta_string(meta));
    out.write_all(cfg.out_dir);
    std::cerr << "saddle distance: " << format_real(ps.distance) << "\n";
    return kExitOk;
}

int run_margin(const RunConfig& cfg) {
    const Thresholds th = apply_overrides(cfg.overrides);
    const BuiltScenario built = load_scenario(cfg.scenario_path, th);
    const Scenario& sc = built.scenario;

    Trajectory traj;
    SingularHit hit;
    const PseudoSaddle ps = solve_saddle_pipeline(cfg, th, built, traj, hit);
    const SystemState sep = solve_equilibrium(sc.initial, sc.post_fault, sc.devices, th);
    const ManifoldModel model = build_manifold(ps, sep, th);
    const Real dp_sep = manifold_value(sep, model);

    const Real t_clear = sc.fault_start + sc.fault_duration;
    std::ostringstream csv;
    csv << "time,lambda1,d_p,c_v\n";
    Real crossing = -1.0, cv_prev = 0.0, t_prev = 0.0, cv_clear = 0.0;
    bool have_clear = false;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < t_clear) continue;
        const Real dp = manifold_value(traj.states[k], model);
        const Real cv = dp / dp_sep;
        if (!have_clear) {
            cv_clear = cv;
            have_clear = true;
        } else if (crossing < 0.0 && cv_prev > 0.0 && cv <= 0.0) {
            const Real w = cv_prev / (cv_prev - cv);
            crossing = t_prev + w * (traj.times[k] - t_prev);
        }
        csv << format_real(traj.times[k]) << "," << format_real(traj.lambda1[k]) << ","
            << format_real(dp) << "," << format_real(cv) << "\n";
        cv_prev = cv;
        t_prev = traj.times[k];
    }

    json meta;
    meta["scenario"] = sc.name;
    meta["c_v_zero_crossing_time"] = crossing;
    meta["c_v_at_clearing"] = cv_clear;
    meta["d_p_sep"] = dp_sep;
    meta["mu_unstable"] = ps.mu_unstable;
    meta["eta_norm"] = model.eta.norm();
    meta["t_hit"] = hit.t_hit;
    log_thresholds(th, meta);
    meta["seed"] = cfg.seed;

    OutputSet out;
    out.add("margin.csv", csv.str());
    out.add("margin.meta.json", meta_string(meta));
    out.write_all(cfg.out_dir);
    std::cerr << "C_V zero crossing at t = " << format_real(crossing) << "\n";
    return kExitOk;
}

int run_cct(const RunConfig& cfg) {
    const Thresholds th = apply_overrides(cfg.overrides);
    const BuiltScenario built = load_scenario(cfg.scenario_path, th);

    CctOptions opts;
    opts.tol = cfg.cct_tol;
    opts.sim.thresholds = th;
    opts.max_threads = cfg.threads;
    const CctResult r = compute_cct(built.scenario, cfg.t_lo, cfg.t_hi, opts);

    std::ostringstream csv;
    csv << "duration,stable\n";
    for (const auto& [dur, stable] : r.history) {
        csv << format_real(dur) << "," << (stable ? 1 : 0) << "\n";
    }

    json meta;
    meta["scenario"] = built.scenario.name;
    meta["cct"] = r.cct;
    meta["stable_below"] = r.lo;
    meta["unstable_above"] = r.hi;
    meta["monotone"] = r.monotone;
    meta["threads"] = cfg.threads;
    log_thresholds(th, meta);
    meta["seed"] = cfg.seed;

    OutputSet out;
    out.add("cct.csv", csv.str());
    out.add("cct.meta.json", meta_string(meta));
    out.write_all(cfg.out_dir);
    std::cerr << "cct: " << format_real(r.cct) << " s\n";
    return kExitOk;
}

int run_report(const RunConfig& cfg) {
    const Thresholds th = apply_overrides(cfg.overrides);
    const BuiltScenario built = load_scenario(cfg.scenario_path, th);
    if (cfg.traj_path.empty()) throw ParseError("report needs --traj");
    const Trajectory traj = load_trajectory(cfg.traj_path, built);

    std::ostringstream csv;
    csv << "time,lambda1,g_norm,psi_residual,xi_scalar,xi_scalar_approx,classification\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const SystemState& st = traj.states[k];
        const PowerNetwork& net = built.scenario.network_at(traj.times[k]);
        const SingularityReport rep = classify(st.x, st.y, net, built.scenario.devices, th);
        csv << format_real(traj.times[k]) << "," << format_real(rep.lambda1) << ","
            << format_real(rep.g_norm) << "," << format_real(rep.psi_residual) << ","
            << format_real(rep.xi_scalar) << "," << format_real(rep.xi_scalar_approx) << ","
            << to_string(rep.classification) << "\n";
    }

    json meta;
    meta["scenario"] = built.scenario.name;
    meta["rows"] = traj.size();
    log_thresholds(th, meta);
    meta["seed"] = cfg.seed;

    OutputSet out;
    out.add("report.csv", csv.str());
    out.add("report.meta.json", meta_string(meta));
    out.write_all(cfg.out_dir);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voltage stability boundary analysis"};
    app.require_subcommand(1);

    RunConfig cfg;
    if (const char* env = std::getenv("VSTAB_THREADS")) {
        cfg.threads = std::max(1, std::atoi(env));
    }

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario_path, "scenario file")->required();
        sub->add_option("--out", cfg.out_dir, "output directory")->required();
        sub->add_option("--set", cfg.overrides, "threshold override key=value")
            ->take_all()
            ->expected(-1);
        sub->add_option("--seed", cfg.seed, "seed for randomized restarts");
    };

    CLI::App* sim = app.add_subcommand("simulate", "integrate the fault study");
    add_common(sim);
    CLI::App* sad = app.add_subcommand("saddle", "surface hit and controlling pseudo-saddle");
    add_common(sad);
    sad->add_option("--traj", cfg.traj_path, "reuse a previously written trajectory CSV");
    CLI::App* mar = app.add_subcommand("margin", "stability margin along the disturbed run");
    add_common(mar);
    mar->add_option("--traj", cfg.traj_path, "reuse a previously written trajectory CSV");
    CLI::App* cct = app.add_subcommand("cct", "critical clearing time by bisection");
    add_common(cct);
    cct->add_option("--t-lo", cfg.t_lo, "stable bracket endpoint (s)");
    cct->add_option("--t-hi", cfg.t_hi, "unstable bracket endpoint (s)");
    cct->add_option("--tol", cfg.cct_tol, "bisection interval tolerance (s)");
    CLI::App* rep = app.add_subcommand("report", "singularity classification per state");
    add_common(rep);
    rep->add_option("--traj", cfg.traj_path, "trajectory CSV to classify")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(cfg);
        if (sad->parsed()) return run_saddle(cfg);
        if (mar->parsed()) return run_margin(cfg);
        if (cct->parsed()) return run_cct(cfg);
        if (rep->parsed()) return run_report(cfg);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const NumericError& e) {
        std::cerr << "numeric guard: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const Error& e) {
        std::cerr << "analysis error: " << e.what() << "\n";
        return kExitAnalysis;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
