#pragma once

// Command-line front end. Every command writes CSV or plain text only, and
// the same arguments always produce the same bytes.
//
// Exit codes: 0 ok, 1 bad input, 2 divergence, 3 failed check.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opftrack/cd_engine.hpp"
#include "opftrack/case_model.hpp"
#include "opftrack/flop_model.hpp"
#include "opftrack/lagrangian.hpp"
#include "opftrack/synthetic.hpp"
#include "opftrack/tracking.hpp"

namespace opftrack::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kDiverged = 2, kCheckFailed = 3 };

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

/// OPF_TRACKER_LOG: unset/"0"/"quiet" silent, "1"/"info", "2"/"debug".
inline LogLevel log_level_from_env() {
    char const* v = std::getenv("OPF_TRACKER_LOG");
    if (v == nullptr) return LogLevel::quiet;
    std::string const s(v);
    if (s == "2" || s == "debug") return LogLevel::debug;
    if (s == "1" || s == "info") return LogLevel::info;
    return LogLevel::quiet;
}

struct RunConfig {
    std::string subcommand;
    std::string case_path;
    std::string profile_path;
    std::string out_path;
    std::string omega_path;
    double mu = 10.0;
    double mu_max = 1e6;
    double mu_growth = 1.0;
    int epochs = 100;
    int multiplier_period = 5;
    std::int64_t budget = 1;
    std::string budget_unit = "epochs";
    std::uint64_t seed = 1;
    std::string order = "random";
    std::string rule = "exact";
    int oracle_epochs = 200;
    bool count_flops = false;
    bool clamp_z = false;

    // flops
    std::int64_t n = 0, n_g = -1, p = 0;
    std::optional<double> E, e, sigma_p, sigma_l;

    // check-gradient
    int samples = 100;
    double inject_gradient_error = 0.0;  // test hook, hidden

    // generate
    std::string kind;
    int steps = 10;
    int jump = 5;
    double factor = 1.2;
    int period = 5;

    LogLevel log = LogLevel::quiet;
};

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

// ---------------------------------------------------------------------------
// IO helpers

inline std::string read_file(std::string const& path, char const* what) {
    if (path.empty()) throw InputError(std::string("missing --") + what + " path");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(std::string("cannot open ") + what + " file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_output(std::string const& path, std::string const& text, Streams io) {
    if (path.empty() || path == "-") {
        io.out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << text;
    if (!f) throw InputError("write failed for '" + path + "'");
}

inline NetworkCase load_case(std::string const& path) { return parse_case(read_file(path, "case")); }

/// ω file: CSV "group,bus,coord,value" with group omega or omega_bar;
/// unlisted entries are zero.
inline OmegaTerms load_omega(std::string const& text, int n) {
    OmegaTerms w;
    w.omega.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(2 * n), 0.0));
    w.omega_bar = w.omega;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto const t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!header) {
            if (t != "group,bus,coord,value") throw InputError("omega file: expected header 'group,bus,coord,value'");
            header = true;
            continue;
        }
        auto const f = detail::split_csv(t);
        if (f.size() != 4) throw InputError("omega file line " + std::to_string(lineno) + ": expected 4 fields");
        auto* target = f[0] == "omega" ? &w.omega : (f[0] == "omega_bar" ? &w.omega_bar : nullptr);
        if (target == nullptr) throw InputError("omega file line " + std::to_string(lineno) + ": unknown group");
        double const bus = detail::csv_double(f[1], lineno, "bus");
        double const coord = detail::csv_double(f[2], lineno, "coord");
        if (bus < 0 || bus >= n || coord < 0 || coord >= 2 * n || bus != std::floor(bus) || coord != std::floor(coord)) {
            throw InputError("omega file line " + std::to_string(lineno) + ": index out of range");
        }
        (*target)[static_cast<std::size_t>(bus)][static_cast<std::size_t>(coord)] =
            detail::csv_double(f[3], lineno, "value");
    }
    return w;
}

inline SolverConfig solver_config(RunConfig const& rc) {
    SolverConfig sc;
    sc.mu = rc.mu;
    sc.mu_max = rc.mu_max;
    sc.mu_growth = rc.mu_growth;
    sc.epochs = rc.epochs;
    sc.seed = rc.seed;
    sc.multiplier_period = rc.multiplier_period;
    sc.order = rc.order == "cyclic" ? CoordinateOrder::cyclic : CoordinateOrder::random_uniform;
    sc.step_rule = rc.rule == "prox" ? StepRule::lipschitz_prox : StepRule::exact_min;
    sc.box.clamp_z_nonnegative = rc.clamp_z;
    try {
        sc.validate();
    } catch (std::invalid_argument const& ex) {
        throw InputError(ex.what());
    }
    return sc;
}

inline std::string fmt(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------
// solve

inline constexpr std::string_view kSolveHeader =
    "epoch,L,objective,T,Tprime,max_residual,max_step,mu,flops,counted_flops,root_evals,gap";

inline std::string solve_csv(SolveTrace const& tr) {
    std::ostringstream os;
    os << kSolveHeader << '\n';
    for (std::size_t k = 0; k < tr.epochs.size(); ++k) {
        auto const& r = tr.epochs[k];
        os << r.epoch << ',' << fmt(r.L) << ',' << fmt(r.objective) << ',' << fmt(r.T) << ',' << fmt(r.T_prime) << ','
           << fmt(r.max_residual) << ',' << fmt(r.max_step) << ',' << fmt(r.mu) << ',' << r.model_flops << ','
           << r.counted_flops << ',' << r.root_evals << ',' << fmt(tr.gaps[k]) << '\n';
    }
    return os.str();
}

inline int cmd_solve(RunConfig const& rc, Streams io) {
    auto const nc = load_case(rc.case_path);
    auto const model = LiftedModel::from_case(nc);
    auto const inst = instance_from_case(nc);
    auto sc = solver_config(rc);
    if (!rc.omega_path.empty()) sc.omega = load_omega(read_file(rc.omega_path, "omega-file"), nc.n());
    if (rc.log >= LogLevel::info) {
        io.err << "solve: n=" << nc.n() << " n_g=" << nc.n_g() << " d=" << model.layout->free_coordinates().size()
               << " epochs=" << sc.epochs << '\n';
    }
    auto const res = solve_static(model, inst, sc);
    auto const& tr = res.trace;
    if (!rc.out_path.empty()) write_output(rc.out_path, solve_csv(tr), io);
    if (rc.log >= LogLevel::debug) {
        for (auto const& r : tr.epochs) io.err << "epoch " << r.epoch << " L=" << fmt(r.L) << " T=" << fmt(r.T) << '\n';
    }
    if (tr.epochs.empty()) {
        io.out << "epochs: 0\n";
        return tr.diverged ? kDiverged : kOk;
    }
    auto const& last = tr.epochs.back();
    auto const vm = voltage_magnitudes(res.state);
    io.out << "epochs: " << tr.epochs.size() << '\n'
           << "L: " << fmt(last.L) << '\n'
           << "objective: " << fmt(last.objective) << '\n'
           << "T: " << fmt(last.T) << '\n'
           << "Tprime: " << fmt(last.T_prime) << '\n'
           << "max_v_violation: " << fmt(max_voltage_violation(res.state, model)) << '\n'
           << "v_min: " << fmt(*std::min_element(vm.begin(), vm.end())) << '\n'
           << "v_max: " << fmt(*std::max_element(vm.begin(), vm.end())) << '\n'
           << "rate_fit: " << (tr.rate.valid ? fmt(tr.rate.rate) : "none") << '\n'
           << "rate_r2: " << (tr.rate.valid ? fmt(tr.rate.r_squared) : "none") << '\n'
           << "converged: " << (res.converged() ? "yes" : "no") << '\n';
    if (rc.count_flops) {
        FlopModelArgs const args{nc.n(), nc.n_g(), model.ops.p()};
        io.out << "flops_model: " << last.model_flops << '\n' << "flops_counted: " << last.counted_flops << '\n';
        io.out << "root_evals_counted: " << last.root_evals << '\n';
        io.out << "flops_per_epoch_formula: " << flops_per_epoch(args).flops << '\n';
    }
    if (tr.diverged) {
        io.err << "diverged: " << tr.diagnostic << '\n';
        return kDiverged;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// track

inline int cmd_track(RunConfig const& rc, Streams io) {
    auto const nc = load_case(rc.case_path);
    auto const model = LiftedModel::from_case(nc);
    Scenario sc;
    try {
        sc = load_profile(read_file(rc.profile_path, "profile"), nc);
        validate_scenario(sc, model);
    } catch (ProfileError const& ex) {
        throw InputError(ex.what());
    } catch (std::invalid_argument const& ex) {
        throw InputError(ex.what());
    }
    TrackConfig tc;
    tc.solver = solver_config(rc);
    if (!rc.omega_path.empty()) tc.solver.omega = load_omega(read_file(rc.omega_path, "omega-file"), nc.n());
    auto const d = static_cast<std::int64_t>(model.layout->free_coordinates().size());
    if (rc.budget_unit == "epochs") {
        tc.budget = rc.budget * d;
    } else if (rc.budget_unit == "updates") {
        tc.budget = rc.budget;
    } else {
        throw InputError("--budget-unit must be epochs or updates");
    }
    if (tc.budget < 1) throw InputError("--budget must be at least 1");
    tc.oracle_epochs = rc.oracle_epochs;
    tc.count_flops = rc.count_flops;
    if (rc.log >= LogLevel::info) {
        io.err << "track: steps=" << sc.size() << " budget=" << tc.budget << " updates/step\n";
    }
    auto const res = track(sc, model, tc);
    write_output(rc.out_path, track_csv(res.records), io);
    int errors = 0;
    for (auto const& r : res.records) {
        if (!r.error.empty()) {
            ++errors;
            io.err << "step " << r.step << ": " << r.error << '\n';
        }
    }
    std::ostream& rep = rc.out_path.empty() || rc.out_path == "-" ? io.err : io.out;
    auto const& b = res.bound;
    rep << "steps: " << res.records.size() << '\n'
        << "budget_updates: " << tc.budget << '\n'
        << "step_errors: " << errors << '\n';
    if (b.valid) {
        rep << "rho_hat: " << fmt(b.rho) << '\n'
            << "e_prime: " << fmt(b.e_prime) << '\n'
            << "asymptotic_bound: " << fmt(b.e_prime / (1.0 - b.rho)) << '\n'
            << "fraction_within_bound: " << fmt(b.fraction_within) << '\n';
    } else {
        rep << "rho_hat: none\n";
    }
    for (auto const& r : res.records) {
        if (!std::isfinite(r.L)) return kDiverged;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// flops

inline int cmd_flops(RunConfig const& rc, Streams io) {
    FlopModelArgs args;
    if (!rc.case_path.empty()) {
        auto const nc = load_case(rc.case_path);
        args = {nc.n(), nc.n_g(), build_admittance(nc).max_row_nonzeros()};
    } else {
        if (rc.n < 1 || rc.n_g < 0 || rc.p < 1) throw InputError("flops needs --case or all of --n, --ng, --p");
        args = {rc.n, rc.n_g, rc.p};
    }
    FlopCount epoch, raw, bss;
    try {
        epoch = flops_per_epoch(args);
        raw = flops_per_coordinate(args, CoordinateCostModel::raw);
        bss = flops_per_coordinate(args, CoordinateCostModel::bss);
    } catch (std::domain_error const& ex) {
        throw InputError(ex.what());
    }
    io.out << "n: " << args.n << '\n'
           << "n_g: " << args.n_g << '\n'
           << "p: " << args.p << '\n'
           << "per_coordinate_raw_flops: " << raw.flops << '\n'
           << "per_coordinate_raw_root_evals: " << raw.root_evals << '\n'
           << "per_coordinate_raw_bss_flops: " << raw.bss_flops << '\n'
           << "per_coordinate_bss_flops: " << bss.flops << '\n'
           << "per_epoch_flops: " << epoch.flops << '\n'
           << "per_epoch_root_evals: " << epoch.root_evals << '\n'
           << "per_epoch_bss_flops: " << epoch.bss_flops << '\n';
    int const given = rc.E.has_value() + rc.e.has_value() + rc.sigma_p.has_value() + rc.sigma_l.has_value();
    if (given == 4) {
        FlopBudget budget;
        try {
            budget = flop_budget({*rc.E, *rc.e, *rc.sigma_p, *rc.sigma_l}, args);
        } catch (std::domain_error const& ex) {
            throw InputError(ex.what());
        }
        io.out << "budget_log_ratio: " << fmt(budget.log_ratio) << '\n'
               << "budget_flops: " << fmt(budget.flops) << '\n'
               << "budget_flops_rounded: " << budget.flops_rounded << '\n'
               << "budget_valid: " << (budget.valid ? "yes" : "no") << '\n';
    } else if (given != 0) {
        throw InputError("budget needs all of --E, --e, --sigma-p, --sigma-l");
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// check-gradient

struct GradientCheck {
    int samples = 0;
    double max_rel_error = 0.0;
    int worst_coordinate = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Random states around the flat start (voltages +-0.1, box coordinates
/// uniform, others +-0.5, multipliers +-1) and random free coordinates;
/// analytic coordinate gradient against a central difference with step
/// 1e-6 max(1, |xi|). Relative error uses max(|a|, |b|, 1) as the scale.
inline GradientCheck check_gradient(LiftedModel const& m, Instance const& inst, double mu, int samples,
                                    std::uint64_t seed, double inject = 0.0) {
    SplitMix rng(seed);
    auto const& L = *m.layout;
    auto const box = build_box(m, inst);
    auto const base = initial_state(m, inst);
    auto const free = L.free_coordinates();
    GradientCheck out;
    out.samples = samples;
    for (int s = 0; s < samples; ++s) {
        StateVector st = base;
        for (int flat : free) {
            auto const iv = box.interval(flat);
            if (iv.bounded()) {
                st[flat] = rng.uniform(iv.lo, iv.hi);
            } else {
                double const w = L.locate(flat).group == Group::x ? 0.1 : 0.5;
                st[flat] += rng.uniform(-w, w);
            }
        }
        for (Group g : {Group::lam_t, Group::lam_g, Group::lam_h, Group::lam_z}) {
            for (double& v : st.group(g)) v = rng.uniform(-1.0, 1.0);
        }
        int const flat = free[static_cast<std::size_t>(rng.below(static_cast<int>(free.size())))];
        double const analytic = coordinate_gradient(st, inst, m, mu, flat) * (1.0 + inject);
        double const h = 1e-6 * std::max(1.0, std::abs(st[flat]));
        StateVector plus = st, minus = st;
        plus[flat] += h;
        minus[flat] -= h;
        double const numeric = (eval_L(plus, inst, m, mu) - eval_L(minus, inst, m, mu)) / (2.0 * h);
        double const rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0});
        if (rel > out.max_rel_error || out.worst_coordinate < 0) {
            out.max_rel_error = std::max(out.max_rel_error, rel);
            out.worst_coordinate = flat;
            out.worst_analytic = analytic;
            out.worst_numeric = numeric;
        }
    }
    return out;
}

inline int cmd_check_gradient(RunConfig const& rc, Streams io) {
    auto const nc = load_case(rc.case_path);
    auto const model = LiftedModel::from_case(nc);
    auto const inst = instance_from_case(nc);
    if (rc.samples < 100) throw InputError("--samples must be at least 100");
    if (!(rc.mu > 0.0)) throw InputError("--mu must be positive");
    auto const res = check_gradient(model, inst, rc.mu, rc.samples, rc.seed, rc.inject_gradient_error);
    io.out << "samples: " << res.samples << '\n' << "max_rel_error: " << fmt(res.max_rel_error) << '\n';
    if (res.max_rel_error <= 1e-5) {
        io.out << "gradient check passed\n";
        return kOk;
    }
    auto const where = model.layout->locate(res.worst_coordinate);
    io.err << "gradient check failed: coordinate " << res.worst_coordinate << " (" << to_string(where.group) << '['
           << where.index << "]) analytic " << fmt(res.worst_analytic) << " vs finite difference "
           << fmt(res.worst_numeric) << '\n';
    return kCheckFailed;
}

// ---------------------------------------------------------------------------
// generate

inline int cmd_generate_case(RunConfig const& rc, Streams io) {
    NetworkCase nc;
    if (rc.kind == "case2") {
        nc = synthetic_case2();
    } else if (rc.kind == "case4") {
        nc = synthetic_case4();
    } else if (rc.kind == "case37") {
        nc = synthetic_case37(rc.seed == 1 ? 37 : rc.seed);
    } else {
        throw InputError("--kind must be case2, case4 or case37");
    }
    write_output(rc.out_path, serialize_case(nc), io);
    return kOk;
}

inline int cmd_generate_profile(RunConfig const& rc, Streams io) {
    auto const nc = load_case(rc.case_path);
    auto const base = instance_from_case(nc);
    if (rc.steps < 1) throw InputError("--steps must be >= 1");
    Scenario sc;
    if (rc.kind == "constant") {
        sc = constant_scenario(base, rc.steps);
    } else if (rc.kind == "step") {
        sc = step_scenario(base, rc.steps, rc.jump, rc.factor);
    } else if (rc.kind == "square") {
        if (rc.period < 1) throw InputError("--period must be >= 1");
        sc = square_wave_scenario(base, rc.steps, rc.period, rc.factor - 1.0);
    } else if (rc.kind == "diurnal") {
        sc = diurnal_scenario(nc, base, rc.steps, 1.0, rc.seed);
    } else {
        throw InputError("--kind must be constant, step, square or diurnal");
    }
    write_output(rc.out_path, serialize_profile(sc, nc), io);
    return kOk;
}

// ---------------------------------------------------------------------------
// entry point

inline int dispatch(RunConfig const& rc, Streams io) {
    try {
        if (rc.subcommand == "solve") return cmd_solve(rc, io);
        if (rc.subcommand == "track") return cmd_track(rc, io);
        if (rc.subcommand == "flops") return cmd_flops(rc, io);
        if (rc.subcommand == "check-gradient") return cmd_check_gradient(rc, io);
        if (rc.subcommand == "generate-case") return cmd_generate_case(rc, io);
        if (rc.subcommand == "generate-profile") return cmd_generate_profile(rc, io);
        io.err << "unknown command '" << rc.subcommand << "'\n";
        return kInputError;
    } catch (InputError const& ex) {
        io.err << "error: " << ex.what() << '\n';
        return kInputError;
    } catch (opftrack::ParseError const& ex) {
        io.err << "error: " << ex.what() << '\n';
        return kInputError;
    } catch (CaseError const& ex) {
        io.err << "error: " << ex.what() << '\n';
        return kInputError;
    } catch (DivergenceError const& ex) {
        io.err << "diverged: " << ex.what() << '\n';
        return kDiverged;
    } catch (UnboundedSubproblem const& ex) {
        io.err << "diverged: " << ex.what() << '\n';
        return kDiverged;
    }
}

inline void add_solver_flags(CLI::App* cmd, RunConfig& rc) {
    cmd->add_option("--mu", rc.mu, "initial penalty")->capture_default_str();
    cmd->add_option("--mu-max", rc.mu_max, "penalty cap")->capture_default_str();
    cmd->add_option("--mu-growth", rc.mu_growth, "penalty factor per multiplier update")->capture_default_str();
    cmd->add_option("--seed", rc.seed, "coordinate sampling seed")->capture_default_str();
    cmd->add_option("--order", rc.order, "coordinate order")
        ->check(CLI::IsMember({"random", "cyclic"}))
        ->capture_default_str();
    cmd->add_option("--rule", rc.rule, "coordinate step rule")
        ->check(CLI::IsMember({"exact", "prox"}))
        ->capture_default_str();
    cmd->add_option("--multiplier-period", rc.multiplier_period,
                    "epochs (solve) or steps (track) between multiplier updates, 0 = never")
        ->capture_default_str();
    cmd->add_flag("--count-flops", rc.count_flops, "report instrumented flop counts");
    cmd->add_flag("--clamp-z", rc.clamp_z, "add z >= 0 to the box");
    cmd->add_option("--omega-file", rc.omega_path, "CSV group,bus,coord,value for the infeasibility metric");
}

/// Parses argv and runs the command. Usable in-process by tests.
inline int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    rc.log = log_level_from_env();
    CLI::App app{"Time-varying ACOPF tracking by augmented-Lagrangian coordinate descent"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("solve", "static solve, per-epoch trace CSV");
    solve->add_option("--case", rc.case_path, "case file")->required();
    solve->add_option("--out", rc.out_path, "trace CSV path ('-' for stdout)");
    solve->add_option("--epochs", rc.epochs, "epochs")->capture_default_str();
    add_solver_flags(solve, rc);

    auto* trk = app.add_subcommand("track", "scenario replay, per-step tracking CSV");
    trk->add_option("--case", rc.case_path, "case file")->required();
    trk->add_option("--profile", rc.profile_path, "profile CSV")->required();
    trk->add_option("--out", rc.out_path, "tracking CSV path ('-' for stdout)");
    trk->add_option("--budget", rc.budget, "work per step")->capture_default_str();
    trk->add_option("--budget-unit", rc.budget_unit, "unit of --budget")
        ->check(CLI::IsMember({"epochs", "updates"}))
        ->capture_default_str();
    trk->add_option("--oracle-epochs", rc.oracle_epochs, "epochs of the per-step reference solve")
        ->capture_default_str();
    add_solver_flags(trk, rc);

    auto* flops = app.add_subcommand("flops", "flop-model report");
    flops->add_option("--case", rc.case_path, "derive n, n_g, p from a case");
    flops->add_option("--n", rc.n, "buses");
    flops->add_option("--ng", rc.n_g, "generators");
    flops->add_option("--p", rc.p, "max admittance row nonzeros");
    flops->add_option("--E", rc.E, "target error");
    flops->add_option("--e", rc.e, "variation bound");
    flops->add_option("--sigma-p", rc.sigma_p, "sigma_p");
    flops->add_option("--sigma-l", rc.sigma_l, "sigma_l");

    auto* grad = app.add_subcommand("check-gradient", "finite-difference gradient check");
    grad->add_option("--case", rc.case_path, "case file")->required();
    grad->add_option("--samples", rc.samples, "random (state, coordinate) pairs")->capture_default_str();
    grad->add_option("--seed", rc.seed, "sampling seed")->capture_default_str();
    grad->add_option("--mu", rc.mu, "penalty")->capture_default_str();
    grad->add_option("--inject-gradient-error", rc.inject_gradient_error)->group("");

    auto* gcase = app.add_subcommand("generate-case", "write a synthetic case");
    gcase->add_option("--kind", rc.kind, "case2, case4 or case37")->required();
    gcase->add_option("--out", rc.out_path, "output path ('-' for stdout)");
    gcase->add_option("--seed", rc.seed, "seed for case37 impedances and loads (1 = shipped)");

    auto* gprof = app.add_subcommand("generate-profile", "write a synthetic profile for a case");
    gprof->add_option("--case", rc.case_path, "case file")->required();
    gprof->add_option("--kind", rc.kind, "constant, step, square or diurnal")->required();
    gprof->add_option("--out", rc.out_path, "output path ('-' for stdout)");
    gprof->add_option("--steps", rc.steps, "number of time steps")->capture_default_str();
    gprof->add_option("--jump", rc.jump, "step index of the load jump (step)")->capture_default_str();
    gprof->add_option("--factor", rc.factor, "load factor after the jump / high level (step, square)")
        ->capture_default_str();
    gprof->add_option("--period", rc.period, "steps per level (square)")->capture_default_str();
    gprof->add_option("--seed", rc.seed, "noise seed (diurnal)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return kOk;
    } catch (CLI::CallForAllHelp const&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (CLI::ParseError const& ex) {
        err << "error: " << ex.what() << '\n';
        return kInputError;
    }
    for (auto* sub : app.get_subcommands()) rc.subcommand = sub->get_name();
    return dispatch(rc, {out, err});
}

}  // namespace opftrack::cli
