#pragma once

// Scenario replay: swap in a new instance every step, run a fixed number of
// warm-started coordinate updates, and compare against a long per-step solve.
//
// Profile CSV: header "time,bus,p_load,q_load,p_avail", one row per
// (time, bus), per-unit values. Buses not listed at a time keep their
// previous values (the case values before the first row).

#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opftrack/cd_engine.hpp"
#include "opftrack/lagrangian.hpp"

namespace opftrack {

struct Scenario {
    std::vector<Instance> instances;
    double tau = 1.0;  // seconds per step, metadata

    [[nodiscard]] std::size_t size() const { return instances.size(); }
};

class ProfileError : public std::runtime_error {
  public:
    ProfileError(int line, std::string const& what)
        : std::runtime_error("profile line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const { return line_; }

  private:
    int line_;
};

inline constexpr std::string_view kProfileHeader = "time,bus,p_load,q_load,p_avail";

/// Checks shared dimensions and strictly increasing timestamps.
inline void validate_scenario(Scenario const& sc, LiftedModel const& m) {
    if (sc.instances.empty()) throw std::invalid_argument("scenario has no instances");
    for (std::size_t k = 0; k < sc.instances.size(); ++k) {
        m.check_instance(sc.instances[k]);
        if (k > 0 && !(sc.instances[k].time > sc.instances[k - 1].time)) {
            throw std::invalid_argument("scenario timestamps must be strictly increasing");
        }
        for (double p : sc.instances[k].p_available) {
            if (p < 0.0) throw std::invalid_argument("negative available power in scenario");
        }
    }
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto const comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double csv_double(std::string_view tok, int line, char const* field) {
    double v = 0.0;
    auto const [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ProfileError(line, std::string("bad ") + field + " '" + std::string(tok) + "'");
    }
    return v;
}

}  // namespace detail

/// Parses a profile against a case. Costs come from `costs`; P_av of
/// generators starts at their rating.
inline Scenario load_profile(std::string_view text, NetworkCase const& nc, CostCoefficients costs = {}) {
    Instance current = instance_from_case(nc, costs);
    auto const gens = nc.generators();
    std::vector<int> gen_index(static_cast<std::size_t>(nc.n()), -1);
    for (std::size_t k = 0; k < gens.size(); ++k) gen_index[static_cast<std::size_t>(gens[k])] = static_cast<int>(k);

    Scenario sc;
    std::optional<double> open_time;
    int lineno = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    auto flush = [&] {
        if (!open_time) return;
        current.time = *open_time;
        current.step = static_cast<int>(sc.instances.size());
        sc.instances.push_back(current);
    };
    while (pos < text.size()) {
        auto const nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++lineno;
        auto const line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != kProfileHeader) throw ProfileError(lineno, "expected header '" + std::string(kProfileHeader) + "'");
            header_seen = true;
            continue;
        }
        auto const f = detail::split_csv(line);
        if (f.size() != 5) throw ProfileError(lineno, "expected 5 fields, got " + std::to_string(f.size()));
        double const t = detail::csv_double(f[0], lineno, "time");
        double const bus_d = detail::csv_double(f[1], lineno, "bus");
        if (bus_d != std::floor(bus_d)) throw ProfileError(lineno, "bus id must be an integer");
        auto const bus = static_cast<long long>(bus_d);
        if (bus < 0 || bus >= nc.n()) throw ProfileError(lineno, "unknown bus " + std::string(f[1]));
        if (open_time && t < *open_time) throw ProfileError(lineno, "timestamps must not decrease");
        if (!open_time || t > *open_time) {
            flush();
            open_time = t;
        }
        auto const b = static_cast<std::size_t>(bus);
        current.p_load[b] = detail::csv_double(f[2], lineno, "p_load");
        current.q_load[b] = detail::csv_double(f[3], lineno, "q_load");
        double const pav = detail::csv_double(f[4], lineno, "p_avail");
        if (pav < 0.0) throw ProfileError(lineno, "negative p_avail");
        if (gen_index[b] >= 0) {
            current.p_available[static_cast<std::size_t>(gen_index[b])] = pav;
        } else if (pav != 0.0) {
            throw ProfileError(lineno, "p_avail given for load bus " + std::to_string(bus));
        }
    }
    if (!header_seen) throw ProfileError(lineno, "empty profile");
    flush();
    if (sc.instances.empty()) throw ProfileError(lineno, "profile has no rows");
    sc.tau = sc.instances.size() > 1 ? sc.instances[1].time - sc.instances[0].time : 1.0;
    return sc;
}

/// Writes every bus at every time, so the result reloads to the same scenario.
inline std::string serialize_profile(Scenario const& sc, NetworkCase const& nc) {
    auto const gens = nc.generators();
    std::ostringstream os;
    os << kProfileHeader << '\n';
    for (auto const& inst : sc.instances) {
        std::size_t g = 0;
        for (int i = 0; i < nc.n(); ++i) {
            auto const b = static_cast<std::size_t>(i);
            double pav = 0.0;
            if (g < gens.size() && gens[g] == i) pav = inst.p_available[g++];
            os << detail::format_double(inst.time) << ',' << i << ',' << detail::format_double(inst.p_load[b]) << ','
               << detail::format_double(inst.q_load[b]) << ',' << detail::format_double(pav) << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Variation and bound

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// max over samples of |L^k(xi) - L^{k-1}(xi)|. Each Lagrangian sees the
/// sample with its own instance's pins. A lower estimate of the true sup.
inline double estimate_variation(Instance const& inst_k, Instance const& inst_prev, LiftedModel const& m, double mu,
                                 std::vector<StateVector> const& samples) {
    if (samples.empty()) throw std::invalid_argument("estimate_variation needs at least one sample");
    double best = 0.0;
    for (auto const& s : samples) {
        StateVector a = s;
        StateVector b = s;
        apply_pins(a, m, inst_k);
        apply_pins(b, m, inst_prev);
        best = std::max(best, std::abs(eval_L(a, inst_k, m, mu) - eval_L(b, inst_prev, m, mu)));
    }
    return best;
}

/// Random states inside the intersection of both instances' boxes. Bounded
/// coordinates are drawn uniformly; unbounded ones are perturbed around
/// `center` (voltages by 0.05, the rest by 0.1).
inline std::vector<StateVector> sample_box_states(StateVector const& center, LiftedModel const& m, BoxSet const& a,
                                                  BoxSet const& b, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(count));
    auto const& L = *m.layout;
    for (int s = 0; s < count; ++s) {
        StateVector st = center;
        for (int flat : L.free_coordinates()) {
            auto const ia = a.interval(flat);
            auto const ib = b.interval(flat);
            Interval const iv{std::max(ia.lo, ib.lo), std::min(ia.hi, ib.hi)};
            double const u = unit(rng);
            if (iv.bounded()) {
                st[flat] = iv.lo > iv.hi ? iv.lo : iv.lo + u * (iv.hi - iv.lo);
            } else {
                double const width = L.locate(flat).group == Group::x ? 0.05 : 0.1;
                st[flat] = iv.clamp(center[flat] + width * (2.0 * u - 1.0));
            }
        }
        out.push_back(std::move(st));
    }
    return out;
}

struct TrackingBound {
    double bound = 0.0;      // rho^k sigma + e / (1 - rho)
    double asymptote = 0.0;  // e / (1 - rho)
};

inline TrackingBound tracking_bound(double e, double rho, double sigma, int k) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("contraction must lie in (0, 1)");
    if (!(e >= 0.0)) throw std::domain_error("variation bound must be >= 0");
    if (k < 0) throw std::domain_error("step index must be >= 0");
    double const asym = e / (1.0 - rho);
    return {std::pow(rho, k) * sigma + asym, asym};
}

// ---------------------------------------------------------------------------
// Replay

struct TrackConfig {
    SolverConfig solver{};  // multiplier_period counts steps here
    std::int64_t budget = 0;  // coordinate updates per step
    int oracle_epochs = 200;
    int random_samples = 32;
    bool compute_oracle = true;
    bool count_flops = false;  // report counted instead of modeled flops

    void validate() const {
        solver.validate();
        if (budget < 1) throw std::invalid_argument("tracking budget must be at least one coordinate update");
        if (oracle_epochs < 1) throw std::invalid_argument("oracle epochs must be >= 1");
        if (random_samples < 0) throw std::invalid_argument("random samples must be >= 0");
    }
};

struct TrackRecord {
    int step = 0;
    double L = 0.0;
    double L_star = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();
    double objective = 0.0;
    double T = 0.0;
    double T_prime = 0.0;
    double max_v_violation = 0.0;
    double e_est = 0.0;
    std::int64_t flops = 0;
    std::string error;  // solver failure during this step, empty if none
};

inline constexpr std::string_view kTrackHeader = "step,L,L_star,gap,objective,T,Tprime,max_v_violation,e_est,flops";

struct BoundComparison {
    double rho = 0.0;
    double e_prime = 0.0;  // max_k e_k + |L*^k - L*^{k-1}|
    double sigma = 0.0;    // gap at step 0
    std::vector<double> bounds;
    double fraction_within = 0.0;
    bool valid = false;
};

struct TrackResult {
    std::vector<TrackRecord> records;
    StateVector final_state;
    BoundComparison bound{};
};

/// Gap bound check: drift of the oracle optimum between steps is folded into
/// the variation.
inline BoundComparison compare_bound(std::vector<TrackRecord> const& recs, double rho) {
    BoundComparison out;
    out.rho = rho;
    if (recs.empty() || !(rho > 0.0 && rho < 1.0) || !std::isfinite(recs.front().gap)) return out;
    out.sigma = std::max(recs.front().gap, 0.0);
    for (std::size_t k = 0; k < recs.size(); ++k) {
        double drift = 0.0;
        if (k > 0 && std::isfinite(recs[k].L_star) && std::isfinite(recs[k - 1].L_star)) {
            drift = std::abs(recs[k].L_star - recs[k - 1].L_star);
        }
        out.e_prime = std::max(out.e_prime, recs[k].e_est + drift);
    }
    int within = 0;
    for (std::size_t k = 0; k < recs.size(); ++k) {
        double const b = tracking_bound(out.e_prime, rho, out.sigma, static_cast<int>(k)).bound;
        out.bounds.push_back(b);
        double const slack = 1e-9 * (1.0 + std::abs(recs[k].L_star));
        if (std::isfinite(recs[k].gap) && recs[k].gap <= b + slack) ++within;
    }
    out.fraction_within = static_cast<double>(within) / static_cast<double>(recs.size());
    out.valid = true;
    return out;
}

/// Per-step contraction from a primal-only static run on one instance: the
/// fitted per-epoch rate raised to budget / d.
inline std::optional<double> fit_step_contraction(LiftedModel const& m, Instance const& inst, TrackConfig const& cfg,
                                                  StateVector const& start) {
    SolverConfig sc = cfg.solver;
    sc.multiplier_period = 0;
    sc.mu_growth = 1.0;
    sc.epochs = cfg.oracle_epochs;
    auto const res = solve_static(m, inst, sc, start);
    if (!res.trace.rate.valid || !(res.trace.rate.rate > 0.0 && res.trace.rate.rate < 1.0)) return std::nullopt;
    auto const d = static_cast<double>(m.layout->free_coordinates().size());
    double const rho = std::pow(res.trace.rate.rate, static_cast<double>(cfg.budget) / d);
    if (!(rho > 0.0 && rho < 1.0)) return std::nullopt;
    return rho;
}

/// The oracle: a copy of the solver at the step's warm start, reseeded and
/// run primal-only for oracle_epochs epochs; the smallest L seen is L*.
inline double oracle_value(CoordinateDescent<FlopCounter> const& at_start, int epochs, std::uint64_t seed) {
    CoordinateDescent<FlopCounter> oracle = at_start;
    oracle.reseed(seed);
    oracle.set_multiplier_period(0);
    oracle.set_observer({});
    auto const& m = oracle.model();
    double best = eval_L(oracle.state(), oracle.instance(), m, oracle.mu());
    for (int e = 0; e < epochs; ++e) {
        oracle.run_epoch();
        best = std::min(best, eval_L(oracle.state(), oracle.instance(), m, oracle.mu()));
    }
    return best;
}

/// Replays the scenario. Each step: swap the instance in (the warm start is
/// never reset), update multipliers every multiplier_period steps, compute
/// the oracle from the warm start, run `budget` updates, record metrics.
inline TrackResult track(Scenario const& sc, LiftedModel const& m, TrackConfig const& cfg,
                         std::optional<StateVector> start = std::nullopt) {
    cfg.validate();
    validate_scenario(sc, m);
    SolverConfig engine_cfg = cfg.solver;
    engine_cfg.multiplier_period = 0;  // multipliers move at step boundaries only
    auto const& inst0 = sc.instances.front();
    CoordinateDescent<FlopCounter> cd(m, inst0, start ? *start : initial_state(m, inst0, cfg.solver.box), engine_cfg);

    TrackResult out{{}, cd.state(), {}};
    std::optional<StateVector> rho_start;
    BoxSet prev_box = cd.box();
    for (std::size_t k = 0; k < sc.instances.size(); ++k) {
        auto const& inst = sc.instances[k];
        TrackRecord rec;
        rec.step = static_cast<int>(k);
        StateVector const warm = cd.state();
        cd.set_instance(inst);
        if (k > 0 && cfg.solver.multiplier_period > 0 && k % static_cast<std::size_t>(cfg.solver.multiplier_period) == 0) {
            cd.update_multipliers();
        }
        if (k == 0) rho_start = cd.state();

        if (k > 0) {
            std::vector<StateVector> samples{warm, cd.state()};
            auto rnd = sample_box_states(cd.state(), m, prev_box, cd.box(), cfg.random_samples,
                                         splitmix64(cfg.solver.seed ^ (0x5eedULL + k)));
            samples.insert(samples.end(), rnd.begin(), rnd.end());
            rec.e_est = estimate_variation(inst, sc.instances[k - 1], m, cd.mu(), samples);
        }
        prev_box = cd.box();

        if (cfg.compute_oracle) rec.L_star = oracle_value(cd, cfg.oracle_epochs, splitmix64(cfg.solver.seed + k));

        std::int64_t const flops_before = cfg.count_flops ? cd.counter().flops() : cd.model_flops(cd.updates());
        StateVector const before_updates = cd.state();
        try {
            cd.run_updates(cfg.budget);
        } catch (std::exception const& ex) {
            rec.error = ex.what();
            cd.mutable_state() = before_updates;
        }
        rec.flops = (cfg.count_flops ? cd.counter().flops() : cd.model_flops(cd.updates())) - flops_before;

        auto const& s = cd.state();
        rec.L = eval_L(s, inst, m, cd.mu());
        if (cfg.compute_oracle) rec.gap = rec.L - rec.L_star;
        rec.objective = objective_cost(s, inst, m);
        auto const inf = infeasibility(s, inst, m, cfg.solver.omega);
        rec.T = inf.T;
        rec.T_prime = inf.T_prime;
        rec.max_v_violation = max_voltage_violation(s, m);
        out.records.push_back(std::move(rec));
    }
    out.final_state = cd.state();
    if (cfg.compute_oracle && rho_start) {
        if (auto rho = fit_step_contraction(m, inst0, cfg, *rho_start)) out.bound = compare_bound(out.records, *rho);
    }
    return out;
}

inline std::string track_csv(std::vector<TrackRecord> const& recs) {
    std::ostringstream os;
    os << kTrackHeader << '\n';
    for (auto const& r : recs) {
        os << r.step << ',' << detail::format_double(r.L) << ',' << detail::format_double(r.L_star) << ',' << detail::format_double(r.gap) << ','
           << detail::format_double(r.objective) << ',' << detail::format_double(r.T) << ',' << detail::format_double(r.T_prime) << ','
           << detail::format_double(r.max_v_violation) << ',' << detail::format_double(r.e_est) << ',' << r.flops << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Concurrent ingestion

/// Single-slot mailbox: a newer snapshot replaces an unread one.
template <class T>
class SnapshotMailbox {
  public:
    void post(T value) {
        {
            std::lock_guard lock(mu_);
            if (slot_) ++dropped_;
            slot_ = std::move(value);
        }
        cv_.notify_one();
    }

    std::optional<T> try_take() {
        std::lock_guard lock(mu_);
        return take_locked();
    }

    /// Blocks until a snapshot arrives or the mailbox is closed.
    std::optional<T> wait_take() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return slot_.has_value() || closed_; });
        return take_locked();
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    [[nodiscard]] bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

    [[nodiscard]] std::int64_t dropped() const {
        std::lock_guard lock(mu_);
        return dropped_;
    }

  private:
    std::optional<T> take_locked() {
        std::optional<T> out;
        out.swap(slot_);
        return out;
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<T> slot_;
    bool closed_ = false;
    std::int64_t dropped_ = 0;
};

/// Solver side of concurrent ingestion: instances offered from any thread are
/// picked up between coordinate updates.
class StreamingTracker {
  public:
    StreamingTracker(LiftedModel const& m, Instance first, SolverConfig cfg) : cd_(m, std::move(first), cfg) {}

    SnapshotMailbox<Instance>& inbox() { return inbox_; }

    /// Runs `count` updates, swapping in the latest pending instance before
    /// each one. Returns the number of swaps performed.
    int run_updates(std::int64_t count) {
        int swaps = 0;
        for (std::int64_t k = 0; k < count; ++k) {
            if (auto next = inbox_.try_take()) {
                cd_.set_instance(std::move(*next));
                ++swaps;
            }
            cd_.update();
        }
        return swaps;
    }

    [[nodiscard]] CoordinateDescent<FlopCounter> const& solver() const { return cd_; }

  private:
    CoordinateDescent<FlopCounter> cd_;
    SnapshotMailbox<Instance> inbox_;
};

}  // namespace opftrack
