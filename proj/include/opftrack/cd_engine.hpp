#pragma once

// Coordinate descent on the augmented Lagrangian with closed-form coordinate
// minimization, classical multiplier ascent, and a static-solve driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "opftrack/flop_model.hpp"
#include "opftrack/lagrangian.hpp"
#include "opftrack/poly_solver.hpp"

namespace opftrack {

enum class CoordinateOrder { random_uniform, cyclic };
enum class StepRule { exact_min, lipschitz_prox };

struct SolverConfig {
    double mu = 10.0;
    double mu_max = 1e6;      // cap for mu growth
    double mu_growth = 1.0;   // factor applied at every multiplier update
    int epochs = 100;
    CoordinateOrder order = CoordinateOrder::random_uniform;
    std::uint64_t seed = 1;
    int multiplier_period = 5;  // epochs between multiplier updates, 0 = never
    StepRule step_rule = StepRule::exact_min;
    double lipschitz = 0.0;  // prox rule constant; 0 = estimate each epoch
    double lipschitz_radius = 0.5;
    int lipschitz_samples = 16;
    BoxOptions box{};
    double step_tolerance = 1e-10;
    double feasibility_tolerance = 1e-10;
    bool stop_on_convergence = false;
    int divergence_window = 10;
    double divergence_factor = 10.0;
    bool diagnostics = false;  // prox-PL ratio per epoch
    OmegaTerms omega{};        // optional terms of the infeasibility metric

    void validate() const {
        if (!(mu > 0.0) || !(mu <= mu_max) || !std::isfinite(mu_max)) {
            throw std::invalid_argument("solver config requires 0 < mu <= mu_max < inf");
        }
        if (!(mu_growth >= 1.0)) throw std::invalid_argument("mu_growth must be >= 1");
        if (epochs < 0 || multiplier_period < 0) throw std::invalid_argument("epochs and multiplier_period must be >= 0");
        if (step_rule == StepRule::lipschitz_prox && lipschitz < 0.0) {
            throw std::invalid_argument("lipschitz constant must be >= 0");
        }
        if (!(lipschitz_radius > 0.0) || lipschitz_samples < 1) {
            throw std::invalid_argument("lipschitz estimation needs a positive radius and samples");
        }
    }
};

class UnboundedSubproblem : public std::runtime_error {
  public:
    explicit UnboundedSubproblem(int flat)
        : std::runtime_error("coordinate " + std::to_string(flat) +
                             " subproblem is unbounded below (mu too small or state left the region)"),
          flat_(flat) {}
    [[nodiscard]] int coordinate() const { return flat_; }

  private:
    int flat_;
};

class DivergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct StepResult {
    int flat = 0;
    double old_value = 0.0;
    double new_value = 0.0;
    /// Decrease of L predicted by the coordinate polynomial (>= 0 for exact-min).
    double predicted_decrease = 0.0;
};

/// Bound on |d^2 L / d xi_flat^2| over the segment xi + a e_flat, |a| <= r.
/// The second derivative of the restriction is a quadratic in a, so its
/// maximum modulus over the segment is attained at an endpoint or the vertex;
/// the sampled maximum is folded in as well.
inline double estimate_coordinate_lipschitz(StateVector const& s, Instance const& inst, LiftedModel const& m,
                                            double mu, int flat, double radius, int samples) {
    if (!(radius > 0.0)) throw std::invalid_argument("lipschitz radius must be positive");
    auto const poly = local_polynomial(s, inst, m, mu, flat);
    double best = std::max(std::abs(poly.second_derivative(-radius)), std::abs(poly.second_derivative(radius)));
    if (poly.c[4] != 0.0) {
        double const vertex = -6.0 * poly.c[3] / (24.0 * poly.c[4]);
        if (std::abs(vertex) <= radius) best = std::max(best, std::abs(poly.second_derivative(vertex)));
    }
    for (int k = 0; k < samples; ++k) {
        double const a = samples == 1 ? 0.0 : -radius + 2.0 * radius * k / (samples - 1);
        best = std::max(best, std::abs(poly.second_derivative(a)));
    }
    return best;
}

/// Largest coordinate estimate over all free coordinates.
inline double estimate_lipschitz(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu,
                                 double radius, int samples) {
    double best = 0.0;
    for (int flat : m.layout->free_coordinates()) {
        best = std::max(best, estimate_coordinate_lipschitz(s, inst, m, mu, flat, radius, samples));
    }
    return best;
}

/// lam <- lam - mu r for the t, g, h and z groups.
inline void multiplier_update(StateVector& s, Instance const& inst, LiftedModel const& m, double mu) {
    auto const r = residuals(s, inst, m);
    auto apply = [&](Group lam, std::vector<double> const& res) {
        auto span = s.group(lam);
        for (std::size_t i = 0; i < res.size(); ++i) span[i] -= mu * res[i];
    };
    apply(Group::lam_t, r.t);
    apply(Group::lam_g, r.g);
    apply(Group::lam_h, r.h);
    apply(Group::lam_z, r.z);
}

/// One coordinate update. exact_min moves the coordinate to the minimizer of
/// the restricted polynomial over its box interval; lipschitz_prox takes the
/// projected step xi - grad / L.
template <OpCounter Counter = NullCounter>
StepResult cd_step(StateVector& s, Instance const& inst, LiftedModel const& m, double mu, int flat, BoxSet const& box,
                   StepRule rule, double lipschitz = 0.0, Counter&& ctr = {}) {
    auto const poly = local_polynomial(s, inst, m, mu, flat, ctr);
    double const cur = s[flat];
    auto const iv = box.interval(flat);
    Interval const shifted{iv.lo - cur, iv.hi - cur};
    double alpha = 0.0;
    if (rule == StepRule::exact_min) {
        auto const [g, k] = m.layout->locate(flat);
        Minimum best;
        if (g == Group::h || g == Group::z) {
            best = minimize_quadratic_clamped(poly.c[2], poly.c[1], poly.c[0], shifted, ctr);
        } else {
            best = minimize_quartic(poly, shifted, ctr);
        }
        if (!best.ok()) throw UnboundedSubproblem(flat);
        alpha = best.argmin;
        // Staying put is always admissible when the current value is feasible.
        if (shifted.contains(0.0) && poly(0.0) <= best.value) alpha = 0.0;
    } else {
        if (!(lipschitz > 0.0)) throw std::invalid_argument("lipschitz_prox step needs a positive constant");
        alpha = shifted.clamp(-poly.c[1] / lipschitz);
        ctr.add(FlopCategory::solve, 2);
    }
    // cur + (hi - cur) can round past hi
    s[flat] = iv.clamp(cur + alpha);
    return {flat, cur, s[flat], poly(0.0) - poly(alpha)};
}

struct EpochRecord {
    int epoch = 0;
    double L = 0.0;
    double objective = 0.0;
    double T = 0.0;
    double T_prime = 0.0;
    double max_residual = 0.0;
    double max_step = 0.0;
    double mu = 0.0;
    std::int64_t model_flops = 0;    // cumulative, from the epoch formula
    std::int64_t counted_flops = 0;  // cumulative, instrumented
    std::int64_t root_evals = 0;     // cumulative, instrumented
    double prox_pl_ratio = std::numeric_limits<double>::quiet_NaN();
};

enum class SolverEvent { before_step, after_step, before_multiplier_update, after_multiplier_update };

/// Owns an iterate and advances it one coordinate at a time. Epoch boundaries
/// (every d updates) trigger the multiplier update and mu growth.
template <OpCounter Counter = FlopCounter>
class CoordinateDescent {
  public:
    using Observer = std::function<void(SolverEvent, int flat, StateVector const&)>;

    CoordinateDescent(LiftedModel const& model, Instance inst, StateVector state, SolverConfig cfg)
        : model_(&model), inst_(std::move(inst)), state_(std::move(state)), cfg_(cfg), mu_(cfg.mu), rng_(cfg.seed) {
        cfg_.validate();
        model.check_instance(inst_);
        free_ = std::vector<int>(model.layout->free_coordinates().begin(), model.layout->free_coordinates().end());
        if (free_.empty()) throw std::invalid_argument("problem has no free coordinates");
        set_instance(inst_);
        lipschitz_ = cfg_.lipschitz;
    }

    CoordinateDescent(LiftedModel const& model, Instance inst, SolverConfig cfg)
        : CoordinateDescent(model, inst, initial_state(model, inst, cfg.box), cfg) {}

    /// Swaps in new data between updates: re-pins the load buses and
    /// rebuilds the box. The free coordinates are left untouched.
    void set_instance(Instance inst) {
        model_->check_instance(inst);
        inst_ = std::move(inst);
        apply_pins(state_, *model_, inst_);
        box_ = build_box(*model_, inst_, cfg_.box);
    }

    [[nodiscard]] int next_coordinate() {
        int const d = dimension();
        if (cfg_.order == CoordinateOrder::cyclic) return free_[static_cast<std::size_t>(cursor_++ % d)];
        std::uniform_int_distribution<int> pick(0, d - 1);
        return free_[static_cast<std::size_t>(pick(rng_))];
    }

    StepResult step(int flat) {
        if (observer_) observer_(SolverEvent::before_step, flat, state_);
        auto const res = cd_step(state_, inst_, *model_, mu_, flat, box_, cfg_.step_rule, lipschitz_, counter_);
        max_step_ = std::max(max_step_, std::abs(res.new_value - res.old_value));
        if (observer_) observer_(SolverEvent::after_step, flat, state_);
        return res;
    }

    /// One coordinate update plus epoch bookkeeping.
    StepResult update() {
        if (since_epoch_ == 0) begin_epoch();
        auto const res = step(next_coordinate());
        ++updates_;
        if (++since_epoch_ == dimension()) finish_epoch();
        return res;
    }

    void run_updates(std::int64_t count) {
        for (std::int64_t k = 0; k < count; ++k) update();
    }

    /// Runs until the next epoch boundary (a full epoch when aligned).
    void run_epoch() {
        do {
            update();
        } while (since_epoch_ != 0);
    }

    void update_multipliers() {
        if (observer_) observer_(SolverEvent::before_multiplier_update, -1, state_);
        multiplier_update(state_, inst_, *model_, mu_);
        mu_ = std::min(mu_ * cfg_.mu_growth, cfg_.mu_max);
        if (observer_) observer_(SolverEvent::after_multiplier_update, -1, state_);
    }

    [[nodiscard]] EpochRecord record() const {
        EpochRecord rec;
        rec.epoch = epochs_;
        rec.L = eval_L(state_, inst_, *model_, mu_);
        rec.objective = objective_cost(state_, inst_, *model_);
        auto const inf = infeasibility(state_, inst_, *model_, cfg_.omega);
        rec.T = inf.T;
        rec.T_prime = inf.T_prime;
        auto const r = residuals(state_, inst_, *model_);
        for (auto const* v : {&r.t, &r.g, &r.h, &r.z}) {
            for (double e : *v) rec.max_residual = std::max(rec.max_residual, std::abs(e));
        }
        rec.max_step = last_epoch_max_step_;
        rec.mu = mu_;
        rec.model_flops = model_flops(updates_);
        if constexpr (std::is_same_v<std::remove_cvref_t<Counter>, FlopCounter>) {
            rec.counted_flops = counter_.flops();
            rec.root_evals = counter_.roots();
        }
        return rec;
    }

    /// Formula-predicted flops for a number of coordinate updates: whole
    /// epochs at the epoch count, the remainder at the raw per-coordinate
    /// bound.
    [[nodiscard]] std::int64_t model_flops(std::int64_t updates) const {
        FlopModelArgs const args{model_->n(), model_->n_g(), model_->ops.p()};
        std::int64_t const d = dimension();
        return (updates / d) * flops_per_epoch(args).flops +
               (updates % d) * flops_per_coordinate(args, CoordinateCostModel::raw).flops;
    }

    void set_observer(Observer obs) { observer_ = std::move(obs); }

    [[nodiscard]] StateVector const& state() const { return state_; }
    [[nodiscard]] StateVector& mutable_state() { return state_; }
    [[nodiscard]] Instance const& instance() const { return inst_; }
    [[nodiscard]] BoxSet const& box() const { return box_; }
    [[nodiscard]] LiftedModel const& model() const { return *model_; }
    [[nodiscard]] SolverConfig const& config() const { return cfg_; }
    [[nodiscard]] double mu() const { return mu_; }
    [[nodiscard]] double lipschitz() const { return lipschitz_; }
    [[nodiscard]] int dimension() const { return static_cast<int>(free_.size()); }
    [[nodiscard]] std::int64_t updates() const { return updates_; }
    [[nodiscard]] int epochs() const { return epochs_; }
    [[nodiscard]] Counter const& counter() const { return counter_; }
    [[nodiscard]] double last_epoch_max_step() const { return last_epoch_max_step_; }

    /// Reseeds the coordinate sampler (used for independent oracle copies).
    void reseed(std::uint64_t seed) { rng_.seed(seed); }

    /// Freezes or restores the multiplier cadence.
    void set_multiplier_period(int period) {
        if (period < 0) throw std::invalid_argument("multiplier period must be >= 0");
        cfg_.multiplier_period = period;
    }

  private:
    void begin_epoch() {
        max_step_ = 0.0;
        if (cfg_.step_rule == StepRule::lipschitz_prox && cfg_.lipschitz == 0.0) {
            lipschitz_ = estimate_lipschitz(state_, inst_, *model_, mu_, cfg_.lipschitz_radius, cfg_.lipschitz_samples);
            if (!(lipschitz_ > 0.0)) lipschitz_ = 1.0;
        }
    }

    void finish_epoch() {
        since_epoch_ = 0;
        ++epochs_;
        last_epoch_max_step_ = max_step_;
        if (cfg_.multiplier_period > 0 && epochs_ % cfg_.multiplier_period == 0) update_multipliers();
    }

    LiftedModel const* model_;
    Instance inst_;
    StateVector state_;
    SolverConfig cfg_;
    BoxSet box_;
    std::vector<int> free_;
    double mu_;
    double lipschitz_ = 0.0;
    std::mt19937_64 rng_;
    std::int64_t cursor_ = 0;
    std::int64_t updates_ = 0;
    int since_epoch_ = 0;
    int epochs_ = 0;
    double max_step_ = 0.0;
    double last_epoch_max_step_ = 0.0;
    Counter counter_{};
    Observer observer_;
};

// ---------------------------------------------------------------------------
// Static solve

struct RateFit {
    double slope = 0.0;      // of log(gap) per epoch
    double rate = 0.0;       // exp(slope), per-epoch contraction
    double r_squared = 0.0;
    int points = 0;
    bool valid = false;
};

/// Least-squares line through (k, log y_k) for the given indices.
inline RateFit fit_log_linear(std::vector<double> const& xs, std::vector<double> const& ys) {
    RateFit fit;
    fit.points = static_cast<int>(xs.size());
    if (xs.size() < 3) return fit;
    double const n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += std::log(ys[k]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        double const dx = xs[k] - mx;
        double const dy = std::log(ys[k]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.rate = std::exp(fit.slope);
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    fit.valid = true;
    return fit;
}

/// Fits the tail of a gap series: the later half of the epochs whose gap is
/// above the floor rel_floor * max(1, |L_best|).
inline RateFit fit_gap_tail(std::vector<double> const& gaps, double L_best, double rel_floor = 1e-11) {
    double const floor = rel_floor * std::max(1.0, std::abs(L_best));
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        if (gaps[k] > floor) {
            xs.push_back(static_cast<double>(k));
            ys.push_back(gaps[k]);
        }
    }
    auto const half = xs.size() / 2;
    return fit_log_linear(std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(half), xs.end()),
                          std::vector<double>(ys.begin() + static_cast<std::ptrdiff_t>(half), ys.end()));
}

struct SolveTrace {
    std::vector<EpochRecord> epochs;
    std::vector<double> gaps;  // L_k - L_best
    RateFit rate{};
    int best_epoch = -1;
    std::optional<int> converged_epoch;
    bool diverged = false;
    std::string diagnostic;
};

struct SolveResult {
    StateVector state;
    StateVector best_state;
    SolveTrace trace;
    double lipschitz = 0.0;

    [[nodiscard]] bool converged() const { return trace.converged_epoch.has_value(); }
};

namespace detail {

/// Divergence: non-finite values, or the watched quantity grew by `factor`
/// over `window` epochs and sits above an absolute floor. With frozen
/// multipliers the watched quantity is the gap to the best L seen so far;
/// with multiplier ascent L rises legitimately, so infeasibility is watched.
inline std::optional<std::string> check_divergence(std::vector<EpochRecord> const& recs, std::vector<double> const& gaps,
                                                   SolverConfig const& cfg) {
    auto const& last = recs.back();
    if (!std::isfinite(last.L) || !std::isfinite(last.T)) return "non-finite Lagrangian or infeasibility";
    auto const w = static_cast<std::size_t>(cfg.divergence_window);
    if (w == 0 || recs.size() <= w) return std::nullopt;
    std::size_t const k = recs.size() - 1;
    if (cfg.multiplier_period == 0) {
        double const floor = 1e-3 * (1.0 + std::abs(last.L - gaps[k]));
        if (gaps[k] > floor && gaps[k] > cfg.divergence_factor * gaps[k - w]) {
            return "gap grew from " + std::to_string(gaps[k - w]) + " to " + std::to_string(gaps[k]) + " over " +
                   std::to_string(w) + " epochs";
        }
    } else {
        if (last.T > 1e-2 && last.T > cfg.divergence_factor * recs[k - w].T) {
            return "infeasibility grew from " + std::to_string(recs[k - w].T) + " to " + std::to_string(last.T) +
                   " over " + std::to_string(w) + " epochs";
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Runs cfg.epochs epochs from the flat start (or the given state) and
/// reports the per-epoch trace, the gap series to the best epoch, and a
/// log-linear rate fit of its tail.
inline SolveResult solve_static(LiftedModel const& model, Instance const& inst, SolverConfig const& cfg,
                                std::optional<StateVector> start = std::nullopt) {
    cfg.validate();
    CoordinateDescent<FlopCounter> cd(model, inst, start ? *start : initial_state(model, inst, cfg.box), cfg);
    SolveResult out{cd.state(), cd.state(), {}, 0.0};
    auto& tr = out.trace;
    double best_L = std::numeric_limits<double>::infinity();
    std::vector<double> running_gap;
    for (int e = 0; e < cfg.epochs; ++e) {
        try {
            cd.run_epoch();
        } catch (UnboundedSubproblem const& ex) {
            tr.diverged = true;
            tr.diagnostic = ex.what();
            break;
        }
        auto rec = cd.record();
        if (cfg.diagnostics) {
            double const lip = estimate_lipschitz(cd.state(), cd.instance(), model, cd.mu(), cfg.lipschitz_radius,
                                                  cfg.lipschitz_samples);
            out.lipschitz = std::max(out.lipschitz, lip);
            if (lip > 0.0) {
                double const dg = prox_pl_quantity(cd.state(), cd.instance(), model, cd.mu(), lip, cd.box());
                rec.prox_pl_ratio = 0.5 * dg;  // divided by the gap once the best epoch is known
            }
        }
        tr.epochs.push_back(rec);
        if (rec.L < best_L) {
            best_L = rec.L;
            tr.best_epoch = e;
            out.best_state = cd.state();
        }
        running_gap.push_back(rec.L - best_L);
        if (!tr.converged_epoch && rec.max_step <= cfg.step_tolerance && rec.T <= cfg.feasibility_tolerance) {
            tr.converged_epoch = e;
        }
        if (auto why = detail::check_divergence(tr.epochs, running_gap, cfg)) {
            tr.diverged = true;
            tr.diagnostic = *why;
            break;
        }
        if (cfg.stop_on_convergence && tr.converged_epoch) break;
    }
    out.state = cd.state();
    if (!tr.epochs.empty()) {
        tr.gaps.reserve(tr.epochs.size());
        for (auto& rec : tr.epochs) {
            double const gap = rec.L - best_L;
            tr.gaps.push_back(gap);
            if (cfg.diagnostics && std::isfinite(rec.prox_pl_ratio)) {
                rec.prox_pl_ratio = gap > 0.0 ? rec.prox_pl_ratio / gap : std::numeric_limits<double>::quiet_NaN();
            }
        }
        tr.rate = fit_gap_tail(tr.gaps, best_L);
    }
    return out;
}

/// Largest decrease of L available from any single coordinate move at s;
/// zero at a coordinate-wise fixed point.
inline double best_single_coordinate_improvement(StateVector const& s, Instance const& inst, LiftedModel const& m,
                                                 double mu, BoxSet const& box) {
    double best = 0.0;
    for (int flat : m.layout->free_coordinates()) {
        StateVector probe = s;
        auto const res = cd_step(probe, inst, m, mu, flat, box, StepRule::exact_min);
        best = std::max(best, res.predicted_decrease);
    }
    return best;
}

}  // namespace opftrack
