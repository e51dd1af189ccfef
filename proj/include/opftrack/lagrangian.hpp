#pragma once

// State layout, instance data, and the augmented Lagrangian of the lifted
// ACOPF
//
//   L(xi, mu) = sum_{i in G} c_i (P_l,i + tr(Y_i xx^T))^2 + d_i (Q_l,i + tr(Ybar_i xx^T))^2
//             + sum_{i in N} [ -lam_t_i r_t_i + mu/2 r_t_i^2 ]      r_t = tr(Y_i xx^T) - t_i
//             + sum_{i in N} [ -lam_g_i r_g_i + mu/2 r_g_i^2 ]      r_g = tr(Ybar_i xx^T) - g_i
//             + sum_{i in N} [ -lam_h_i r_h_i + mu/2 r_h_i^2 ]      r_h = tr(M_i xx^T) - h_i
//             + sum_{i in G} [ -lam_z_i r_z_i + mu/2 r_z_i^2 ]      r_z = (t_i+P_l,i)^2 + (g_i+Q_l,i)^2 - z_i
//
// minimized over the box Y on (t, h, z). Along any single primal coordinate L
// is a polynomial of degree <= 4, which the coordinate-descent engine
// minimizes in closed form.

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opftrack/case_model.hpp"
#include "opftrack/flop_model.hpp"
#include "opftrack/lifting.hpp"
#include "opftrack/poly_solver.hpp"

namespace opftrack {

enum class Group { x, t, g, h, z, lam_t, lam_g, lam_h, lam_z };

inline std::string_view to_string(Group g) {
    switch (g) {
        case Group::x: return "x";
        case Group::t: return "t";
        case Group::g: return "g";
        case Group::h: return "h";
        case Group::z: return "z";
        case Group::lam_t: return "lam_t";
        case Group::lam_g: return "lam_g";
        case Group::lam_h: return "lam_h";
        case Group::lam_z: return "lam_z";
    }
    return "?";
}

struct CoordRef {
    Group group = Group::x;
    int index = 0;
    friend bool operator==(CoordRef const&, CoordRef const&) = default;
};

/// Flat layout of xi = (x[2n], t[n], g[n], h[n], z[n_g], lam_t[n], lam_g[n],
/// lam_h[n], lam_z[n_g]) and the set of free (coordinate-minimized)
/// positions: x without the slack pair, t and g of generators, all h, all z.
class StateLayout {
  public:
    StateLayout(int n, std::vector<int> generator_buses, int slack_bus)
        : n_(n), gens_(std::move(generator_buses)), slack_(slack_bus), gen_of_bus_(static_cast<std::size_t>(n), -1) {
        for (std::size_t k = 0; k < gens_.size(); ++k) gen_of_bus_[static_cast<std::size_t>(gens_[k])] = static_cast<int>(k);
        int const ng = n_g();
        std::array<int, 9> const sizes{2 * n, n, n, n, ng, n, n, n, ng};
        int off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            offsets_[k] = off;
            off += sizes[k];
        }
        offsets_[9] = off;

        free_flag_.assign(static_cast<std::size_t>(off), false);
        auto mark = [&](int flat) {
            free_flag_[static_cast<std::size_t>(flat)] = true;
            free_.push_back(flat);
        };
        for (int j = 0; j < 2 * n; ++j) {
            if (j != slack_ && j != slack_ + n) mark(index(Group::x, j));
        }
        for (int b : gens_) mark(index(Group::t, b));
        for (int b : gens_) mark(index(Group::g, b));
        for (int i = 0; i < n; ++i) mark(index(Group::h, i));
        for (int k = 0; k < ng; ++k) mark(index(Group::z, k));
    }

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int n_g() const { return static_cast<int>(gens_.size()); }
    [[nodiscard]] int slack() const { return slack_; }
    [[nodiscard]] std::span<int const> generators() const { return gens_; }
    /// Generator index of a bus, or -1.
    [[nodiscard]] int gen_of_bus(int bus) const { return gen_of_bus_[static_cast<std::size_t>(bus)]; }

    [[nodiscard]] int size() const { return offsets_[9]; }
    [[nodiscard]] int offset(Group g) const { return offsets_[static_cast<std::size_t>(g)]; }
    [[nodiscard]] int group_size(Group g) const {
        return offsets_[static_cast<std::size_t>(g) + 1] - offsets_[static_cast<std::size_t>(g)];
    }
    [[nodiscard]] int index(Group g, int k) const { return offset(g) + k; }

    [[nodiscard]] CoordRef locate(int flat) const {
        if (flat < 0 || flat >= size()) throw std::out_of_range("state index out of range");
        std::size_t g = 0;
        while (flat >= offsets_[g + 1]) ++g;
        return {static_cast<Group>(g), flat - offsets_[g]};
    }

    [[nodiscard]] bool is_free(int flat) const {
        return flat >= 0 && flat < size() && free_flag_[static_cast<std::size_t>(flat)];
    }
    /// Free coordinates in layout order: d = (2n - 2) + 3 n_g + n.
    [[nodiscard]] std::span<int const> free_coordinates() const { return free_; }

  private:
    int n_;
    std::vector<int> gens_;
    int slack_;
    std::vector<int> gen_of_bus_;
    std::array<int, 10> offsets_{};
    std::vector<bool> free_flag_;
    std::vector<int> free_;
};

/// Value-semantic iterate xi.
class StateVector {
  public:
    StateVector() = default;
    explicit StateVector(std::shared_ptr<StateLayout const> layout)
        : layout_(std::move(layout)), values_(static_cast<std::size_t>(layout_->size()), 0.0) {}

    [[nodiscard]] StateLayout const& layout() const { return *layout_; }
    [[nodiscard]] std::shared_ptr<StateLayout const> const& layout_ptr() const { return layout_; }

    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] std::span<double const> values() const { return values_; }
    [[nodiscard]] double& operator[](int flat) { return values_[static_cast<std::size_t>(flat)]; }
    [[nodiscard]] double operator[](int flat) const { return values_[static_cast<std::size_t>(flat)]; }

    [[nodiscard]] std::span<double> group(Group g) {
        return std::span<double>(values_).subspan(static_cast<std::size_t>(layout_->offset(g)),
                                                  static_cast<std::size_t>(layout_->group_size(g)));
    }
    [[nodiscard]] std::span<double const> group(Group g) const {
        return std::span<double const>(values_).subspan(static_cast<std::size_t>(layout_->offset(g)),
                                                        static_cast<std::size_t>(layout_->group_size(g)));
    }
    [[nodiscard]] std::span<double const> x() const { return group(Group::x); }
    [[nodiscard]] std::span<double> x() { return group(Group::x); }

    friend bool operator==(StateVector const& a, StateVector const& b) { return a.values_ == b.values_; }

  private:
    std::shared_ptr<StateLayout const> layout_;
    std::vector<double> values_;
};

/// Data that changes from one time step to the next.
struct Instance {
    std::vector<double> p_load;       // [n]
    std::vector<double> q_load;       // [n]
    std::vector<double> p_available;  // [n_g]
    std::vector<double> cost_c;       // [n_g], active-power cost
    std::vector<double> cost_d;       // [n_g], reactive-power cost
    double time = 0.0;                // seconds
    int step = 0;

    friend bool operator==(Instance const&, Instance const&) = default;
};

struct CostCoefficients {
    double c = 3.0;
    double d = 1.0;
};

/// Loads from the case, P_av equal to each generator's rating, uniform costs.
inline Instance instance_from_case(NetworkCase const& nc, CostCoefficients costs = {}) {
    Instance inst;
    for (auto const& b : nc.buses) {
        inst.p_load.push_back(b.p_load);
        inst.q_load.push_back(b.q_load);
    }
    for (int b : nc.generators()) {
        inst.p_available.push_back(nc.buses[static_cast<std::size_t>(b)].s_rating);
        inst.cost_c.push_back(costs.c);
        inst.cost_d.push_back(costs.d);
    }
    return inst;
}

/// Static data of the lifted problem derived from a case.
struct LiftedModel {
    std::shared_ptr<StateLayout const> layout;
    LiftedOperators ops;
    std::vector<double> s_rating;  // [n_g]
    std::vector<bool> regulated;   // [n]
    double v_min = 0.95;
    double v_max = 1.05;
    Complex slack_voltage{1.0, 0.0};

    [[nodiscard]] int n() const { return layout->n(); }
    [[nodiscard]] int n_g() const { return layout->n_g(); }

    static LiftedModel from_case(NetworkCase const& nc) {
        LiftedModel m;
        m.layout = std::make_shared<StateLayout const>(nc.n(), nc.generators(), nc.slack_bus);
        m.ops = LiftedOperators(build_admittance(nc));
        for (int b : nc.generators()) m.s_rating.push_back(nc.buses[static_cast<std::size_t>(b)].s_rating);
        for (auto const& b : nc.buses) m.regulated.push_back(b.regulated);
        m.v_min = nc.v_min;
        m.v_max = nc.v_max;
        m.slack_voltage = std::polar(nc.slack_magnitude, nc.slack_angle);
        return m;
    }

    void check_instance(Instance const& inst) const {
        auto const n = static_cast<std::size_t>(this->n());
        auto const ng = static_cast<std::size_t>(n_g());
        if (inst.p_load.size() != n || inst.q_load.size() != n || inst.p_available.size() != ng ||
            inst.cost_c.size() != ng || inst.cost_d.size() != ng) {
            throw std::invalid_argument("instance dimensions do not match the network");
        }
    }
};

// ---------------------------------------------------------------------------
// Box constraints

struct BoxOptions {
    /// Adds z >= 0; off by default because the box only caps z from above.
    bool clamp_z_nonnegative = false;
};

/// Per-coordinate bounds over the flat state; +-inf where unconstrained.
struct BoxSet {
    std::vector<double> lo;
    std::vector<double> hi;

    [[nodiscard]] Interval interval(int flat) const {
        return {lo[static_cast<std::size_t>(flat)], hi[static_cast<std::size_t>(flat)]};
    }
    [[nodiscard]] bool contains(StateVector const& s) const {
        for (std::size_t k = 0; k < lo.size(); ++k) {
            if (s[static_cast<int>(k)] < lo[k] || s[static_cast<int>(k)] > hi[k]) return false;
        }
        return true;
    }
};

/// t_i in [-P_l, P_av - P_l] (generators), h_i in [v_min^2, v_max^2]
/// (regulated buses), z_i <= S_i^2.
inline BoxSet build_box(LiftedModel const& m, Instance const& inst, BoxOptions opts = {}) {
    auto const& L = *m.layout;
    BoxSet box{std::vector<double>(static_cast<std::size_t>(L.size()), -kInf),
               std::vector<double>(static_cast<std::size_t>(L.size()), kInf)};
    for (int k = 0; k < L.n_g(); ++k) {
        int const bus = L.generators()[static_cast<std::size_t>(k)];
        auto const t = static_cast<std::size_t>(L.index(Group::t, bus));
        box.lo[t] = -inst.p_load[static_cast<std::size_t>(bus)];
        box.hi[t] = inst.p_available[static_cast<std::size_t>(k)] - inst.p_load[static_cast<std::size_t>(bus)];
        auto const z = static_cast<std::size_t>(L.index(Group::z, k));
        double const s = m.s_rating[static_cast<std::size_t>(k)];
        box.hi[z] = s * s;
        if (opts.clamp_z_nonnegative) box.lo[z] = 0.0;
    }
    for (int i = 0; i < L.n(); ++i) {
        if (!m.regulated[static_cast<std::size_t>(i)]) continue;
        auto const h = static_cast<std::size_t>(L.index(Group::h, i));
        box.lo[h] = m.v_min * m.v_min;
        box.hi[h] = m.v_max * m.v_max;
    }
    return box;
}

// ---------------------------------------------------------------------------
// Pinned coordinates and initialization

/// Non-generator t_i = -P_l,i and g_i = -Q_l,i; slack x = rho0 e^{j theta0}.
inline void apply_pins(StateVector& s, LiftedModel const& m, Instance const& inst) {
    auto const& L = *m.layout;
    for (int i = 0; i < L.n(); ++i) {
        if (L.gen_of_bus(i) >= 0) continue;
        s[L.index(Group::t, i)] = -inst.p_load[static_cast<std::size_t>(i)];
        s[L.index(Group::g, i)] = -inst.q_load[static_cast<std::size_t>(i)];
    }
    s[L.index(Group::x, L.slack())] = m.slack_voltage.real();
    s[L.index(Group::x, L.slack() + L.n())] = m.slack_voltage.imag();
}

/// Flat start: every bus at rho0 + 0j (slack at its angle), lifted variables
/// set to their residual-consistent values projected onto the box, zero
/// multipliers.
inline StateVector initial_state(LiftedModel const& m, Instance const& inst, BoxOptions opts = {}) {
    m.check_instance(inst);
    auto const& L = *m.layout;
    StateVector s(m.layout);
    double const rho = std::abs(m.slack_voltage);
    for (int i = 0; i < L.n(); ++i) s[L.index(Group::x, i)] = rho;
    apply_pins(s, m, inst);
    auto const box = build_box(m, inst, opts);
    auto const x = s.x();
    for (int k = 0; k < L.n_g(); ++k) {
        int const bus = L.generators()[static_cast<std::size_t>(k)];
        int const t = L.index(Group::t, bus);
        int const g = L.index(Group::g, bus);
        s[t] = box.interval(t).clamp(m.ops.active(bus).eval(x));
        s[g] = box.interval(g).clamp(m.ops.reactive(bus).eval(x));
    }
    for (int i = 0; i < L.n(); ++i) {
        int const h = L.index(Group::h, i);
        s[h] = box.interval(h).clamp(m.ops.selector(i).eval(x));
    }
    for (int k = 0; k < L.n_g(); ++k) {
        int const bus = L.generators()[static_cast<std::size_t>(k)];
        double const tp = s[L.index(Group::t, bus)] + inst.p_load[static_cast<std::size_t>(bus)];
        double const gq = s[L.index(Group::g, bus)] + inst.q_load[static_cast<std::size_t>(bus)];
        int const z = L.index(Group::z, k);
        s[z] = box.interval(z).clamp(tp * tp + gq * gq);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Residuals and scalar evaluations

struct Residuals {
    std::vector<double> t;  // [n]
    std::vector<double> g;  // [n]
    std::vector<double> h;  // [n]
    std::vector<double> z;  // [n_g]
};

inline Residuals residuals(StateVector const& s, Instance const& inst, LiftedModel const& m) {
    auto const& L = *m.layout;
    auto const x = s.x();
    Residuals r;
    r.t.resize(static_cast<std::size_t>(L.n()));
    r.g.resize(static_cast<std::size_t>(L.n()));
    r.h.resize(static_cast<std::size_t>(L.n()));
    r.z.resize(static_cast<std::size_t>(L.n_g()));
    for (int i = 0; i < L.n(); ++i) {
        auto const k = static_cast<std::size_t>(i);
        r.t[k] = m.ops.active(i).eval(x) - s[L.index(Group::t, i)];
        r.g[k] = m.ops.reactive(i).eval(x) - s[L.index(Group::g, i)];
        r.h[k] = m.ops.selector(i).eval(x) - s[L.index(Group::h, i)];
    }
    for (int k = 0; k < L.n_g(); ++k) {
        int const bus = L.generators()[static_cast<std::size_t>(k)];
        double const tp = s[L.index(Group::t, bus)] + inst.p_load[static_cast<std::size_t>(bus)];
        double const gq = s[L.index(Group::g, bus)] + inst.q_load[static_cast<std::size_t>(bus)];
        r.z[static_cast<std::size_t>(k)] = tp * tp + gq * gq - s[L.index(Group::z, k)];
    }
    return r;
}

/// Generator cost only: sum c_i (P_l,i + tr(Y_i xx^T))^2 + d_i (Q_l,i + tr(Ybar_i xx^T))^2.
inline double objective_cost(StateVector const& s, Instance const& inst, LiftedModel const& m) {
    auto const& L = *m.layout;
    auto const x = s.x();
    double total = 0.0;
    for (int k = 0; k < L.n_g(); ++k) {
        int const bus = L.generators()[static_cast<std::size_t>(k)];
        double const p = inst.p_load[static_cast<std::size_t>(bus)] + m.ops.active(bus).eval(x);
        double const q = inst.q_load[static_cast<std::size_t>(bus)] + m.ops.reactive(bus).eval(x);
        total += inst.cost_c[static_cast<std::size_t>(k)] * p * p + inst.cost_d[static_cast<std::size_t>(k)] * q * q;
    }
    return total;
}

inline double eval_L(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu) {
    m.check_instance(inst);
    if (s.values().size() != static_cast<std::size_t>(m.layout->size())) {
        throw std::invalid_argument("state does not match the model layout");
    }
    auto const r = residuals(s, inst, m);
    double total = objective_cost(s, inst, m);
    auto group = [&](std::vector<double> const& res, Group lam) {
        auto const lambda = s.group(lam);
        double acc = 0.0;
        for (std::size_t i = 0; i < res.size(); ++i) acc += -lambda[i] * res[i] + 0.5 * mu * res[i] * res[i];
        return acc;
    };
    total += group(r.t, Group::lam_t);
    total += group(r.g, Group::lam_g);
    total += group(r.h, Group::lam_h);
    total += group(r.z, Group::lam_z);
    return total;
}

/// Optional linear terms omega_i^T x and omegabar_i^T x in the infeasibility
/// measure. Empty means zero.
struct OmegaTerms {
    std::vector<std::vector<double>> omega;      // [n][2n]
    std::vector<std::vector<double>> omega_bar;  // [n][2n]

    [[nodiscard]] bool empty() const { return omega.empty() && omega_bar.empty(); }
};

struct Infeasibility {
    double T = 0.0;
    /// T without the non-generator t/g groups.
    double T_prime = 0.0;
};

inline Infeasibility infeasibility(StateVector const& s, Instance const& inst, LiftedModel const& m,
                                   OmegaTerms const& omega = {}) {
    auto const& L = *m.layout;
    auto const x = s.x();
    auto dot = [&](std::vector<std::vector<double>> const& w, int i) {
        if (w.empty()) return 0.0;
        auto const& row = w[static_cast<std::size_t>(i)];
        double acc = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
        return acc;
    };
    auto const r = residuals(s, inst, m);
    Infeasibility out;
    for (int i = 0; i < L.n(); ++i) {
        auto const k = static_cast<std::size_t>(i);
        double const rt = r.t[k] + dot(omega.omega, i);
        double const rg = r.g[k] + dot(omega.omega_bar, i);
        double const tg = rt * rt + rg * rg;
        double const hh = r.h[k] * r.h[k];
        out.T += tg + hh;
        out.T_prime += (L.gen_of_bus(i) >= 0 ? tg : 0.0) + hh;
    }
    for (double rz : r.z) {
        out.T += rz * rz;
        out.T_prime += rz * rz;
    }
    return out;
}

enum class CostMetric {
    lifted,           // the minimized generator cost
    available_power,  // sum c_q Q_i^2 + c_p P_av,i^2
    curtailment,      // sum c_q Q_i^2 + c_p (P_av,i - P_i)^2
};

inline double report_cost(StateVector const& s, Instance const& inst, LiftedModel const& m, CostMetric metric) {
    if (metric == CostMetric::lifted) return objective_cost(s, inst, m);
    auto const& L = *m.layout;
    auto const x = s.x();
    double total = 0.0;
    for (int k = 0; k < L.n_g(); ++k) {
        auto const kk = static_cast<std::size_t>(k);
        int const bus = L.generators()[kk];
        double const p = inst.p_load[static_cast<std::size_t>(bus)] + m.ops.active(bus).eval(x);
        double const q = inst.q_load[static_cast<std::size_t>(bus)] + m.ops.reactive(bus).eval(x);
        double const pav = inst.p_available[kk];
        double const pterm = metric == CostMetric::available_power ? pav : pav - p;
        total += inst.cost_d[kk] * q * q + inst.cost_c[kk] * pterm * pterm;
    }
    return total;
}

inline std::vector<double> voltage_magnitudes(StateVector const& s) {
    auto const n = static_cast<std::size_t>(s.layout().n());
    auto const x = s.x();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::hypot(x[i], x[i + n]);
    return v;
}

/// Largest distance of a regulated bus voltage magnitude outside [v_min, v_max].
inline double max_voltage_violation(StateVector const& s, LiftedModel const& m) {
    auto const v = voltage_magnitudes(s);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!m.regulated[i]) continue;
        worst = std::max({worst, v[i] - m.v_max, m.v_min - v[i]});
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Coordinate restrictions

namespace detail {

/// acc += w * u(a)^2 for a quadratic u.
template <class Counter>
void add_weighted_square(PolyCoeffs& acc, Quadratic const& u, double w, Counter& ctr) {
    if (u.q2 == 0.0) {
        acc.c[2] += w * (u.q1 * u.q1);
        acc.c[1] += w * (2.0 * u.q1 * u.q0);
        acc.c[0] += w * (u.q0 * u.q0);
        ctr.add(FlopCategory::coefficient, 13);
        return;
    }
    acc.c[4] += w * (u.q2 * u.q2);
    acc.c[3] += w * (2.0 * u.q2 * u.q1);
    acc.c[2] += w * (u.q1 * u.q1 + 2.0 * u.q2 * u.q0);
    acc.c[1] += w * (2.0 * u.q1 * u.q0);
    acc.c[0] += w * (u.q0 * u.q0);
    ctr.add(FlopCategory::coefficient, 24);
}

/// acc += w * u(a) for a quadratic u.
template <class Counter>
void add_weighted(PolyCoeffs& acc, Quadratic const& u, double w, Counter& ctr) {
    acc.c[2] += w * u.q2;
    acc.c[1] += w * u.q1;
    acc.c[0] += w * u.q0;
    ctr.add(FlopCategory::coefficient, u.q2 == 0.0 ? 4 : 6);
}

/// -lam u + mu/2 u^2.
template <class Counter>
void add_penalty_group(PolyCoeffs& acc, Quadratic const& u, double lam, double mu, Counter& ctr) {
    if (lam != 0.0) add_weighted(acc, u, -lam, ctr);
    add_weighted_square(acc, u, 0.5 * mu, ctr);
}

inline Quadratic shifted(Quadratic q, double delta) {
    q.q0 += delta;
    return q;
}

}  // namespace detail

/// Coefficients of a -> (terms of L that depend on the coordinate)(xi + a e_flat).
/// The constant term covers only those terms; the engine needs nothing else
/// and this keeps the cost proportional to the bus degree.
template <OpCounter Counter = NullCounter>
PolyCoeffs local_polynomial(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu, int flat,
                            Counter&& ctr = {}) {
    auto const& L = *m.layout;
    if (!L.is_free(flat)) {
        throw std::invalid_argument("coordinate " + std::to_string(flat) + " is pinned or a multiplier");
    }
    auto const [group, k] = L.locate(flat);
    auto const x = s.x();
    int const n = L.n();
    PolyCoeffs poly;
    auto lam = [&](Group g, int i) { return s[L.index(g, i)]; };

    switch (group) {
        case Group::x: {
            for (int i : m.ops.touching(k)) {
                auto const bi = static_cast<std::size_t>(i);
                int const gen = L.gen_of_bus(i);
                auto const ty = m.ops.active(i).restrict(x, k, ctr);
                auto const tyb = m.ops.reactive(i).restrict(x, k, ctr);
                detail::add_penalty_group(poly, detail::shifted(ty, -s[L.index(Group::t, i)]), lam(Group::lam_t, i), mu, ctr);
                detail::add_penalty_group(poly, detail::shifted(tyb, -s[L.index(Group::g, i)]), lam(Group::lam_g, i), mu,
                                          ctr);
                if (gen >= 0) {
                    auto const gk = static_cast<std::size_t>(gen);
                    detail::add_weighted_square(poly, detail::shifted(ty, inst.p_load[bi]), inst.cost_c[gk], ctr);
                    detail::add_weighted_square(poly, detail::shifted(tyb, inst.q_load[bi]), inst.cost_d[gk], ctr);
                }
                ctr.add(FlopCategory::coefficient, gen >= 0 ? 4 : 2);
            }
            int const bus = k % n;
            auto const tm = m.ops.selector(bus).restrict(x, k, ctr);
            detail::add_penalty_group(poly, detail::shifted(tm, -s[L.index(Group::h, bus)]), lam(Group::lam_h, bus), mu,
                                      ctr);
            ctr.add(FlopCategory::coefficient, 1);
            break;
        }
        case Group::t:
        case Group::g: {
            bool const active = group == Group::t;
            int const bus = k;
            int const gen = L.gen_of_bus(bus);
            auto const bi = static_cast<std::size_t>(bus);
            double const tau = active ? m.ops.active(bus).eval(x, ctr) : m.ops.reactive(bus).eval(x, ctr);
            double const own = s[flat];
            // r_t(a) = tau - own - a
            detail::add_penalty_group(poly, Quadratic{0.0, -1.0, tau - own}, lam(active ? Group::lam_t : Group::lam_g, bus),
                                      mu, ctr);
            // r_z(a) = (own + a + load)^2 + other^2 - z
            double const load = active ? inst.p_load[bi] : inst.q_load[bi];
            double const other = active ? s[L.index(Group::g, bus)] + inst.q_load[bi]
                                        : s[L.index(Group::t, bus)] + inst.p_load[bi];
            double const base = own + load;
            Quadratic const rz{1.0, 2.0 * base, base * base + other * other - s[L.index(Group::z, gen)]};
            ctr.add(FlopCategory::coefficient, 8);
            detail::add_penalty_group(poly, rz, lam(Group::lam_z, gen), mu, ctr);
            break;
        }
        case Group::h: {
            double const mval = m.ops.selector(k).eval(x, ctr);
            detail::add_penalty_group(poly, Quadratic{0.0, -1.0, mval - s[flat]}, lam(Group::lam_h, k), mu, ctr);
            ctr.add(FlopCategory::coefficient, 1);
            break;
        }
        case Group::z: {
            int const bus = L.generators()[static_cast<std::size_t>(k)];
            auto const bi = static_cast<std::size_t>(bus);
            double const tp = s[L.index(Group::t, bus)] + inst.p_load[bi];
            double const gq = s[L.index(Group::g, bus)] + inst.q_load[bi];
            double const sq = tp * tp + gq * gq;
            detail::add_penalty_group(poly, Quadratic{0.0, -1.0, sq - s[flat]}, lam(Group::lam_z, k), mu, ctr);
            ctr.add(FlopCategory::coefficient, 6);
            break;
        }
        default: break;
    }
    return poly;
}

/// Exact restriction alpha -> L(xi + alpha e_flat, mu), constant term included.
inline PolyCoeffs coordinate_polynomial(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu,
                                        int flat) {
    auto poly = local_polynomial(s, inst, m, mu, flat);
    poly.c[0] = eval_L(s, inst, m, mu);
    return poly;
}

inline double coordinate_gradient(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu,
                                  int flat) {
    return local_polynomial(s, inst, m, mu, flat).c[1];
}

/// D_g(xi, alpha) = -2 alpha min_{xi'} [<grad, xi' - xi> + alpha/2 |xi' - xi|^2 + g(xi') - g(xi)]
/// over the free primal coordinates, with g the box indicator. The minimizer is
/// the projection of xi - grad/alpha; xi is assumed to lie in the box.
inline double prox_pl_quantity(StateVector const& s, Instance const& inst, LiftedModel const& m, double mu,
                               double alpha, BoxSet const& box) {
    if (!(alpha > 0.0)) throw std::invalid_argument("prox_pl_quantity requires alpha > 0");
    double inner = 0.0;
    for (int flat : m.layout->free_coordinates()) {
        double const grad = coordinate_gradient(s, inst, m, mu, flat);
        double const cur = s[flat];
        double const step = box.interval(flat).clamp(cur - grad / alpha) - cur;
        inner += grad * step + 0.5 * alpha * step * step;
    }
    return -2.0 * alpha * inner;
}

}  // namespace opftrack
