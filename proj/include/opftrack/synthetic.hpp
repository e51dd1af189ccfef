#pragma once

// Generators for the shipped cases and for test scenarios. Random draws use
// splitmix64 directly so the output does not depend on the standard library's
// distribution implementations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "opftrack/case_model.hpp"
#include "opftrack/lagrangian.hpp"
#include "opftrack/tracking.hpp"

namespace opftrack {

class SplitMix {
  public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

  private:
    std::uint64_t state_;
};

namespace detail {

inline Line make_line(int a, int b, Complex series, double b_shunt = 0.0) {
    return {std::min(a, b), std::max(a, b), series, Complex(0.0, b_shunt)};
}

inline NetworkCase base_case(double base_mva) {
    NetworkCase c;
    c.base_mva = base_mva;
    c.v_min = 0.95;
    c.v_max = 1.05;
    c.slack_bus = 0;
    c.slack_magnitude = 1.0;
    c.slack_angle = 0.0;
    return c;
}

inline Bus make_bus(int id, BusKind kind, double p, double q, double s, bool regulated = true) {
    Bus b;
    b.id = id;
    b.kind = kind;
    b.p_load = p;
    b.q_load = q;
    b.s_rating = s;
    b.regulated = regulated;
    return b;
}

}  // namespace detail

/// Slack generator feeding one load over a single line.
inline NetworkCase synthetic_case2() {
    auto c = detail::base_case(100.0);
    c.buses = {detail::make_bus(0, BusKind::slack, 0.0, 0.0, 2.0),
               detail::make_bus(1, BusKind::load, 0.5, 0.2, 0.0)};
    c.lines = {detail::make_line(0, 1, 1.0 / Complex(0.02, 0.06), 0.02)};
    return c;
}

/// Meshed 4-bus ring: slack, one generator, two loads, with line charging.
inline NetworkCase synthetic_case4() {
    auto c = detail::base_case(100.0);
    c.buses = {detail::make_bus(0, BusKind::slack, 0.0, 0.0, 2.0),
               detail::make_bus(1, BusKind::generator, 0.1, 0.05, 1.0),
               detail::make_bus(2, BusKind::load, 0.45, 0.15, 0.0),
               detail::make_bus(3, BusKind::load, 0.35, 0.12, 0.0)};
    c.lines = {detail::make_line(0, 1, 1.0 / Complex(0.01, 0.05), 0.03),
               detail::make_line(1, 2, 1.0 / Complex(0.02, 0.06), 0.02),
               detail::make_line(2, 3, 1.0 / Complex(0.015, 0.05), 0.0),
               detail::make_line(3, 0, 1.0 / Complex(0.02, 0.07), 0.025)};
    return c;
}

/// IEEE 37-node feeder topology (node 799 is the slack) with synthetic
/// single-phase impedances and loads, and 17 PV systems plus the slack.
inline NetworkCase synthetic_case37(std::uint64_t seed = 37) {
    static constexpr std::array<int, 37> kNodes{799, 701, 702, 703, 704, 705, 706, 707, 708, 709, 710, 711, 712,
                                                713, 714, 718, 720, 722, 724, 725, 727, 728, 729, 730, 731, 732,
                                                733, 734, 735, 736, 737, 738, 740, 741, 742, 744, 775};
    static constexpr std::array<std::array<int, 2>, 36> kEdges{{
        {799, 701}, {701, 702}, {702, 705}, {702, 713}, {702, 703}, {703, 727}, {703, 730}, {704, 714}, {704, 720},
        {705, 742}, {705, 712}, {706, 725}, {707, 724}, {707, 722}, {708, 733}, {708, 732}, {709, 731}, {709, 708},
        {710, 735}, {710, 736}, {711, 741}, {711, 740}, {713, 704}, {714, 718}, {720, 707}, {720, 706}, {727, 744},
        {730, 709}, {733, 734}, {734, 737}, {734, 710}, {737, 738}, {738, 711}, {744, 728}, {744, 729}, {709, 775},
    }};
    static constexpr std::array<int, 17> kPv{2, 3, 5, 7, 9, 11, 13, 15, 16, 18, 20, 22, 24, 26, 28, 30, 33};
    auto index_of = [](int node) {
        auto const it = std::find(kNodes.begin(), kNodes.end(), node);
        return static_cast<int>(it - kNodes.begin());
    };
    SplitMix rng(seed);
    auto c = detail::base_case(1.0);
    for (int i = 0; i < 37; ++i) {
        if (i == 0) {
            c.buses.push_back(detail::make_bus(0, BusKind::slack, 0.0, 0.0, 1.0));
            continue;
        }
        double const p = rng.uniform(0.01, 0.04);
        double const q = 0.4 * p * rng.uniform(0.8, 1.2);
        bool const pv = std::find(kPv.begin(), kPv.end(), i) != kPv.end();
        double rating = 0.0;
        if (pv) rating = i == 3 ? 0.3 : (i == 15 || i == 16 ? 0.35 : 0.2);
        c.buses.push_back(detail::make_bus(i, pv ? BusKind::generator : BusKind::load, p, q, rating));
    }
    for (auto const& e : kEdges) {
        double const f = rng.uniform(0.5, 1.5);
        c.lines.push_back(detail::make_line(index_of(e[0]), index_of(e[1]), 1.0 / (f * Complex(0.02, 0.03))));
    }
    return c;
}

/// Random connected tree with `n_gen` generators (slack at bus 0 included).
inline NetworkCase random_tree_case(int n, int n_gen, std::uint64_t seed, bool shunts = true) {
    if (n < 1 || n_gen < 1 || n_gen > n) throw std::invalid_argument("random_tree_case needs 1 <= n_gen <= n");
    SplitMix rng(seed);
    auto c = detail::base_case(100.0);
    for (int i = 0; i < n; ++i) {
        BusKind const kind = i == 0 ? BusKind::slack : (i < n_gen ? BusKind::generator : BusKind::load);
        double const p = i == 0 ? 0.0 : rng.uniform(0.05, 0.3);
        double const q = i == 0 ? 0.0 : rng.uniform(0.0, 0.1);
        double const s = kind == BusKind::load ? 0.0 : rng.uniform(0.5, 1.5);
        c.buses.push_back(detail::make_bus(i, kind, p, q, s));
    }
    for (int i = 1; i < n; ++i) {
        int const parent = rng.below(i);
        Complex const z(rng.uniform(0.01, 0.04), rng.uniform(0.03, 0.1));
        c.lines.push_back(detail::make_line(parent, i, 1.0 / z, shunts ? rng.uniform(0.0, 0.03) : 0.0));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Profiles

inline Scenario constant_scenario(Instance const& base, int steps, double tau = 1.0) {
    if (steps < 1) throw std::invalid_argument("scenario needs at least one step");
    Scenario sc;
    sc.tau = tau;
    for (int k = 0; k < steps; ++k) {
        Instance inst = base;
        inst.time = k * tau;
        inst.step = k;
        sc.instances.push_back(std::move(inst));
    }
    return sc;
}

/// Loads scaled by `factor` from step `jump` on.
inline Scenario step_scenario(Instance const& base, int steps, int jump, double factor, double tau = 1.0) {
    auto sc = constant_scenario(base, steps, tau);
    for (int k = jump; k < steps; ++k) {
        auto& inst = sc.instances[static_cast<std::size_t>(k)];
        for (auto& p : inst.p_load) p *= factor;
        for (auto& q : inst.q_load) q *= factor;
    }
    return sc;
}

/// Loads alternating between two levels every `period` steps: piecewise
/// constant with a bounded per-step variation.
inline Scenario square_wave_scenario(Instance const& base, int steps, int period, double amplitude, double tau = 1.0) {
    if (period < 1) throw std::invalid_argument("square wave period must be >= 1");
    auto sc = constant_scenario(base, steps, tau);
    for (int k = 0; k < steps; ++k) {
        double const f = (k / period) % 2 == 0 ? 1.0 : 1.0 + amplitude;
        auto& inst = sc.instances[static_cast<std::size_t>(k)];
        for (auto& p : inst.p_load) p *= f;
        for (auto& q : inst.q_load) q *= f;
    }
    return sc;
}

/// PV availability following a half-sine over the horizon (scaled by the
/// rating of each generator), loads with a small sinusoidal swing, and a
/// little deterministic noise on both.
inline Scenario diurnal_scenario(NetworkCase const& nc, Instance const& base, int steps, double tau = 1.0,
                                 std::uint64_t seed = 7) {
    auto sc = constant_scenario(base, steps, tau);
    auto const gens = nc.generators();
    SplitMix rng(seed);
    for (int k = 0; k < steps; ++k) {
        double const phase = steps > 1 ? static_cast<double>(k) / (steps - 1) : 0.5;
        double const sun = 0.05 + 0.95 * std::sin(std::numbers::pi * phase);
        double const swing = 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * phase);
        auto& inst = sc.instances[static_cast<std::size_t>(k)];
        for (std::size_t g = 0; g < gens.size(); ++g) {
            if (gens[g] == nc.slack_bus) continue;
            double const rating = nc.buses[static_cast<std::size_t>(gens[g])].s_rating;
            inst.p_available[g] = std::max(0.0, rating * sun * rng.uniform(0.97, 1.03));
        }
        for (auto& p : inst.p_load) p *= swing * rng.uniform(0.99, 1.01);
        for (auto& q : inst.q_load) q *= swing;
    }
    return sc;
}

}  // namespace opftrack
