#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace opftrack;

namespace {

// Slack bus carries P_l = 1, the other bus has no load.
NetworkCase two_bus_loaded_slack() {
    NetworkCase c;
    c.base_mva = 1.0;
    c.buses = {{0, BusKind::slack, 1.0, 0.0, 5.0, true}, {1, BusKind::load, 0.0, 0.0, 0.0, true}};
    c.lines = {{0, 1, {4.0, -10.0}, {}}};
    return c;
}

struct Fixture {
    NetworkCase nc;
    LiftedModel m;
    Instance inst;
    explicit Fixture(NetworkCase c) : nc(std::move(c)), m(LiftedModel::from_case(nc)), inst(instance_from_case(nc)) {}
};

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Coefficients of the quartic through alpha = -2..2.
std::array<double, 5> interpolate5(std::array<double, 5> const& f) {
    Eigen::Matrix<double, 5, 5> V;
    Eigen::Matrix<double, 5, 1> y;
    for (int k = 0; k < 5; ++k) {
        double const a = k - 2.0;
        for (int p = 0; p < 5; ++p) V(k, p) = std::pow(a, p);
        y(k) = f[static_cast<std::size_t>(k)];
    }
    Eigen::Matrix<double, 5, 1> const c = V.fullPivLu().solve(y);
    return {c(0), c(1), c(2), c(3), c(4)};
}

}  // namespace

TEST(StateLayout, FreeCoordinateCount) {
    for (auto const& c : {synthetic_case2(), synthetic_case4(), synthetic_case37()}) {
        auto const m = LiftedModel::from_case(c);
        int const n = c.n(), ng = c.n_g();
        EXPECT_EQ(static_cast<int>(m.layout->free_coordinates().size()), (2 * n - 2) + 3 * ng + n);
        EXPECT_EQ(m.layout->size(), 2 * n + 3 * n + ng + 3 * n + ng);
        for (int flat : m.layout->free_coordinates()) {
            auto const r = m.layout->locate(flat);
            EXPECT_NE(static_cast<int>(r.group), static_cast<int>(Group::lam_t));
            EXPECT_EQ(m.layout->index(r.group, r.index), flat);
        }
    }
}

TEST(StateLayout, SlackAndLoadCoordinatesArePinned) {
    auto const c = synthetic_case4();
    auto const m = LiftedModel::from_case(c);
    auto const& L = *m.layout;
    EXPECT_FALSE(L.is_free(L.index(Group::x, c.slack_bus)));
    EXPECT_FALSE(L.is_free(L.index(Group::x, c.slack_bus + c.n())));
    for (int i = 0; i < c.n(); ++i) {
        bool const gen = c.buses[i].is_generator();
        EXPECT_EQ(L.is_free(L.index(Group::t, i)), gen);
        EXPECT_EQ(L.is_free(L.index(Group::g, i)), gen);
        EXPECT_TRUE(L.is_free(L.index(Group::h, i)));
        EXPECT_FALSE(L.is_free(L.index(Group::lam_h, i)));
    }
}

TEST(EvalL, TwoBusWorkedExample) {
    Fixture f(two_bus_loaded_slack());
    f.inst.cost_c = {1.0};
    f.inst.cost_d = {1.0};
    StateVector s(f.m.layout);
    apply_pins(s, f.m, f.inst);
    // Keep the slack voltage at zero too; only the t/g pins are wanted.
    s[f.m.layout->index(Group::x, 0)] = 0.0;
    EXPECT_DOUBLE_EQ(eval_L(s, f.inst, f.m, 2.0), 2.0);
    EXPECT_DOUBLE_EQ(objective_cost(s, f.inst, f.m), 1.0);
}

TEST(EvalL, ZeroResidualsGiveObjectiveOnly) {
    Fixture f(synthetic_case4());
    SplitMix rng(3);
    auto s = oracle::random_state(f.m, f.inst, rng);
    for (double& v : s.group(Group::lam_t)) v = 0.0;
    for (double& v : s.group(Group::lam_g)) v = 0.0;
    for (double& v : s.group(Group::lam_h)) v = 0.0;
    for (double& v : s.group(Group::lam_z)) v = 0.0;
    // Set the lifted variables to their consistent values (loads are pinned,
    // so zero the loads to make the pins consistent with x as well).
    for (double& v : f.inst.p_load) v = 0.0;
    for (double& v : f.inst.q_load) v = 0.0;
    apply_pins(s, f.m, f.inst);
    for (auto& v : s.x()) v = 0.0;
    auto const& L = *f.m.layout;
    for (int i = 0; i < f.nc.n(); ++i) {
        s[L.index(Group::t, i)] = 0.0;
        s[L.index(Group::g, i)] = 0.0;
        s[L.index(Group::h, i)] = 0.0;
    }
    for (int k = 0; k < f.nc.n_g(); ++k) s[L.index(Group::z, k)] = 0.0;
    EXPECT_EQ(eval_L(s, f.inst, f.m, 7.0), objective_cost(s, f.inst, f.m));
    EXPECT_EQ(infeasibility(s, f.inst, f.m).T, 0.0);
}

TEST(EvalL, MatchesDenseOracle) {
    SplitMix rng(21);
    for (auto const& c : {synthetic_case2(), synthetic_case4(), synthetic_case37(), random_tree_case(9, 3, 4)}) {
        Fixture f(c);
        for (int trial = 0; trial < 30; ++trial) {
            auto const s = oracle::random_state(f.m, f.inst, rng);
            double const mu = rng.uniform(0.0, 50.0);
            EXPECT_LE(rel(eval_L(s, f.inst, f.m, mu), oracle::lagrangian(c, s, f.inst, mu)), 1e-10);
            EXPECT_LE(rel(objective_cost(s, f.inst, f.m), oracle::objective(c, s, f.inst)), 1e-10);
            auto const r = residuals(s, f.inst, f.m);
            auto const d = oracle::residuals(c, s, f.inst);
            for (std::size_t i = 0; i < r.t.size(); ++i) {
                EXPECT_NEAR(r.t[i], d.t[i], 1e-11);
                EXPECT_NEAR(r.g[i], d.g[i], 1e-11);
                EXPECT_NEAR(r.h[i], d.h[i], 1e-11);
            }
            for (std::size_t k = 0; k < r.z.size(); ++k) EXPECT_NEAR(r.z[k], d.z[k], 1e-11);
        }
    }
    EXPECT_THROW((void)eval_L(StateVector(LiftedModel::from_case(synthetic_case2()).layout), instance_from_case(synthetic_case4()),
                              LiftedModel::from_case(synthetic_case4()), 1.0),
                 std::invalid_argument);
}

TEST(EvalL, RecomposesFromResiduals) {
    Fixture f(synthetic_case37());
    SplitMix rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        auto const s = oracle::random_state(f.m, f.inst, rng);
        double const mu = 10.0;
        auto const r = residuals(s, f.inst, f.m);
        double L = objective_cost(s, f.inst, f.m);
        auto add = [&](std::vector<double> const& res, Group g) {
            auto const lam = s.group(g);
            for (std::size_t i = 0; i < res.size(); ++i) L += -lam[i] * res[i] + 0.5 * mu * res[i] * res[i];
        };
        add(r.t, Group::lam_t);
        add(r.g, Group::lam_g);
        add(r.h, Group::lam_h);
        add(r.z, Group::lam_z);
        EXPECT_LE(rel(L, eval_L(s, f.inst, f.m, mu)), 1e-12);
    }
}

TEST(Residuals, Examples) {
    auto c = synthetic_case4();
    for (auto& b : c.buses) b.p_load = b.q_load = 0.0;
    Fixture f(c);
    StateVector s(f.m.layout);
    apply_pins(s, f.m, f.inst);
    for (auto& v : s.x()) v = 0.0;
    auto r = residuals(s, f.inst, f.m);
    for (double v : r.t) EXPECT_EQ(v, 0.0);
    for (double v : r.h) EXPECT_EQ(v, 0.0);
    for (double v : r.z) EXPECT_EQ(v, 0.0);

    // A load bus with P_l = 1 pinned at t = -1 has r_t = 1.
    f.inst.p_load[2] = 1.0;
    apply_pins(s, f.m, f.inst);
    for (auto& v : s.x()) v = 0.0;
    r = residuals(s, f.inst, f.m);
    EXPECT_EQ(r.t[2], 1.0);
    EXPECT_EQ(r.t[1], 0.0);  // generator, t free at 0
}

TEST(Objective, Examples) {
    Fixture f(synthetic_case4());
    StateVector s(f.m.layout);
    double expect = 0.0;
    for (int k = 0; k < f.nc.n_g(); ++k) {
        int const b = f.nc.generators()[k];
        expect += f.inst.cost_c[k] * f.inst.p_load[b] * f.inst.p_load[b] + f.inst.cost_d[k] * f.inst.q_load[b] * f.inst.q_load[b];
    }
    EXPECT_DOUBLE_EQ(objective_cost(s, f.inst, f.m), expect);
    for (double& v : f.inst.cost_c) v = 0.0;
    for (double& v : f.inst.cost_d) v = 0.0;
    SplitMix rng(1);
    EXPECT_EQ(objective_cost(oracle::random_state(f.m, f.inst, rng), f.inst, f.m), 0.0);
}

TEST(CoordinatePolynomial, MatchesFivePointInterpolation) {
    SplitMix rng(31);
    for (auto const& c : {synthetic_case2(), synthetic_case4(), synthetic_case37()}) {
        Fixture f(c);
        auto const freec = f.m.layout->free_coordinates();
        for (int trial = 0; trial < 100; ++trial) {
            auto const s = oracle::random_state(f.m, f.inst, rng);
            double const mu = rng.uniform(0.5, 20.0);
            int const flat = freec[static_cast<std::size_t>(rng.below(static_cast<int>(freec.size())))];
            auto const p = coordinate_polynomial(s, f.inst, f.m, mu, flat);
            std::array<double, 5> vals{};
            for (int k = 0; k < 5; ++k) {
                auto sa = s;
                sa[flat] += k - 2.0;
                vals[static_cast<std::size_t>(k)] = oracle::lagrangian(c, sa, f.inst, mu);
            }
            auto const ref = interpolate5(vals);
            double scale = 0.0;
            for (double v : ref) scale = std::max(scale, std::abs(v));
            for (std::size_t k = 0; k < 5; ++k) EXPECT_LE(std::abs(p.c[k] - ref[k]), 1e-9 * scale) << "coef " << k;
        }
    }
}

TEST(CoordinatePolynomial, DegreeBounds) {
    Fixture f(synthetic_case37());
    SplitMix rng(4);
    auto const s = oracle::random_state(f.m, f.inst, rng);
    for (int flat : f.m.layout->free_coordinates()) {
        auto const p = local_polynomial(s, f.inst, f.m, 10.0, flat);
        auto const g = f.m.layout->locate(flat).group;
        if (g == Group::h || g == Group::z) {
            EXPECT_LE(p.degree(), 2);
        } else {
            EXPECT_EQ(p.degree(), 4);
        }
    }
}

TEST(CoordinatePolynomial, HCoordinateExample) {
    Fixture f(synthetic_case4());
    StateVector s = initial_state(f.m, f.inst);
    auto const& L = *f.m.layout;
    int const bus = 2;
    s[L.index(Group::x, bus)] = 1.0;
    s[L.index(Group::x, bus + f.nc.n())] = 0.0;
    s[L.index(Group::h, bus)] = 0.7;
    s[L.index(Group::lam_h, bus)] = 0.0;
    int const flat = L.index(Group::h, bus);
    auto const p = local_polynomial(s, f.inst, f.m, 2.0, flat);
    EXPECT_EQ(p.degree(), 2);
    double const amin = -p.c[1] / (2.0 * p.c[2]);
    EXPECT_DOUBLE_EQ(s[flat] + amin, 1.0);
    // lam - mu (m - h)
    EXPECT_DOUBLE_EQ(coordinate_gradient(s, f.inst, f.m, 2.0, flat), 0.0 - 2.0 * (1.0 - 0.7));
    s[L.index(Group::lam_h, bus)] = 0.4;
    EXPECT_DOUBLE_EQ(coordinate_gradient(s, f.inst, f.m, 2.0, flat), 0.4 - 2.0 * (1.0 - 0.7));
}

TEST(CoordinatePolynomial, DecoupledCoordinateIsConstant) {
    // Zero the only line so bus 1 touches nothing but its own selector; with
    // mu = 0 and zero multipliers that term drops out as well.
    auto c = synthetic_case2();
    c.lines[0].series = {0.0, 0.0};
    c.lines[0].shunt = {0.0, 0.0};
    auto const m = LiftedModel::from_case(c);
    auto const inst = instance_from_case(c);
    StateVector s(m.layout);
    apply_pins(s, m, inst);
    auto const p = local_polynomial(s, inst, m, 0.0, m.layout->index(Group::x, 1));
    EXPECT_EQ(p.degree(), 0);
}

TEST(CoordinatePolynomial, PinnedCoordinateRejected) {
    Fixture f(synthetic_case4());
    StateVector s = initial_state(f.m, f.inst);
    auto const& L = *f.m.layout;
    EXPECT_THROW((void)coordinate_polynomial(s, f.inst, f.m, 1.0, L.index(Group::x, f.nc.slack_bus)), std::invalid_argument);
    EXPECT_THROW((void)coordinate_polynomial(s, f.inst, f.m, 1.0, L.index(Group::lam_t, 0)), std::invalid_argument);
    EXPECT_THROW((void)coordinate_gradient(s, f.inst, f.m, 1.0, L.index(Group::t, 2)), std::invalid_argument);
}

TEST(CoordinateGradient, MatchesFiniteDifference) {
    SplitMix rng(55);
    Fixture f(synthetic_case4());
    auto const freec = f.m.layout->free_coordinates();
    for (int trial = 0; trial < 300; ++trial) {
        auto const s = oracle::random_state(f.m, f.inst, rng);
        int const flat = freec[static_cast<std::size_t>(rng.below(static_cast<int>(freec.size())))];
        double const mu = 10.0;
        double const h = 1e-6 * std::max(1.0, std::abs(s[flat]));
        auto sp = s, sm = s;
        sp[flat] += h;
        sm[flat] -= h;
        double const fd = (oracle::lagrangian(f.nc, sp, f.inst, mu) - oracle::lagrangian(f.nc, sm, f.inst, mu)) / (2 * h);
        double const g = coordinate_gradient(s, f.inst, f.m, mu, flat);
        EXPECT_LE(std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1.0}), 1e-5);
        EXPECT_EQ(g, coordinate_polynomial(s, f.inst, f.m, mu, flat).derivative(0.0));
    }
}

TEST(Infeasibility, RecomposesAndBoundsTPrime) {
    SplitMix rng(8);
    Fixture f(synthetic_case37());
    for (int trial = 0; trial < 50; ++trial) {
        auto const s = oracle::random_state(f.m, f.inst, rng);
        auto const r = residuals(s, f.inst, f.m);
        double T = 0.0;
        for (auto const* v : {&r.t, &r.g, &r.h, &r.z}) {
            for (double x : *v) T += x * x;
        }
        auto const inf = infeasibility(s, f.inst, f.m);
        EXPECT_LE(rel(inf.T, T), 1e-12);
        EXPECT_LE(inf.T_prime, inf.T);
    }
}

TEST(Infeasibility, OmegaTermsShiftResiduals) {
    Fixture f(synthetic_case2());
    SplitMix rng(2);
    auto const s = oracle::random_state(f.m, f.inst, rng);
    OmegaTerms w;
    w.omega.assign(2, std::vector<double>(4, 0.0));
    w.omega_bar.assign(2, std::vector<double>(4, 0.0));
    w.omega[1][0] = 0.5;
    auto const r = residuals(s, f.inst, f.m);
    auto const base = infeasibility(s, f.inst, f.m);
    auto const shifted = infeasibility(s, f.inst, f.m, w);
    double const delta = 0.5 * s.x()[0];
    EXPECT_NEAR(shifted.T - base.T, (r.t[1] + delta) * (r.t[1] + delta) - r.t[1] * r.t[1], 1e-12);
}

TEST(ProxPl, Examples) {
    Fixture f(synthetic_case4());
    auto const box = build_box(f.m, f.inst);
    SplitMix rng(6);
    auto const s = oracle::random_state(f.m, f.inst, rng);
    EXPECT_THROW((void)prox_pl_quantity(s, f.inst, f.m, 1.0, 0.0, box), std::invalid_argument);
    // With no bounds at all the quantity is |grad|^2 for every alpha.
    BoxSet open{std::vector<double>(box.lo.size(), -kInf), std::vector<double>(box.hi.size(), kInf)};
    double g2 = 0.0;
    for (int flat : f.m.layout->free_coordinates()) g2 += std::pow(coordinate_gradient(s, f.inst, f.m, 1.0, flat), 2);
    for (double a : {0.1, 1.0, 30.0}) EXPECT_LE(rel(prox_pl_quantity(s, f.inst, f.m, 1.0, a, open), g2), 1e-12);
}

TEST(ProxPl, MatchesGridOnSeparableSubproblem) {
    Fixture f(synthetic_case4());
    auto const box = build_box(f.m, f.inst);
    SplitMix rng(60);
    for (int trial = 0; trial < 5; ++trial) {
        auto s = oracle::random_state(f.m, f.inst, rng);
        // Put the state inside the box, several coordinates on a bound.
        for (int flat : f.m.layout->free_coordinates()) {
            auto const iv = box.interval(flat);
            s[flat] = iv.clamp(s[flat]);
            if (std::isfinite(iv.hi) && rng.unit() < 0.5) s[flat] = iv.hi;
        }
        double const alpha = rng.uniform(0.5, 5.0);
        double const mu = 5.0;
        double inner = 0.0;
        for (int flat : f.m.layout->free_coordinates()) {
            double const g = coordinate_gradient(s, f.inst, f.m, mu, flat);
            auto const iv = box.interval(flat);
            // 1-D grid over the step, wide enough to contain the unconstrained minimizer.
            double const reach = std::abs(g) / alpha + 1.0;
            double const lo = std::max(iv.lo - s[flat], -reach), hi = std::min(iv.hi - s[flat], reach);
            double best = 0.0;
            int const N = 200001;
            for (int k = 0; k < N; ++k) {
                double const d = lo + (hi - lo) * k / (N - 1);
                best = std::min(best, g * d + 0.5 * alpha * d * d);
            }
            inner += best;
        }
        double const ref = -2.0 * alpha * inner;
        double const got = prox_pl_quantity(s, f.inst, f.m, mu, alpha, box);
        EXPECT_GE(got, 0.0);
        EXPECT_NEAR(got, ref, 1e-6 * std::max(1.0, ref));
    }
}

TEST(Box, BoundsAndPins) {
    Fixture f(synthetic_case4());
    auto const box = build_box(f.m, f.inst);
    auto const& L = *f.m.layout;
    auto const gens = f.nc.generators();
    for (std::size_t k = 0; k < gens.size(); ++k) {
        int const b = gens[k];
        auto const iv = box.interval(L.index(Group::t, b));
        EXPECT_EQ(iv.lo, -f.inst.p_load[b]);
        EXPECT_EQ(iv.hi, f.inst.p_available[k] - f.inst.p_load[b]);
        EXPECT_EQ(box.interval(L.index(Group::z, static_cast<int>(k))).hi, f.nc.buses[b].s_rating * f.nc.buses[b].s_rating);
    }
    for (int i = 0; i < f.nc.n(); ++i) {
        auto const iv = box.interval(L.index(Group::h, i));
        EXPECT_DOUBLE_EQ(iv.lo, 0.95 * 0.95);
        EXPECT_DOUBLE_EQ(iv.hi, 1.05 * 1.05);
    }
    auto const s = initial_state(f.m, f.inst);
    EXPECT_TRUE(box.contains(s));
    EXPECT_EQ(s.x()[f.nc.slack_bus], 1.0);
}

TEST(VoltageViolation, Examples) {
    Fixture f(synthetic_case2());
    StateVector s(f.m.layout);
    s.x()[0] = 1.0;
    s.x()[1] = 0.9;
    EXPECT_NEAR(max_voltage_violation(s, f.m), 0.05, 1e-15);
    s.x()[1] = 0.6;
    s.x()[3] = 0.8;
    EXPECT_NEAR(max_voltage_violation(s, f.m), 0.0, 1e-15);
}
