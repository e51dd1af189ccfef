#pragma once

// Dense reference implementations used only by the tests. They work from the
// complex network data directly and share no code with the sparse paths.

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <fstream>
#include <sstream>
#include <vector>

#include "opftrack/opftrack.hpp"

namespace oracle {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline std::string read_data(std::string const& name) {
    std::ifstream in(std::string(OPFTRACK_TEST_DATA) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Element-by-element stamp of the bus admittance matrix.
inline CMat dense_admittance(opftrack::NetworkCase const& c) {
    CMat y = CMat::Zero(c.n(), c.n());
    for (auto const& l : c.lines) {
        y(l.from, l.from) += l.series + l.shunt;
        y(l.to, l.to) += l.series + l.shunt;
        y(l.from, l.to) -= l.series;
        y(l.to, l.from) -= l.series;
    }
    return y;
}

/// Y_i and Ybar_i built from y_i = e_i e_i^T y.
inline RMat dense_active(CMat const& y, int i) {
    int const n = static_cast<int>(y.rows());
    CMat yi = CMat::Zero(n, n);
    yi.row(i) = y.row(i);
    CMat const yt = yi.transpose();
    RMat out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = (yi + yt).real();
    out.topRightCorner(n, n) = (yt - yi).imag();
    out.bottomLeftCorner(n, n) = (yi - yt).imag();
    out.bottomRightCorner(n, n) = (yi + yt).real();
    return 0.5 * out;
}

inline RMat dense_reactive(CMat const& y, int i) {
    int const n = static_cast<int>(y.rows());
    CMat yi = CMat::Zero(n, n);
    yi.row(i) = y.row(i);
    CMat const yt = yi.transpose();
    RMat out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = (yi + yt).imag();
    out.topRightCorner(n, n) = (yi - yt).real();
    out.bottomLeftCorner(n, n) = (yt - yi).real();
    out.bottomRightCorner(n, n) = (yi + yt).imag();
    return -0.5 * out;
}

inline RVec to_eigen(std::span<double const> x) {
    RVec v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) v[static_cast<Eigen::Index>(k)] = x[k];
    return v;
}

/// Complex power injected at every bus: S = V conj(y V).
inline std::vector<cd> injections(CMat const& y, std::span<double const> x) {
    auto const n = y.rows();
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cd(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i + n)]);
    Eigen::VectorXcd const cur = y * v;
    std::vector<cd> s(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = v[i] * std::conj(cur[i]);
    return s;
}

struct DenseResiduals {
    std::vector<double> t, g, h, z;
};

/// Residuals from the physical injections.
inline DenseResiduals residuals(opftrack::NetworkCase const& c, opftrack::StateVector const& s,
                                opftrack::Instance const& inst) {
    using opftrack::Group;
    auto const y = dense_admittance(c);
    auto const x = s.x();
    auto const sinj = injections(y, x);
    auto const gens = c.generators();
    auto const n = static_cast<std::size_t>(c.n());
    DenseResiduals r;
    for (std::size_t i = 0; i < n; ++i) {
        r.t.push_back(sinj[i].real() - s.group(Group::t)[i]);
        r.g.push_back(sinj[i].imag() - s.group(Group::g)[i]);
        r.h.push_back(x[i] * x[i] + x[i + n] * x[i + n] - s.group(Group::h)[i]);
    }
    for (std::size_t k = 0; k < gens.size(); ++k) {
        auto const b = static_cast<std::size_t>(gens[k]);
        double const p = s.group(Group::t)[b] + inst.p_load[b];
        double const q = s.group(Group::g)[b] + inst.q_load[b];
        r.z.push_back(p * p + q * q - s.group(Group::z)[k]);
    }
    return r;
}

inline double objective(opftrack::NetworkCase const& c, opftrack::StateVector const& s,
                        opftrack::Instance const& inst) {
    auto const y = dense_admittance(c);
    auto const sinj = injections(y, s.x());
    auto const gens = c.generators();
    double f = 0.0;
    for (std::size_t k = 0; k < gens.size(); ++k) {
        auto const b = static_cast<std::size_t>(gens[k]);
        double const p = inst.p_load[b] + sinj[b].real();
        double const q = inst.q_load[b] + sinj[b].imag();
        f += inst.cost_c[k] * p * p + inst.cost_d[k] * q * q;
    }
    return f;
}

/// Augmented Lagrangian summed term by term.
inline double lagrangian(opftrack::NetworkCase const& c, opftrack::StateVector const& s,
                         opftrack::Instance const& inst, double mu) {
    using opftrack::Group;
    auto const r = residuals(c, s, inst);
    double L = objective(c, s, inst);
    auto add = [&](std::vector<double> const& res, Group lam) {
        auto const l = s.group(lam);
        for (std::size_t i = 0; i < res.size(); ++i) L += -l[i] * res[i] + 0.5 * mu * res[i] * res[i];
    };
    add(r.t, Group::lam_t);
    add(r.g, Group::lam_g);
    add(r.h, Group::lam_h);
    add(r.z, Group::lam_z);
    return L;
}

/// Random state: voltages near 1, everything else uniform in [-1, 1] unless
/// pinned; pins applied.
inline opftrack::StateVector random_state(opftrack::LiftedModel const& m, opftrack::Instance const& inst,
                                          opftrack::SplitMix& rng) {
    using opftrack::Group;
    auto s = opftrack::initial_state(m, inst);
    auto const n = static_cast<std::size_t>(m.n());
    auto x = s.group(Group::x);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(0.9, 1.1);
        x[i + n] = rng.uniform(-0.1, 0.1);
    }
    for (Group g : {Group::t, Group::g, Group::h, Group::z, Group::lam_t, Group::lam_g, Group::lam_h, Group::lam_z}) {
        for (double& v : s.group(g)) v = rng.uniform(-1.0, 1.0);
    }
    opftrack::apply_pins(s, m, inst);
    return s;
}

}  // namespace oracle
