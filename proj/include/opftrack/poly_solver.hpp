#pragma once

// Closed-form minimization of univariate polynomials of degree <= 4 over an
// interval. The stationary points of a quartic are the real roots of a cubic,
// which are computed with Cardano's formula (one real root) or the
// trigonometric form (three real roots) and then polished with Newton steps.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "opftrack/flop_model.hpp"

namespace opftrack {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// c[k] multiplies alpha^k.
struct PolyCoeffs {
    std::array<double, 5> c{};

    [[nodiscard]] constexpr double operator()(double a) const {
        return (((c[4] * a + c[3]) * a + c[2]) * a + c[1]) * a + c[0];
    }
    [[nodiscard]] constexpr double derivative(double a) const {
        return ((4.0 * c[4] * a + 3.0 * c[3]) * a + 2.0 * c[2]) * a + c[1];
    }
    [[nodiscard]] constexpr double second_derivative(double a) const {
        return (12.0 * c[4] * a + 6.0 * c[3]) * a + 2.0 * c[2];
    }
    [[nodiscard]] constexpr int degree() const {
        for (int k = 4; k > 0; --k) {
            if (c[static_cast<std::size_t>(k)] != 0.0) return k;
        }
        return 0;
    }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::abs(v));
        return m;
    }

    constexpr PolyCoeffs& operator+=(PolyCoeffs const& o) {
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.c[k];
        return *this;
    }
    friend constexpr bool operator==(PolyCoeffs const&, PolyCoeffs const&) = default;
};

struct Interval {
    double lo = -kInf;
    double hi = kInf;

    [[nodiscard]] constexpr bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    [[nodiscard]] constexpr bool contains(double a) const { return a >= lo && a <= hi; }
    [[nodiscard]] constexpr double clamp(double a) const { return std::min(std::max(a, lo), hi); }

    static constexpr Interval real_line() { return {}; }
};

class DegeneratePolynomial : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

namespace detail {

inline double cubic_value(double c3, double c2, double c1, double c0, double a) {
    return ((c3 * a + c2) * a + c1) * a + c0;
}

inline double polish_cubic_root(double c3, double c2, double c1, double c0, double r) {
    for (int it = 0; it < 3; ++it) {
        double const f = cubic_value(c3, c2, c1, c0, r);
        double const df = (3.0 * c3 * r + 2.0 * c2) * r + c1;
        if (f == 0.0 || df == 0.0 || !std::isfinite(df)) break;
        double const next = r - f / df;
        if (!(std::abs(cubic_value(c3, c2, c1, c0, next)) < std::abs(f))) break;
        r = next;
    }
    return r;
}

inline void quadratic_real_roots(double a, double b, double c, std::vector<double>& out) {
    if (a == 0.0) {
        if (b != 0.0) out.push_back(-c / b);
        return;
    }
    double const disc = b * b - 4.0 * a * c;
    if (disc < 0.0) {
        // Tangent or nearly so: keep the vertex when it is a numerical double root.
        if (disc > -1e-14 * b * b) out.push_back(-b / (2.0 * a));
        return;
    }
    if (disc == 0.0) {
        out.push_back(-b / (2.0 * a));
        return;
    }
    double const q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    out.push_back(q / a);
    if (q != 0.0) out.push_back(c / q);
    else out.push_back(0.0);
}

}  // namespace detail

/// All real roots of c3 a^3 + c2 a^2 + c1 a + c0, sorted ascending, without
/// duplicates. Falls back to the quadratic or linear formula when the leading
/// coefficients vanish.
template <OpCounter Counter = NullCounter>
std::vector<double> cubic_real_roots(double c3, double c2, double c1, double c0, Counter&& ctr = {}) {
    if (c3 == 0.0 && c2 == 0.0 && c1 == 0.0) {
        throw DegeneratePolynomial("cubic_real_roots: constant polynomial has no isolated roots");
    }
    std::vector<double> roots;
    if (c3 == 0.0) {
        detail::quadratic_real_roots(c2, c1, c0, roots);
        ctr.add(FlopCategory::solve, 10);
    } else {
        double const a = c2 / c3;
        double const b = c1 / c3;
        double const c = c0 / c3;
        double const shift = a / 3.0;
        double const p = b - a * a / 3.0;
        double const q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        double const half_q = 0.5 * q;
        double const third_p = p / 3.0;
        double const disc = half_q * half_q + third_p * third_p * third_p;
        double const scale = half_q * half_q + std::abs(third_p * third_p * third_p);
        // Dead zone around the discriminant sign change is treated as a
        // repeated root.
        if (scale == 0.0 || std::abs(disc) <= 1e-14 * scale) {
            if (p == 0.0) {
                roots.push_back(-shift);
            } else {
                roots.push_back(3.0 * q / p - shift);
                roots.push_back(-1.5 * q / p - shift);
            }
        } else if (disc > 0.0) {
            double const u = std::cbrt(-half_q - std::copysign(std::sqrt(disc), half_q));
            double const y = u == 0.0 ? 0.0 : u - third_p / u;
            roots.push_back(y - shift);
        } else {
            double const r = std::sqrt(-third_p);
            double const cos_arg = std::clamp(-half_q / (r * r * r), -1.0, 1.0);
            double const phi = std::acos(cos_arg) / 3.0;
            for (int k = 0; k < 3; ++k) {
                roots.push_back(2.0 * r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) - shift);
            }
        }
        ctr.add(FlopCategory::solve, 7);
    }
    for (double& r : roots) r = detail::polish_cubic_root(c3, c2, c1, c0, r);
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    ctr.add_roots(static_cast<std::int64_t>(roots.size()));
    return roots;
}

enum class MinimizeStatus { ok, unbounded_below };

struct Minimum {
    MinimizeStatus status = MinimizeStatus::ok;
    double argmin = 0.0;
    double value = 0.0;

    [[nodiscard]] bool ok() const { return status == MinimizeStatus::ok; }
};

namespace detail {

/// Picks the smallest value among candidates; near-ties go to the candidate
/// closest to zero.
template <class F>
Minimum best_candidate(std::vector<double> const& candidates, F&& f) {
    Minimum best{MinimizeStatus::ok, 0.0, kInf};
    bool have = false;
    for (double a : candidates) {
        double const v = f(a);
        if (!have) {
            best = {MinimizeStatus::ok, a, v};
            have = true;
            continue;
        }
        double const tol = 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(v), std::abs(best.value));
        if (v < best.value - tol || (std::abs(v - best.value) <= tol && std::abs(a) < std::abs(best.argmin))) {
            best = {MinimizeStatus::ok, a, v};
        }
    }
    return best;
}

inline double closest_to_zero(Interval const& iv) { return iv.clamp(0.0); }

}  // namespace detail

/// Minimizes q2 a^2 + q1 a + q0 over iv.
template <OpCounter Counter = NullCounter>
Minimum minimize_quadratic_clamped(double q2, double q1, double q0, Interval const& iv, Counter&& ctr = {}) {
    auto f = [&](double a) { return (q2 * a + q1) * a + q0; };
    if (q2 > 0.0) {
        double const a = iv.clamp(-q1 / (2.0 * q2));
        ctr.add(FlopCategory::solve, 2);
        return {MinimizeStatus::ok, a, f(a)};
    }
    if (q2 == 0.0 && q1 == 0.0) {
        double const a = detail::closest_to_zero(iv);
        return {MinimizeStatus::ok, a, q0};
    }
    // Concave or linear: the minimum sits on an endpoint.
    bool const need_lo = q2 < 0.0 || q1 > 0.0;
    bool const need_hi = q2 < 0.0 || q1 < 0.0;
    if ((need_lo && !std::isfinite(iv.lo)) || (need_hi && !std::isfinite(iv.hi))) {
        return {MinimizeStatus::unbounded_below, 0.0, -kInf};
    }
    std::vector<double> cands;
    if (need_lo) cands.push_back(iv.lo);
    if (need_hi) cands.push_back(iv.hi);
    ctr.add(FlopCategory::solve, 4 * static_cast<std::int64_t>(cands.size()));
    return detail::best_candidate(cands, f);
}

/// Minimizes the polynomial over iv by enumerating the real stationary points
/// inside iv and its finite endpoints.
template <OpCounter Counter = NullCounter>
Minimum minimize_quartic(PolyCoeffs const& p, Interval const& iv, Counter&& ctr = {}) {
    if (iv.lo > iv.hi) throw std::invalid_argument("minimize_quartic: empty interval");
    auto const& c = p.c;
    if (c[4] == 0.0 && c[3] == 0.0) return minimize_quadratic_clamped(c[2], c[1], c[0], iv, ctr);

    // Leading odd degree or negative quartic term: unbounded unless the
    // interval closes off the escaping direction(s).
    if (c[4] < 0.0 && !iv.bounded()) return {MinimizeStatus::unbounded_below, 0.0, -kInf};
    if (c[4] == 0.0) {
        bool const escapes_low = c[3] > 0.0;
        if ((escapes_low && !std::isfinite(iv.lo)) || (!escapes_low && !std::isfinite(iv.hi))) {
            return {MinimizeStatus::unbounded_below, 0.0, -kInf};
        }
    }

    std::vector<double> cands;
    if (std::isfinite(iv.lo)) cands.push_back(iv.lo);
    if (std::isfinite(iv.hi)) cands.push_back(iv.hi);
    auto const roots = cubic_real_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1], ctr);
    for (double r : roots) {
        if (iv.contains(r)) cands.push_back(r);
    }
    if (cands.empty()) {
        // Only possible when no stationary point falls inside an unbounded
        // interval, which cannot happen for c4 > 0; keep a defined answer.
        cands.push_back(detail::closest_to_zero(iv));
    }
    ctr.add(FlopCategory::solve, 8 * static_cast<std::int64_t>(cands.size()));
    return detail::best_candidate(cands, p);
}

}  // namespace opftrack
