#pragma once

// Sparse 2n x 2n quadratic forms over the real voltage vector
// x = [Re V; Im V]:
//
//   tr(Y_i x x^T)    = active power injected at bus i
//   tr(Ybar_i x x^T) = reactive power injected at bus i
//   tr(M_i x x^T)    = |V_i|^2
//
// Every nonzero of Y_i and Ybar_i has one index in {i, n+i}, so entries are
// stored once (symmetric) and grouped by that index. Evaluation then costs one
// multiply-add per stored entry plus one multiply per group, which keeps a
// Y-trace within 8p operations for a bus with p admittance nonzeros.

#include <algorithm>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "opftrack/case_model.hpp"
#include "opftrack/flop_model.hpp"

namespace opftrack {

enum class FormKind { y, ybar, m };

struct QuadEntry {
    int row = 0;
    int col = 0;
    double value = 0.0;  // A[row][col] == A[col][row]
};

/// Restriction of a quadratic form to the line x + alpha e_j:
/// q2 alpha^2 + q1 alpha + q0.
struct Quadratic {
    double q2 = 0.0;
    double q1 = 0.0;
    double q0 = 0.0;

    [[nodiscard]] constexpr double operator()(double a) const { return (q2 * a + q1) * a + q0; }
};

class SparseQuadForm {
  public:
    SparseQuadForm() = default;

    /// Builds the form from entries whose row lies in {owner, owner + n}.
    SparseQuadForm(int n, int owner, FormKind kind, std::vector<QuadEntry> entries)
        : n_(n), owner_(owner), kind_(kind), entries_(std::move(entries)) {
        for (auto const& e : entries_) {
            if (e.row != owner_ && e.row != owner_ + n_) {
                throw std::invalid_argument("quadratic form entry row must be the owner's real or imaginary index");
            }
        }
        std::stable_partition(entries_.begin(), entries_.end(), [&](QuadEntry const& e) { return e.row == owner_; });
        split_ = static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                        [&](QuadEntry const& e) { return e.row == owner_; }));
        weights_.reserve(entries_.size());
        for (auto const& e : entries_) weights_.push_back(e.row == e.col ? e.value : 2.0 * e.value);
    }

    static SparseQuadForm selector(int n, int owner) {
        return {n, owner, FormKind::m, {{owner, owner, 1.0}, {owner + n, owner + n, 1.0}}};
    }

    [[nodiscard]] int dimension() const { return 2 * n_; }
    [[nodiscard]] int owner() const { return owner_; }
    [[nodiscard]] FormKind kind() const { return kind_; }
    [[nodiscard]] std::span<QuadEntry const> entries() const { return entries_; }

    /// Nonzeros of the full symmetric matrix (off-diagonals counted twice).
    [[nodiscard]] int full_nonzeros() const {
        int count = 0;
        for (auto const& e : entries_) count += e.row == e.col ? 1 : 2;
        return count;
    }

    [[nodiscard]] double dense(int r, int c) const {
        double v = 0.0;
        for (auto const& e : entries_) {
            if ((e.row == r && e.col == c) || (e.row == c && e.col == r)) v += e.value;
        }
        return v;
    }

    /// x^T A x.
    template <OpCounter Counter = NullCounter>
    [[nodiscard]] double eval(std::span<double const> x, Counter&& ctr = {}) const {
        check_dim(x);
        if (kind_ == FormKind::m) {
            double const re = x[static_cast<std::size_t>(owner_)];
            double const im = x[static_cast<std::size_t>(owner_ + n_)];
            ctr.add(FlopCategory::trace, 3);
            return re * re + im * im;
        }
        double total = 0.0;
        std::int64_t ops = 0;
        int groups = 0;
        auto group = [&](std::size_t begin, std::size_t end, int row) {
            if (begin == end) return;
            double acc = weights_[begin] * x[static_cast<std::size_t>(entries_[begin].col)];
            for (std::size_t k = begin + 1; k < end; ++k) {
                acc += weights_[k] * x[static_cast<std::size_t>(entries_[k].col)];
            }
            ops += 2 * static_cast<std::int64_t>(end - begin) - 1 + 1;
            total += x[static_cast<std::size_t>(row)] * acc;
            ++groups;
        };
        group(0, split_, owner_);
        group(split_, entries_.size(), owner_ + n_);
        if (groups > 1) ops += groups - 1;
        ctr.add(FlopCategory::trace, ops);
        return total;
    }

    /// Coefficients of alpha -> tr(A (x + alpha e_j)(x + alpha e_j)^T).
    template <OpCounter Counter = NullCounter>
    [[nodiscard]] Quadratic restrict(std::span<double const> x, int j, Counter&& ctr = {}) const {
        check_dim(x);
        if (j < 0 || j >= 2 * n_) throw std::out_of_range("coordinate outside the voltage vector");
        Quadratic q;
        q.q0 = eval(x, ctr);
        if (kind_ == FormKind::m) {
            if (j == owner_ || j == owner_ + n_) {
                q.q2 = 1.0;
                q.q1 = 2.0 * x[static_cast<std::size_t>(j)];
                ctr.add(FlopCategory::trace, 1);
            }
            return q;
        }
        std::int64_t ops = 0;
        bool first = true;
        auto accumulate = [&](double term) {
            q.q1 = first ? term : q.q1 + term;
            ops += first ? 1 : 2;
            first = false;
        };
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            auto const& e = entries_[k];
            double const w = weights_[k];
            if (e.row == j && e.col == j) {
                q.q2 = e.value;
                accumulate(2.0 * w * x[static_cast<std::size_t>(j)]);
                ++ops;
            } else if (e.row == j) {
                accumulate(w * x[static_cast<std::size_t>(e.col)]);
            } else if (e.col == j) {
                accumulate(w * x[static_cast<std::size_t>(e.row)]);
            }
        }
        ctr.add(FlopCategory::trace, ops);
        return q;
    }

  private:
    void check_dim(std::span<double const> x) const {
        if (static_cast<int>(x.size()) != 2 * n_) {
            throw std::invalid_argument("voltage vector has length " + std::to_string(x.size()) + ", expected " +
                                        std::to_string(2 * n_));
        }
    }

    int n_ = 0;
    int owner_ = 0;
    FormKind kind_ = FormKind::m;
    std::vector<QuadEntry> entries_;
    std::vector<double> weights_;
    std::size_t split_ = 0;
};

/// Free-function spelling of SparseQuadForm::eval.
template <OpCounter Counter = NullCounter>
double eval_quad_form(SparseQuadForm const& op, std::span<double const> x, Counter&& ctr = {}) {
    return op.eval(x, ctr);
}

template <OpCounter Counter = NullCounter>
Quadratic eval_quad_form_partial(SparseQuadForm const& op, std::span<double const> x, int j, Counter&& ctr = {}) {
    return op.restrict(x, j, ctr);
}

namespace detail {

inline void push_nonzero(std::vector<QuadEntry>& out, int r, int c, double v) {
    if (v != 0.0) out.push_back({r, c, v});
}

}  // namespace detail

/// Y_i = 1/2 [Re(y_i + y_i^T), Im(y_i^T - y_i); Im(y_i - y_i^T), Re(y_i + y_i^T)]
/// with y_i = e_i e_i^T y.
inline SparseQuadForm build_active_form(AdmittanceMatrix const& y, int i) {
    int const n = y.dimension();
    std::vector<QuadEntry> entries;
    for (auto const& [k, v] : y.row(i)) {
        if (k == i) {
            detail::push_nonzero(entries, i, i, v.real());
            detail::push_nonzero(entries, n + i, n + i, v.real());
        } else {
            detail::push_nonzero(entries, i, k, 0.5 * v.real());
            detail::push_nonzero(entries, n + i, n + k, 0.5 * v.real());
            detail::push_nonzero(entries, i, n + k, -0.5 * v.imag());
            detail::push_nonzero(entries, n + i, k, 0.5 * v.imag());
        }
    }
    return {n, i, FormKind::y, std::move(entries)};
}

/// Ybar_i = -1/2 [Im(y_i + y_i^T), Re(y_i - y_i^T); Re(y_i^T - y_i), Im(y_i + y_i^T)].
inline SparseQuadForm build_reactive_form(AdmittanceMatrix const& y, int i) {
    int const n = y.dimension();
    std::vector<QuadEntry> entries;
    for (auto const& [k, v] : y.row(i)) {
        if (k == i) {
            detail::push_nonzero(entries, i, i, -v.imag());
            detail::push_nonzero(entries, n + i, n + i, -v.imag());
        } else {
            detail::push_nonzero(entries, i, k, -0.5 * v.imag());
            detail::push_nonzero(entries, n + i, n + k, -0.5 * v.imag());
            detail::push_nonzero(entries, i, n + k, -0.5 * v.real());
            detail::push_nonzero(entries, n + i, k, 0.5 * v.real());
        }
    }
    return {n, i, FormKind::ybar, std::move(entries)};
}

/// All Y_i, Ybar_i, M_i of a network plus, for every voltage coordinate, the
/// buses whose Y/Ybar forms involve it.
class LiftedOperators {
  public:
    LiftedOperators() = default;

    explicit LiftedOperators(AdmittanceMatrix const& y) : n_(y.dimension()), p_(y.max_row_nonzeros()) {
        active_.reserve(static_cast<std::size_t>(n_));
        reactive_.reserve(static_cast<std::size_t>(n_));
        selector_.reserve(static_cast<std::size_t>(n_));
        touching_.assign(static_cast<std::size_t>(2 * n_), {});
        for (int i = 0; i < n_; ++i) {
            active_.push_back(build_active_form(y, i));
            reactive_.push_back(build_reactive_form(y, i));
            selector_.push_back(SparseQuadForm::selector(n_, i));
        }
        for (int i = 0; i < n_; ++i) {
            for (auto const* form : {&active_[i], &reactive_[i]}) {
                for (auto const& e : form->entries()) {
                    for (int idx : {e.row, e.col}) {
                        auto& list = touching_[static_cast<std::size_t>(idx)];
                        if (list.empty() || list.back() != i) list.push_back(i);
                    }
                }
            }
        }
        for (auto& list : touching_) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int p() const { return p_; }
    [[nodiscard]] SparseQuadForm const& active(int i) const { return active_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] SparseQuadForm const& reactive(int i) const { return reactive_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] SparseQuadForm const& selector(int i) const { return selector_[static_cast<std::size_t>(i)]; }

    /// Buses i whose Y_i or Ybar_i has a nonzero in row/column j.
    [[nodiscard]] std::span<int const> touching(int j) const { return touching_[static_cast<std::size_t>(j)]; }

  private:
    int n_ = 0;
    int p_ = 0;
    std::vector<SparseQuadForm> active_;
    std::vector<SparseQuadForm> reactive_;
    std::vector<SparseQuadForm> selector_;
    std::vector<std::vector<int>> touching_;
};

/// Polar to rectangular: x = [Re V; Im V].
inline std::vector<double> voltage_vector(std::span<Complex const> v) {
    std::vector<double> x(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        x[i] = v[i].real();
        x[i + v.size()] = v[i].imag();
    }
    return x;
}

}  // namespace opftrack
