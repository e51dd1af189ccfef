#pragma once

// Worst-case operation counts for one coordinate update and one epoch of the
// lifted-ACOPF coordinate descent, plus the instrumented counters the solver
// kernels report into.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace opftrack {

/// Flops charged for one cubic root in the real-number (BSS) model.
inline constexpr std::int64_t kBssFlopsPerRoot = 31;

struct FlopCount {
    std::int64_t flops = 0;
    std::int64_t root_evals = 0;
    std::int64_t bss_flops = 0;  // flops + kBssFlopsPerRoot * root_evals

    static constexpr FlopCount make(std::int64_t flops, std::int64_t root_evals) {
        return {flops, root_evals, flops + kBssFlopsPerRoot * root_evals};
    }

    constexpr FlopCount& operator+=(FlopCount const& other) {
        flops += other.flops;
        root_evals += other.root_evals;
        bss_flops += other.bss_flops;
        return *this;
    }
    friend constexpr FlopCount operator+(FlopCount a, FlopCount const& b) { return a += b; }
    friend constexpr bool operator==(FlopCount const&, FlopCount const&) = default;
};

enum class CoordinateCostModel { raw, bss };

struct FlopModelArgs {
    std::int64_t n = 1;    // buses
    std::int64_t n_g = 0;  // generators
    std::int64_t p = 1;    // max nonzeros in a row of the admittance matrix
};

inline void check_flop_args(FlopModelArgs const& a) {
    if (a.n < 1 || a.n_g < 0 || a.n_g > a.n || a.p < 1) {
        throw std::domain_error("flop model requires n >= 1, 0 <= n_g <= n, p >= 1");
    }
}

/// (32p+102) n^2 + (32p+116) n_g n - 2n + (16p+92) n_g flops and 6(n+n_g)
/// root evaluations per epoch. The proof's x-part uses -16n instead of -2n;
/// this follows the lemma statement.
inline FlopCount flops_per_epoch(FlopModelArgs const& a) {
    check_flop_args(a);
    auto const [n, ng, p] = a;
    std::int64_t const flops = (32 * p + 102) * n * n + (32 * p + 116) * ng * n - 2 * n + (16 * p + 92) * ng;
    return FlopCount::make(flops, 6 * (n + ng));
}

/// raw: 16(n_g+n)p + 58n_g + 51n - 8 flops plus 6n root evaluations.
/// bss: 16(n_g+n)p + 58n_g + 144n - 8 flops with roots already folded in.
/// The two differ by 93n = 3n roots at 31 flops, not the 6n roots stated for
/// the raw count; both are reported as published.
inline FlopCount flops_per_coordinate(FlopModelArgs const& a, CoordinateCostModel model) {
    check_flop_args(a);
    auto const [n, ng, p] = a;
    std::int64_t const common = 16 * (ng + n) * p + 58 * ng - 8;
    if (model == CoordinateCostModel::raw) {
        return FlopCount::make(common + 51 * n, 6 * n);
    }
    return FlopCount::make(common + 144 * n, 0);
}

struct FlopBudget {
    std::int64_t per_coordinate = 0;  // BSS per-coordinate count
    double log_ratio = 0.0;           // log(E - sigma_p e) / log(sigma_l)
    double flops = 0.0;               // per_coordinate * log_ratio
    std::int64_t flops_rounded = 0;   // nearest integer to flops
    bool valid = false;               // finite and non-negative
};

struct FlopBudgetArgs {
    double error_target = 0.0;  // E
    double variation = 0.0;     // e
    double sigma_p = 0.0;
    double sigma_l = 0.0;
};

/// Flops a BSS machine must perform between two input updates to keep the
/// expected tracking error below E. Evaluated literally; a negative or
/// non-finite result is returned with valid = false.
inline FlopBudget flop_budget(FlopBudgetArgs const& b, FlopModelArgs const& a) {
    double const margin = b.error_target - b.sigma_p * b.variation;
    if (!(margin > 0.0)) {
        throw std::domain_error("flop budget requires E - sigma_p * e > 0");
    }
    if (!(b.sigma_l > 0.0) || b.sigma_l == 1.0) {
        throw std::domain_error("flop budget requires sigma_l > 0 and sigma_l != 1");
    }
    FlopBudget out;
    out.per_coordinate = flops_per_coordinate(a, CoordinateCostModel::bss).flops;
    out.log_ratio = std::log(margin) / std::log(b.sigma_l);
    out.flops = static_cast<double>(out.per_coordinate) * out.log_ratio;
    out.valid = std::isfinite(out.flops) && out.flops >= 0.0;
    out.flops_rounded = std::isfinite(out.flops) ? std::llround(out.flops) : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Instrumented counting

enum class FlopCategory : std::size_t { trace = 0, coefficient = 1, solve = 2 };

inline constexpr std::array<std::string_view, 3> kFlopCategoryNames{"trace", "coefficient", "solve"};

/// Counts floating-point operations as the kernels execute them.
class FlopCounter {
  public:
    static constexpr bool enabled = true;

    constexpr void add(FlopCategory cat, std::int64_t ops) noexcept {
        by_category_[static_cast<std::size_t>(cat)] += ops;
    }
    constexpr void add_roots(std::int64_t roots) noexcept { roots_ += roots; }

    [[nodiscard]] constexpr std::int64_t category(FlopCategory cat) const noexcept {
        return by_category_[static_cast<std::size_t>(cat)];
    }
    [[nodiscard]] constexpr std::int64_t flops() const noexcept {
        return by_category_[0] + by_category_[1] + by_category_[2];
    }
    [[nodiscard]] constexpr std::int64_t roots() const noexcept { return roots_; }
    [[nodiscard]] constexpr FlopCount count() const noexcept { return FlopCount::make(flops(), roots_); }

    constexpr void reset() noexcept {
        by_category_ = {};
        roots_ = 0;
    }

    constexpr FlopCounter& operator+=(FlopCounter const& o) noexcept {
        for (std::size_t i = 0; i < by_category_.size(); ++i) by_category_[i] += o.by_category_[i];
        roots_ += o.roots_;
        return *this;
    }

  private:
    std::array<std::int64_t, 3> by_category_{};
    std::int64_t roots_ = 0;
};

/// Drop-in for FlopCounter that compiles to nothing.
struct NullCounter {
    static constexpr bool enabled = false;
    constexpr void add(FlopCategory, std::int64_t) noexcept {}
    constexpr void add_roots(std::int64_t) noexcept {}
};

template <class C>
concept OpCounter = requires(C c, FlopCategory cat, std::int64_t n) {
    c.add(cat, n);
    c.add_roots(n);
};

}  // namespace opftrack
