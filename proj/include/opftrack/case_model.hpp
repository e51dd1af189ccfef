#pragma once

// Network case description, the text case format, and bus admittance
// assembly.
//
// Case file layout (UTF-8, '#' starts a comment, blank lines ignored):
//
//   [base_mva]
//   value = 1.0
//   [limits]
//   v_min = 0.95
//   v_max = 1.05
//   [slack]
//   bus = 0
//   magnitude = 1.0
//   angle = 0.0            # radians
//   [buses]
//   # id kind p_load q_load s_rating regulated
//   0 slack 0.0 0.0 5.0 1
//   1 load  0.5 0.2 0.0 1
//   [lines]
//   # from to g_series b_series b_shunt
//   0 1 10.0 -20.0 0.0
//
// Loads are in MW / MVAr and ratings in MVA; they are divided by base_mva on
// parse. Line parameters are already per-unit; b_shunt is the susceptance
// placed at each end of the pi-model.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace opftrack {

using Complex = std::complex<double>;

enum class BusKind { slack, generator, load };

inline std::string_view to_string(BusKind k) {
    switch (k) {
        case BusKind::slack: return "slack";
        case BusKind::generator: return "generator";
        case BusKind::load: return "load";
    }
    return "?";
}

struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    double p_load = 0.0;  // pu
    double q_load = 0.0;  // pu
    double s_rating = 0.0;  // pu, generators only
    bool regulated = true;  // voltage limits enforced at this bus

    /// The slack bus is the grid supply point and carries a free injection,
    /// so it is treated as a controllable generator.
    [[nodiscard]] bool is_generator() const { return kind != BusKind::load; }

    friend bool operator==(Bus const&, Bus const&) = default;
};

struct Line {
    int from = 0;
    int to = 0;
    Complex series{};
    Complex shunt{};  // at each end

    friend bool operator==(Line const&, Line const&) = default;
};

struct NetworkCase {
    double base_mva = 1.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    double v_min = 0.95;
    double v_max = 1.05;
    int slack_bus = 0;
    double slack_magnitude = 1.0;
    double slack_angle = 0.0;

    [[nodiscard]] int n() const { return static_cast<int>(buses.size()); }

    [[nodiscard]] std::vector<int> generators() const {
        std::vector<int> out;
        for (auto const& b : buses) {
            if (b.is_generator()) out.push_back(b.id);
        }
        return out;
    }
    [[nodiscard]] int n_g() const { return static_cast<int>(generators().size()); }

    friend bool operator==(NetworkCase const&, NetworkCase const&) = default;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(int line, std::string field, std::string const& what)
        : std::runtime_error("line " + std::to_string(line) + (field.empty() ? "" : ", field '" + field + "'") +
                             ": " + what),
          line_(line),
          field_(std::move(field)) {}
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] std::string const& field() const { return field_; }

  private:
    int line_;
    std::string field_;
};

class CaseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
    std::string invariant;
    std::string message;
};

namespace detail {

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

inline std::vector<Diagnostic> validate_case(NetworkCase const& c) {
    std::vector<Diagnostic> out;
    int const n = c.n();
    if (n == 0) {
        out.push_back({"nonempty", "case has no buses"});
        return out;
    }
    for (int i = 0; i < n; ++i) {
        if (c.buses[i].id != i) {
            out.push_back({"dense_ids", "bus at position " + std::to_string(i) + " has id " +
                                            std::to_string(c.buses[i].id)});
        }
    }
    auto const slack_count = std::count_if(c.buses.begin(), c.buses.end(),
                                           [](Bus const& b) { return b.kind == BusKind::slack; });
    if (slack_count != 1) {
        out.push_back({"single_slack", "expected exactly one slack bus, found " + std::to_string(slack_count)});
    }
    if (c.slack_bus < 0 || c.slack_bus >= n || c.buses[c.slack_bus].kind != BusKind::slack) {
        out.push_back({"slack_section", "[slack] bus " + std::to_string(c.slack_bus) + " is not the slack bus"});
    }
    for (auto const& b : c.buses) {
        if (b.is_generator() && !(b.s_rating > 0.0)) {
            out.push_back({"positive_rating", "generator bus " + std::to_string(b.id) + " has s_rating <= 0"});
        }
        if (b.s_rating < 0.0) {
            out.push_back({"positive_rating", "bus " + std::to_string(b.id) + " has negative s_rating"});
        }
    }
    if (!(c.v_min > 0.0 && c.v_min < c.v_max)) {
        out.push_back({"voltage_limits", "require 0 < v_min < v_max"});
    }
    if (!(c.base_mva > 0.0)) {
        out.push_back({"base_mva", "base_mva must be positive"});
    }
    if (!(c.slack_magnitude > 0.0)) {
        out.push_back({"slack_magnitude", "slack voltage magnitude must be positive"});
    }

    std::vector<std::pair<int, int>> seen;
    detail::DisjointSets sets(n);
    for (std::size_t k = 0; k < c.lines.size(); ++k) {
        auto const& l = c.lines[k];
        if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n) {
            out.push_back({"line_endpoints", "line " + std::to_string(k) + " references an unknown bus"});
            continue;
        }
        if (l.from == l.to) {
            out.push_back({"no_self_loop", "line " + std::to_string(k) + " connects bus " + std::to_string(l.from) +
                                               " to itself"});
            continue;
        }
        auto key = std::minmax(l.from, l.to);
        if (std::find(seen.begin(), seen.end(), std::pair{key.first, key.second}) != seen.end()) {
            out.push_back({"unique_lines", "duplicate line between " + std::to_string(key.first) + " and " +
                                               std::to_string(key.second)});
        }
        seen.emplace_back(key.first, key.second);
        sets.unite(l.from, l.to);
    }
    int components = 0;
    for (int i = 0; i < n; ++i) components += sets.find(i) == i ? 1 : 0;
    if (components != 1) {
        out.push_back({"connected", "line graph has " + std::to_string(components) + " components"});
    }
    return out;
}

inline void require_valid(NetworkCase const& c) {
    auto diags = validate_case(c);
    if (diags.empty()) return;
    std::string msg = "invalid case:";
    for (auto const& d : diags) msg += " [" + d.invariant + "] " + d.message + ";";
    throw CaseError(msg);
}

// ---------------------------------------------------------------------------
// Text format

namespace detail {

inline std::string_view trim(std::string_view s) {
    auto const first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    auto const last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_double(std::string_view tok, int line, std::string const& field) {
    double v = 0.0;
    auto const* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError(line, field, "expected a number, got '" + std::string(tok) + "'");
    return v;
}

inline int parse_int(std::string_view tok, int line, std::string const& field) {
    int v = 0;
    auto const* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError(line, field, "expected an integer, got '" + std::string(tok) + "'");
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    auto const [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Parses and validates a case document. Syntax problems raise ParseError with
/// a line number; invariant violations raise CaseError.
inline NetworkCase parse_case(std::string_view text) {
    enum class Section { none, base_mva, limits, slack, buses, lines };
    NetworkCase c;
    Section section = Section::none;
    std::vector<bool> seen_sections(6, false);
    bool have_base = false, have_vmin = false, have_vmax = false, have_slack_bus = false;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto const nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        auto const line = detail::trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(lineno, "", "unterminated section header");
            auto const name = detail::trim(line.substr(1, line.size() - 2));
            if (name == "base_mva") section = Section::base_mva;
            else if (name == "limits") section = Section::limits;
            else if (name == "slack") section = Section::slack;
            else if (name == "buses") section = Section::buses;
            else if (name == "lines") section = Section::lines;
            else throw ParseError(lineno, std::string(name), "unknown section");
            auto const idx = static_cast<std::size_t>(section);
            if (seen_sections[idx]) throw ParseError(lineno, std::string(name), "duplicate section");
            seen_sections[idx] = true;
            continue;
        }

        switch (section) {
            case Section::none: throw ParseError(lineno, "", "content before the first section");
            case Section::base_mva:
            case Section::limits:
            case Section::slack: {
                auto const eq = line.find('=');
                if (eq == std::string_view::npos) throw ParseError(lineno, "", "expected 'key = value'");
                auto const key = std::string(detail::trim(line.substr(0, eq)));
                auto const val = detail::trim(line.substr(eq + 1));
                if (section == Section::base_mva && key == "value") {
                    c.base_mva = detail::parse_double(val, lineno, key);
                    have_base = true;
                } else if (section == Section::limits && key == "v_min") {
                    c.v_min = detail::parse_double(val, lineno, key);
                    have_vmin = true;
                } else if (section == Section::limits && key == "v_max") {
                    c.v_max = detail::parse_double(val, lineno, key);
                    have_vmax = true;
                } else if (section == Section::slack && key == "bus") {
                    c.slack_bus = detail::parse_int(val, lineno, key);
                    have_slack_bus = true;
                } else if (section == Section::slack && key == "magnitude") {
                    c.slack_magnitude = detail::parse_double(val, lineno, key);
                } else if (section == Section::slack && key == "angle") {
                    c.slack_angle = detail::parse_double(val, lineno, key);
                } else {
                    throw ParseError(lineno, key, "unknown field");
                }
                break;
            }
            case Section::buses: {
                auto const tok = detail::split_ws(line);
                if (tok.size() != 6) throw ParseError(lineno, "", "bus row needs 6 fields, got " + std::to_string(tok.size()));
                Bus b;
                b.id = detail::parse_int(tok[0], lineno, "id");
                if (tok[1] == "slack") b.kind = BusKind::slack;
                else if (tok[1] == "generator") b.kind = BusKind::generator;
                else if (tok[1] == "load") b.kind = BusKind::load;
                else throw ParseError(lineno, "kind", "unknown bus kind '" + std::string(tok[1]) + "'");
                b.p_load = detail::parse_double(tok[2], lineno, "p_load");
                b.q_load = detail::parse_double(tok[3], lineno, "q_load");
                b.s_rating = detail::parse_double(tok[4], lineno, "s_rating");
                int const reg = detail::parse_int(tok[5], lineno, "regulated");
                if (reg != 0 && reg != 1) throw ParseError(lineno, "regulated", "expected 0 or 1");
                b.regulated = reg == 1;
                c.buses.push_back(b);
                break;
            }
            case Section::lines: {
                auto const tok = detail::split_ws(line);
                if (tok.size() != 5) throw ParseError(lineno, "", "line row needs 5 fields, got " + std::to_string(tok.size()));
                Line l;
                l.from = detail::parse_int(tok[0], lineno, "from");
                l.to = detail::parse_int(tok[1], lineno, "to");
                l.series = {detail::parse_double(tok[2], lineno, "g_series"),
                            detail::parse_double(tok[3], lineno, "b_series")};
                l.shunt = {0.0, detail::parse_double(tok[4], lineno, "b_shunt")};
                c.lines.push_back(l);
                break;
            }
        }
    }
    if (!have_base) throw ParseError(lineno, "base_mva", "missing [base_mva] value");
    if (!have_vmin || !have_vmax) throw ParseError(lineno, "limits", "missing v_min or v_max");
    if (!have_slack_bus) throw ParseError(lineno, "slack", "missing slack bus");
    if (!(c.base_mva > 0.0)) throw CaseError("base_mva must be positive");
    for (auto& b : c.buses) {
        b.p_load /= c.base_mva;
        b.q_load /= c.base_mva;
        b.s_rating /= c.base_mva;
    }
    require_valid(c);
    return c;
}

/// Writes a case in the text format. Per-unit quantities are scaled back by
/// base_mva so that parse(serialize(c)) == c up to rounding of that scaling.
inline std::string serialize_case(NetworkCase const& c) {
    using detail::format_double;
    std::ostringstream os;
    os << "[base_mva]\nvalue = " << format_double(c.base_mva) << "\n";
    os << "[limits]\nv_min = " << format_double(c.v_min) << "\nv_max = " << format_double(c.v_max) << "\n";
    os << "[slack]\nbus = " << c.slack_bus << "\nmagnitude = " << format_double(c.slack_magnitude)
       << "\nangle = " << format_double(c.slack_angle) << "\n";
    os << "[buses]\n# id kind p_load q_load s_rating regulated\n";
    for (auto const& b : c.buses) {
        os << b.id << ' ' << to_string(b.kind) << ' ' << format_double(b.p_load * c.base_mva) << ' '
           << format_double(b.q_load * c.base_mva) << ' ' << format_double(b.s_rating * c.base_mva) << ' '
           << (b.regulated ? 1 : 0) << "\n";
    }
    os << "[lines]\n# from to g_series b_series b_shunt\n";
    for (auto const& l : c.lines) {
        os << l.from << ' ' << l.to << ' ' << format_double(l.series.real()) << ' ' << format_double(l.series.imag())
           << ' ' << format_double(l.shunt.imag()) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Admittance

struct AdmittanceEntry {
    int col = 0;
    Complex value{};
};

/// Sparse complex bus admittance matrix, one sorted entry list per row.
class AdmittanceMatrix {
  public:
    AdmittanceMatrix() = default;
    explicit AdmittanceMatrix(std::vector<std::vector<AdmittanceEntry>> rows) : rows_(std::move(rows)) {}

    [[nodiscard]] int dimension() const { return static_cast<int>(rows_.size()); }
    [[nodiscard]] std::vector<AdmittanceEntry> const& row(int m) const { return rows_[static_cast<std::size_t>(m)]; }
    [[nodiscard]] int row_nonzeros(int m) const { return static_cast<int>(row(m).size()); }

    /// p: the largest row nonzero count.
    [[nodiscard]] int max_row_nonzeros() const {
        int p = 0;
        for (auto const& r : rows_) p = std::max(p, static_cast<int>(r.size()));
        return p;
    }

    [[nodiscard]] Complex operator()(int m, int n) const {
        for (auto const& e : row(m)) {
            if (e.col == n) return e.value;
        }
        return {};
    }

  private:
    std::vector<std::vector<AdmittanceEntry>> rows_;
};

/// y[m][m] = sum of incident series and shunt admittances,
/// y[m][n] = -series(m, n).
inline AdmittanceMatrix build_admittance(NetworkCase const& c) {
    int const n = c.n();
    std::vector<std::vector<AdmittanceEntry>> rows(static_cast<std::size_t>(n));
    auto stamp = [&rows](int m, int k, Complex v) {
        auto& r = rows[static_cast<std::size_t>(m)];
        auto it = std::lower_bound(r.begin(), r.end(), k, [](AdmittanceEntry const& e, int col) { return e.col < col; });
        if (it != r.end() && it->col == k) it->value += v;
        else r.insert(it, AdmittanceEntry{k, v});
    };
    for (int m = 0; m < n; ++m) stamp(m, m, Complex{});
    for (auto const& l : c.lines) {
        stamp(l.from, l.from, l.series + l.shunt);
        stamp(l.to, l.to, l.series + l.shunt);
        stamp(l.from, l.to, -l.series);
        stamp(l.to, l.from, -l.series);
    }
    return AdmittanceMatrix(std::move(rows));
}

}  // namespace opftrack
