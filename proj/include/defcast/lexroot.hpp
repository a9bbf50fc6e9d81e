#ifndef DEFCAST_LEXROOT_HPP_
#define DEFCAST_LEXROOT_HPP_

// Root finding on the (possibly stripped) lexicographic square.
//
// A function S on the lexicographic square is seen as a family of fibers
// {p} x [0,1] ordered by p. The model supplies the range of S over a fiber
// and a solver inside a fiber; between consecutive breakpoints every fiber
// is assumed to be constant in q, so S is an ordinary continuous function
// of p there.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "defcast/errors.hpp"
#include "defcast/game.hpp"

namespace defcast {

struct Interval {
    double min = 0.0;
    double max = 0.0;

    int sign() const noexcept {
        if (min > 0.0) return 1;
        if (max < 0.0) return -1;
        return 0;
    }
};

enum class RootBranch { Root, EndpointPositive, EndpointNegative };

inline const char* to_string(RootBranch b) noexcept {
    switch (b) {
    case RootBranch::Root: return "root";
    case RootBranch::EndpointPositive: return "endpoint_positive";
    case RootBranch::EndpointNegative: return "endpoint_negative";
    }
    return "root";
}

struct LexRootOptions {
    double epsilon = 1e-9;        // |S| accepted as a root
    std::size_t grid = 1024;      // initial p-scan
    double delta0 = 1e-6;         // first distance from a stripped edge
    double delta_min = 1e-15;     // last distance tried before giving up
};

struct LexRoot {
    Forecast forecast;
    double value = 0.0;           // S at the returned point
    RootBranch branch = RootBranch::Root;
};

/// `value(p, q)`: S itself. `fiber_range(p)`: min and max of S over q.
/// `solve_fiber(p, eps)`: the q of the lexicographically first zero in the
/// fiber, q = ½ when the whole fiber is within eps of zero, or the q closest
/// to zero when rounding hides the root. `breakpoints()`: the interior p where
/// S may depend on q.
template <class M>
concept FiberModel = requires(const M& m, double p, double q) {
    { m.value(p, q) } -> std::convertible_to<double>;
    { m.fiber_range(p) } -> std::same_as<Interval>;
    { m.solve_fiber(p, q) } -> std::convertible_to<double>;
    { m.breakpoints() } -> std::convertible_to<std::vector<double>>;
};

namespace detail {

// n points from `edge` to 0.5, geometric when `log_spaced`.
inline void half_grid(std::vector<double>& out, double edge, std::size_t n, bool log_spaced,
                      bool mirrored) {
    for (std::size_t j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(n - 1);
        double d = log_spaced ? std::exp(std::log(edge) + t * (std::log(0.5) - std::log(edge)))
                              : edge + t * (0.5 - edge);
        if (j + 1 == n) d = 0.5;
        out.push_back(mirrored ? 1.0 - d : d);
    }
}

template <FiberModel M>
LexRoot fiber_root(const M& model, double p, const LexRootOptions& opt) {
    const double q = std::clamp(static_cast<double>(model.solve_fiber(p, opt.epsilon)), 0.0, 1.0);
    return {{p, q}, model.value(p, q), RootBranch::Root};
}

} // namespace detail

/// The lexicographically first root of S found at the resolution of the
/// initial grid, or the endpoint rule p = (1 + sign S)/2 when S has constant
/// sign on the domain. Throws internal_error when no admissible answer exists
/// (constant sign on a domain that lacks the required edge).
template <FiberModel M>
LexRoot find_lex_root(const M& model, DomainTag domain, const LexRootOptions& opt = {}) {
    const bool strip_left = domain == DomainTag::StrippedBoth || domain == DomainTag::StrippedLeft;
    const bool strip_right = domain == DomainTag::StrippedBoth || domain == DomainTag::StrippedRight;

    // Move the stripped edges outwards until S has the sign it is known to
    // approach there: +inf as p -> 0, -inf as p -> 1.
    double dl = opt.delta0;
    double dr = opt.delta0;
    if (strip_left) {
        while (dl > opt.delta_min && model.fiber_range(dl).sign() < 0) dl = std::max(dl / 2, opt.delta_min);
    }
    if (strip_right) {
        while (dr > opt.delta_min && model.fiber_range(1.0 - dr).sign() > 0) dr = std::max(dr / 2, opt.delta_min);
    }

    const std::size_t half = std::max<std::size_t>(opt.grid / 2, 2);
    std::vector<double> grid;
    grid.reserve(2 * half + 16);
    detail::half_grid(grid, strip_left ? dl : 0.0, half, strip_left, false);
    std::vector<double> right;
    detail::half_grid(right, strip_right ? dr : 0.0, half, strip_right, true);
    grid.insert(grid.end(), right.rbegin(), right.rend());
    const double lo_edge = strip_left ? dl : 0.0;
    const double hi_edge = strip_right ? 1.0 - dr : 1.0;
    for (double b : model.breakpoints())
        if (b > lo_edge && b < hi_edge) grid.push_back(b);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const std::vector<double> breaks = model.breakpoints();
    const auto is_break = [&](double p) { return std::find(breaks.begin(), breaks.end(), p) != breaks.end(); };

    // Sign change strictly between two fibers on which S is continuous in p.
    const auto bisect = [&](double lo, double hi, int lo_sign) {
        for (int it = 0; it < 400; ++it) {
            const double mid = lo + (hi - lo) / 2;
            if (mid <= lo || mid >= hi) break;
            const Interval r = model.fiber_range(mid);
            const int sm = r.sign();
            if (sm == 0 || std::max(std::abs(r.min), std::abs(r.max)) <= opt.epsilon / 4)
                return detail::fiber_root(model, mid, opt);
            if (sm == lo_sign)
                lo = mid;
            else
                hi = mid;
        }
        const LexRoot a = detail::fiber_root(model, lo, opt);
        const LexRoot b = detail::fiber_root(model, hi, opt);
        return std::abs(a.value) <= std::abs(b.value) ? a : b;
    };

    int prev_sign = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double p = grid[j];
        if (j > 0 && is_break(p)) {
            // A breakpoint fiber straddling zero can hide a crossing just
            // left of it; look at the left limit first.
            const double left = std::nextafter(p, 0.0);
            if (left > grid[j - 1]) {
                const int sl = model.fiber_range(left).sign();
                if (sl == 0) return detail::fiber_root(model, left, opt);
                if (sl != prev_sign) return bisect(grid[j - 1], left, prev_sign);
            }
        }
        const int s = model.fiber_range(p).sign();
        if (s == 0) return detail::fiber_root(model, p, opt);
        if (j > 0 && s != prev_sign) return bisect(grid[j - 1], p, prev_sign);
        prev_sign = s;
    }

    // Constant sign everywhere on the scanned domain.
    if (prev_sign > 0 && !strip_right) {
        return {{1.0, 0.5}, model.value(1.0, 0.5), RootBranch::EndpointPositive};
    }
    if (prev_sign < 0 && !strip_left) {
        return {{0.0, 0.5}, model.value(0.0, 0.5), RootBranch::EndpointNegative};
    }
    std::ostringstream msg;
    msg << "lexicographic root finder: S has constant sign " << prev_sign
        << " on [" << lo_edge << ", " << hi_edge << "] but the domain lacks the matching edge"
        << " (delta_left=" << dl << ", delta_right=" << dr << ")";
    throw internal_error(msg.str());
}

} // namespace defcast

#endif // DEFCAST_LEXROOT_HPP_
