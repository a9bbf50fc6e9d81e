#ifndef DEFCAST_GAME_HPP_
#define DEFCAST_GAME_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "defcast/errors.hpp"

namespace defcast {

enum class GameKind { Square, Absolute, Log, Custom };

/// Domain of the canonical choice function inside the lexicographic square.
/// Stripped variants remove the vertical edge(s) p = 0 and/or p = 1.
enum class DomainTag { FullSquare, StrippedBoth, StrippedLeft, StrippedRight };

/// A point of the lexicographic square: `p` is the probability forecast and
/// `q` selects a decision inside the optimal face when the face is not a
/// single point.
struct Forecast {
    double p = 0.5;
    double q = 0.5;
};

struct LossPair {
    double loss0 = 0.0;
    double loss1 = 0.0;
};

struct Decision {
    double gamma = 0.0;
    double loss0 = 0.0;
    double loss1 = 0.0;

    double exposure() const noexcept { return loss1 - loss0; }
};

/// Exposures at the two ends of the optimal face for a given p. `hi` belongs
/// to the north-west end (q = 0), `lo` to the south-east end (q = 1).
struct ExposureInterval {
    double hi = 0.0;
    double lo = 0.0;
};

inline constexpr double kLogLossClamp = 1e-12;

inline constexpr bool is_binary(int y) noexcept { return y == 0 || y == 1; }

namespace detail {

inline void require_binary(int y) {
    if (!is_binary(y))
        throw rejected_input("observation must be 0 or 1, got " + std::to_string(y));
}

inline void require_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw rejected_input("probability outside [0,1]: " + std::to_string(p));
}

} // namespace detail

/// A binary-outcome game (Γ, λ). Built-ins are the square, absolute and log
/// loss games; a custom game is given by the south-west boundary of its
/// superdecision set as a convex polyline.
///
/// Decisions of a custom game are fractional vertex indices γ ∈ [0, K-1]:
/// integer γ selects a boundary vertex, fractional γ the point on the segment
/// between two neighbours.
class Game {
public:
    static Game square() { return Game(GameKind::Square, DomainTag::FullSquare, 0.0, 0.0); }
    static Game absolute() { return Game(GameKind::Absolute, DomainTag::FullSquare, 0.0, 0.0); }
    static Game log() { return Game(GameKind::Log, DomainTag::StrippedBoth, 0.0, 0.0); }

    /// `boundary` must be strictly increasing in loss0, strictly decreasing in
    /// loss1 and convex (supporting-line slopes non-decreasing).
    static Game custom(std::vector<LossPair> boundary) {
        if (boundary.empty())
            throw rejected_input("custom game needs at least one boundary point");
        for (const auto& v : boundary) {
            if (!std::isfinite(v.loss0) || !std::isfinite(v.loss1))
                throw rejected_input("custom game boundary must be finite");
        }
        std::vector<double> crit;
        crit.reserve(boundary.size() - 1);
        double prev_slope = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k + 1 < boundary.size(); ++k) {
            const double dx = boundary[k + 1].loss0 - boundary[k].loss0;
            const double dy = boundary[k + 1].loss1 - boundary[k].loss1;
            if (!(dx > 0.0))
                throw rejected_input("custom boundary must be strictly increasing in loss0");
            if (!(dy < 0.0))
                throw rejected_input("custom boundary must be strictly decreasing in loss1");
            const double slope = dy / dx;
            if (slope < prev_slope - 1e-12 * std::max(1.0, std::abs(prev_slope)))
                throw rejected_input("custom boundary is not convex at vertex " +
                                     std::to_string(k));
            prev_slope = slope;
            // The face is the whole segment when (1-p)dx + p dy = 0.
            double c = dx / (dx - dy);
            if (!crit.empty()) c = std::max(c, crit.back());
            crit.push_back(c);
        }
        Game g(GameKind::Custom, DomainTag::FullSquare, boundary.front().loss0,
               boundary.back().loss1);
        g.boundary_ = std::move(boundary);
        g.critical_ = std::move(crit);
        return g;
    }

    static Game by_name(std::string_view name) {
        if (name == "square") return square();
        if (name == "absolute") return absolute();
        if (name == "log") return log();
        throw rejected_input("unknown game '" + std::string(name) + "'");
    }

    GameKind kind() const noexcept { return kind_; }
    DomainTag domain() const noexcept { return domain_; }
    double c0() const noexcept { return c0_; }
    double c1() const noexcept { return c1_; }
    std::span<const LossPair> boundary() const noexcept { return boundary_; }

    std::string_view name() const noexcept {
        switch (kind_) {
        case GameKind::Square: return "square";
        case GameKind::Absolute: return "absolute";
        case GameKind::Log: return "log";
        case GameKind::Custom: return "custom";
        }
        return "custom";
    }

    std::string decision_description() const {
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Absolute: return "[0,1]";
        case GameKind::Log: return "(0,1)";
        case GameKind::Custom:
            return "[0," + std::to_string(boundary_.size() - 1) + "] (boundary vertex index)";
        }
        return {};
    }

    bool in_decision_set(double gamma) const noexcept {
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Absolute: return gamma >= 0.0 && gamma <= 1.0;
        case GameKind::Log: return gamma > 0.0 && gamma < 1.0;
        case GameKind::Custom:
            return gamma >= 0.0 && gamma <= static_cast<double>(boundary_.size() - 1);
        }
        return false;
    }

    /// Whether p belongs to the p-projection of the choice-function domain.
    bool in_domain(double p) const noexcept {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        switch (domain_) {
        case DomainTag::FullSquare: return true;
        case DomainTag::StrippedBoth: return p > 0.0 && p < 1.0;
        case DomainTag::StrippedLeft: return p > 0.0;
        case DomainTag::StrippedRight: return p < 1.0;
        }
        return false;
    }

    double loss(int y, double gamma) const {
        detail::require_binary(y);
        const LossPair lp = losses(gamma);
        return y == 1 ? lp.loss1 : lp.loss0;
    }

    /// (λ(0,γ), λ(1,γ)).
    LossPair losses(double gamma) const {
        require_decision(gamma);
        switch (kind_) {
        case GameKind::Square: return {gamma * gamma, (1.0 - gamma) * (1.0 - gamma)};
        case GameKind::Absolute: return {gamma, 1.0 - gamma};
        case GameKind::Log: {
            const double g = std::clamp(gamma, kLogLossClamp, 1.0 - kLogLossClamp);
            return {-std::log1p(-g), -std::log(g)};
        }
        case GameKind::Custom: return interpolate(gamma);
        }
        return {};
    }

    double expected_loss(double p, double gamma) const {
        detail::require_probability(p);
        const LossPair lp = losses(gamma);
        return p * lp.loss1 + (1.0 - p) * lp.loss0;
    }

    /// λ(1,γ) - λ(0,γ). For the log loss game this is evaluated without the
    /// loss clamp so that it diverges at the ends of Γ.
    double exposure(double gamma) const {
        require_decision(gamma);
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Absolute: return 1.0 - 2.0 * gamma;
        case GameKind::Log: return std::log1p(-gamma) - std::log(gamma);
        case GameKind::Custom: {
            const LossPair lp = interpolate(gamma);
            return lp.loss1 - lp.loss0;
        }
        }
        return 0.0;
    }

    /// The canonical choice function G(p, q).
    Decision canonical_choice(Forecast f) const {
        require_forecast(f);
        const auto [a, b, ga, gb] = face(f.p);
        const double q = f.q;
        Decision d;
        d.gamma = (ga == gb) ? ga : (1.0 - q) * ga + q * gb;
        if (kind_ == GameKind::Log) {
            // Keep the decision and its losses consistent with `losses`.
            const LossPair lp = losses(d.gamma);
            d.loss0 = lp.loss0;
            d.loss1 = lp.loss1;
        } else {
            d.loss0 = (1.0 - q) * a.loss0 + q * b.loss0;
            d.loss1 = (1.0 - q) * a.loss1 + q * b.loss1;
        }
        return d;
    }

    /// Exposure of G(p, q) as a function of q is affine from `hi` (q = 0) to
    /// `lo` (q = 1).
    ExposureInterval exposure_interval(double p) const {
        if (!in_domain(p))
            throw rejected_input("p outside the choice-function domain: " + std::to_string(p));
        switch (kind_) {
        case GameKind::Square: return {1.0 - 2.0 * p, 1.0 - 2.0 * p};
        case GameKind::Log: {
            const double e = std::log1p(-p) - std::log(p);
            return {e, e};
        }
        case GameKind::Absolute:
        case GameKind::Custom: {
            const auto [a, b, ga, gb] = face(p);
            return {a.loss1 - a.loss0, b.loss1 - b.loss0};
        }
        }
        return {};
    }

    /// Exposure of G(p, q), consistent with `canonical_choice(...).exposure()`
    /// but cheaper.
    double choice_exposure(Forecast f) const {
        if (kind_ == GameKind::Log) {
            require_forecast(f);
            return std::log1p(-f.p) - std::log(f.p);
        }
        return canonical_choice(f).exposure();
    }

    /// Interior p at which the optimal face is a non-degenerate segment.
    /// Between consecutive breakpoints the exposure of G is continuous in p
    /// and independent of q.
    std::vector<double> breakpoints() const {
        switch (kind_) {
        case GameKind::Absolute: return {0.5};
        case GameKind::Custom: {
            std::vector<double> out;
            for (double c : critical_)
                if (out.empty() || out.back() != c) out.push_back(c);
            return out;
        }
        default: return {};
        }
    }

    /// Closed interval of exposures attained by decisions (infinite ends for
    /// the log loss game).
    std::pair<double, double> exposure_range() const noexcept {
        constexpr double inf = std::numeric_limits<double>::infinity();
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Absolute: return {-1.0, 1.0};
        case GameKind::Log: return {-inf, inf};
        case GameKind::Custom:
            return {boundary_.back().loss1 - boundary_.back().loss0,
                    boundary_.front().loss1 - boundary_.front().loss0};
        }
        return {0.0, 0.0};
    }

    /// Inverse of `exposure`: the decision whose exposure equals `e`.
    double decision_from_exposure(double e) const {
        const auto [lo, hi] = exposure_range();
        if (!(e >= lo && e <= hi) || std::isnan(e))
            throw rejected_input("exposure " + std::to_string(e) + " outside the game's range");
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Absolute: return (1.0 - e) / 2.0;
        case GameKind::Log: return 1.0 / (1.0 + std::exp(e));
        case GameKind::Custom: {
            // Vertex exposures strictly decrease with the index.
            for (std::size_t k = 0; k + 1 < boundary_.size(); ++k) {
                const double e0 = boundary_[k].loss1 - boundary_[k].loss0;
                const double e1 = boundary_[k + 1].loss1 - boundary_[k + 1].loss0;
                if (e >= e1) return static_cast<double>(k) + (e0 - e) / (e0 - e1);
            }
            return static_cast<double>(boundary_.size() - 1);
        }
        }
        return 0.0;
    }

    friend bool operator==(const Game& a, const Game& b) {
        if (a.kind_ != b.kind_) return false;
        if (a.kind_ != GameKind::Custom) return true;
        return std::equal(a.boundary_.begin(), a.boundary_.end(), b.boundary_.begin(),
                          b.boundary_.end(), [](const LossPair& u, const LossPair& v) {
                              return u.loss0 == v.loss0 && u.loss1 == v.loss1;
                          });
    }

private:
    struct Face {
        LossPair a;
        LossPair b;
        double gamma_a;
        double gamma_b;
    };

    Game(GameKind kind, DomainTag domain, double c0, double c1)
        : kind_(kind), domain_(domain), c0_(c0), c1_(c1) {}

    void require_decision(double gamma) const {
        if (!in_decision_set(gamma))
            throw rejected_input("decision " + std::to_string(gamma) + " outside " +
                                 decision_description());
    }

    void require_forecast(Forecast f) const {
        if (!in_domain(f.p) || !(f.q >= 0.0 && f.q <= 1.0))
            throw rejected_input("forecast (" + std::to_string(f.p) + ", " +
                                 std::to_string(f.q) + ") outside the choice-function domain");
    }

    LossPair interpolate(double gamma) const {
        const std::size_t last = boundary_.size() - 1;
        const auto k = std::min(static_cast<std::size_t>(gamma), last);
        if (k == last) return boundary_[last];
        const double t = gamma - static_cast<double>(k);
        const LossPair& u = boundary_[k];
        const LossPair& v = boundary_[k + 1];
        return {(1.0 - t) * u.loss0 + t * v.loss0, (1.0 - t) * u.loss1 + t * v.loss1};
    }

    // Optimal face [A(p), B(p)] with A north-west of B, plus the decisions
    // realising its ends.
    Face face(double p) const {
        switch (kind_) {
        case GameKind::Square:
        case GameKind::Log: {
            const LossPair lp = losses(p);
            return {lp, lp, p, p};
        }
        case GameKind::Absolute: {
            if (p < 0.5) return {{0.0, 1.0}, {0.0, 1.0}, 0.0, 0.0};
            if (p > 0.5) return {{1.0, 0.0}, {1.0, 0.0}, 1.0, 1.0};
            return {{0.0, 1.0}, {1.0, 0.0}, 0.0, 1.0};
        }
        case GameKind::Custom: {
            std::size_t lo = 0;
            std::size_t hi = 0;
            if (p >= 1.0) {
                lo = hi = boundary_.size() - 1;
            } else if (p > 0.0) {
                lo = static_cast<std::size_t>(
                    std::lower_bound(critical_.begin(), critical_.end(), p) - critical_.begin());
                hi = static_cast<std::size_t>(
                    std::upper_bound(critical_.begin(), critical_.end(), p) - critical_.begin());
            }
            return {boundary_[lo], boundary_[hi], static_cast<double>(lo),
                    static_cast<double>(hi)};
        }
        }
        return {};
    }

    GameKind kind_;
    DomainTag domain_;
    double c0_;
    double c1_;
    std::vector<LossPair> boundary_;
    std::vector<double> critical_;
};

namespace detail {

// sup over the optimal face at p of p(1-p)(Exp² + C_F²).
inline double clambda_supremand(const Game& game, double p, double cf2) {
    const ExposureInterval iv = game.exposure_interval(p);
    const double e2 = std::max(iv.hi * iv.hi, iv.lo * iv.lo);
    return p * (1.0 - p) * (e2 + cf2);
}

} // namespace detail

/// C_{λ,F} by numerical maximisation over p ∈ (0,1): a 4096-point grid,
/// logarithmic towards both ends, followed by golden-section refinement of the
/// best bracket. Returns +inf when the supremand keeps growing towards an end.
inline double clambda_numeric(const Game& game, double c_f) {
    if (!(c_f >= 0.0) || !std::isfinite(c_f))
        throw rejected_input("C_F must be finite and non-negative");
    const double cf2 = c_f * c_f;
    auto h = [&](double p) { return detail::clambda_supremand(game, p, cf2); };

    constexpr int kHalf = 2048;
    constexpr double kEdge = 1e-12;
    std::vector<double> grid;
    grid.reserve(2 * kHalf + 8);
    const double log_lo = std::log(kEdge);
    const double log_hi = std::log(0.5);
    for (int j = 0; j < kHalf; ++j) {
        const double t = static_cast<double>(j) / (kHalf - 1);
        grid.push_back(std::exp(log_lo + t * (log_hi - log_lo)));
    }
    for (int j = kHalf - 2; j >= 0; --j) grid.push_back(1.0 - grid[static_cast<std::size_t>(j)]);
    for (double b : game.breakpoints()) grid.push_back(b);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double v = h(grid[j]);
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }

    // Supremum at the edge of the grid: follow the tail in decades.
    if (best == 0 || best + 1 == grid.size()) {
        const bool left = best == 0;
        double d = kEdge;
        double prev = best_val;
        bool growing = true;
        for (int k = 0; k < 280 && growing; ++k) {
            d *= 0.1;
            const double p = left ? d : 1.0 - d;
            if (p >= 1.0 || p <= 0.0) break;
            const double v = h(p);
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
            growing = v > prev;
            prev = std::max(prev, v);
        }
        if (growing) return std::numeric_limits<double>::infinity();
        return std::sqrt(prev);
    }

    double a = grid[best - 1];
    double b = grid[best + 1];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double hc = h(c);
    double hd = h(d);
    for (int it = 0; it < 200 && (b - a) > 1e-15; ++it) {
        if (hc > hd) {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
    }
    best_val = std::max({best_val, hc, hd});
    return std::sqrt(best_val);
}

/// C_{λ,F} for a kernel with sup-norm constant `c_f`. Closed forms for the
/// square and absolute loss games, numerical supremum otherwise.
inline double clambda(const Game& game, double c_f) {
    if (!(c_f >= 0.0) || !std::isfinite(c_f))
        throw rejected_input("C_F must be finite and non-negative");
    switch (game.kind()) {
    case GameKind::Square: return c_f >= 1.0 ? c_f / 2.0 : (1.0 + c_f * c_f) / 4.0;
    case GameKind::Absolute: return 0.5 * std::sqrt(1.0 + c_f * c_f);
    default: return clambda_numeric(game, c_f);
    }
}

} // namespace defcast

#endif // DEFCAST_GAME_HPP_
