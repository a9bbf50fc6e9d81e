#ifndef DEFCAST_FORECASTER_HPP_
#define DEFCAST_FORECASTER_HPP_

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "defcast/errors.hpp"
#include "defcast/game.hpp"
#include "defcast/kernel.hpp"
#include "defcast/lexroot.hpp"

namespace defcast {

/// S_n(p,q) = A·e + B + ½e²(1-2p) + C·p with e the exposure of G(p,q).
/// A = Σ e_i (y_i - p_i), B = Σ K(x,x_i)(y_i - p_i) + ½K(x,x), C = -K(x,x).
struct SCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/// S_n on the game's choice-function domain for fixed coefficients. On each
/// fiber S is a quadratic in the exposure e, which is affine in q.
class SFunction {
public:
    SFunction(const Game& game, SCoefficients k) : game_(&game), k_(k) {}

    double value(double p, double q) const { return at(p, game_->choice_exposure({p, q})); }

    /// S at p for a given exposure e.
    double at(double p, double e) const {
        return k_.a * e + k_.b + 0.5 * e * e * (1.0 - 2.0 * p) + k_.c * p;
    }

    Interval fiber_range(double p) const {
        const ExposureInterval iv = game_->exposure_interval(p);
        const double v_hi = at(p, iv.hi);
        const double v_lo = at(p, iv.lo);
        Interval r{std::min(v_hi, v_lo), std::max(v_hi, v_lo)};
        const double quad = 0.5 * (1.0 - 2.0 * p);
        if (quad != 0.0 && iv.hi > iv.lo) {
            const double vertex = -k_.a / (2.0 * quad);
            if (vertex > iv.lo && vertex < iv.hi) {
                const double v = at(p, vertex);
                r.min = std::min(r.min, v);
                r.max = std::max(r.max, v);
            }
        }
        return r;
    }

    /// First zero along the fiber, i.e. the largest root e in [lo, hi],
    /// mapped back to q.
    double solve_fiber(double p, double eps) const {
        const ExposureInterval iv = game_->exposure_interval(p);
        if (!(iv.hi > iv.lo)) return 0.5;
        if (std::abs(value(p, 0.5)) <= eps) return 0.5;

        const double quad = 0.5 * (1.0 - 2.0 * p);
        const double lin = k_.a;
        const double cst = k_.b + k_.c * p;
        std::vector<double> cand;
        if (quad == 0.0) {
            if (lin != 0.0) cand.push_back(-cst / lin);
        } else {
            const double disc = lin * lin - 4.0 * quad * cst;
            if (disc >= 0.0) {
                const double t = -0.5 * (lin + std::copysign(std::sqrt(disc), lin));
                if (t != 0.0) {
                    cand.push_back(t / quad);
                    cand.push_back(cst / t);
                } else {
                    cand.push_back(0.0);
                }
            } else {
                cand.push_back(-lin / (2.0 * quad));
            }
        }
        // Fallbacks when rounding pushes the root just outside the interval.
        cand.push_back(iv.hi);
        cand.push_back(iv.lo);

        // Among roots the largest e (smallest q); otherwise the closest miss.
        double best_e = iv.hi;
        double best_miss = std::numeric_limits<double>::infinity();
        bool have_root = false;
        for (double e : cand) {
            if (!std::isfinite(e)) continue;
            e = std::clamp(e, iv.lo, iv.hi);
            const double v = std::abs(at(p, e));
            if (v <= eps) {
                if (!have_root || e > best_e) best_e = e;
                have_root = true;
            } else if (!have_root && v < best_miss) {
                best_e = e;
                best_miss = v;
            }
        }
        return (iv.hi - best_e) / (iv.hi - iv.lo);
    }

    std::vector<double> breakpoints() const { return game_->breakpoints(); }

private:
    const Game* game_;
    SCoefficients k_;
};

static_assert(FiberModel<SFunction>);

struct ForecasterOptions {
    double epsilon_root = 1e-9;
    std::size_t grid = 1024;
    double delta0 = 1e-6;
    double delta_min = 1e-15;
};

struct RootReport {
    Forecast forecast;
    double s_residual = 0.0;      // |S_n| at the forecast; 0 for endpoint rules
    RootBranch branch = RootBranch::Root;
};

struct ForecastRound {
    Forecast forecast;
    int y = 0;
    double exposure = 0.0;        // Exp of G(p,q)
    double s_residual = 0.0;
    RootBranch branch = RootBranch::Root;

    double residual() const noexcept { return static_cast<double>(y) - forecast.p; }
};

/// Left and right side of the large-number inequality
/// ‖Σ(y-p)Φ‖² ≤ Σ p(1-p)‖Φ‖² for the merged feature map Φ = (Exp∘G, K_x).
/// `solver_slack` = 2Σ|s_residual| absorbs inexact roots; `rounding` bounds
/// floating-point error in the sums.
struct K29Certificate {
    double lhs = 0.0;
    double rhs = 0.0;
    double solver_slack = 0.0;
    double rounding = 0.0;

    bool holds() const noexcept { return lhs <= rhs + solver_slack + rounding; }
};

/// |Σ(y-p)f(x)| against ‖f‖·sqrt(Σ p(1-p)(e² + K(x,x))).
struct ResolutionCertificate {
    double lhs = 0.0;
    double bound = 0.0;
    double slack = 0.0;

    bool holds() const noexcept { return lhs <= bound + slack; }
};

/// History and running aggregates of the lexicographic algorithm of large
/// numbers with the merged kernel Exp(p,q)Exp(p',q') + K(x,x').
///
/// Single writer. Per-round cost of `next_forecast` is linear in the history.
class ForecasterState {
public:
    ForecasterState(Game game, Kernel kernel, ForecasterOptions options = {})
        : game_(std::move(game)), kernel_(std::move(kernel)), options_(options),
          xs_(kernel_.dim()) {
        if (!(options_.epsilon_root > 0.0))
            throw rejected_input("epsilon_root must be positive");
        if (options_.grid < 4) throw rejected_input("root grid needs at least 4 points");
    }

    const Game& game() const noexcept { return game_; }
    const Kernel& kernel() const noexcept { return kernel_; }
    const ForecasterOptions& options() const noexcept { return options_; }
    const std::vector<ForecastRound>& rounds() const noexcept { return rounds_; }
    const PointSet& points() const noexcept { return xs_; }
    std::size_t size() const noexcept { return rounds_.size(); }

    /// Running A = Σ e_i (y_i - p_i).
    double agg_a() const noexcept { return static_cast<double>(agg_a_); }

    double recompute_agg_a() const {
        long double s = 0.0L;
        for (const auto& r : rounds_) s += static_cast<long double>(r.exposure) * r.residual();
        return static_cast<double>(s);
    }

    SCoefficients coefficients(std::span<const double> x) const {
        check_point(x);
        long double b = 0.0L;
        for (std::size_t i = 0; i < rounds_.size(); ++i)
            b += static_cast<long double>(kernel_(x, xs_[i])) * rounds_[i].residual();
        const double kxx = kernel_(x, x);
        return {agg_a(), static_cast<double>(b + 0.5L * kxx), -kxx};
    }

    /// S_n(p,q) at datum x by direct summation over the history.
    double s_value(double p, double q, std::span<const double> x) const {
        check_point(x);
        const double e = game_.choice_exposure({p, q});
        long double s = 0.0L;
        for (std::size_t i = 0; i < rounds_.size(); ++i) {
            const double w = e * rounds_[i].exposure + kernel_(x, xs_[i]);
            s += static_cast<long double>(w) * rounds_[i].residual();
        }
        s += 0.5L * (static_cast<long double>(e) * e + kernel_(x, x)) * (1.0L - 2.0L * p);
        return static_cast<double>(s);
    }

    double s_value(double p, double q, double x) const {
        return s_value(p, q, std::span<const double>(&x, 1));
    }

    RootReport next_forecast(std::span<const double> x) const {
        const SCoefficients k = coefficients(x);
        const SFunction s(game_, k);
        const LexRootOptions lo{options_.epsilon_root, options_.grid, options_.delta0,
                                options_.delta_min};
        const LexRoot root = find_lex_root(s, game_.domain(), lo);
        if (root.branch != RootBranch::Root) return {root.forecast, 0.0, root.branch};

        const double residual = std::abs(root.value);
        if (!(residual <= options_.epsilon_root)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "root finder failed at round " << rounds_.size() + 1 << ": game=" << game_.name()
                << " p=" << root.forecast.p << " q=" << root.forecast.q << " |S|=" << residual
                << " A=" << k.a << " B=" << k.b << " C=" << k.c;
            throw internal_error(msg.str());
        }
        return {root.forecast, residual, RootBranch::Root};
    }

    RootReport next_forecast(double x) const { return next_forecast(std::span<const double>(&x, 1)); }

    /// Appends a round produced by `next_forecast`.
    void update(std::span<const double> x, const RootReport& report, int y) {
        detail::require_binary(y);
        check_point(x);
        const double e = game_.choice_exposure(report.forecast);
        xs_.push_back(x);
        rounds_.push_back({report.forecast, y, e, report.s_residual, report.branch});
        agg_a_ += static_cast<long double>(e) * (static_cast<double>(y) - report.forecast.p);
    }

    void update(double x, const RootReport& report, int y) {
        update(std::span<const double>(&x, 1), report, y);
    }

    /// Appends an arbitrary forecast; its residual |S_n(p,q)| is recomputed.
    void update(std::span<const double> x, Forecast f, int y) {
        const double s = s_value(f.p, f.q, x);
        update(x, RootReport{f, std::abs(s), RootBranch::Root}, y);
    }

    void update(double x, Forecast f, int y) { update(std::span<const double>(&x, 1), f, y); }

    double solver_slack() const noexcept {
        long double s = 0.0L;
        for (const auto& r : rounds_) s += r.s_residual;
        return static_cast<double>(2.0L * s);
    }

    /// Σ p(1-p)(e² + K(x,x)), the right side of the large-number inequality.
    double k29_rhs() const {
        long double s = 0.0L;
        for (std::size_t n = 0; n < rounds_.size(); ++n) {
            const auto& r = rounds_[n];
            s += static_cast<long double>(r.forecast.p) * (1.0 - r.forecast.p) *
                 (static_cast<long double>(r.exposure) * r.exposure + kernel_(xs_[n], xs_[n]));
        }
        return static_cast<double>(s);
    }

    /// Upper bound on the floating-point error of S evaluations and of the
    /// certificate sums, from the magnitudes of the summed terms.
    double rounding_allowance() const {
        long double ae = 0.0L;
        long double ak = 0.0L;
        for (std::size_t n = 0; n < rounds_.size(); ++n) {
            const double r = std::abs(rounds_[n].residual());
            ae += std::abs(rounds_[n].exposure) * r;
            ak += std::sqrt(std::max(0.0, kernel_(xs_[n], xs_[n]))) * r;
        }
        const long double total = ae * ae + ak * ak + static_cast<long double>(k29_rhs());
        const double n = static_cast<double>(rounds_.size()) + 2.0;
        return static_cast<double>(4.0L * n * (DBL_EPSILON / 2) * total);
    }

private:
    void check_point(std::span<const double> x) const {
        if (x.size() != kernel_.dim()) throw rejected_input("datum has the wrong dimension");
    }

    Game game_;
    Kernel kernel_;
    ForecasterOptions options_;
    PointSet xs_;
    std::vector<ForecastRound> rounds_;
    long double agg_a_ = 0.0L;
};

/// S by the coefficient form A·e + B + ½e²(1-2p) + C·p.
inline double s_value_coefficients(const ForecasterState& state, double p, double q,
                                   std::span<const double> x) {
    return SFunction(state.game(), state.coefficients(x)).value(p, q);
}

/// ‖Σ(y_n-p_n)Φ(p_n,q_n,x_n)‖² by the O(N²) kernel double sum, and its bound.
inline K29Certificate k29_certificate(const ForecasterState& state) {
    const auto& rounds = state.rounds();
    const auto& xs = state.points();
    const Kernel& k = state.kernel();
    long double exp_part = 0.0L;
    long double ker_part = 0.0L;
    for (std::size_t n = 0; n < rounds.size(); ++n) {
        const double rn = rounds[n].residual();
        exp_part += static_cast<long double>(rounds[n].exposure) * rn;
        long double row = 0.0L;
        for (std::size_t m = 0; m < n; ++m)
            row += static_cast<long double>(k(xs[n], xs[m])) * rounds[m].residual();
        ker_part += rn * (2.0L * row + static_cast<long double>(k(xs[n], xs[n])) * rn);
    }
    K29Certificate c;
    c.lhs = static_cast<double>(exp_part * exp_part + ker_part);
    c.rhs = state.k29_rhs();
    c.solver_slack = state.solver_slack();
    c.rounding = state.rounding_allowance();
    return c;
}

inline ResolutionCertificate resolution_certificate(const ForecasterState& state,
                                                    const KernelExpansion& f) {
    if (!(f.kernel() == state.kernel()))
        throw rejected_input("resolution certificate: expansion uses a different kernel");
    const auto& rounds = state.rounds();
    long double s = 0.0L;
    long double abs_s = 0.0L;
    for (std::size_t n = 0; n < rounds.size(); ++n) {
        const long double t = static_cast<long double>(rounds[n].residual()) * f(state.points()[n]);
        s += t;
        abs_s += std::abs(t);
    }
    const double norm = rkhs_norm(f);
    const double rhs = state.k29_rhs();
    ResolutionCertificate c;
    c.lhs = static_cast<double>(std::abs(s));
    c.bound = norm * std::sqrt(rhs);
    const double widened = rhs + state.solver_slack() + state.rounding_allowance();
    const double n = static_cast<double>(rounds.size()) + 2.0;
    c.slack = norm * (std::sqrt(widened) - std::sqrt(rhs)) +
              static_cast<double>(4.0L * n * (DBL_EPSILON / 2) * abs_s);
    return c;
}

} // namespace defcast

#endif // DEFCAST_FORECASTER_HPP_
