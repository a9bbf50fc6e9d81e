#ifndef DEFCAST_PROTOCOL_HPP_
#define DEFCAST_PROTOCOL_HPP_

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "defcast/errors.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/game.hpp"
#include "defcast/kernel.hpp"

namespace defcast {

struct LoggedRound {
    double p = 0.0;
    double q = 0.0;
    double gamma = 0.0;
    int y = 0;
    double loss = 0.0;
    double s_residual = 0.0;
    RootBranch branch = RootBranch::Root;
};

/// The online decision loop: datum -> decision -> observation.
class Engine {
public:
    Engine(Game game, Kernel kernel, ForecasterOptions options = {})
        : forecaster_(std::move(game), std::move(kernel), options) {}

    const Game& game() const noexcept { return forecaster_.game(); }
    const Kernel& kernel() const noexcept { return forecaster_.kernel(); }
    const ForecasterState& forecaster() const noexcept { return forecaster_; }
    const std::vector<LoggedRound>& rounds() const noexcept { return log_; }
    const PointSet& points() const noexcept { return forecaster_.points(); }
    std::size_t size() const noexcept { return log_.size(); }
    bool awaiting_observation() const noexcept { return pending_.has_value(); }
    double cumulative_loss() const noexcept { return static_cast<double>(cumulative_loss_); }

    /// γ_n = G(p_n, q_n) for the forecast computed at x.
    double decide(std::span<const double> x) {
        if (pending_) throw usage_error("decide called while an observation is pending");
        const RootReport report = forecaster_.next_forecast(x);
        const Decision d = game().canonical_choice(report.forecast);
        pending_ = Pending{std::vector<double>(x.begin(), x.end()), report, d.gamma};
        return d.gamma;
    }

    double decide(double x) { return decide(std::span<const double>(&x, 1)); }

    /// The forecast behind the pending decision.
    const RootReport& pending_report() const {
        if (!pending_) throw usage_error("no pending decision");
        return pending_->report;
    }

    void observe(int y) {
        if (!pending_) throw usage_error("observe called without a pending decision");
        Pending p = std::move(*pending_);
        pending_.reset();
        record(p.x, p.report, y);
    }

    /// Appends a completed round without running the forecaster (log replay).
    void record(std::span<const double> x, const RootReport& report, int y) {
        if (pending_) throw usage_error("record called while an observation is pending");
        const Decision d = game().canonical_choice(report.forecast);
        const double loss = game().loss(y, d.gamma);
        forecaster_.update(x, report, y);
        log_.push_back({report.forecast.p, report.forecast.q, d.gamma, y, loss, report.s_residual,
                        report.branch});
        cumulative_loss_ += loss;
    }

private:
    struct Pending {
        std::vector<double> x;
        RootReport report;
        double gamma;
    };

    ForecasterState forecaster_;
    long double cumulative_loss_ = 0.0L;
    std::vector<LoggedRound> log_;
    std::optional<Pending> pending_;
};

/// A benchmark rule D given through its exposure Exp_{λ,D} ∈ F.
class Comparator {
public:
    explicit Comparator(KernelExpansion exposure_fn)
        : exposure_fn_(std::move(exposure_fn)), norm_(rkhs_norm(exposure_fn_)) {}

    const KernelExpansion& exposure_fn() const noexcept { return exposure_fn_; }
    double norm() const noexcept { return norm_; }

    /// D(x) = decision whose exposure is f(x). Rejects exposures the game
    /// cannot realise instead of clamping them.
    double decision(const Game& game, std::span<const double> x) const {
        const double e = exposure_fn_(x);
        const auto [lo, hi] = game.exposure_range();
        if (!(e >= lo && e <= hi))
            throw rejected_input("rejected comparator: exposure " + std::to_string(e) +
                                 " outside the game's range");
        return game.decision_from_exposure(e);
    }

private:
    KernelExpansion exposure_fn_;
    double norm_;
};

/// λ(y_n, D(x_n)) for every logged round.
inline std::vector<double> comparator_round_losses(const Engine& engine, const Comparator& c) {
    std::vector<double> out;
    out.reserve(engine.size());
    for (std::size_t n = 0; n < engine.size(); ++n) {
        const double gamma = c.decision(engine.game(), engine.points()[n]);
        out.push_back(engine.game().loss(engine.rounds()[n].y, gamma));
    }
    return out;
}

inline double comparator_loss(const Engine& engine, const Comparator& c) {
    if (engine.size() == 0) throw usage_error("comparator_loss needs completed rounds");
    long double s = 0.0L;
    for (double v : comparator_round_losses(engine, c)) s += v;
    return static_cast<double>(s);
}

/// C_{λ,F}(‖Exp_D‖ + 1)√N; +inf when C_{λ,F} is unbounded.
inline double regret_bound(const Game& game, const Kernel& kernel, double norm, std::size_t n) {
    if (n == 0) return 0.0;
    const double cf = c_f(kernel);
    if (!std::isfinite(cf)) return std::numeric_limits<double>::infinity();
    const double cl = clambda(game, cf);
    return cl * (norm + 1.0) * std::sqrt(static_cast<double>(n));
}

inline double regret_bound(const Engine& engine, const Comparator& c) {
    if (!(c.exposure_fn().kernel() == engine.kernel()))
        throw rejected_input("comparator expansion uses a different kernel than the engine");
    return regret_bound(engine.game(), engine.kernel(), c.norm(), engine.size());
}

/// Allowance for inexact roots in the regret inequality:
/// (1 + ‖Exp_D‖)·sqrt(2Σ|s_n| + rounding).
inline double regret_slack(const ForecasterState& state, double norm) {
    return (1.0 + norm) * std::sqrt(state.solver_slack() + state.rounding_allowance());
}

struct RegretRow {
    double norm = 0.0;
    double own_loss = 0.0;
    double comparator_loss = 0.0;
    double regret = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool passed = false;
    ResolutionCertificate resolution;
};

struct RegretReport {
    std::size_t rounds = 0;
    double c_f = 0.0;
    double c_lambda_f = 0.0;
    K29Certificate k29;
    std::vector<RegretRow> rows;

    bool all_passed() const noexcept {
        if (!k29.holds()) return false;
        for (const auto& r : rows)
            if (!r.passed || !r.resolution.holds()) return false;
        return true;
    }
};

inline RegretReport regret_report(const Engine& engine, std::span<const Comparator> comparators) {
    RegretReport rep;
    rep.rounds = engine.size();
    rep.c_f = c_f(engine.kernel());
    rep.c_lambda_f = std::isfinite(rep.c_f) ? clambda(engine.game(), rep.c_f)
                                            : std::numeric_limits<double>::infinity();
    rep.k29 = k29_certificate(engine.forecaster());
    for (const auto& c : comparators) {
        RegretRow row;
        row.norm = c.norm();
        row.own_loss = engine.cumulative_loss();
        row.comparator_loss = engine.size() ? comparator_loss(engine, c) : 0.0;
        row.regret = row.own_loss - row.comparator_loss;
        row.bound = regret_bound(engine, c);
        row.slack = regret_slack(engine.forecaster(), c.norm());
        row.passed = row.regret <= row.bound + row.slack;
        row.resolution = resolution_certificate(engine.forecaster(), c.exposure_fn());
        rep.rows.push_back(row);
    }
    return rep;
}

struct CurvePoint {
    std::size_t n = 0;
    double own_loss = 0.0;
    double comparator_loss = 0.0;
    double regret = 0.0;
    double bound = 0.0;
};

/// Regret and bound at N = 1, 2, 4, ... and at the final round.
inline std::vector<CurvePoint> regret_curve(const Engine& engine, const Comparator& c) {
    std::vector<CurvePoint> out;
    const std::vector<double> comp = comparator_round_losses(engine, c);
    long double own = 0.0L;
    long double other = 0.0L;
    std::size_t next = 1;
    for (std::size_t n = 0; n < engine.size(); ++n) {
        own += engine.rounds()[n].loss;
        other += comp[n];
        const std::size_t count = n + 1;
        if (count == next || count == engine.size()) {
            CurvePoint pt;
            pt.n = count;
            pt.own_loss = static_cast<double>(own);
            pt.comparator_loss = static_cast<double>(other);
            pt.regret = static_cast<double>(own - other);
            pt.bound = regret_bound(engine.game(), engine.kernel(), c.norm(), count);
            out.push_back(pt);
            while (next <= count) next *= 2;
        }
    }
    return out;
}

} // namespace defcast

#endif // DEFCAST_PROTOCOL_HPP_
