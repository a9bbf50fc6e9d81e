// Acceptance battery. One PASS/FAIL line per criterion; exit status is the
// number of failed criteria.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "defcast/defcast.hpp"
#include "oracle.hpp"

using namespace defcast;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("violated: " + what);
        }
    }
};

int failures = 0;

void report(const std::string& name, const Verdict& v, const std::string& summary) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << summary << '\n';
    for (const auto& n : v.notes) std::cout << "    " << n << '\n';
    if (!v.pass) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

oracle::Loss to_oracle(const Game& g) {
    switch (g.kind()) {
    case GameKind::Square: return oracle::Loss::Square;
    case GameKind::Absolute: return oracle::Loss::Absolute;
    default: return oracle::Loss::Log;
    }
}

std::vector<Game> builtins() { return {Game::square(), Game::absolute(), Game::log()}; }

// ------------------------------------------------------------ criterion 1 ---

std::string capture(const std::string& cmd, int& status) {
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        status = -1;
        return out;
    }
    std::array<char, 256> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    status = pclose(pipe);
    return out;
}

double field(const std::string& text, const std::string& key) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (line.rfind(key + " = ", 0) == 0) return parse_double(line.substr(key.size() + 3));
    return std::nan("");
}

void constants() {
    Verdict v;
    std::string summary;
    for (const std::string game : {"square", "absolute", "log"}) {
        const auto t0 = Clock::now();
        int status = 0;
        const std::string out =
            capture(std::string(DEFCAST_CLI) + " constants --game " + game + " --kernel sobolev", status);
        const double dt = seconds_since(t0);
        v.require(status == 0, game + ": constants exited with status " + std::to_string(status));
        v.require(dt < 1.0, game + ": runtime " + fmt(dt) + " s");
        const double cf = field(out, "C_F");
        const double cl = field(out, "C_lambda_F");
        v.require(std::abs(cf - 0.7071068) <= 1e-6, game + ": C_F = " + fmt(cf));
        if (game == "square") v.require(cl == 0.375, "square: C_lambda_F = " + fmt(cl));
        if (game == "absolute") v.require(std::abs(cl - 0.6123724) <= 1e-6, "absolute: C_lambda_F = " + fmt(cl));
        if (game == "log") v.require(cl >= 0.688 && cl <= 0.698, "log: C_lambda_F = " + fmt(cl));
        summary += game + " " + fmt(cl) + " (" + fmt(dt) + " s); ";
    }
    report("constants", v, "C_F " + fmt(c_f(Kernel::sobolev())) + "; C_lambda_F " + summary);
}

// ---------------------------------------------------------- criteria 2-4 ---

struct BatteryRun {
    std::string name;
    ExperimentConfig config;
    RunResult result;
    std::vector<Comparator> comparators;
    RegretReport report;
    double seconds = 0.0;
};

ExperimentConfig battery_config(const Game& game, const std::string& gen) {
    json j{{"game", game_to_json(game)}, {"kernel", {{"kind", "sobolev"}}}, {"horizon", 1000}, {"seed", 2024}};
    if (gen == "iid_logistic") j["generator"] = {{"kind", "iid_logistic"}, {"weights", {-0.3, 2.0}}};
    if (gen == "deterministic") j["generator"] = {{"kind", "deterministic"}, {"rule", "x>0"}, {"noise_rate", 0.1}};
    if (gen == "adversarial") j["generator"] = {{"kind", "adversarial"}};
    if (gen == "replay") j["generator"] = {{"kind", "replay"}, {"file", "replay_fixture.csv"}};
    return config_from_json(j, DEFCAST_FIXTURE_DIR);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// The comparator whose exposure follows the generator's own conditional
// probability of y = 1.
KernelExpansion matched(const Game& game, const std::string& gen, const Engine& engine) {
    double ybar = 0.0;
    for (const auto& r : engine.rounds()) ybar += r.y;
    ybar /= static_cast<double>(engine.size());
    auto prob = [&](double x) {
        if (gen == "iid_logistic") return logistic(-0.3 + 2.0 * x);
        if (gen == "deterministic") return x > 0 ? 0.9 : 0.1;
        if (gen == "replay") return logistic(1.5 * x - 0.3);  // the fixture's sampling law
        return ybar;
    };
    std::vector<double> centers;
    std::vector<double> targets;
    for (int i = 0; i <= 8; ++i) {
        const double c = -1.0 + 0.25 * i;
        const double pi = prob(c);
        centers.push_back(c);
        targets.push_back(game.kind() == GameKind::Log ? std::log((1.0 - pi) / pi) : 0.9 * (1.0 - 2.0 * pi));
    }
    return fit_interpolant(Kernel::sobolev(), PointSet::scalars(centers), targets);
}

KernelExpansion random_expansion(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c(5);
    std::vector<double> w(5);
    for (auto& v : c) v = u(rng);
    for (auto& v : w) v = u(rng);
    KernelExpansion f(Kernel::sobolev(), PointSet::scalars(c), w);
    const double norm = rkhs_norm(f);
    if (norm > 1.0) f = f.scaled(1.0 / norm);
    return f;
}

std::vector<BatteryRun> battery() {
    std::vector<BatteryRun> runs;
    std::uint64_t seed = 1;
    for (const Game& g : builtins()) {
        for (const std::string gen : {"iid_logistic", "deterministic", "adversarial", "replay"}) {
            const auto t0 = Clock::now();
            ExperimentConfig config = battery_config(g, gen);
            BatteryRun b{std::string(g.name()) + "/" + gen, config, execute(config), {}, {}, 0.0};
            b.comparators = {Comparator(KernelExpansion::zero(Kernel::sobolev())),
                             Comparator(random_expansion(seed++)),
                             Comparator(matched(g, gen, b.result.engine))};
            b.report = regret_report(b.result.engine, b.comparators);
            b.seconds = seconds_since(t0);
            runs.push_back(std::move(b));
        }
    }
    return runs;
}

double exposure_of(const Game& g, const LoggedRound& r) { return oracle::exposure(to_oracle(g), r.p, r.q); }

// ‖Σ (y-p)(e, k(x,·))‖² recomputed from the logged rounds.
double k29_lhs(const BatteryRun& b) {
    const Engine& e = b.result.engine;
    long double ee = 0.0L;
    long double kk = 0.0L;
    for (std::size_t n = 0; n < e.size(); ++n) {
        const auto& rn = e.rounds()[n];
        const double dn = rn.y - rn.p;
        ee += static_cast<long double>(dn) * exposure_of(e.game(), rn);
        for (std::size_t m = 0; m < e.size(); ++m) {
            const auto& rm = e.rounds()[m];
            kk += static_cast<long double>(dn) * (rm.y - rm.p) * oracle::sobolev(e.points()[n][0], e.points()[m][0]);
        }
    }
    return static_cast<double>(ee * ee + kk);
}

double k29_rhs(const BatteryRun& b) {
    const Engine& e = b.result.engine;
    long double s = 0.0L;
    for (std::size_t n = 0; n < e.size(); ++n) {
        const auto& r = e.rounds()[n];
        const double x = e.points()[n][0];
        const double ex = exposure_of(e.game(), r);
        s += static_cast<long double>(r.p) * (1.0 - r.p) * (ex * ex + oracle::sobolev(x, x));
    }
    return static_cast<double>(s);
}

double residual_sum(const BatteryRun& b) {
    long double s = 0.0L;
    for (const auto& r : b.result.engine.rounds()) s += std::abs(r.s_residual);
    return static_cast<double>(s);
}

void k29(const std::vector<BatteryRun>& runs) {
    Verdict v;
    double worst_margin = INFINITY;
    double slowest = 0.0;
    for (const auto& b : runs) {
        const double lhs = k29_lhs(b);
        const double rhs = k29_rhs(b);
        const double slack = 2.0 * residual_sum(b);
        v.require(lhs <= rhs + slack, b.name + ": lhs " + fmt(lhs) + " > rhs " + fmt(rhs) + " + " + fmt(slack));
        v.require(b.report.k29.holds(), b.name + ": reported certificate fails");
        v.require(std::abs(b.report.k29.lhs - lhs) <= 1e-9 * std::max(1.0, lhs),
                  b.name + ": reported lhs " + fmt(b.report.k29.lhs) + " vs recomputed " + fmt(lhs));
        v.require(b.seconds < 5.0, b.name + ": " + fmt(b.seconds) + " s");
        worst_margin = std::min(worst_margin, (rhs + slack - lhs) / std::max(1.0, rhs));
        slowest = std::max(slowest, b.seconds);
    }
    report("k29_certificate", v,
           std::to_string(runs.size()) + " runs, N=1000; min relative margin " + fmt(worst_margin) +
               "; slowest run " + fmt(slowest) + " s");
}

void regret(const std::vector<BatteryRun>& runs) {
    Verdict v;
    double worst = -INFINITY;
    std::size_t checks = 0;
    for (const auto& b : runs) {
        const Engine& e = b.result.engine;
        const double cl = clambda(e.game(), c_f(Kernel::sobolev()));
        const double n = static_cast<double>(e.size());
        const double sres = residual_sum(b);
        v.require(b.comparators.size() >= 3, b.name + ": fewer than 3 comparators");
        v.require(b.comparators[1].norm() <= 1.0 + 1e-12, b.name + ": random expansion norm above 1");
        for (std::size_t i = 0; i < b.comparators.size(); ++i) {
            const Comparator& c = b.comparators[i];
            long double own = 0.0L;
            long double other = 0.0L;
            for (std::size_t k = 0; k < e.size(); ++k) {
                const auto& r = e.rounds()[k];
                own += r.loss;
                other += e.game().loss(r.y, e.game().decision_from_exposure(c.exposure_fn()(e.points()[k])));
            }
            const double reg = static_cast<double>(own - other);
            const double bound = cl * (c.norm() + 1.0) * std::sqrt(n);
            const double slack = 2.0 * sres * (1.0 + c.norm());
            const std::string tag = b.name + " comparator " + std::to_string(i);
            v.require(reg <= bound + slack, tag + ": regret " + fmt(reg) + " > " + fmt(bound) + " + " + fmt(slack));
            v.require(b.report.rows[i].passed, tag + ": reported row fails");
            v.require(std::abs(b.report.rows[i].regret - reg) <= 1e-8 * std::max(1.0, n),
                      tag + ": reported regret " + fmt(b.report.rows[i].regret) + " vs " + fmt(reg));
            worst = std::max(worst, reg / bound);
            ++checks;
        }
    }
    report("regret_bound", v,
           std::to_string(checks) + " run/comparator pairs; max regret/bound " + fmt(worst));
}

void resolution(const std::vector<BatteryRun>& runs) {
    Verdict v;
    double worst = 0.0;
    std::size_t checks = 0;
    for (const auto& b : runs) {
        const Engine& e = b.result.engine;
        const double rhs = k29_rhs(b);
        for (std::size_t i = 0; i < b.comparators.size(); ++i) {
            const KernelExpansion& f = b.comparators[i].exposure_fn();
            long double s = 0.0L;
            for (std::size_t k = 0; k < e.size(); ++k) s += (e.rounds()[k].y - e.rounds()[k].p) * f(e.points()[k]);
            const double lhs = std::abs(static_cast<double>(s));
            const double bound = b.comparators[i].norm() * std::sqrt(rhs);
            const auto& cert = b.report.rows[i].resolution;
            const std::string tag = b.name + " comparator " + std::to_string(i);
            v.require(lhs <= bound + cert.slack,
                      tag + ": " + fmt(lhs) + " > " + fmt(bound) + " + " + fmt(cert.slack));
            v.require(cert.holds(), tag + ": reported certificate fails");
            if (bound > 0) worst = std::max(worst, lhs / bound);
            ++checks;
        }
    }
    report("resolution", v, std::to_string(checks) + " run/comparator pairs; max lhs/bound " + fmt(worst));
}

// ------------------------------------------------------------ criterion 5 ---

void oracle_equivalence() {
    Verdict v;
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t rounds = 0;
    for (const Game& g : builtins()) {
        const oracle::Path path(to_oracle(g));
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            std::mt19937_64 rng(1000 * static_cast<std::uint64_t>(g.kind()) + seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const std::size_t horizon = 1 + rng() % 50;
            const double slope = 8.0 * u(rng) - 4.0;
            ForecasterState s(g, Kernel::sobolev());
            std::vector<oracle::Round> hist;
            for (std::size_t n = 0; n < horizon; ++n) {
                const double x = 2.0 * u(rng) - 1.0;
                const RootReport rep = s.next_forecast(x);
                const auto want = path.root(hist, x);
                const double err = std::abs(rep.forecast.p - want.p);
                worst = std::max(worst, err);
                v.require(err <= 1e-6, std::string(g.name()) + " seed " + std::to_string(seed) + " round " +
                                           std::to_string(n + 1) + ": p " + fmt(rep.forecast.p) +
                                           " vs oracle " + fmt(want.p));
                const int y = u(rng) < logistic(slope * x) ? 1 : 0;
                s.update(x, rep, y);
                hist.push_back({x, rep.forecast.p, rep.forecast.q, y});
                ++rounds;
            }
        }
    }
    const double dt = seconds_since(t0);
    v.require(dt < 60.0, "runtime " + fmt(dt) + " s");
    report("oracle_equivalence", v,
           "150 runs, " + std::to_string(rounds) + " rounds; max |p - oracle| " + fmt(worst) + "; " + fmt(dt) + " s");
}

// ------------------------------------------------------------ criterion 6 ---

// Real root of 2e³ + e + 1 by bisection; the cubic is increasing.
double cubic_root() {
    double lo = -1.0;
    double hi = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (2 * mid * mid * mid + mid + 1 > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

void worked_traces() {
    Verdict v;
    Engine sq(Game::square(), Kernel::sobolev());
    sq.decide(0.0);
    const double p1 = sq.pending_report().forecast.p;
    sq.observe(1);
    sq.decide(0.0);
    const double p2 = sq.pending_report().forecast.p;
    const double want = (1.0 - cubic_root()) / 2.0;
    v.require(std::abs(p1 - 0.5) <= 1e-6, "square p1 = " + fmt(p1));
    v.require(std::abs(p2 - want) <= 1e-6, "square p2 = " + fmt(p2) + ", cubic root gives " + fmt(want));

    Engine ab(Game::absolute(), Kernel::sobolev());
    ab.decide(0.0);
    const Forecast f = ab.pending_report().forecast;
    v.require(std::abs(f.p - 0.5) <= 1e-6 && std::abs(f.q - 0.5) <= 1e-6,
              "absolute round 1 = (" + fmt(f.p) + ", " + fmt(f.q) + ")");
    report("worked_traces", v,
           "square p1 " + fmt(p1) + ", p2 " + fmt(p2) + " (cubic " + fmt(want) + "); absolute (" + fmt(f.p) + ", " +
               fmt(f.q) + ")");
}

// ------------------------------------------------------------ criterion 7 ---

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism() {
    Verdict v;
    std::vector<std::pair<std::string, ExperimentConfig>> configs;
    for (const auto& entry : fs::directory_iterator(DEFCAST_CONFIG_DIR))
        if (entry.path().extension() == ".json") configs.emplace_back(entry.path().filename().string(), load_config(entry.path()));
    for (const Game& g : builtins())
        for (const std::string gen : {"iid_logistic", "deterministic", "adversarial", "replay"}) {
            ExperimentConfig c = battery_config(g, gen);
            c.horizon = 200;
            configs.emplace_back(std::string(g.name()) + "/" + gen, c);
        }
    const fs::path root = fs::temp_directory_path() / "defcast_acceptance";
    std::size_t i = 0;
    for (const auto& [name, c] : configs) {
        const fs::path a = root / (std::to_string(i) + "a");
        const fs::path b = root / (std::to_string(i) + "b");
        ++i;
        fs::remove_all(a);
        fs::remove_all(b);
        const RunArtifacts ra = run(c, a);
        const RunArtifacts rb = run(c, b);
        v.require(slurp(ra.round_log_path) == slurp(rb.round_log_path), name + ": round logs differ");
        v.require(slurp(ra.regret_report_path) == slurp(rb.regret_report_path), name + ": reports differ");
        v.require(slurp(ra.config_path) == slurp(rb.config_path), name + ": configs differ");
    }
    fs::remove_all(root);
    report("determinism", v, std::to_string(configs.size()) + " configs run twice, artifacts compared byte for byte");
}

} // namespace

int main() {
    try {
        constants();
        const auto runs = battery();
        k29(runs);
        regret(runs);
        resolution(runs);
        oracle_equivalence();
        worked_traces();
        determinism();
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << '\n';
        return 100;
    }
    std::cout << (failures == 0 ? "all criteria pass\n" : std::to_string(failures) + " criteria fail\n");
    return failures;
}
