#ifndef DEFCAST_EXPERIMENT_HPP_
#define DEFCAST_EXPERIMENT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "defcast/errors.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/game.hpp"
#include "defcast/io.hpp"
#include "defcast/kernel.hpp"
#include "defcast/protocol.hpp"

namespace defcast {

// ------------------------------------------------------------ randomness ---

/// splitmix64 finaliser.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform [0,1) draw keyed by (seed, round, stream); no generator state.
inline double counter_uniform(std::uint64_t seed, std::uint64_t round, std::uint64_t stream) noexcept {
    const std::uint64_t z = mix64(seed ^ mix64(round * 4 + stream));
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------- config ---

enum class GeneratorKind { IidLogistic, Deterministic, AdversarialAntiForecast, Replay };

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::IidLogistic;
    std::vector<double> weights{0.0, 1.0};  // logistic: coefficients of 1, x, x², ...
    char rule_op = '>';                     // deterministic: y = [x > threshold] or [x < threshold]
    double threshold = 0.0;
    double noise_rate = 0.0;
    std::string replay_file;
};

struct ExperimentConfig {
    Game game = Game::square();
    Kernel kernel = Kernel::sobolev();
    GeneratorSpec generator;
    std::size_t horizon = 1;
    std::uint64_t seed = 0;
    std::vector<KernelExpansion> comparators;
    double epsilon_root = 1e-9;

    void validate() const {
        if (horizon < 1) throw rejected_input("horizon must be at least 1");
        if (!(generator.noise_rate >= 0.0 && generator.noise_rate <= 0.5))
            throw rejected_input("noise_rate must lie in [0, 1/2]");
        if (!(epsilon_root > 0.0)) throw rejected_input("epsilon_root must be positive");
        if (generator.kind == GeneratorKind::Replay && generator.replay_file.empty())
            throw rejected_input("replay generator needs a file");
        if (generator.kind == GeneratorKind::IidLogistic && generator.weights.empty())
            throw rejected_input("logistic generator needs at least one weight");
        for (const auto& c : comparators)
            if (!(c.kernel() == kernel)) throw rejected_input("comparator kernel differs from the run kernel");
    }
};

inline std::pair<char, double> parse_rule(const std::string& rule) {
    std::string s;
    for (char ch : rule)
        if (ch != ' ') s += ch;
    if (s.size() < 3 || s[0] != 'x' || (s[1] != '>' && s[1] != '<'))
        throw rejected_input("rule must look like \"x>c\" or \"x<c\", got '" + rule + "'");
    try {
        return {s[1], parse_double(std::string_view(s).substr(2))};
    } catch (const std::invalid_argument&) {
        throw rejected_input("rule threshold is not a number: '" + rule + "'");
    }
}

/// Relative replay paths are resolved against `base_dir`.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    try {
        ExperimentConfig c;
        c.game = game_from_json(j.at("game"));
        c.kernel = kernel_from_json(j.value("kernel", json{{"kind", "sobolev"}}));
        const json& g = j.at("generator");
        const auto kind = g.at("kind").get<std::string>();
        if (kind == "iid_logistic") {
            c.generator.kind = GeneratorKind::IidLogistic;
            c.generator.weights = g.value("weights", std::vector<double>{0.0, 1.0});
        } else if (kind == "deterministic") {
            c.generator.kind = GeneratorKind::Deterministic;
            std::tie(c.generator.rule_op, c.generator.threshold) = parse_rule(g.value("rule", std::string("x>0")));
            c.generator.noise_rate = g.value("noise_rate", 0.0);
        } else if (kind == "adversarial") {
            c.generator.kind = GeneratorKind::AdversarialAntiForecast;
        } else if (kind == "replay") {
            c.generator.kind = GeneratorKind::Replay;
            std::filesystem::path file = g.at("file").get<std::string>();
            if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
            c.generator.replay_file = file.string();
        } else {
            throw rejected_input("unknown generator kind '" + kind + "'");
        }
        const json& h = j.at("horizon");
        if (!h.is_number_integer() || h.get<long long>() < 1) throw rejected_input("horizon must be an integer >= 1");
        c.horizon = h.get<std::size_t>();
        c.seed = j.value("seed", std::uint64_t{0});
        for (const auto& e : j.value("comparators", json::array()))
            c.comparators.push_back(expansion_from_json(e, c.kernel));
        c.epsilon_root = j.value("epsilon_root", 1e-9);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw rejected_input(std::string("malformed config: ") + e.what());
    }
}

inline json config_to_json(const ExperimentConfig& c) {
    json g;
    switch (c.generator.kind) {
    case GeneratorKind::IidLogistic: g = {{"kind", "iid_logistic"}, {"weights", c.generator.weights}}; break;
    case GeneratorKind::Deterministic:
        g = {{"kind", "deterministic"},
             {"rule", std::string("x") + c.generator.rule_op + format_double(c.generator.threshold)},
             {"noise_rate", c.generator.noise_rate}};
        break;
    case GeneratorKind::AdversarialAntiForecast: g = {{"kind", "adversarial"}}; break;
    case GeneratorKind::Replay: g = {{"kind", "replay"}, {"file", c.generator.replay_file}}; break;
    }
    json comps = json::array();
    for (const auto& f : c.comparators) comps.push_back(expansion_to_json(f));
    return {{"game", game_to_json(c.game)}, {"kernel", kernel_to_json(c.kernel)}, {"generator", g},
            {"horizon", c.horizon},          {"seed", c.seed},                     {"comparators", comps},
            {"epsilon_root", c.epsilon_root}};
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw rejected_input("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw rejected_input("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

// ------------------------------------------------------------ generation ---

/// Reality's moves. Data x are uniform on [-1, 1] unless replayed; every
/// draw depends only on (seed, round).
class Generator {
public:
    explicit Generator(const ExperimentConfig& config) : spec_(config.generator), seed_(config.seed) {
        if (spec_.kind == GeneratorKind::Replay) {
            std::ifstream in(spec_.replay_file);
            if (!in) throw rejected_input("cannot open replay file " + spec_.replay_file);
            replay_ = read_observations(in);
            if (replay_.size() < config.horizon)
                throw rejected_input("replay file has " + std::to_string(replay_.size()) +
                                     " rows, horizon is " + std::to_string(config.horizon));
        }
    }

    /// Datum for round n (1-based).
    std::vector<double> next_x(std::size_t n) const {
        if (spec_.kind == GeneratorKind::Replay) return replay_.at(n - 1).x;
        return {2.0 * counter_uniform(seed_, n, 0) - 1.0};
    }

    /// Observation for round n given the datum and the forecast p_n.
    int next_y(std::size_t n, std::span<const double> x, double p) const {
        switch (spec_.kind) {
        case GeneratorKind::IidLogistic: {
            double z = 0.0;
            double pow = 1.0;
            for (double w : spec_.weights) {
                z += w * pow;
                pow *= x[0];
            }
            const double prob = 1.0 / (1.0 + std::exp(-z));
            return counter_uniform(seed_, n, 1) < prob ? 1 : 0;
        }
        case GeneratorKind::Deterministic: {
            int y = spec_.rule_op == '>' ? (x[0] > spec_.threshold) : (x[0] < spec_.threshold);
            if (counter_uniform(seed_, n, 2) < spec_.noise_rate) y = 1 - y;
            return y;
        }
        case GeneratorKind::AdversarialAntiForecast: return p <= 0.5 ? 1 : 0;
        case GeneratorKind::Replay: return replay_.at(n - 1).y;
        }
        return 0;
    }

private:
    GeneratorSpec spec_;
    std::uint64_t seed_;
    std::vector<Observation> replay_;
};

// ------------------------------------------------------------------- run ---

inline void play_rounds(Engine& engine, const Generator& gen, std::size_t horizon) {
    for (std::size_t n = 1; n <= horizon; ++n) {
        const std::vector<double> x = gen.next_x(n);
        engine.decide(x);
        const int y = gen.next_y(n, x, engine.pending_report().forecast.p);
        engine.observe(y);
    }
}

struct RunResult {
    Engine engine;
    std::vector<Comparator> comparators;
    RegretReport report;
};

inline RunResult execute(const ExperimentConfig& config) {
    config.validate();
    ForecasterOptions opt;
    opt.epsilon_root = config.epsilon_root;
    Engine engine(config.game, config.kernel, opt);
    play_rounds(engine, Generator(config), config.horizon);
    std::vector<Comparator> comps;
    for (const auto& f : config.comparators) comps.emplace_back(f);
    RegretReport rep = regret_report(engine, comps);
    return {std::move(engine), std::move(comps), std::move(rep)};
}

inline void write_round_log(std::ostream& os, const Engine& engine) {
    os << kRoundLogHeader << '\n';
    for (std::size_t n = 0; n < engine.size(); ++n) {
        const auto& r = engine.rounds()[n];
        const auto x = engine.points()[n];
        write_round_log_row(os, {n + 1, std::vector<double>(x.begin(), x.end()), r.p, r.q, r.gamma,
                                 r.y, r.loss, r.s_residual, r.branch});
    }
}

inline json k29_to_json(const K29Certificate& c) {
    return {{"lhs", c.lhs},
            {"rhs", c.rhs},
            {"solver_slack", c.solver_slack},
            {"rounding", c.rounding},
            {"pass", c.holds()}};
}

inline json report_to_json(const Engine& engine, std::span<const Comparator> comps,
                           const RegretReport& rep) {
    json rows = json::array();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& r = rep.rows[i];
        json curve = json::array();
        for (const auto& pt : regret_curve(engine, comps[i]))
            curve.push_back({{"n", pt.n},
                             {"own_loss", pt.own_loss},
                             {"comparator_loss", pt.comparator_loss},
                             {"regret", pt.regret},
                             {"bound", number_or_unbounded(pt.bound)}});
        rows.push_back({{"exposure_fn", expansion_to_json(comps[i].exposure_fn())},
                        {"norm", r.norm},
                        {"own_loss", r.own_loss},
                        {"comparator_loss", r.comparator_loss},
                        {"regret", r.regret},
                        {"bound", number_or_unbounded(r.bound)},
                        {"slack", r.slack},
                        {"pass", r.passed},
                        {"curve", curve},
                        {"resolution",
                         {{"lhs", r.resolution.lhs},
                          {"bound", r.resolution.bound},
                          {"slack", r.resolution.slack},
                          {"pass", r.resolution.holds()}}}});
    }
    return {{"game", game_to_json(engine.game())},
            {"kernel", kernel_to_json(engine.kernel())},
            {"rounds", rep.rounds},
            {"cumulative_loss", engine.cumulative_loss()},
            {"c_f", number_or_unbounded(rep.c_f)},
            {"c_lambda_f", number_or_unbounded(rep.c_lambda_f)},
            {"solver_slack", engine.forecaster().solver_slack()},
            {"k29", k29_to_json(rep.k29)},
            {"comparators", rows},
            {"all_pass", rep.all_passed()}};
}

struct RunArtifacts {
    std::filesystem::path round_log_path;
    std::filesystem::path regret_report_path;
    std::filesystem::path config_path;
    bool k29_pass = false;
    bool regret_pass = false;
    bool resolution_pass = false;

    bool all_pass() const noexcept { return k29_pass && regret_pass && resolution_pass; }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rejected_input("cannot write " + path.string());
    out << text;
}

/// Runs the protocol and writes rounds.csv, report.json and config.json
/// into `out_dir`. On a forecaster failure the rounds completed so far are
/// written to rounds.csv before the error propagates.
inline RunArtifacts run(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    RunArtifacts art;
    art.round_log_path = out_dir / "rounds.csv";
    art.regret_report_path = out_dir / "report.json";
    art.config_path = out_dir / "config.json";
    write_text(art.config_path, config_to_json(config).dump(2) + "\n");

    ForecasterOptions opt;
    opt.epsilon_root = config.epsilon_root;
    Engine engine(config.game, config.kernel, opt);
    try {
        play_rounds(engine, Generator(config), config.horizon);
    } catch (const internal_error&) {
        std::ostringstream log;
        write_round_log(log, engine);
        write_text(art.round_log_path, log.str());
        throw;
    }

    std::vector<Comparator> comps;
    for (const auto& f : config.comparators) comps.emplace_back(f);
    const RegretReport rep = regret_report(engine, comps);

    std::ostringstream log;
    write_round_log(log, engine);
    write_text(art.round_log_path, log.str());
    write_text(art.regret_report_path, report_to_json(engine, comps, rep).dump(2) + "\n");

    art.k29_pass = rep.k29.holds();
    art.regret_pass = true;
    art.resolution_pass = true;
    for (const auto& r : rep.rows) {
        art.regret_pass = art.regret_pass && r.passed;
        art.resolution_pass = art.resolution_pass && r.resolution.holds();
    }
    return art;
}

// --------------------------------------------------------------- certify ---

struct CertifyResult {
    Engine engine;
    std::vector<Comparator> comparators;
    RegretReport report;
    std::size_t inconsistent_rows = 0;  // gamma/loss columns disagreeing with G(p,q)
    std::size_t non_roots = 0;          // forecasts that fail the root or endpoint condition

    bool all_pass() const noexcept {
        return inconsistent_rows == 0 && non_roots == 0 && report.all_passed();
    }
};

/// Rebuilds the engine from a round log and recomputes every certificate.
/// The logged s_residual column is not trusted: S_n is re-evaluated at each
/// logged forecast. A root row needs |S_n| <= epsilon_root; an endpoint row
/// needs p at the matching end and S_n of the matching sign.
inline CertifyResult certify(const std::vector<RoundLogRow>& rows, const Game& game,
                             const Kernel& kernel, const std::vector<KernelExpansion>& comparators,
                             double epsilon_root = 1e-9) {
    ForecasterOptions opt;
    opt.epsilon_root = epsilon_root;
    Engine engine(game, kernel, opt);
    std::size_t bad = 0;
    std::size_t off = 0;
    for (const auto& r : rows) {
        if (!game.in_domain(r.p) || !(r.q >= 0.0 && r.q <= 1.0))
            throw rejected_input("round " + std::to_string(r.n) + ": forecast outside the game's domain");
        const double s = engine.forecaster().s_value(r.p, r.q, r.x);
        const double residual = r.branch == RootBranch::Root
                                    ? std::abs(s)
                                    : std::max(0.0, (static_cast<double>(r.y) - r.p) * s);
        switch (r.branch) {
        case RootBranch::Root: off += !(std::abs(s) <= epsilon_root); break;
        case RootBranch::EndpointPositive: off += !(r.p == 1.0 && s >= 0.0); break;
        case RootBranch::EndpointNegative: off += !(r.p == 0.0 && s <= 0.0); break;
        }
        engine.record(r.x, RootReport{{r.p, r.q}, residual, r.branch}, r.y);
        const auto& logged = engine.rounds().back();
        if (std::abs(logged.gamma - r.gamma) > 1e-12 || std::abs(logged.loss - r.loss) > 1e-12) ++bad;
    }
    std::vector<Comparator> comps;
    for (const auto& f : comparators) comps.emplace_back(f);
    RegretReport rep = regret_report(engine, comps);
    return {std::move(engine), std::move(comps), std::move(rep), bad, off};
}

} // namespace defcast

#endif // DEFCAST_EXPERIMENT_HPP_
