// defcast: run experiments, re-certify round logs, print game/kernel constants.
//
//   defcast run --config <path> --out <dir>
//   defcast certify --log <csv> [--config <path> | --game <name> --kernel <name>]
//   defcast constants --game <name> --kernel <name> [--width w] [--offset o] [--range lo hi]
//
// Exit status is 0 iff every inequality checked by the command holds.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "defcast/experiment.hpp"

namespace {

constexpr int kViolation = 1;
constexpr int kError = 2;

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

defcast::Kernel kernel_from_flags(const std::string& name, double width, double offset,
                                  const std::vector<double>& range) {
    defcast::json j{{"kind", name}};
    if (name == "gaussian") j["width"] = width;
    if (name == "linear") j["offset"] = offset;
    if (range.size() == 2) j["range"] = range;
    return defcast::kernel_from_json(j);
}

void print_summary(const defcast::RegretReport& rep) {
    using defcast::format_double;
    std::cout << "rounds: " << rep.rounds << '\n';
    std::cout << "k29: lhs=" << format_double(rep.k29.lhs) << " rhs=" << format_double(rep.k29.rhs)
              << " slack=" << format_double(rep.k29.solver_slack + rep.k29.rounding) << ' '
              << verdict(rep.k29.holds()) << '\n';
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        std::cout << "comparator " << i << ": norm=" << format_double(r.norm)
                  << " regret=" << format_double(r.regret) << " bound=" << format_double(r.bound)
                  << ' ' << verdict(r.passed) << "; resolution lhs="
                  << format_double(r.resolution.lhs) << " bound=" << format_double(r.resolution.bound)
                  << ' ' << verdict(r.resolution.holds()) << '\n';
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    const auto config = defcast::load_config(config_path);
    const auto art = defcast::run(config, out_dir);
    std::cout << "round log: " << art.round_log_path.string() << '\n'
              << "report: " << art.regret_report_path.string() << '\n'
              << "k29 " << verdict(art.k29_pass) << ", regret " << verdict(art.regret_pass)
              << ", resolution " << verdict(art.resolution_pass) << '\n';
    return art.all_pass() ? 0 : kViolation;
}

int cmd_certify(const std::string& log_path, const std::string& config_path,
                const std::string& game_name, const std::string& kernel_name, double width,
                double offset, const std::vector<double>& range) {
    std::ifstream in(log_path);
    if (!in) throw defcast::rejected_input("cannot open round log " + log_path);
    const auto rows = defcast::read_round_log(in);

    defcast::Game game = defcast::Game::by_name(game_name);
    defcast::Kernel kernel = kernel_from_flags(kernel_name, width, offset, range);
    std::vector<defcast::KernelExpansion> comps;
    double eps = 1e-9;
    if (!config_path.empty()) {
        const auto config = defcast::load_config(config_path);
        game = config.game;
        kernel = config.kernel;
        comps = config.comparators;
        eps = config.epsilon_root;
    }
    const auto res = defcast::certify(rows, game, kernel, comps, eps);
    print_summary(res.report);
    if (res.inconsistent_rows)
        std::cout << res.inconsistent_rows << " rows disagree with the canonical choice function\n";
    if (res.non_roots)
        std::cout << res.non_roots << " rows are not roots or valid endpoints of S_n\n";
    return res.all_pass() ? 0 : kViolation;
}

int cmd_constants(const std::string& game_name, const std::string& config_path,
                  const std::string& kernel_name, double width, double offset,
                  const std::vector<double>& range) {
    defcast::Game game = defcast::Game::square();
    defcast::Kernel kernel = defcast::Kernel::sobolev();
    if (!config_path.empty()) {
        const auto config = defcast::load_config(config_path);
        game = config.game;
        kernel = config.kernel;
    } else {
        game = defcast::Game::by_name(game_name);
        kernel = kernel_from_flags(kernel_name, width, offset, range);
    }
    const double cf = defcast::c_f(kernel);
    char buf[64];
    std::cout << "game: " << game.name() << '\n' << "kernel: " << kernel.name() << '\n';
    if (!std::isfinite(cf)) {
        std::cout << "C_F = unbounded\nC_lambda_F = unbounded\n";
        return kViolation;
    }
    std::snprintf(buf, sizeof buf, "%.10g", cf);
    std::cout << "C_F = " << buf << '\n';
    const double cl = defcast::clambda(game, cf);
    if (!std::isfinite(cl)) {
        std::cout << "C_lambda_F = unbounded\n";
        return kViolation;
    }
    std::snprintf(buf, sizeof buf, "%.10g", cl);
    std::cout << "C_lambda_F = " << buf << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel defensive forecasting for binary decision games"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory")->required();

    std::string log_path;
    std::string game_name = "square";
    std::string kernel_name = "sobolev";
    double width = 1.0;
    double offset = 0.0;
    std::vector<double> range;
    std::string cert_config;
    auto* certify = app.add_subcommand("certify", "recompute certificates from a round log");
    certify->add_option("--log", log_path, "round log CSV")->required()->check(CLI::ExistingFile);
    certify->add_option("--config", cert_config, "config that produced the log")->check(CLI::ExistingFile);
    certify->add_option("--game", game_name, "square | absolute | log");
    certify->add_option("--kernel", kernel_name, "sobolev | gaussian | linear");
    certify->add_option("--width", width, "gaussian width");
    certify->add_option("--offset", offset, "linear kernel offset");
    certify->add_option("--range", range, "declared data range lo hi")->expected(2);

    std::string const_config;
    auto* constants = app.add_subcommand("constants", "print C_F and C_lambda_F");
    constants->add_option("--game", game_name, "square | absolute | log");
    constants->add_option("--kernel", kernel_name, "sobolev | gaussian | linear");
    constants->add_option("--config", const_config, "take game and kernel from a config")->check(CLI::ExistingFile);
    constants->add_option("--width", width, "gaussian width");
    constants->add_option("--offset", offset, "linear kernel offset");
    constants->add_option("--range", range, "declared data range lo hi")->expected(2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kError;
    }

    try {
        if (*run) return cmd_run(config_path, out_dir);
        if (*certify)
            return cmd_certify(log_path, cert_config, game_name, kernel_name, width, offset, range);
        if (*constants)
            return cmd_constants(game_name, const_config, kernel_name, width, offset, range);
    } catch (const defcast::parse_error& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kError;
}
