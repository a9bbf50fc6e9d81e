#ifndef DEFCAST_IO_HPP_
#define DEFCAST_IO_HPP_

// JSON conversions for games, kernels and expansions, shortest round-trip
// number formatting, and the round-log CSV format.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "defcast/errors.hpp"
#include "defcast/game.hpp"
#include "defcast/kernel.hpp"
#include "defcast/lexroot.hpp"

namespace defcast {

using json = nlohmann::json;

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

/// Finite numbers as JSON numbers, infinities as the string "unbounded".
inline json number_or_unbounded(double v) {
    if (std::isfinite(v)) return v;
    return "unbounded";
}

// ---------------------------------------------------------------- games ---

inline Game game_from_json(const json& j) {
    if (j.is_string()) return Game::by_name(j.get<std::string>());
    if (!j.is_object() || !j.contains("kind"))
        throw rejected_input("game must be a name or an object with a \"kind\"");
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "custom") return Game::by_name(kind);
    if (!j.contains("boundary") || !j.at("boundary").is_array())
        throw rejected_input("custom game needs a \"boundary\" array");
    std::vector<LossPair> pts;
    for (const auto& v : j.at("boundary")) {
        if (!v.is_array() || v.size() != 2)
            throw rejected_input("boundary points must be [loss0, loss1] pairs");
        pts.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return Game::custom(std::move(pts));
}

inline json game_to_json(const Game& g) {
    if (g.kind() != GameKind::Custom) return std::string(g.name());
    json b = json::array();
    for (const auto& v : g.boundary()) b.push_back({v.loss0, v.loss1});
    return {{"kind", "custom"}, {"boundary", b}};
}

// -------------------------------------------------------------- kernels ---

inline Kernel kernel_from_json(const json& j) {
    const json obj = j.is_string() ? json{{"kind", j.get<std::string>()}} : j;
    if (!obj.is_object() || !obj.contains("kind"))
        throw rejected_input("kernel must be an object with a \"kind\"");
    const auto kind = obj.at("kind").get<std::string>();
    Kernel k = Kernel::sobolev();
    if (kind == "sobolev")
        k = Kernel::sobolev();
    else if (kind == "gaussian")
        k = Kernel::gaussian(obj.value("width", 1.0));
    else if (kind == "linear")
        k = Kernel::linear(obj.value("offset", 0.0));
    else
        throw rejected_input("unknown kernel kind '" + kind + "'");
    if (obj.contains("range")) {
        const auto& r = obj.at("range");
        if (!r.is_array() || r.size() != 2) throw rejected_input("kernel range must be [lo, hi]");
        k = k.with_range(r[0].get<double>(), r[1].get<double>());
    }
    return k;
}

inline json kernel_to_json(const Kernel& k) {
    json j{{"kind", k.name()}};
    if (k.kind() == KernelKind::Gaussian) j["width"] = k.width();
    if (k.kind() == KernelKind::Linear) j["offset"] = k.offset();
    if (k.range()) j["range"] = {k.range()->first, k.range()->second};
    return j;
}

// ----------------------------------------------------------- expansions ---

inline KernelExpansion expansion_from_json(const json& j, const Kernel& kernel) {
    const auto centers = j.value("centers", std::vector<double>{});
    const auto weights = j.value("weights", std::vector<double>{});
    if (centers.size() != weights.size())
        throw rejected_input("expansion needs as many weights as centers");
    if (kernel.dim() != 1) throw rejected_input("JSON expansions are one-dimensional");
    return KernelExpansion(kernel, PointSet::scalars(centers), weights);
}

inline json expansion_to_json(const KernelExpansion& f) {
    return {{"centers", f.centers().coords()}, {"weights", f.weights()}};
}

// ------------------------------------------------------------ round log ---

inline constexpr std::string_view kRoundLogHeader = "n,x,p,q,gamma,y,loss,s_residual,branch";

struct RoundLogRow {
    std::size_t n = 0;
    std::vector<double> x;
    double p = 0.0;
    double q = 0.0;
    double gamma = 0.0;
    int y = 0;
    double loss = 0.0;
    double s_residual = 0.0;
    RootBranch branch = RootBranch::Root;
};

inline RootBranch branch_from_string(std::string_view s) {
    if (s == "root") return RootBranch::Root;
    if (s == "endpoint_positive") return RootBranch::EndpointPositive;
    if (s == "endpoint_negative") return RootBranch::EndpointNegative;
    throw std::invalid_argument("unknown branch '" + std::string(s) + "'");
}

/// Multi-dimensional data are written as coordinates joined by ';'.
inline std::string format_point(std::span<const double> x) {
    std::string out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) out += ';';
        out += format_double(x[i]);
    }
    return out;
}

inline std::vector<double> parse_point(std::string_view s) {
    std::vector<double> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = s.find(';', start);
        out.push_back(parse_double(s.substr(start, end == std::string_view::npos ? end : end - start)));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = line.find(',', start);
        out.push_back(line.substr(start, end == std::string_view::npos ? end : end - start));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

inline void write_round_log_row(std::ostream& os, const RoundLogRow& r) {
    os << r.n << ',' << format_point(r.x) << ',' << format_double(r.p) << ','
       << format_double(r.q) << ',' << format_double(r.gamma) << ',' << r.y << ','
       << format_double(r.loss) << ',' << format_double(r.s_residual) << ','
       << to_string(r.branch) << '\n';
}

inline std::vector<RoundLogRow> read_round_log(std::istream& is) {
    std::vector<RoundLogRow> rows;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) throw parse_error("empty round log", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRoundLogHeader) throw parse_error("unexpected round log header '" + line + "'", lineno);
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9) throw parse_error("expected 9 fields, got " + std::to_string(f.size()), lineno);
        try {
            RoundLogRow r;
            r.n = static_cast<std::size_t>(parse_double(f[0]));
            r.x = parse_point(f[1]);
            r.p = parse_double(f[2]);
            r.q = parse_double(f[3]);
            r.gamma = parse_double(f[4]);
            const double y = parse_double(f[5]);
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("y must be 0 or 1");
            r.y = static_cast<int>(y);
            r.loss = parse_double(f[6]);
            r.s_residual = parse_double(f[7]);
            r.branch = branch_from_string(f[8]);
            rows.push_back(std::move(r));
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), lineno);
        }
    }
    return rows;
}

/// (x, y) pairs from any CSV whose header names an `x` and a `y` column.
struct Observation {
    std::vector<double> x;
    int y = 0;
};

inline std::vector<Observation> read_observations(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) throw parse_error("empty replay file", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    std::size_t xi = header.size();
    std::size_t yi = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "x") xi = i;
        if (header[i] == "y") yi = i;
    }
    if (xi == header.size() || yi == header.size())
        throw parse_error("replay header must contain x and y columns", lineno);
    std::vector<Observation> out;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw parse_error("expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(f.size()),
                              lineno);
        try {
            Observation o;
            o.x = parse_point(f[xi]);
            const double y = parse_double(f[yi]);
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("y must be 0 or 1");
            o.y = static_cast<int>(y);
            out.push_back(std::move(o));
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), lineno);
        }
    }
    return out;
}

} // namespace defcast

#endif // DEFCAST_IO_HPP_
