#include "lagflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lagflow/csv.hpp"

namespace lagflow {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

struct RawEntry {
    std::string value;
    int line;
};

const std::set<std::string> kKnownKeys = {
    "a",          "b",          "k",           "tau",
    "t_end",      "cost",       "p",           "gamma",
    "m",          "potential",  "potential_weight", "potential_center",
    "init",       "init_support", "init_file", "floor",
    "out_dir",    "snapshot_times", "newton_tol", "newton_max_iter",
    "armijo_shrink", "min_gap",
};

double parse_real(const std::map<std::string, RawEntry>& kv, const std::string& key) {
    const auto& e = kv.at(key);
    try {
        return parse_double(e.value);
    } catch (const std::exception&) {
        throw ConfigError(e.line, "key '" + key + "': cannot parse number '" + e.value + "'");
    }
}

std::vector<double> parse_real_list(const std::map<std::string, RawEntry>& kv,
                                    const std::string& key) {
    const auto& e = kv.at(key);
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty())
            throw ConfigError(e.line, "key '" + key + "': empty list entry");
        try {
            out.push_back(parse_double(tok));
        } catch (const std::exception&) {
            throw ConfigError(e.line, "key '" + key + "': cannot parse number '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError(e.line, "key '" + key + "': empty list");
    return out;
}

// nearest step index of time t on the tau grid, or -1 if off-grid
long long step_index(double t, double tau) {
    const double r = t / tau;
    const double n = std::round(r);
    if (std::fabs(r - n) > 1e-9 * std::max(1.0, std::fabs(r))) return -1;
    return static_cast<long long>(n);
}

// default snapshot ladder: t = 0.01 * 10^(0.12 j) rounded to the step grid,
// plus the initial and final times
std::vector<double> default_snapshots(double tau, double t_end) {
    const long long n_steps = step_index(t_end, tau);
    std::set<long long> steps = {0, n_steps};
    for (int j = 0;; ++j) {
        const double t = 0.01 * std::pow(10.0, 0.12 * j);
        if (t > t_end * (1.0 + 1e-12)) break;
        const long long n = static_cast<long long>(std::llround(t / tau));
        if (n >= 0 && n <= n_steps) steps.insert(n);
        if (j > 10000) break;
    }
    std::vector<double> out;
    for (long long n : steps) out.push_back(static_cast<double>(n) * tau);
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    std::map<std::string, RawEntry> kv;
    {
        std::stringstream ss(text);
        std::string line;
        int line_no = 0;
        while (std::getline(ss, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (!kKnownKeys.count(key)) throw ConfigError(line_no, "unknown key '" + key + "'");
            if (kv.count(key))
                throw ConfigError(line_no, "duplicate key '" + key + "' (first on line " +
                                               std::to_string(kv[key].line) + ")");
            if (value.empty()) throw ConfigError(line_no, "key '" + key + "' has no value");
            kv[key] = {value, line_no};
        }
    }

    const auto require = [&](const std::string& key) {
        if (!kv.count(key)) throw ConfigError(0, "missing required key '" + key + "'");
    };

    RunConfig cfg;
    if (kv.count("a")) cfg.a = parse_real(kv, "a");
    if (kv.count("b")) cfg.b = parse_real(kv, "b");
    if (!(cfg.a < cfg.b)) throw ConfigError(0, "domain must satisfy a < b");

    require("k");
    {
        const double kval = parse_real(kv, "k");
        if (!(kval >= 2.0) || kval != std::floor(kval))
            throw ConfigError(kv.at("k").line, "k must be >= 2");
        cfg.k = static_cast<std::size_t>(kval);
    }

    require("tau");
    require("t_end");
    cfg.solver.tau = parse_real(kv, "tau");
    cfg.solver.t_end = parse_real(kv, "t_end");
    if (!(cfg.solver.tau > 0.0)) throw ConfigError(kv.at("tau").line, "tau must be positive");
    if (!(cfg.solver.t_end > 0.0))
        throw ConfigError(kv.at("t_end").line, "t_end must be positive");
    if (step_index(cfg.solver.t_end, cfg.solver.tau) < 1)
        throw ConfigError(kv.at("t_end").line,
                          "t_end must be a positive integer multiple of tau");

    require("cost");
    {
        const auto& e = kv.at("cost");
        if (e.value == "ppower") {
            if (!kv.count("p")) throw ConfigError(e.line, "cost = ppower requires key 'p'");
            const double p = parse_real(kv, "p");
            if (!(p > 1.0)) throw ConfigError(kv.at("p").line, "p must be > 1");
            cfg.cost = CostModel::p_power(p);
            if (kv.count("gamma"))
                throw ConfigError(kv.at("gamma").line, "key 'gamma' only applies to relativistic");
        } else if (e.value == "relativistic") {
            if (!kv.count("gamma"))
                throw ConfigError(e.line, "cost = relativistic requires key 'gamma'");
            const double g = parse_real(kv, "gamma");
            if (!(g > 0.0)) throw ConfigError(kv.at("gamma").line, "gamma must be positive");
            cfg.cost = CostModel::relativistic(g);
            if (kv.count("p"))
                throw ConfigError(kv.at("p").line, "key 'p' only applies to ppower");
        } else {
            throw ConfigError(e.line, "cost must be 'ppower' or 'relativistic', got '" + e.value +
                                          "'");
        }
    }

    if (kv.count("m")) {
        cfg.m = parse_real(kv, "m");
        if (!(cfg.m >= 1.0)) throw ConfigError(kv.at("m").line, "m must be >= 1");
    }

    if (kv.count("potential")) {
        const auto& e = kv.at("potential");
        if (e.value != "constant" && e.value != "quadratic")
            throw ConfigError(e.line,
                              "potential must be 'constant' or 'quadratic', got '" + e.value + "'");
        cfg.potential_kind = e.value;
    }
    if (kv.count("potential_weight")) cfg.potential_weight = parse_real(kv, "potential_weight");
    if (kv.count("potential_center")) cfg.potential_center = parse_real(kv, "potential_center");
    if (cfg.potential_kind == "quadratic" && !(cfg.potential_weight >= 0.0))
        throw ConfigError(kv.count("potential_weight") ? kv.at("potential_weight").line : 0,
                          "potential_weight must be >= 0 (convexity)");

    require("init");
    {
        const auto& e = kv.at("init");
        if (e.value == "uniform") {
            cfg.init_kind = InitKind::Uniform;
            if (!kv.count("init_support"))
                throw ConfigError(e.line, "init = uniform requires key 'init_support'");
            const std::vector<double> s = parse_real_list(kv, "init_support");
            if (s.size() != 2 || !(s[0] < s[1]))
                throw ConfigError(kv.at("init_support").line,
                                  "init_support must be '<lo>,<hi>' with lo < hi");
            cfg.init_lo = s[0];
            cfg.init_hi = s[1];
            if (cfg.init_lo < cfg.a || cfg.init_hi > cfg.b)
                throw ConfigError(kv.at("init_support").line,
                                  "init_support must lie inside [a, b]");
        } else if (e.value == "csv") {
            cfg.init_kind = InitKind::Csv;
            if (!kv.count("init_file"))
                throw ConfigError(e.line, "init = csv requires key 'init_file'");
            cfg.init_file = kv.at("init_file").value;
        } else {
            throw ConfigError(e.line, "init must be 'uniform' or 'csv', got '" + e.value + "'");
        }
    }

    if (kv.count("floor")) {
        cfg.floor = parse_real(kv, "floor");
        if (!(cfg.floor >= 0.0) || cfg.floor > 1e-3)
            throw ConfigError(kv.at("floor").line, "floor must lie in [0, 1e-3]");
    }

    if (kv.count("out_dir")) cfg.out_dir = kv.at("out_dir").value;

    if (kv.count("newton_tol")) cfg.solver.newton_tol = parse_real(kv, "newton_tol");
    if (kv.count("newton_max_iter")) {
        const double v = parse_real(kv, "newton_max_iter");
        if (!(v >= 1.0) || v != std::floor(v))
            throw ConfigError(kv.at("newton_max_iter").line,
                              "newton_max_iter must be a positive integer");
        cfg.solver.newton_max_iter = static_cast<int>(v);
    }
    if (kv.count("armijo_shrink")) {
        cfg.solver.armijo_shrink = parse_real(kv, "armijo_shrink");
        if (!(cfg.solver.armijo_shrink > 0.0) || !(cfg.solver.armijo_shrink < 1.0))
            throw ConfigError(kv.at("armijo_shrink").line, "armijo_shrink must lie in (0, 1)");
    }
    if (kv.count("min_gap")) {
        cfg.solver.min_gap = parse_real(kv, "min_gap");
        if (!(cfg.solver.min_gap >= 0.0))
            throw ConfigError(kv.at("min_gap").line, "min_gap must be >= 0");
    }
    cfg.solver.validate();

    if (kv.count("snapshot_times")) {
        std::vector<double> ts = parse_real_list(kv, "snapshot_times");
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        for (double t : ts) {
            const long long n = step_index(t, cfg.solver.tau);
            if (n < 0)
                throw ConfigError(kv.at("snapshot_times").line,
                                  "snapshot time " + format_double(t) +
                                      " is not a multiple of tau");
            if (t < 0.0 || t > cfg.solver.t_end * (1.0 + 1e-12))
                throw ConfigError(kv.at("snapshot_times").line,
                                  "snapshot time " + format_double(t) +
                                      " lies outside [0, t_end]");
        }
        cfg.snapshot_times = std::move(ts);
    } else {
        cfg.snapshot_times = default_snapshots(cfg.solver.tau, cfg.solver.t_end);
    }

    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(0, "cannot open config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

EnergyModel RunConfig::make_energy() const {
    Potential v = potential_kind == "quadratic"
                      ? Potential::quadratic(potential_weight, potential_center)
                      : Potential::constant(potential_weight);
    return EnergyModel(m, std::move(v));
}

DensitySpec RunConfig::make_init() const {
    if (init_kind == InitKind::Uniform) return DensitySpec::uniform(init_lo, init_hi);
    // two-column x,u samples; an optional header line is skipped
    std::ifstream in(init_file);
    if (!in) throw ConfigError(0, "cannot open init_file " + init_file);
    std::vector<double> xs, us;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError(0, init_file + ":" + std::to_string(line_no) +
                                     ": expected 'x,u'");
        try {
            const double x = parse_double(trim(line.substr(0, comma)));
            const double u = parse_double(trim(line.substr(comma + 1)));
            xs.push_back(x);
            us.push_back(u);
        } catch (const std::exception&) {
            if (line_no == 1) continue;  // header row
            throw ConfigError(0, init_file + ":" + std::to_string(line_no) +
                                     ": cannot parse 'x,u' row");
        }
    }
    try {
        return DensitySpec::piecewise_linear(std::move(xs), std::move(us));
    } catch (const std::exception& ex) {
        throw ConfigError(0, init_file + ": " + ex.what());
    }
}

ConvergenceScenario RunConfig::make_scenario() const {
    ConvergenceScenario sc{a,
                           b,
                           cost,
                           make_energy(),
                           make_init(),
                           floor,
                           solver.t_end,
                           solver.tau,
                           k,
                           solver.newton_tol,
                           solver.newton_max_iter,
                           solver.armijo_shrink,
                           solver.min_gap};
    return sc;
}

std::string RunConfig::echo() const {
    std::string s;
    const auto put = [&](const std::string& key, const std::string& value) {
        s += key + " = " + value + "\n";
    };
    put("a", format_double(a));
    put("b", format_double(b));
    put("k", std::to_string(k));
    put("tau", format_double(solver.tau));
    put("t_end", format_double(solver.t_end));
    if (cost.kind == CostKind::PPower) {
        put("cost", "ppower");
        put("p", format_double(cost.p));
    } else {
        put("cost", "relativistic");
        put("gamma", format_double(cost.gamma));
    }
    put("m", format_double(m));
    put("potential", potential_kind);
    put("potential_weight", format_double(potential_weight));
    put("potential_center", format_double(potential_center));
    if (init_kind == InitKind::Uniform) {
        put("init", "uniform");
        put("init_support", format_double(init_lo) + "," + format_double(init_hi));
    } else {
        put("init", "csv");
        put("init_file", init_file);
    }
    put("floor", format_double(floor));
    put("out_dir", out_dir);
    std::string ts;
    for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
        if (i) ts += ",";
        ts += format_double(snapshot_times[i]);
    }
    put("snapshot_times", ts);
    put("newton_tol", format_double(solver.newton_tol));
    put("newton_max_iter", std::to_string(solver.newton_max_iter));
    put("armijo_shrink", format_double(solver.armijo_shrink));
    put("min_gap", format_double(solver.min_gap));
    return s;
}

}  // namespace lagflow
