#pragma once

// Experiment driver behind the command-line tool: declarative configs, the
// solve pipeline with its artifact set, the blocked-dot error sweep and the
// format table.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chopsolve/errors.hpp"
#include "chopsolve/io.hpp"
#include "chopsolve/linops.hpp"
#include "chopsolve/precision.hpp"
#include "chopsolve/problems.hpp"
#include "chopsolve/solvers.hpp"

namespace chopsolve {

enum class SolverKind { Cgls, Chebyshev };

inline const char* to_string(SolverKind s) { return s == SolverKind::Cgls ? "cgls" : "chebyshev"; }

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "CHOPSOLVE_OUTPUT_ROOT";

struct ExperimentConfig {
    ProblemKind kind = ProblemKind::Deblur;
    std::size_t grid_n = 32;
    double blur_sigma = 1.0;
    std::size_t bandwidth = 4;
    std::size_t n_angles = 0;     // 0: grid_n
    std::size_t n_detectors = 0;  // 0: ceil(sqrt(2) grid_n)
    PhantomKind phantom = PhantomKind::Shapes;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
    SolverKind solver = SolverKind::Cgls;
    std::string fmt = "fp64";
    std::size_t block_size = 256;
    int max_iter = 100;
    double tol = 0.0;   // CGLS stopping threshold on psi
    double eps = 1e-6;  // Chebyshev count tolerance
    double lambda = 0.0;
    double rescale = 1.0;
    int power_iters = 100;
    bool export_problem = false;
    std::string output_dir;
};

/// Keys accepted in config files and as --key flags.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "kind",  "grid_n", "blur_sigma", "bandwidth", "n_angles", "n_detectors", "phantom",     "noise_level",
        "seed",  "solver", "fmt",        "block_size", "max_iter", "tol",        "eps",         "lambda",
        "rescale", "power_iters", "export_problem", "output_dir"};
    return keys;
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    return out;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    const auto x = parse_int(key, v);
    if (x < 0) throw ConfigError("'" + key + "' must be non-negative");
    return static_cast<std::size_t>(x);
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "kind") {
        if (value == "deblur") cfg.kind = ProblemKind::Deblur;
        else if (value == "tomo") cfg.kind = ProblemKind::Tomo;
        else throw ConfigError("kind must be 'deblur' or 'tomo'");
    } else if (key == "grid_n") cfg.grid_n = parse_count(key, value);
    else if (key == "blur_sigma") cfg.blur_sigma = parse_real(key, value);
    else if (key == "bandwidth") cfg.bandwidth = parse_count(key, value);
    else if (key == "n_angles") cfg.n_angles = parse_count(key, value);
    else if (key == "n_detectors") cfg.n_detectors = parse_count(key, value);
    else if (key == "phantom") cfg.phantom = phantom_from_string(value);
    else if (key == "noise_level") cfg.noise_level = parse_real(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_count(key, value));
    else if (key == "solver") {
        if (value == "cgls") cfg.solver = SolverKind::Cgls;
        else if (value == "chebyshev" || value == "cs") cfg.solver = SolverKind::Chebyshev;
        else throw ConfigError("solver must be 'cgls' or 'chebyshev'");
    } else if (key == "fmt") {
        formats::by_name(value);
        cfg.fmt = value;
    } else if (key == "block_size") cfg.block_size = parse_count(key, value);
    else if (key == "max_iter") cfg.max_iter = static_cast<int>(parse_int(key, value));
    else if (key == "tol") cfg.tol = parse_real(key, value);
    else if (key == "eps") cfg.eps = parse_real(key, value);
    else if (key == "lambda") cfg.lambda = parse_real(key, value);
    else if (key == "rescale") cfg.rescale = parse_real(key, value);
    else if (key == "power_iters") cfg.power_iters = static_cast<int>(parse_int(key, value));
    else if (key == "export_problem") {
        if (value == "true" || value == "1") cfg.export_problem = true;
        else if (value == "false" || value == "0") cfg.export_problem = false;
        else throw ConfigError("export_problem must be true/false");
    } else if (key == "output_dir") cfg.output_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses `key = value` lines. `[section]` headers group keys for
/// readability; `#` and `;` start comments.
inline std::map<std::string, std::string> parse_config_text(std::istream& is) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config_text(is);
}

inline void validate(const ExperimentConfig& cfg) {
    formats::by_name(cfg.fmt);
    if (cfg.grid_n < 8) throw ConfigError("grid_n must be >= 8");
    if (cfg.block_size < 1) throw ConfigError("block_size must be >= 1");
    if (cfg.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (!(cfg.noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
    if (!(cfg.rescale > 0.0)) throw ConfigError("rescale must be > 0");
    if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (cfg.power_iters < 1) throw ConfigError("power_iters must be >= 1");
    if (cfg.solver == SolverKind::Chebyshev) {
        if (!(cfg.lambda > 0.0)) throw ConfigError("the Chebyshev solver needs lambda > 0");
        if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    }
}

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return "chopsolve_out";
}

inline nlohmann::json config_echo(const ExperimentConfig& cfg) {
    return {{"kind", to_string(cfg.kind)},
            {"grid_n", cfg.grid_n},
            {"blur_sigma", cfg.blur_sigma},
            {"bandwidth", cfg.bandwidth},
            {"n_angles", cfg.n_angles},
            {"n_detectors", cfg.n_detectors},
            {"phantom", to_string(cfg.phantom)},
            {"noise_level", cfg.noise_level},
            {"seed", cfg.seed},
            {"solver", to_string(cfg.solver)},
            {"fmt", cfg.fmt},
            {"block_size", cfg.block_size},
            {"max_iter", cfg.max_iter},
            {"tol", cfg.tol},
            {"eps", cfg.eps},
            {"lambda", cfg.lambda},
            {"rescale", cfg.rescale},
            {"power_iters", cfg.power_iters}};
}

/// Builds the seeded, noisy, rescaled problem for a config.
inline Problem build_problem(const ExperimentConfig& cfg) {
    Problem p = cfg.kind == ProblemKind::Deblur
                    ? gen_deblur(cfg.grid_n, cfg.blur_sigma, cfg.bandwidth, cfg.phantom)
                    : gen_tomo(cfg.grid_n, cfg.n_angles, cfg.n_detectors, cfg.phantom);
    p = add_noise(std::move(p), cfg.noise_level, cfg.seed);
    return rescale_problem(std::move(p), cfg.rescale);
}

struct ExperimentOutcome {
    std::filesystem::path output_dir;
    std::vector<std::filesystem::path> files;
    SolveResult result;
    nlohmann::json summary;
};

/// Files every run writes, relative to the output directory.
inline std::vector<std::string> artifact_names(const ExperimentConfig& cfg) {
    std::vector<std::string> names{"history.csv", "summary.json", "x_true.pgm", "b.pgm", "x_final.pgm", "x_best.pgm"};
    if (cfg.export_problem)
        for (const char* extra : {"A.mtx", "x_true.bin", "b.bin", "b_exact.bin"}) names.emplace_back(extra);
    return names;
}

inline nlohmann::json optional_real(const std::optional<double>& v) {
    if (v && std::isfinite(*v)) return *v;
    return nullptr;
}

/// Checks that a summary document has the fixed shape run_experiment emits.
inline void validate_summary(const nlohmann::json& s) {
    auto need = [](const nlohmann::json& obj, const char* key, auto pred, const char* what) {
        if (!obj.is_object() || !obj.contains(key) || !pred(obj.at(key)))
            throw ConfigError(std::string("summary: '") + key + "' missing or not " + what);
    };
    auto is_obj = [](const nlohmann::json& j) { return j.is_object(); };
    auto is_str = [](const nlohmann::json& j) { return j.is_string(); };
    auto is_num = [](const nlohmann::json& j) { return j.is_number(); };
    auto is_int = [](const nlohmann::json& j) { return j.is_number_integer(); };
    auto is_bool = [](const nlohmann::json& j) { return j.is_boolean(); };
    auto num_or_null = [](const nlohmann::json& j) { return j.is_number() || j.is_null(); };
    auto str_or_null = [](const nlohmann::json& j) { return j.is_string() || j.is_null(); };

    need(s, "schema", [](const nlohmann::json& j) { return j == "chopsolve.summary/1"; }, "chopsolve.summary/1");
    need(s, "config", is_obj, "an object");
    need(s, "problem", is_obj, "an object");
    need(s, "solver", is_obj, "an object");
    need(s, "result", is_obj, "an object");
    need(s, "counters", is_obj, "an object");
    for (const auto& key : config_keys())
        if (key != "output_dir" && key != "export_problem") need(s["config"], key.c_str(), [](const nlohmann::json&) { return true; }, "present");

    const auto& p = s["problem"];
    need(p, "kind", is_str, "a string");
    for (const char* k : {"grid_n", "rows", "cols", "nnz"}) need(p, k, is_int, "an integer");
    for (const char* k : {"noise_level", "scale"}) need(p, k, is_num, "a number");

    const auto& v = s["solver"];
    need(v, "name", is_str, "a string");
    need(v, "fmt", is_str, "a string");
    for (const char* k : {"unit_roundoff", "lambda"}) need(v, k, is_num, "a number");
    need(v, "block_size", is_int, "an integer");
    for (const char* k : {"sigma_lower", "sigma_upper"}) need(v, k, num_or_null, "a number or null");
    need(v, "cs_count", [](const nlohmann::json& j) { return j.is_number_integer() || j.is_null(); }, "an integer or null");
    need(v, "cs_count_clamped", [](const nlohmann::json& j) { return j.is_boolean() || j.is_null(); }, "a bool or null");

    const auto& r = s["result"];
    need(r, "termination", [](const nlohmann::json& j) {
        return j == "Tolerance" || j == "MaxIter" || j == "NonFinite";
    }, "a termination name");
    for (const char* k : {"iterations", "best_iter"}) need(r, k, is_int, "an integer");
    for (const char* k : {"best_rel_error", "final_rel_error", "final_residual_norm"}) need(r, k, num_or_null, "a number or null");
    need(r, "x_underflow_to_zero", is_bool, "a bool");

    const auto& c = s["counters"];
    for (const char* k : {"dot_calls", "spmv_calls", "ew_calls", "scalar_calls", "dot_overflows", "spmv_overflows",
                          "ew_overflows", "scalar_overflows"})
        need(c, k, is_int, "an integer");
    need(c, "first_overflow", str_or_null, "a string or null");
}

/// Generates the problem, runs the configured solver and writes the artifact
/// set. Deterministic given the config.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto fmt = formats::by_name(cfg.fmt);
    const Problem prob = build_problem(cfg);

    ExperimentOutcome out;
    out.output_dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(out.output_dir);

    SolverConfig scfg;
    scfg.fmt = fmt;
    scfg.reduce.block_size = cfg.block_size;
    scfg.max_iter = cfg.max_iter;
    scfg.tol = cfg.tol;
    scfg.lambda = cfg.lambda;
    scfg.track_error_against = prob.x_true;

    OperatorPtr base = make_operator(prob.a);
    OperatorPtr op = base;
    std::vector<double> rhs = prob.b;
    if (cfg.lambda > 0.0) {
        op = tikhonov_augment(base, cfg.lambda);
        rhs = tikhonov_rhs(prob.b, prob.a.cols());
    }

    nlohmann::json sigma_lower = nullptr, sigma_upper = nullptr, cs_count = nullptr, cs_clamped = nullptr;
    if (cfg.solver == SolverKind::Cgls) {
        out.result = cgls(*op, rhs, scfg);
    } else {
        const auto bounds = estimate_sigma_bounds(*base, cfg.lambda, cfg.power_iters, cfg.seed);
        const auto count = cs_iteration_count(bounds.lower, bounds.upper, cfg.eps);
        sigma_lower = bounds.lower;
        sigma_upper = bounds.upper;
        cs_count = count.count;
        cs_clamped = count.clamped;
        out.result = chebyshev_si(*op, rhs, bounds.lower, bounds.upper, cfg.eps, scfg);
    }
    const auto& res = out.result;

    std::optional<double> best_err, final_err;
    double final_res = std::numeric_limits<double>::quiet_NaN();
    for (const auto& rec : res.history) {
        if (!rec.finite) continue;
        if (rec.k == res.best_iter) best_err = rec.rel_error;
        final_err = rec.rel_error;
        final_res = rec.residual_norm;
    }

    const auto& c = res.counters;
    nlohmann::json summary = {
        {"schema", "chopsolve.summary/1"},
        {"config", config_echo(cfg)},
        {"problem",
         {{"kind", to_string(prob.kind)},
          {"grid_n", prob.grid_n},
          {"rows", prob.a.rows()},
          {"cols", prob.a.cols()},
          {"nnz", prob.a.nnz()},
          {"noise_level", prob.noise_level},
          {"scale", prob.scale}}},
        {"solver",
         {{"name", to_string(cfg.solver)},
          {"fmt", fmt.name},
          {"unit_roundoff", unit_roundoff(fmt)},
          {"block_size", cfg.block_size},
          {"lambda", cfg.lambda},
          {"sigma_lower", sigma_lower},
          {"sigma_upper", sigma_upper},
          {"cs_count", cs_count},
          {"cs_count_clamped", cs_clamped}}},
        {"result",
         {{"termination", to_string(res.termination)},
          {"iterations", res.history.empty() ? 0 : res.history.back().k},
          {"best_iter", res.best_iter},
          {"best_rel_error", optional_real(best_err)},
          {"final_rel_error", optional_real(final_err)},
          {"final_residual_norm", optional_real(final_res)},
          {"x_underflow_to_zero", res.x_underflow_to_zero}}},
        {"counters",
         {{"dot_calls", c.dot_calls},
          {"spmv_calls", c.spmv_calls},
          {"ew_calls", c.ew_calls},
          {"scalar_calls", c.scalar_calls},
          {"dot_overflows", c.dot_overflows},
          {"spmv_overflows", c.spmv_overflows},
          {"ew_overflows", c.ew_overflows},
          {"scalar_overflows", c.scalar_overflows},
          {"first_overflow", c.first_overflow ? nlohmann::json(to_string(*c.first_overflow)) : nlohmann::json(nullptr)}}},
    };
    validate_summary(summary);
    out.summary = summary;

    const auto dir = out.output_dir;
    const std::size_t n = prob.grid_n;
    save_history_csv((dir / "history.csv").string(), res.history);
    {
        std::ofstream js(dir / "summary.json", std::ios::binary);
        if (!js) throw IoError("cannot write summary.json");
        js << summary.dump(2) << '\n';
    }
    save_pgm((dir / "x_true.pgm").string(), prob.x_true, n, n);
    save_pgm((dir / "b.pgm").string(), prob.b, prob.b_rows, prob.b_cols);
    save_pgm((dir / "x_final.pgm").string(), res.x_final, n, n);
    save_pgm((dir / "x_best.pgm").string(), res.x_best, n, n);
    if (cfg.export_problem) {
        save_matrix_market((dir / "A.mtx").string(), prob.a);
        save_vector((dir / "x_true.bin").string(), prob.x_true);
        save_vector((dir / "b.bin").string(), prob.b);
        save_vector((dir / "b_exact.bin").string(), prob.b_exact);
    }
    for (const auto& name : artifact_names(cfg)) out.files.push_back(dir / name);
    return out;
}

// ---------------------------------------------------------------------------
// Blocked inner-product error sweep

struct SweepRow {
    std::string fmt;
    std::size_t block_size = 0;
    double mean_abs_error = 0.0;
};

inline constexpr int kDefaultSweepTrials = 20;

/// Mean |chopped_dot - working dot| over `trials` seeded uniform(0,1) vector
/// pairs of length n. The working-precision reference sums in the same blocked
/// order, so a passthrough format reports exactly zero. Every (fmt, block)
/// cell sees the same vector pairs.
inline std::vector<SweepRow> dot_error_sweep(std::size_t n, const std::vector<FloatFormat>& fmts,
                                             const std::vector<std::size_t>& block_sizes, int trials,
                                             std::uint64_t seed) {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    for (auto b : block_sizes)
        if (b < 1) throw ConfigError("block sizes must be >= 1");

    std::vector<std::vector<double>> xs(trials), ys(trials);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        xs[t].resize(n);
        ys[t].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[t][i] = unif(rng);
            ys[t][i] = unif(rng);
        }
    }

    const auto wp = formats::fp64();
    std::vector<SweepRow> rows;
    for (const auto& fmt : fmts)
        for (auto block : block_sizes) {
            const BlockedReduceConfig cfg{block};
            double sum = 0.0;
            for (int t = 0; t < trials; ++t)
                sum += std::fabs(chopped_dot(xs[t], ys[t], fmt, cfg) - chopped_dot(xs[t], ys[t], wp, cfg));
            rows.push_back({fmt.name, block, sum / trials});
        }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "fmt,block_size,mean_abs_error\n";
    for (const auto& r : rows) os << r.fmt << ',' << r.block_size << ',' << format_real(r.mean_abs_error) << '\n';
}

/// Human-readable preset table.
inline std::string formats_table() {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %5s %6s %13s %13s %13s %13s\n", "format", "t", "emax", "unit_roundoff",
                  "max_finite", "min_normal", "min_subnorm");
    os << line;
    for (const auto& f : formats::presets()) {
        std::snprintf(line, sizeof line, "%-10s %5d %6d %13.2e %13.4e %13.4e %13.4e\n", f.name.c_str(),
                      f.significand_bits, f.max_exponent, unit_roundoff(f), f.max_finite(), f.min_normal(),
                      f.min_subnormal());
        os << line;
    }
    return os.str();
}

}  // namespace chopsolve
