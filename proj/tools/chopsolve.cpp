// chopsolve: batch runner for reduced-precision regularized solvers.
//
//   chopsolve deblur [--config FILE] [--key value ...]
//   chopsolve tomo   [--config FILE] [--key value ...]
//   chopsolve dot-sweep [--n 4096] [--formats fp16,fp32,fp64] [--block-sizes ...] [--trials 20]
//   chopsolve formats

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chopsolve/experiment.hpp"

namespace {

struct RunOptions {
    std::string config_file;
    std::map<std::string, std::string> flags;
};

void add_run_options(CLI::App& cmd, RunOptions& opts) {
    cmd.add_option("-c,--config", opts.config_file, "key = value config file; flags override it");
    for (const auto& key : chopsolve::config_keys()) {
        if (key == "kind") continue;
        std::string flag = "--" + key;
        if (key == "output_dir") flag = "-o," + flag;
        cmd.add_option_function<std::string>(
            flag, [&opts, key](const std::string& v) { opts.flags[key] = v; }, "sets '" + key + "'");
    }
}

int run(chopsolve::ProblemKind kind, const RunOptions& opts) {
    chopsolve::ExperimentConfig cfg;
    cfg.kind = kind;
    std::map<std::string, std::string> settings;
    if (!opts.config_file.empty()) settings = chopsolve::load_config_file(opts.config_file);
    for (const auto& [k, v] : opts.flags) settings[k] = v;
    for (const auto& [k, v] : settings) {
        if (k == "kind" && v != chopsolve::to_string(kind))
            throw chopsolve::ConfigError("config kind '" + v + "' does not match subcommand");
        chopsolve::apply_setting(cfg, k, v);
    }

    const auto out = chopsolve::run_experiment(cfg);
    const auto& r = out.summary["result"];
    std::cout << "termination=" << r["termination"].get<std::string>() << " iterations=" << r["iterations"]
              << " best_iter=" << r["best_iter"] << " best_rel_error=" << r["best_rel_error"]
              << " output=" << out.output_dir.string() << '\n';
    return 0;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : s) {
        if (ch == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (ch != ' ') {
            item += ch;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-precision CGLS / Chebyshev experiments on ill-posed inverse problems"};
    app.require_subcommand(1);

    RunOptions deblur_opts, tomo_opts;
    auto* deblur = app.add_subcommand("deblur", "Gaussian deblurring experiment");
    add_run_options(*deblur, deblur_opts);
    auto* tomo = app.add_subcommand("tomo", "Parallel-beam tomography experiment");
    add_run_options(*tomo, tomo_opts);

    std::size_t sweep_n = 4096;
    std::string sweep_formats = "fp16,fp32,fp64";
    std::string sweep_blocks = "1,2,4,8,16,32,64,128,256,512,1024,2048,4096";
    int sweep_trials = chopsolve::kDefaultSweepTrials;
    std::uint64_t sweep_seed = 0;
    std::string sweep_output;
    auto* sweep = app.add_subcommand("dot-sweep", "Blocked inner-product error versus block size");
    sweep->add_option("--n", sweep_n, "vector length")->capture_default_str();
    sweep->add_option("--formats", sweep_formats, "comma-separated format names")->capture_default_str();
    sweep->add_option("--block-sizes", sweep_blocks, "comma-separated block sizes")->capture_default_str();
    sweep->add_option("--trials", sweep_trials, "vector pairs per cell")->capture_default_str();
    sweep->add_option("--seed", sweep_seed, "random seed")->capture_default_str();
    sweep->add_option("-o,--output", sweep_output, "CSV path (default: stdout)");

    auto* fmts = app.add_subcommand("formats", "Print the floating-point preset table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*deblur) return run(chopsolve::ProblemKind::Deblur, deblur_opts);
        if (*tomo) return run(chopsolve::ProblemKind::Tomo, tomo_opts);
        if (*fmts) {
            std::cout << chopsolve::formats_table();
            return 0;
        }
        if (*sweep) {
            std::vector<chopsolve::FloatFormat> fs;
            for (const auto& name : split_list(sweep_formats)) fs.push_back(chopsolve::formats::by_name(name));
            std::vector<std::size_t> blocks;
            for (const auto& b : split_list(sweep_blocks)) blocks.push_back(chopsolve::detail::parse_count("block-sizes", b));
            const auto rows = chopsolve::dot_error_sweep(sweep_n, fs, blocks, sweep_trials, sweep_seed);
            if (sweep_output.empty()) {
                chopsolve::write_sweep_csv(std::cout, rows);
            } else {
                std::ofstream os(sweep_output, std::ios::binary);
                if (!os) throw chopsolve::IoError("cannot open '" + sweep_output + "' for writing");
                chopsolve::write_sweep_csv(os, rows);
            }
            return 0;
        }
    } catch (const chopsolve::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const chopsolve::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
