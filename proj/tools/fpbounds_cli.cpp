// Batch front end: run scenarios, list builtins, describe checks.

#include "fpbounds/fpbounds.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

#ifndef FPB_SCENARIO_DIR
#define FPB_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;

namespace {

fs::path resolve_scenario(const std::string& arg) {
    if (fs::exists(arg)) return arg;
    const fs::path bundled = fs::path(FPB_SCENARIO_DIR) / (arg + ".ini");
    if (fs::exists(bundled)) return bundled;
    throw fpb::ScenarioError("no such config or bundled scenario: " + arg);
}

std::vector<std::string> bundled_scenarios() {
    std::vector<std::string> names;
    if (fs::is_directory(FPB_SCENARIO_DIR))
        for (const auto& e : fs::directory_iterator(FPB_SCENARIO_DIR))
            if (e.path().extension() == ".ini") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

int cmd_run(const std::string& config, const std::string& out, int threads, std::uint64_t seed) {
    fpb::Scenario s;
    try {
        s = fpb::load_scenario(resolve_scenario(config));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fpb::exit_config;
    }
    fpb::RunOptions opt;
    opt.out_dir = out;
    opt.threads = std::max(1, threads);
    opt.seed = seed;
    const auto res = fpb::run_scenario(s, opt);
    if (res.exit_code == fpb::exit_config || res.exit_code == fpb::exit_solver) {
        std::cerr << (res.exit_code == fpb::exit_solver ? "solver abort: " : "error: ") << res.error << '\n';
        return res.exit_code;
    }
    if (out.empty()) fpb::write_csv(res.rows, std::cout);
    const auto c = fpb::count_verdicts(res.rows);
    std::cerr << s.name << ": " << c.holds << " holds, " << c.violated << " violated, " << c.inconclusive
              << " inconclusive\n";
    return res.exit_code;
}

void cmd_list() {
    std::cout << "checks:\n";
    for (const auto& n : fpb::check_names()) std::cout << "  " << n << "  " << fpb::describe_check(n).summary << '\n';
    std::cout << "coefficients:\n";
    for (const auto& n : fpb::coefficient_builtins()) std::cout << "  " << n << '\n';
    std::cout << "potentials:\n  log_sq\n  log_sq_squared\n  exp_power\n  square_norm\n  constant\n";
    std::cout << "scenarios:\n";
    for (const auto& n : bundled_scenarios()) std::cout << "  " << n << '\n';
}

int cmd_describe(const std::string& name) {
    try {
        const auto& d = fpb::describe_check(name);
        std::cout << name << ": " << d.summary << "\n  " << d.formula << "\n  params: " << d.params << '\n';
        return fpb::exit_ok;
    } catch (const fpb::ScenarioError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fpb::exit_config;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fokker-Planck a-priori bound verifier"};
    app.require_subcommand(1);
    std::string out;
    int threads = 1;
    std::uint64_t seed = 0;
    app.add_option("--out", out, "output directory for ledgers and the density dump");
    app.add_option("--threads", threads, "checks evaluated concurrently")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for randomized checks");

    std::string config, check;
    auto* run = app.add_subcommand("run", "solve a scenario and evaluate its checks");
    run->add_option("config", config, "INI file or bundled scenario name")->required();
    auto* list = app.add_subcommand("list", "list checks, builtins and bundled scenarios");
    auto* describe = app.add_subcommand("describe", "print a check's inequality and parameters");
    describe->add_option("check", check)->required();
    for (auto* sub : {run, list, describe}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fpb::exit_config;
    }
    if (*run) return cmd_run(config, out, threads, seed);
    if (*list) {
        cmd_list();
        return fpb::exit_ok;
    }
    return cmd_describe(check);
}
