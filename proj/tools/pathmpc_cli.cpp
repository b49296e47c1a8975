#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathmpc/simharness.hpp"

namespace {

using namespace pathmpc;

bool verbose() {
    const char* v = std::getenv("PATHMPC_VERBOSE");
    return v != nullptr && std::string(v) != "0";
}

void print_cycles(const planner::TrajectoryLog& log) {
    for (const auto& r : log.records) {
        std::fprintf(stderr, "t=%6.2f phi=%.4f phi_dot=%.4f seg=%d |e_p|=%.2e |e_o|=%.2e it=%d %.2f ms %s\n", r.t,
                     r.phi, r.phi_dot, r.segment, r.e_p_norm, r.e_o_norm, r.iterations, r.solve_time * 1e3,
                     r.status.c_str());
    }
}

bool healthy(const planner::TrajectoryLog& log) { return log.finished && log.failed_cycles == 0; }

int cmd_plan(const std::string& file, const simharness::Overrides& ov, const std::string& out_dir) {
    const simharness::Scenario s = simharness::load_scenario(file);
    const planner::TrajectoryLog log = simharness::run(s, ov);
    if (verbose()) {
        print_cycles(log);
    }
    const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("out") / s.name : std::filesystem::path(out_dir);
    simharness::write_outputs(s, log, dir);
    std::cout << simharness::summary(s, log);
    std::cout << "outputs: " << dir.string() << "\n";
    return healthy(log) ? 0 : 2;
}

int cmd_sweep(const std::string& file, const std::string& param, const std::vector<double>& values,
              const std::string& out_dir) {
    const simharness::Scenario s = simharness::load_scenario(file);
    const std::filesystem::path base = out_dir.empty() ? std::filesystem::path("out") / (s.name + "_sweep") : std::filesystem::path(out_dir);
    std::printf("%-10s %10s %8s %8s %8s %12s %12s\n", param.c_str(), "duration_s", "status", "failed", "elastic",
                "median_ms", "max_ms");
    int rc = 0;
    for (double v : values) {
        simharness::Overrides ov;
        if (param == "horizon") {
            ov.horizon = static_cast<int>(v);
        } else if (param == "w-xi") {
            ov.path_weight = v;
        } else {
            ov.slope = v;
        }
        const planner::TrajectoryLog log = simharness::run(s, ov);
        const simharness::SolveStats st = simharness::solve_stats(log);
        std::printf("%-10g %10.2f %8s %8d %8d %12.3f %12.3f\n", v, log.duration, log.finished ? "done" : "budget",
                    log.failed_cycles, log.elastic_cycles, st.median_ms, st.max_ms);
        simharness::write_outputs(s, log, base / (param + "_" + CLI::detail::to_string(v)));
        rc = healthy(log) ? rc : 2;
    }
    return rc;
}

int cmd_bench(const std::string& file, const simharness::Overrides& given) {
    const simharness::Scenario s = simharness::load_scenario(file);
    simharness::Overrides ov = given;
    ov.max_time = ov.max_time.value_or(s.config.Ts);
    const planner::TrajectoryLog log = simharness::run(s, ov);
    const simharness::SolveStats st = simharness::solve_stats(log);
    const int horizon = ov.horizon.value_or(s.config.horizon);
    std::printf("scenario %s  N=%d  dof=%d  cycles=%d\n", s.name.c_str(), horizon, s.chain.dof(), st.cycles);
    std::printf("solve ms  min %.3f  max %.3f  mean %.3f  median %.3f\n", st.min_ms, st.max_ms, st.mean_ms,
                st.median_ms);
    int budget_hits = 0;
    for (const auto& r : log.records) {
        budget_hits += r.status == "max_time" ? 1 : 0;
    }
    std::printf("cycles hitting the time budget: %d\n", budget_hits);
    if (st.median_ms >= s.config.Ts * 1e3) {
        std::printf("warning: median solve time exceeds the sampling period\n");
    }
    return healthy(log) ? 0 : 2;
}

int cmd_validate(const std::string& file) {
    const simharness::Scenario s = simharness::load_scenario(file);
    const std::vector<std::string> findings = simharness::precheck(s);
    for (const auto& f : findings) {
        std::cout << "problem: " << f << "\n";
    }
    if (findings.empty()) {
        std::cout << s.name << ": ok (" << s.vias.size() - 1 << " segments, " << s.events.size() << " events)\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Path-following MPC trajectory planner"};
    app.require_subcommand(1);

    std::string file;
    std::string out_dir;
    std::optional<int> horizon;
    std::optional<double> w_xi;
    std::optional<double> slope;
    const auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--horizon", horizon, "prediction horizon N")->check(CLI::PositiveNumber);
        sub->add_option("--w-xi", w_xi, "path progress weight, expressed as w_xi * phi_f")->check(CLI::PositiveNumber);
        sub->add_option("--slope", slope, "envelope slope at the via-points")->check(CLI::PositiveNumber);
    };

    CLI::App* plan = app.add_subcommand("plan", "run the closed loop and write trajectory.csv and summary.txt");
    plan->add_option("scenario", file, "scenario file")->required()->check(CLI::ExistingFile);
    plan->add_option("--out", out_dir, "output directory");
    add_overrides(plan);

    std::string param;
    std::vector<double> values;
    CLI::App* sweep = app.add_subcommand("sweep", "repeat the run over a list of parameter values");
    sweep->add_option("scenario", file, "scenario file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", param, "swept parameter")
        ->required()
        ->check(CLI::IsMember({"horizon", "w-xi", "slope"}));
    sweep->add_option("--values", values, "values to run")->required();
    sweep->add_option("--out", out_dir, "output directory");

    CLI::App* bench = app.add_subcommand("bench", "run with the real-time budget and report solve times");
    bench->add_option("scenario", file, "scenario file")->required()->check(CLI::ExistingFile);
    add_overrides(bench);

    CLI::App* validate = app.add_subcommand("validate", "parse and check a scenario without running it");
    validate->add_option("scenario", file, "scenario file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    simharness::Overrides ov;
    ov.horizon = horizon;
    ov.path_weight = w_xi;
    ov.slope = slope;
    try {
        if (plan->parsed()) {
            return cmd_plan(file, ov, out_dir);
        }
        if (sweep->parsed()) {
            return cmd_sweep(file, param, values, out_dir);
        }
        if (bench->parsed()) {
            return cmd_bench(file, ov);
        }
        return cmd_validate(file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
