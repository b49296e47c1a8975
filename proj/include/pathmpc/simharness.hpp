#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathmpc/kinematics.hpp"
#include "pathmpc/planner.hpp"

namespace pathmpc::simharness {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Scenario {
    std::string name;
    std::string description;
    bool approximate = false;
    kinematics::KinematicChain chain{{kinematics::Joint{}}, {}};
    Eigen::VectorXd initial_q;
    std::vector<refpath::ViaPose> vias;
    std::vector<planner::SegmentBoundSpec> bounds;
    planner::MpcConfig config;
    std::vector<planner::ReplanEvent> events;
};

struct Overrides {
    std::optional<int> horizon;
    std::optional<double> path_weight;
    std::optional<double> slope;
    std::optional<double> max_time;
};

Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::filesystem::path& file);

/// Checks that the start pose matches the first via and that every envelope
/// and basis is well posed. Returns human-readable findings (empty when fine).
std::vector<std::string> precheck(const Scenario& scenario);

Scenario apply_overrides(Scenario scenario, const Overrides& overrides);

planner::TrajectoryLog run(const Scenario& scenario, const Overrides& overrides = {});

/// Column names of trajectory.csv, in order.
std::vector<std::string> csv_columns(int dof);

std::string to_csv(const planner::TrajectoryLog& log, int dof);
planner::TrajectoryLog parse_csv(const std::string& text, int dof);

struct SolveStats {
    double min_ms = 0.0;
    double max_ms = 0.0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    int cycles = 0;
};

SolveStats solve_stats(const planner::TrajectoryLog& log);

std::string summary(const Scenario& scenario, const planner::TrajectoryLog& log);

void write_outputs(const Scenario& scenario, const planner::TrajectoryLog& log, const std::filesystem::path& dir);

/// The configured 7-joint arm used by the bundled scenarios.
kinematics::KinematicChain lbr_iiwa_chain();
planner::Limits lbr_iiwa_limits();

}  // namespace pathmpc::simharness
