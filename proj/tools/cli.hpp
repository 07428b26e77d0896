#pragma once

#include <dplc/io.hpp>
#include <dplc/simulation.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dplc::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInputError = 2, kNumericalError = 3 };

/// Everything a run can be configured with; every field has a default.
struct RunConfig {
    FitConfig fit;
    TuningPlan tuning;
    SimConfig simulation;
    int replicates = 10;
    std::vector<Method> methods{Method::dplc, Method::cox_scad};
    double train_fraction = 0.8;
};

RunConfig default_run_config();

/// Parse and validate a JSON run configuration; unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);

nlohmann::json run_config_to_json(const RunConfig& cfg);

/// "a,b,c" explicit values or "lo:hi:count" log-spaced.
std::vector<double> parse_lambda_grid(const std::string& text);

/// "DEPTHSxWIDTHS", e.g. "1,2x4,8".
std::pair<std::vector<Index>, std::vector<Index>> parse_arch_grid(const std::string& text);

struct FitArgs {
    std::string data;
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    std::string lambda_grid;
    std::string arch_grid;
};

struct PredictArgs {
    std::string model;
    std::string data;
    std::string out;
};

struct SimulateArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
};

struct BenchmarkArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string lambda_grid;
    std::string arch_grid;
};

/// Feature, coefficient and hazard ratio for each selected feature, then a summary line.
std::string selection_table(const ModelBundle& bundle);

int cmd_fit(const FitArgs& args);
int cmd_predict(const PredictArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_benchmark(const BenchmarkArgs& args);

/// Parse command-line arguments (without the program name) and dispatch.
int run(const std::vector<std::string>& args);

} // namespace dplc::cli
