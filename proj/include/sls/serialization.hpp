#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "sls/controller.hpp"
#include "sls/distributed.hpp"
#include "sls/simulate.hpp"
#include "sls/synthesis.hpp"

namespace sls {

using json = nlohmann::json;

// Blend CLM document:
// {
//   "schema": 1, "type": "blend-clm",
//   "n": int, "m": int, "T": int,
//   "projection": "saturation" | "radial",
//   "zones": [ { "eta": real,
//                "R": [T matrices, each n rows of n reals],
//                "M": [T matrices, each m rows of n reals] }, ... ],
//   "diagnostics": { ... },    // optional, written by synthesis
//   "locality": { ... }        // optional, present for localized designs
// }
json blend_to_json(const BlendClm& blend);
BlendClm blend_from_json(const json& j);

json locality_to_json(const LocalitySpec& loc);
LocalitySpec locality_from_json(const json& j);

json controller_state_to_json(const SlController::State& state);
SlController::State controller_state_from_json(const json& j);

// Everything a CLI run needs, parsed from a config document.
struct ExperimentConfig {
    LinearSystem plant{Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
    std::optional<LocalitySpec> locality;  // set when the plant block is a graph
    Eigen::MatrixXd Q, P;
    std::optional<DisturbanceModel> dist;
    SafetySpec safety;
    SynthesisOptions synth;
    bool has_synthesis = false;

    struct Simulation {
        int horizon = 1000;
        bool saturate_input = false;
        double u_max = kInf;
        std::uint64_t seed = 0;
        int trajectories = 1;
        int jobs = 0;
        int burn_in = 0;
        std::string controller = "sl-blend";  // sl-blend | anti-windup | integral
        int tau = 0;
        double kp = 0.6, ki = 0.15;
        DisturbanceGen gen;
        bool has_gen = false;
    } sim;
    bool has_simulation = false;
};

// Throws std::invalid_argument with a field path on schema violations.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);

DisturbanceModel distribution_from_json(const json& j);
json distribution_to_json(const DisturbanceModel& d);

// Trajectory CSV: t, x_1..x_n, u_raw_1..u_raw_m, u_sat_1..u_sat_m, w_1..w_n
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

json trajectory_summary(const Trajectory& traj, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& P,
                        const SafetySpec& safety, int burn_in);

json synthesis_diagnostics(const SynthesisResult& res);

void write_json_file(const std::string& path, const json& j);
json read_json_file(const std::string& path);

}  // namespace sls
