// slsblend: synthesize, simulate and compare blended system-level controllers.
//
// Exit codes: 0 success, 1 usage/schema/load error, 2 synthesis infeasible,
// 3 solver failed to converge.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <thread>

#include "sls/serialization.hpp"

namespace {

using namespace sls;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNoConvergence = 3;

std::unique_ptr<ControllerBase> make_controller(const ExperimentConfig& cfg,
                                                const BlendClm* blend) {
    const auto& sim = cfg.sim;
    if (sim.controller == "integral") {
        std::vector<int> nodes;
        if (cfg.locality) {
            nodes = cfg.locality->actuated_nodes;
        } else {
            for (int c = 0; c < cfg.plant.m(); ++c) nodes.push_back(c);
        }
        auto ctrl = std::make_unique<IntegralController>(cfg.plant, nodes, sim.kp, sim.ki);
        if (!ctrl->nominal_loop_stable())
            std::cerr << "warning: nominal integral loop spectral radius "
                      << ctrl->nominal_spectral_radius() << " >= 1\n";
        return ctrl;
    }
    if (blend == nullptr) throw std::invalid_argument("this controller kind needs a CLM file");
    if (sim.controller == "sl-blend") return std::make_unique<SlController>(*blend);
    if (sim.controller == "anti-windup")
        return std::make_unique<AntiWindupController>(*blend, cfg.plant, sim.tau);
    throw std::invalid_argument("unknown controller kind: " + sim.controller);
}

int run_synth(const std::string& config_path, const std::string& out_path, double tol) {
    ExperimentConfig cfg = load_config(config_path);
    if (!cfg.has_synthesis || !cfg.dist)
        throw std::invalid_argument("config: synth needs a synthesis block");
    cfg.synth.validation_tol = tol;

    SynthesisResult res;
    try {
        res = synthesize_blend(cfg.plant, cfg.Q, cfg.P, *cfg.dist, cfg.safety, cfg.synth);
    } catch (const SynthesisError& e) {
        std::cerr << e.what() << "\n";
        return e.status == QpStatus::infeasible_detected ? kExitInfeasible : kExitNoConvergence;
    }

    json doc = blend_to_json(res.blend);
    doc["diagnostics"] = synthesis_diagnostics(res);
    if (cfg.synth.mask && cfg.locality) doc["locality"] = locality_to_json(*cfg.locality);
    write_json_file(out_path, doc);
    std::cout << "objective " << res.objective << "  state_peak " << res.state_peak
              << "  input_peak " << res.input_peak << "  iterations " << res.iterations << "\n";
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& clm_path,
                 const std::string& out_dir, std::optional<std::uint64_t> seed_override,
                 bool distributed) {
    ExperimentConfig cfg = load_config(config_path);
    if (!cfg.has_simulation || !cfg.sim.has_gen)
        throw std::invalid_argument("config: simulate needs a simulation block with a disturbance");

    std::optional<BlendClm> blend;
    std::optional<LocalitySpec> clm_locality;
    if (!clm_path.empty()) {
        const json doc = read_json_file(clm_path);
        blend = blend_from_json(doc);
        if (doc.contains("locality")) clm_locality = locality_from_json(doc.at("locality"));
        if (blend->n() != cfg.plant.n() || blend->m() != cfg.plant.m())
            throw std::invalid_argument("CLM dimensions do not match the configured plant");
    }

    SimConfig sim;
    sim.plant = cfg.plant;
    sim.saturate_input = cfg.sim.saturate_input;
    sim.u_max = cfg.sim.u_max;
    sim.horizon = cfg.sim.horizon;
    sim.seed = seed_override.value_or(cfg.sim.seed);

    Trajectory traj;
    if (distributed) {
        if (!blend) throw std::invalid_argument("simulate --distributed needs a CLM file");
        const LocalitySpec loc = clm_locality ? *clm_locality
                                 : cfg.locality ? *cfg.locality
                                                : throw std::invalid_argument(
                                                      "distributed run needs locality provenance");
        traj = distributed_run(sim, *blend, loc, cfg.sim.gen);
    } else {
        auto ctrl = make_controller(cfg, blend ? &*blend : nullptr);
        traj = simulate(sim, *ctrl, cfg.sim.gen);
    }

    fs::create_directories(out_dir);
    write_trajectory_csv((fs::path(out_dir) / "trajectory.csv").string(), traj);
    json summary = trajectory_summary(traj, cfg.Q, cfg.P, cfg.safety, cfg.sim.burn_in);
    summary["seed"] = sim.seed;
    summary["controller"] = distributed ? "distributed-sl-blend" : cfg.sim.controller;
    write_json_file((fs::path(out_dir) / "summary.json").string(), summary);
    std::cout << "wrote " << out_dir << "/trajectory.csv and summary.json"
              << (traj.diverged ? " (diverged)" : "") << "\n";
    return kExitOk;
}

struct SweepRow {
    double value = 0.0;
    bool feasible = false;
    double linear_cost = 0.0;
    double blend_cost = 0.0;
    std::string note;
};

int run_sweep(const std::string& config_path, const std::string& var, const std::string& grid_csv,
              const std::string& out_path, int jobs) {
    ExperimentConfig base = load_config(config_path);
    if (!base.has_synthesis || !base.dist)
        throw std::invalid_argument("config: sweep needs a synthesis block");
    if (var != "sigma" && var != "eta1")
        throw std::invalid_argument("sweep variable must be 'sigma' or 'eta1'");

    std::vector<double> grid;
    {
        std::stringstream ss(grid_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
    }
    if (grid.empty()) throw std::invalid_argument("sweep: empty grid");

    std::vector<SweepRow> rows(grid.size());
    std::mutex io_mutex;
    auto solve_point = [&](std::size_t idx) {
        SweepRow row;
        row.value = grid[idx];
        ExperimentConfig cfg = base;
        try {
            if (var == "sigma") {
                cfg.dist = DisturbanceModel::truncated_gaussian(grid[idx], cfg.dist->eta_max());
            } else {
                if (cfg.synth.radii.size() < 2)
                    throw std::invalid_argument("eta1 sweep needs at least two radii");
                cfg.synth.radii[0] = grid[idx];
                for (std::size_t i = 1; i + 1 < cfg.synth.radii.size(); ++i)
                    cfg.synth.radii[i] = std::max(cfg.synth.radii[i], grid[idx]);
            }
            const auto blend =
                synthesize_blend(cfg.plant, cfg.Q, cfg.P, *cfg.dist, cfg.safety, cfg.synth);
            const auto linear =
                synthesize_linear(cfg.plant, cfg.Q, cfg.P, *cfg.dist, cfg.safety, cfg.synth);
            row.feasible = true;
            row.blend_cost = blend.objective;
            row.linear_cost = linear.objective;
        } catch (const SynthesisError& e) {
            row.note = e.binding_family;
        }
        rows[idx] = std::move(row);
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << var << " = " << grid[idx] << (rows[idx].feasible ? "" : " infeasible") << "\n";
    };

    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
    if (jobs == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) solve_point(i);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&, j] {
                for (std::size_t i = j; i < grid.size(); i += jobs) solve_point(i);
            });
        for (auto& th : pool) th.join();
    }

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out.precision(12);
    out << var << ",linear_cost,blend_cost,improvement_percent,status\n";
    for (const auto& row : rows) {
        out << row.value << ',';
        if (row.feasible) {
            const double imp = (row.linear_cost - row.blend_cost) / row.linear_cost * 100.0;
            out << row.linear_cost << ',' << row.blend_cost << ',' << imp << ",ok\n";
        } else {
            out << ",,," << (row.note.empty() ? "infeasible" : "infeasible:" + row.note) << "\n";
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int run_compare(const std::vector<std::string>& clm_paths, const std::string& out_json) {
    json table = json::array();
    std::cout << "file | zones | T | objective | state_peak | input_peak | radii\n";
    for (const auto& path : clm_paths) {
        const json doc = read_json_file(path);
        const BlendClm blend = blend_from_json(doc);
        const auto [xp, up] = worst_case_peak(blend);
        json row;
        row["file"] = path;
        row["zones"] = blend.N();
        row["T"] = blend.T();
        row["radii"] = blend.radii;
        row["state_peak"] = xp;
        row["input_peak"] = up;
        if (doc.contains("diagnostics") && doc["diagnostics"].contains("objective"))
            row["objective"] = doc["diagnostics"]["objective"];
        table.push_back(row);
        std::cout << path << " | " << blend.N() << " | " << blend.T() << " | "
                  << (row.contains("objective") ? row["objective"].dump() : "-") << " | " << xp
                  << " | " << up << " | " << json(blend.radii).dump() << "\n";
    }
    if (!out_json.empty()) write_json_file(out_json, table);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blended system-level controller synthesis and simulation"};
    app.require_subcommand(1);

    std::string config_path, out_path = "clm.json", clm_path, out_dir = "sim_out";
    std::string sweep_var = "sigma", grid = "0.02,0.05,0.1,0.2,0.5", sweep_out = "sweep.csv";
    std::vector<std::string> clm_paths;
    std::string compare_out;
    double tol = 1e-6;
    int jobs = 0;
    std::uint64_t seed = 0;
    bool seed_set = false, distributed = false;

    auto* synth = app.add_subcommand("synth", "synthesize a blend CLM from a config");
    synth->add_option("--config", config_path, "config JSON path")->required();
    synth->add_option("--out", out_path, "output CLM JSON path");
    synth->add_option("--tol", tol, "validation tolerance");

    auto* simulate_cmd = app.add_subcommand("simulate", "closed-loop simulation");
    simulate_cmd->add_option("--config", config_path, "config JSON path")->required();
    simulate_cmd->add_option("--clm", clm_path, "CLM JSON path (for sl-blend/anti-windup)");
    simulate_cmd->add_option("--out", out_dir, "output directory");
    auto* seed_opt = simulate_cmd->add_option("--seed", seed, "override the config seed");
    simulate_cmd->add_flag("--distributed", distributed, "run the localized per-node runtime");

    auto* sweep = app.add_subcommand("sweep", "cost sweep over sigma or eta1");
    sweep->add_option("--config", config_path, "config JSON path")->required();
    sweep->add_option("--var", sweep_var, "sweep variable: sigma | eta1");
    sweep->add_option("--grid", grid, "comma-separated grid values");
    sweep->add_option("--out", sweep_out, "output CSV path");
    sweep->add_option("--jobs", jobs, "parallel solves (default: hardware)");

    auto* compare = app.add_subcommand("compare", "tabulate CLM files");
    compare->add_option("files", clm_paths, "CLM JSON files")->required();
    compare->add_option("--out", compare_out, "also write a JSON table");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        if (synth->parsed()) return run_synth(config_path, out_path, tol);
        if (simulate_cmd->parsed())
            return run_simulate(config_path, clm_path, out_dir,
                                seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                                distributed);
        if (sweep->parsed()) return run_sweep(config_path, sweep_var, grid, sweep_out, jobs);
        if (compare->parsed()) return run_compare(clm_paths, compare_out);
    } catch (const SynthesisError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.status == QpStatus::infeasible_detected ? kExitInfeasible : kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
