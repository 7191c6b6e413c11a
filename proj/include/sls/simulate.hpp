#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "sls/controller.hpp"
#include "sls/disturbance.hpp"
#include "sls/linear_system.hpp"
#include "sls/synthesis.hpp"

namespace sls {

// Disturbance generators for closed-loop experiments. Every generator is
// deterministic given (horizon, n, seed).
struct DisturbanceGen {
    enum class Kind {
        iid_model,        // i.i.d. draws from a DisturbanceModel per coordinate
        worst_case_bang,  // synchronized +-amplitude square wave
        staggered_steps,  // persistent steps at given coordinates/times
        impulse,          // single coordinate hit once
        custom_sequence,
    };
    Kind kind = Kind::iid_model;

    std::optional<DisturbanceModel> model;  // iid_model

    double amplitude = 1.0;  // bang / steps / impulse
    int period = 20;         // bang: full period (half up, half down)
    int start_time = 1;      // bang: first nonzero step

    std::vector<int> step_nodes{8, 10, 12};  // staggered steps
    std::vector<int> step_times{2, 6, 10};

    int impulse_node = 0;
    int impulse_time = 0;

    std::vector<Eigen::VectorXd> sequence;  // custom

    static DisturbanceGen iid(DisturbanceModel model);
    static DisturbanceGen bang(double amplitude, int period, int start_time = 1);
    static DisturbanceGen steps(std::vector<int> nodes, std::vector<int> times, double amplitude);
    static DisturbanceGen impulse_at(int node, double amplitude, int time = 0);
    static DisturbanceGen custom(std::vector<Eigen::VectorXd> seq);
};

std::vector<Eigen::VectorXd> gen_disturbance(const DisturbanceGen& gen, int horizon, int n,
                                             std::uint64_t seed);

// Derives independent, reproducible RNG streams from one top-level seed:
// stream(index) = mt19937_64 seeded with splitmix64(seed ^ golden * (index+1)).
std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t index);

struct SimConfig {
    LinearSystem plant;
    bool saturate_input = false;
    double u_max = kInf;
    int horizon = 100;
    std::uint64_t seed = 0;
    double divergence_threshold = 1e6;
    // Optional extra perturbations: d added to the input, v to the state the
    // controller observes (both zero-padded past their length).
    std::vector<Eigen::VectorXd> input_disturbance;
    std::vector<Eigen::VectorXd> observation_noise;
};

struct Trajectory {
    std::vector<Eigen::VectorXd> x, u_raw, u_sat, w, what;
    bool diverged = false;
    int divergence_time = -1;

    double max_x() const;
    double max_u_raw() const;
    int length() const { return static_cast<int>(x.size()); }
};

// Closed loop of x_t = A x_{t-1} + B sat(u_{t-1}) + w_t with x_0 = w_0.
// Step order: observe x_t (+ noise), compute u_t, add input disturbance,
// saturate if enabled, advance. Divergence truncates with a flag.
Trajectory simulate(const SimConfig& cfg, ControllerBase& ctrl, const DisturbanceGen& gen);

// Bi-directional chain plant: diagonal 1 - coupling * degree, off-diagonal
// coupling on chain edges; B selects the actuated nodes (all by default).
LinearSystem make_chain_plant(int nodes, double coupling = 0.4,
                              const std::vector<int>& actuated = {});

// Per-actuated-node PI state machine: u_c = -kp x[node_c] - ki z_c with
// z integrating the local state. The flag reports whether the unsaturated
// nominal loop is stable (spectral radius of the augmented system < 1).
class IntegralController : public ControllerBase {
public:
    IntegralController(const LinearSystem& plant, const std::vector<int>& actuated_nodes,
                       double kp = 0.6, double ki = 0.15);

    Eigen::VectorXd step(const Eigen::VectorXd& x_t) override;
    void reset() override;
    int input_dim() const override { return static_cast<int>(nodes_.size()); }
    std::optional<Eigen::VectorXd> internal_state() const override { return z_; }

    bool nominal_loop_stable() const { return nominal_stable_; }
    double nominal_spectral_radius() const { return nominal_radius_; }

private:
    std::vector<int> nodes_;
    double kp_, ki_;
    Eigen::VectorXd z_;
    bool nominal_stable_ = false;
    double nominal_radius_ = 0.0;
};

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int trajectories = 0;
    int divergent = 0;  // excluded from the mean
};

// Time-averaged quadratic cost after burn-in, batch mean and standard error.
CostEstimate lqr_cost_estimate(const std::vector<Trajectory>& batch, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& P, int burn_in);

struct ViolationReport {
    double max_x = 0.0;
    double max_u = 0.0;  // pre-saturation input
    std::optional<int> first_violation_time;
    bool ok() const { return !first_violation_time.has_value(); }
};
ViolationReport constraint_check(const Trajectory& traj, const SafetySpec& safety);

// Runs `count` independent simulations with RNG streams split from cfg.seed,
// optionally in parallel; results are ordered by trajectory index.
std::vector<Trajectory> monte_carlo(const SimConfig& cfg, const BlendClm& blend,
                                    const DisturbanceGen& gen, int count, int jobs = 0);

}  // namespace sls
