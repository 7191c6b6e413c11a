#include "sls/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace sls {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1))));
}

DisturbanceGen DisturbanceGen::iid(DisturbanceModel model) {
    DisturbanceGen g;
    g.kind = Kind::iid_model;
    g.model = std::move(model);
    return g;
}

DisturbanceGen DisturbanceGen::bang(double amplitude, int period, int start_time) {
    DisturbanceGen g;
    g.kind = Kind::worst_case_bang;
    g.amplitude = amplitude;
    g.period = period;
    g.start_time = start_time;
    return g;
}

DisturbanceGen DisturbanceGen::steps(std::vector<int> nodes, std::vector<int> times,
                                     double amplitude) {
    DisturbanceGen g;
    g.kind = Kind::staggered_steps;
    g.step_nodes = std::move(nodes);
    g.step_times = std::move(times);
    g.amplitude = amplitude;
    return g;
}

DisturbanceGen DisturbanceGen::impulse_at(int node, double amplitude, int time) {
    DisturbanceGen g;
    g.kind = Kind::impulse;
    g.impulse_node = node;
    g.amplitude = amplitude;
    g.impulse_time = time;
    return g;
}

DisturbanceGen DisturbanceGen::custom(std::vector<Eigen::VectorXd> seq) {
    DisturbanceGen g;
    g.kind = Kind::custom_sequence;
    g.sequence = std::move(seq);
    return g;
}

std::vector<Eigen::VectorXd> gen_disturbance(const DisturbanceGen& gen, int horizon, int n,
                                             std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("gen_disturbance: horizon must be >= 1");
    std::vector<Eigen::VectorXd> w(horizon, Eigen::VectorXd::Zero(n));
    switch (gen.kind) {
        case DisturbanceGen::Kind::iid_model: {
            if (!gen.model) throw std::invalid_argument("gen_disturbance: missing model");
            std::mt19937_64 rng = rng_stream(seed, 0);
            for (auto& wt : w)
                for (int i = 0; i < n; ++i) wt[i] = gen.model->sample(rng);
            break;
        }
        case DisturbanceGen::Kind::worst_case_bang: {
            const int half = std::max(1, gen.period / 2);
            for (int t = gen.start_time; t < horizon; ++t) {
                const int phase = ((t - gen.start_time) / half) % 2;
                w[t].setConstant(phase == 0 ? gen.amplitude : -gen.amplitude);
            }
            break;
        }
        case DisturbanceGen::Kind::staggered_steps: {
            if (gen.step_nodes.size() != gen.step_times.size())
                throw std::invalid_argument("gen_disturbance: step nodes/times length mismatch");
            for (std::size_t s = 0; s < gen.step_nodes.size(); ++s) {
                const int node = gen.step_nodes[s];
                if (node < 0 || node >= n)
                    throw std::invalid_argument("gen_disturbance: step node out of range");
                for (int t = gen.step_times[s]; t < horizon; ++t) w[t][node] += gen.amplitude;
            }
            break;
        }
        case DisturbanceGen::Kind::impulse: {
            if (gen.impulse_node < 0 || gen.impulse_node >= n)
                throw std::invalid_argument("gen_disturbance: impulse node out of range");
            if (gen.impulse_time >= 0 && gen.impulse_time < horizon)
                w[gen.impulse_time][gen.impulse_node] = gen.amplitude;
            break;
        }
        case DisturbanceGen::Kind::custom_sequence: {
            for (int t = 0; t < horizon && t < static_cast<int>(gen.sequence.size()); ++t) {
                if (gen.sequence[t].size() != n)
                    throw std::invalid_argument("gen_disturbance: custom sequence dimension mismatch");
                w[t] = gen.sequence[t];
            }
            break;
        }
    }
    return w;
}

double Trajectory::max_x() const {
    double v = 0.0;
    for (const auto& xt : x) v = std::max(v, xt.lpNorm<Eigen::Infinity>());
    return v;
}

double Trajectory::max_u_raw() const {
    double v = 0.0;
    for (const auto& ut : u_raw) v = std::max(v, ut.lpNorm<Eigen::Infinity>());
    return v;
}

Trajectory simulate(const SimConfig& cfg, ControllerBase& ctrl, const DisturbanceGen& gen) {
    if (cfg.horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
    const int n = cfg.plant.n();
    const int m = cfg.plant.m();
    if (ctrl.input_dim() != m) throw std::invalid_argument("simulate: controller input dim mismatch");

    Trajectory traj;
    traj.w = gen_disturbance(gen, cfg.horizon, n, cfg.seed);

    auto padded = [](const std::vector<Eigen::VectorXd>& seq, int t, int dim) {
        return t < static_cast<int>(seq.size()) ? seq[t] : Eigen::VectorXd::Zero(dim).eval();
    };

    Eigen::VectorXd x = traj.w[0];
    for (int t = 0; t < cfg.horizon; ++t) {
        if (t > 0) x = cfg.plant.A * traj.x[t - 1] + cfg.plant.B * traj.u_sat[t - 1] + traj.w[t];
        traj.x.push_back(x);
        if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > cfg.divergence_threshold) {
            traj.diverged = true;
            traj.divergence_time = t;
            traj.w.resize(t + 1);
            break;
        }
        const Eigen::VectorXd observed =
            cfg.observation_noise.empty() ? x : (x + padded(cfg.observation_noise, t, n)).eval();
        Eigen::VectorXd u = ctrl.step(observed);
        if (!cfg.input_disturbance.empty()) u += padded(cfg.input_disturbance, t, m);
        traj.u_raw.push_back(u);
        Eigen::VectorXd u_applied =
            cfg.saturate_input ? project(ProjectionKind::saturation, cfg.u_max, u) : u;
        traj.u_sat.push_back(std::move(u_applied));
        if (auto ws = ctrl.internal_state()) traj.what.push_back(*ws);
    }
    return traj;
}

LinearSystem make_chain_plant(int nodes, double coupling, const std::vector<int>& actuated) {
    if (nodes < 2) throw std::invalid_argument("make_chain_plant: need at least 2 nodes");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int i = 0; i < nodes; ++i) {
        const int degree = (i == 0 || i == nodes - 1) ? 1 : 2;
        A(i, i) = 1.0 - coupling * degree;
        if (i > 0) A(i, i - 1) = coupling;
        if (i + 1 < nodes) A(i, i + 1) = coupling;
    }
    std::vector<int> act = actuated;
    if (act.empty())
        for (int i = 0; i < nodes; ++i) act.push_back(i);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nodes, static_cast<int>(act.size()));
    for (std::size_t c = 0; c < act.size(); ++c) {
        if (act[c] < 0 || act[c] >= nodes)
            throw std::invalid_argument("make_chain_plant: actuated node out of range");
        B(act[c], static_cast<int>(c)) = 1.0;
    }
    return LinearSystem::make(std::move(A), std::move(B));
}

IntegralController::IntegralController(const LinearSystem& plant,
                                       const std::vector<int>& actuated_nodes, double kp, double ki)
    : nodes_(actuated_nodes), kp_(kp), ki_(ki) {
    if (!std::isfinite(kp) || !std::isfinite(ki))
        throw std::invalid_argument("IntegralController: gains must be finite");
    const int n = plant.n();
    const int m = static_cast<int>(nodes_.size());
    if (plant.m() != m)
        throw std::invalid_argument("IntegralController: actuator count must match plant inputs");
    for (int node : nodes_)
        if (node < 0 || node >= n)
            throw std::invalid_argument("IntegralController: actuated node out of range");
    z_ = Eigen::VectorXd::Zero(m);

    // Augmented nominal loop [x; z]: u = -kp S x - ki z, z' = z + S x.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, n);
    for (int c = 0; c < m; ++c) S(c, nodes_[c]) = 1.0;
    Eigen::MatrixXd aug(n + m, n + m);
    aug << plant.A - kp * plant.B * S, -ki * plant.B, S, Eigen::MatrixXd::Identity(m, m);
    nominal_radius_ = aug.eigenvalues().cwiseAbs().maxCoeff();
    nominal_stable_ = nominal_radius_ < 1.0;
}

Eigen::VectorXd IntegralController::step(const Eigen::VectorXd& x_t) {
    const int m = static_cast<int>(nodes_.size());
    Eigen::VectorXd u(m);
    for (int c = 0; c < m; ++c) {
        u[c] = -kp_ * x_t[nodes_[c]] - ki_ * z_[c];
        z_[c] += x_t[nodes_[c]];
    }
    return u;
}

void IntegralController::reset() { z_.setZero(); }

CostEstimate lqr_cost_estimate(const std::vector<Trajectory>& batch, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& P, int burn_in) {
    CostEstimate est;
    est.trajectories = static_cast<int>(batch.size());
    std::vector<double> costs;
    for (const auto& traj : batch) {
        if (traj.diverged) {
            ++est.divergent;
            continue;
        }
        const int len = traj.length();
        if (len <= burn_in) continue;
        double acc = 0.0;
        for (int t = burn_in; t < len; ++t)
            acc += traj.x[t].dot(Q * traj.x[t]) + traj.u_sat[t].dot(P * traj.u_sat[t]);
        costs.push_back(acc / static_cast<double>(len - burn_in));
    }
    if (costs.empty()) return est;
    double sum = 0.0;
    for (double c : costs) sum += c;
    est.mean = sum / static_cast<double>(costs.size());
    if (costs.size() > 1) {
        double var = 0.0;
        for (double c : costs) var += (c - est.mean) * (c - est.mean);
        var /= static_cast<double>(costs.size() - 1);
        est.std_error = std::sqrt(var / static_cast<double>(costs.size()));
    }
    return est;
}

ViolationReport constraint_check(const Trajectory& traj, const SafetySpec& safety) {
    ViolationReport rep;
    for (int t = 0; t < traj.length(); ++t) {
        rep.max_x = std::max(rep.max_x, traj.x[t].lpNorm<Eigen::Infinity>());
        if (t < static_cast<int>(traj.u_raw.size()))
            rep.max_u = std::max(rep.max_u, traj.u_raw[t].lpNorm<Eigen::Infinity>());
        const bool viol =
            traj.x[t].lpNorm<Eigen::Infinity>() > safety.x_max ||
            (t < static_cast<int>(traj.u_raw.size()) &&
             traj.u_raw[t].lpNorm<Eigen::Infinity>() > safety.u_max);
        if (viol && !rep.first_violation_time) rep.first_violation_time = t;
    }
    return rep;
}

std::vector<Trajectory> monte_carlo(const SimConfig& cfg, const BlendClm& blend,
                                    const DisturbanceGen& gen, int count, int jobs) {
    std::vector<Trajectory> out(count);
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, count));

    auto worker = [&](int first, int stride) {
        for (int r = first; r < count; r += stride) {
            SimConfig local = cfg;
            local.seed = splitmix64(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (r + 1)));
            SlController ctrl(blend);
            out[r] = simulate(local, ctrl, gen);
        }
    };
    if (jobs == 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker, j, jobs);
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace sls
