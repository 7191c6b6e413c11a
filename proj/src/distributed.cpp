#include "sls/distributed.hpp"

#include <stdexcept>

namespace sls {

bool mask_compliant(const BlendClm& blend, const LocalityMask& mask) {
    if (mask.T() != blend.T()) return false;
    for (const auto& zone : blend.zones)
        for (int k = 0; k < blend.T(); ++k) {
            for (int r = 0; r < blend.n(); ++r)
                for (int c = 0; c < blend.n(); ++c)
                    if (mask.Sx[k](r, c) == 0 && zone.R[k](r, c) != 0.0) return false;
            for (int r = 0; r < blend.m(); ++r)
                for (int c = 0; c < blend.n(); ++c)
                    if (mask.Su[k](r, c) == 0 && zone.M[k](r, c) != 0.0) return false;
        }
    return true;
}

Trajectory distributed_run(const SimConfig& cfg, const BlendClm& blend, const LocalitySpec& loc,
                           const DisturbanceGen& gen) {
    blend.check_structure();
    if (blend.projection != ProjectionKind::saturation)
        throw std::invalid_argument(
            "distributed_run: only the saturation projection decomposes per node");
    const int n = blend.n();
    const int m = blend.m();
    const int T = blend.T();
    const int N = blend.N();
    if (cfg.plant.n() != n || cfg.plant.m() != m)
        throw std::invalid_argument("distributed_run: plant/CLM dimension mismatch");
    if (static_cast<int>(loc.actuated_nodes.size()) != m)
        throw std::invalid_argument("distributed_run: actuator list does not match input count");

    const LocalityMask mask =
        build_locality_mask(n, loc.edges, loc.actuated_nodes, loc.params, T);
    if (!mask_compliant(blend, mask))
        throw std::invalid_argument("distributed_run: CLM entries violate the locality masks");

    const auto dist = hop_distances(n, loc.edges);
    const int delay = loc.params.comm_delay;
    const int act_delay = loc.params.actuation_delay;

    // A value w_hat_s[j] is deliverable to node i at time t iff it has had
    // time to travel: t >= s + comm_delay * dist(i, j).
    auto readable = [&](int t, int s, int i, int j) {
        return delay == 0 || t - s >= delay * dist[i][j];
    };

    Trajectory traj;
    traj.w = gen_disturbance(gen, cfg.horizon, n, cfg.seed);

    // Per-node scalar histories of the internal estimate and its zone pieces.
    std::vector<std::vector<double>> what_hist(n);
    std::vector<std::vector<std::vector<double>>> piece_hist(N,
                                                             std::vector<std::vector<double>>(n));

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

        const int kmax = std::min(T, t + 1);

        // Each node i updates its own estimate entry from received values.
        Eigen::VectorXd what_t(n);
        for (int i = 0; i < n; ++i) {
            double acc = x[i];
            for (int z = 0; z < N; ++z)
                for (int k = 2; k <= kmax; ++k) {
                    const auto& Rk = blend.zones[z].R[k - 1];
                    const int s = t + 1 - k;
                    for (int j = 0; j < n; ++j) {
                        const double coeff = Rk(i, j);
                        if (coeff == 0.0) continue;
                        if (!readable(t, s, i, j))
                            throw std::logic_error("distributed_run: read ahead of message arrival");
                        acc -= coeff * piece_hist[z][j][s];
                    }
                }
            what_t[i] = acc;
        }
        for (int i = 0; i < n; ++i) {
            what_hist[i].push_back(what_t[i]);
            double below = 0.0;
            for (int z = 0; z < N; ++z) {
                const double cur = sat(what_t[i], blend.radii[z]);
                piece_hist[z][i].push_back(cur - below);
                below = cur;
            }
        }
        traj.what.push_back(what_t);

        // Each actuator computes its input from values within its patch.
        Eigen::VectorXd u(m);
        for (int c = 0; c < m; ++c) {
            double acc = 0.0;
            const int node = loc.actuated_nodes[c];
            for (int z = 0; z < N; ++z)
                for (int k = 1; k <= kmax; ++k) {
                    const auto& Mk = blend.zones[z].M[k - 1];
                    const int s = t + 1 - k;
                    for (int j = 0; j < n; ++j) {
                        const double coeff = Mk(c, j);
                        if (coeff == 0.0) continue;
                        if (!readable(t - act_delay, s, node, j))
                            throw std::logic_error("distributed_run: actuator read ahead of arrival");
                        acc += coeff * piece_hist[z][j][s];
                    }
                }
            u[c] = acc;
        }
        traj.u_raw.push_back(u);
        traj.u_sat.push_back(cfg.saturate_input ? project(ProjectionKind::saturation, cfg.u_max, u)
                                                : u);
    }
    return traj;
}

}  // namespace sls
