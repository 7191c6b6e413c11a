#include "sls/serialization.hpp"

#include <fstream>
#include <stdexcept>

namespace sls {

namespace {

json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument(path + ": expected a matrix (array of rows)");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols)
            throw std::invalid_argument(path + ": ragged matrix rows");
        for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
    }
    return M;
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw std::invalid_argument(path + "." + key + ": missing field");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(path + "." + key + ": wrong type");
    }
}

}  // namespace

json blend_to_json(const BlendClm& blend) {
    json j;
    j["schema"] = 1;
    j["type"] = "blend-clm";
    j["n"] = blend.n();
    j["m"] = blend.m();
    j["T"] = blend.T();
    j["projection"] = to_string(blend.projection);
    json zones = json::array();
    for (int i = 0; i < blend.N(); ++i) {
        json z;
        z["eta"] = blend.radii[i];
        json R = json::array(), M = json::array();
        for (int k = 0; k < blend.T(); ++k) {
            R.push_back(matrix_to_json(blend.zones[i].R[k]));
            M.push_back(matrix_to_json(blend.zones[i].M[k]));
        }
        z["R"] = std::move(R);
        z["M"] = std::move(M);
        zones.push_back(std::move(z));
    }
    j["zones"] = std::move(zones);
    return j;
}

BlendClm blend_from_json(const json& j) {
    if (require<int>(j, "schema", "clm") != 1)
        throw std::invalid_argument("clm.schema: unsupported version");
    const int n = require<int>(j, "n", "clm");
    const int m = require<int>(j, "m", "clm");
    const int T = require<int>(j, "T", "clm");
    BlendClm blend;
    blend.projection = projection_kind_from_string(require<std::string>(j, "projection", "clm"));
    if (!j.contains("zones") || !j["zones"].is_array() || j["zones"].empty())
        throw std::invalid_argument("clm.zones: need a nonempty array");
    for (const auto& z : j["zones"]) {
        blend.radii.push_back(require<double>(z, "eta", "clm.zones[]"));
        FirClm zone;
        zone.T = T;
        const json& R = z.at("R");
        const json& M = z.at("M");
        if (static_cast<int>(R.size()) != T || static_cast<int>(M.size()) != T)
            throw std::invalid_argument("clm.zones[]: need exactly T taps in R and M");
        for (int k = 0; k < T; ++k) {
            Eigen::MatrixXd Rk = matrix_from_json(R[k], "clm.zones[].R");
            Eigen::MatrixXd Mk = matrix_from_json(M[k], "clm.zones[].M");
            if (Rk.rows() != n || Rk.cols() != n || Mk.rows() != m || Mk.cols() != n)
                throw std::invalid_argument("clm.zones[]: tap shape mismatch with n/m");
            zone.R.push_back(std::move(Rk));
            zone.M.push_back(std::move(Mk));
        }
        blend.zones.push_back(std::move(zone));
    }
    blend.check_structure();
    return blend;
}

json locality_to_json(const LocalitySpec& loc) {
    json j;
    json edges = json::array();
    for (auto [a, b] : loc.edges) edges.push_back(json::array({a, b}));
    j["edges"] = std::move(edges);
    j["actuated_nodes"] = loc.actuated_nodes;
    j["locality_d"] = loc.params.locality_d;
    j["comm_delay"] = loc.params.comm_delay;
    j["actuation_delay"] = loc.params.actuation_delay;
    return j;
}

LocalitySpec locality_from_json(const json& j) {
    LocalitySpec loc;
    for (const auto& e : j.at("edges")) loc.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    loc.actuated_nodes = j.at("actuated_nodes").get<std::vector<int>>();
    loc.params.locality_d = require<int>(j, "locality_d", "locality");
    loc.params.comm_delay = require<int>(j, "comm_delay", "locality");
    loc.params.actuation_delay = require<int>(j, "actuation_delay", "locality");
    return loc;
}

json controller_state_to_json(const SlController::State& state) {
    json j;
    j["schema"] = 1;
    j["type"] = "sl-controller-state";
    j["t"] = state.t;
    json what = json::array();
    for (const auto& w : state.what) {
        json v = json::array();
        for (Eigen::Index i = 0; i < w.size(); ++i) v.push_back(w[i]);
        what.push_back(std::move(v));
    }
    j["what"] = std::move(what);
    return j;
}

SlController::State controller_state_from_json(const json& j) {
    if (require<int>(j, "schema", "state") != 1)
        throw std::invalid_argument("state.schema: unsupported version");
    SlController::State s;
    s.t = require<int>(j, "t", "state");
    for (const auto& v : j.at("what")) {
        Eigen::VectorXd w(static_cast<Eigen::Index>(v.size()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = v[i].get<double>();
        s.what.push_back(std::move(w));
    }
    return s;
}

DisturbanceModel distribution_from_json(const json& j) {
    const std::string family = require<std::string>(j, "family", "distribution");
    const double eta_max = require<double>(j, "eta_max", "distribution");
    if (family == "uniform") return DisturbanceModel::uniform(eta_max);
    if (family == "truncated-gaussian")
        return DisturbanceModel::truncated_gaussian(require<double>(j, "sigma", "distribution"),
                                                    eta_max);
    if (family == "clipped-gaussian")
        return DisturbanceModel::clipped_gaussian(require<double>(j, "sigma", "distribution"),
                                                  eta_max);
    if (family == "point-mass-list") {
        std::vector<std::pair<double, double>> atoms;
        for (const auto& a : j.at("atoms")) atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
        return DisturbanceModel::point_masses(std::move(atoms), eta_max);
    }
    throw std::invalid_argument("distribution.family: unknown family " + family);
}

json distribution_to_json(const DisturbanceModel& d) {
    json j;
    j["eta_max"] = d.eta_max();
    switch (d.family()) {
        case DisturbanceModel::Family::uniform:
            j["family"] = "uniform";
            break;
        case DisturbanceModel::Family::truncated_gaussian:
            j["family"] = "truncated-gaussian";
            j["sigma"] = d.sigma();
            break;
        case DisturbanceModel::Family::clipped_gaussian:
            j["family"] = "clipped-gaussian";
            j["sigma"] = d.sigma();
            break;
        case DisturbanceModel::Family::point_mass_list: {
            j["family"] = "point-mass-list";
            json atoms = json::array();
            for (auto [w, p] : d.atoms()) atoms.push_back(json::array({w, p}));
            j["atoms"] = std::move(atoms);
            break;
        }
    }
    return j;
}

namespace {

DisturbanceGen gen_from_json(const json& j) {
    const std::string kind = require<std::string>(j, "kind", "simulation.disturbance");
    if (kind == "iid") return DisturbanceGen::iid(distribution_from_json(j));
    if (kind == "worst-case-bang")
        return DisturbanceGen::bang(require<double>(j, "amplitude", "simulation.disturbance"),
                                    require<int>(j, "period", "simulation.disturbance"),
                                    j.value("start", 1));
    if (kind == "staggered-steps")
        return DisturbanceGen::steps(j.value("nodes", std::vector<int>{8, 10, 12}),
                                     j.value("times", std::vector<int>{2, 6, 10}),
                                     require<double>(j, "amplitude", "simulation.disturbance"));
    if (kind == "impulse")
        return DisturbanceGen::impulse_at(require<int>(j, "node", "simulation.disturbance"),
                                          require<double>(j, "amplitude", "simulation.disturbance"),
                                          j.value("time", 0));
    throw std::invalid_argument("simulation.disturbance.kind: unknown kind " + kind);
}

Eigen::MatrixXd weight_from_json(const json& j, int dim, const std::string& path) {
    if (j.is_number())
        return j.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd M = matrix_from_json(j, path);
    if (M.rows() != dim || M.cols() != dim)
        throw std::invalid_argument(path + ": weight dimension mismatch");
    return M;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (require<int>(j, "schema", "config") != 1)
        throw std::invalid_argument("config.schema: unsupported version");
    ExperimentConfig cfg;

    const json& plant = j.contains("plant") ? j.at("plant") : json::object();
    if (plant.contains("chain")) {
        const json& ch = plant.at("chain");
        const int nodes = require<int>(ch, "nodes", "plant.chain");
        const double coupling = ch.value("coupling", 0.4);
        std::vector<int> actuated;
        if (!ch.contains("actuated") || ch.at("actuated") == "all") {
            for (int i = 0; i < nodes; ++i) actuated.push_back(i);
        } else if (ch.at("actuated") == "every-other") {
            for (int i = 0; i < nodes; i += 2) actuated.push_back(i);
        } else {
            actuated = ch.at("actuated").get<std::vector<int>>();
        }
        cfg.plant = make_chain_plant(nodes, coupling, actuated);
        LocalitySpec loc;
        loc.edges = chain_edges(nodes);
        loc.actuated_nodes = actuated;
        cfg.locality = std::move(loc);
    } else if (plant.contains("A") && plant.contains("B")) {
        cfg.plant = LinearSystem::make(matrix_from_json(plant.at("A"), "plant.A"),
                                       matrix_from_json(plant.at("B"), "plant.B"));
    } else {
        throw std::invalid_argument("plant: need either {A, B} or {chain}");
    }

    const int n = cfg.plant.n();
    const int m = cfg.plant.m();
    cfg.Q = Eigen::MatrixXd::Identity(n, n);
    cfg.P = Eigen::MatrixXd::Identity(m, m);
    if (j.contains("cost")) {
        const json& cost = j.at("cost");
        if (cost.contains("Q")) cfg.Q = weight_from_json(cost.at("Q"), n, "cost.Q");
        if (cost.contains("P")) cfg.P = weight_from_json(cost.at("P"), m, "cost.P");
    }

    if (j.contains("synthesis")) {
        cfg.has_synthesis = true;
        const json& s = j.at("synthesis");
        cfg.synth.T = require<int>(s, "T", "synthesis");
        cfg.synth.radii = require<std::vector<double>>(s, "radii", "synthesis");
        cfg.synth.projection = projection_kind_from_string(s.value("projection", "saturation"));
        const std::string closure = s.value("closure", "coupled");
        if (closure == "coupled")
            cfg.synth.closure = ClosureKind::coupled;
        else if (closure == "strict")
            cfg.synth.closure = ClosureKind::strict_zero;
        else
            throw std::invalid_argument("synthesis.closure: expected 'coupled' or 'strict'");

        cfg.dist = distribution_from_json(s.at("distribution"));
        if (s.contains("safety")) {
            const json& sf = s.at("safety");
            cfg.safety.x_max = sf.value("x_max", kInf);
            cfg.safety.u_max = sf.value("u_max", kInf);
            cfg.safety.eta_max = require<double>(sf, "eta_max", "synthesis.safety");
        } else {
            cfg.safety.eta_max = cfg.synth.radii.back();
        }

        if (s.contains("locality")) {
            if (!cfg.locality)
                throw std::invalid_argument(
                    "synthesis.locality: needs a graph plant (use plant.chain)");
            const json& lo = s.at("locality");
            cfg.locality->params.locality_d = require<int>(lo, "locality_d", "synthesis.locality");
            cfg.locality->params.comm_delay = lo.value("comm_delay", 1);
            cfg.locality->params.actuation_delay = lo.value("actuation_delay", 0);
            cfg.synth.mask = build_locality_mask(n, cfg.locality->edges, cfg.locality->actuated_nodes,
                                                 cfg.locality->params, cfg.synth.T);
        }
        if (s.contains("dc_reject")) {
            const json& dc = s.at("dc_reject");
            cfg.synth.dc_reject_zones = require<std::vector<int>>(dc, "zones", "synthesis.dc_reject");
            if (dc.contains("columns")) {
                if (dc.at("columns") == "actuated") {
                    if (!cfg.locality)
                        throw std::invalid_argument(
                            "synthesis.dc_reject.columns: 'actuated' needs a graph plant");
                    cfg.synth.dc_reject_columns = cfg.locality->actuated_nodes;
                } else {
                    cfg.synth.dc_reject_columns = dc.at("columns").get<std::vector<int>>();
                }
            }
        }
        if (s.contains("solver")) {
            const json& so = s.at("solver");
            cfg.synth.qp.eps_prim = so.value("eps_prim", cfg.synth.qp.eps_prim);
            cfg.synth.qp.eps_dual = so.value("eps_dual", cfg.synth.qp.eps_dual);
            cfg.synth.qp.max_iter = so.value("max_iter", cfg.synth.qp.max_iter);
            cfg.synth.qp.rho = so.value("rho", cfg.synth.qp.rho);
            cfg.synth.qp.alpha_relax = so.value("alpha_relax", cfg.synth.qp.alpha_relax);
            cfg.synth.qp.polish = so.value("polish", cfg.synth.qp.polish);
        }
    }

    if (j.contains("simulation")) {
        cfg.has_simulation = true;
        const json& s = j.at("simulation");
        cfg.sim.horizon = require<int>(s, "horizon", "simulation");
        cfg.sim.saturate_input = s.value("saturate_input", false);
        cfg.sim.u_max = s.value("u_max", kInf);
        cfg.sim.seed = s.value("seed", 0);
        cfg.sim.trajectories = s.value("trajectories", 1);
        cfg.sim.jobs = s.value("jobs", 0);
        cfg.sim.burn_in = s.value("burn_in", 0);
        cfg.sim.controller = s.value("controller", "sl-blend");
        cfg.sim.tau = s.value("tau", 0);
        cfg.sim.kp = s.value("kp", 0.6);
        cfg.sim.ki = s.value("ki", 0.15);
        if (s.contains("disturbance")) {
            cfg.sim.gen = gen_from_json(s.at("disturbance"));
            cfg.sim.has_gen = true;
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const int n = traj.x.empty() ? 0 : static_cast<int>(traj.x[0].size());
    const int m = traj.u_raw.empty() ? 0 : static_cast<int>(traj.u_raw[0].size());
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",x_" << i;
    for (int i = 1; i <= m; ++i) out << ",u_raw_" << i;
    for (int i = 1; i <= m; ++i) out << ",u_sat_" << i;
    for (int i = 1; i <= n; ++i) out << ",w_" << i;
    out << "\n";
    out.precision(17);
    for (int t = 0; t < traj.length(); ++t) {
        out << t;
        for (int i = 0; i < n; ++i) out << ',' << traj.x[t][i];
        for (int i = 0; i < m; ++i)
            out << ',' << (t < static_cast<int>(traj.u_raw.size()) ? traj.u_raw[t][i] : 0.0);
        for (int i = 0; i < m; ++i)
            out << ',' << (t < static_cast<int>(traj.u_sat.size()) ? traj.u_sat[t][i] : 0.0);
        for (int i = 0; i < n; ++i) out << ',' << traj.w[t][i];
        out << "\n";
    }
}

json trajectory_summary(const Trajectory& traj, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& P,
                        const SafetySpec& safety, int burn_in) {
    json j;
    j["length"] = traj.length();
    j["diverged"] = traj.diverged;
    if (traj.diverged) j["divergence_time"] = traj.divergence_time;
    const auto viol = constraint_check(traj, safety);
    j["max_x"] = viol.max_x;
    j["max_u_raw"] = viol.max_u;
    if (viol.first_violation_time) j["first_violation_time"] = *viol.first_violation_time;
    const auto cost = lqr_cost_estimate({traj}, Q, P, burn_in);
    j["time_average_cost"] = cost.mean;
    return j;
}

json synthesis_diagnostics(const SynthesisResult& res) {
    json j;
    j["objective"] = res.objective;
    j["qp_objective"] = res.qp_objective;
    j["state_peak"] = res.state_peak;
    j["input_peak"] = res.input_peak;
    json alpha = json::array();
    for (int r = 0; r < res.alpha.N(); ++r) {
        json row = json::array();
        for (int c = 0; c < res.alpha.N(); ++c) row.push_back(res.alpha.alpha(r, c));
        alpha.push_back(std::move(row));
    }
    j["alpha"] = std::move(alpha);
    json solver;
    solver["status"] = res.status == QpStatus::optimal ? "optimal" : "not-optimal";
    solver["iterations"] = res.iterations;
    solver["polished"] = res.polished;
    solver["prim_residual"] = res.residuals.prim;
    solver["dual_residual"] = res.residuals.dual;
    j["solver"] = std::move(solver);
    j["active_constraints"] = res.active_constraints;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed JSON in ") + path + ": " + e.what());
    }
    return j;
}

}  // namespace sls
