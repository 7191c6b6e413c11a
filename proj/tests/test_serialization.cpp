#include <doctest.h>

#include <fstream>
#include <random>

#include "sls/serialization.hpp"
#include "test_helpers.hpp"

using namespace sls;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_SUITE("serialization") {

TEST_CASE("blend CLM round-trips bit-exactly through JSON text") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    BlendClm blend;
    blend.projection = ProjectionKind::radial;
    blend.radii = {0.25, 1.0};
    for (int i = 0; i < 2; ++i) {
        FirClm zone;
        zone.T = 3;
        for (int k = 0; k < 3; ++k) {
            zone.R.push_back(MatrixXd::NullaryExpr(2, 2, [&](int, int) { return g(rng); }));
            zone.M.push_back(MatrixXd::NullaryExpr(1, 2, [&](int, int) { return g(rng); }));
        }
        blend.zones.push_back(zone);
    }

    const std::string text = blend_to_json(blend).dump();
    const BlendClm back = blend_from_json(json::parse(text));
    REQUIRE(back.N() == 2);
    CHECK(back.projection == ProjectionKind::radial);
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) {
            CHECK((back.zones[i].R[k] - blend.zones[i].R[k]).cwiseAbs().maxCoeff() == 0.0);
            CHECK((back.zones[i].M[k] - blend.zones[i].M[k]).cwiseAbs().maxCoeff() == 0.0);
        }
    // a second pass produces identical bytes
    CHECK(blend_to_json(back).dump() == text);
}

TEST_CASE("schema violations carry a field path") {
    json j = blend_to_json(BlendClm::single(sls::testing::deadbeat_clm(LinearSystem::make(
                                                MatrixXd::Constant(1, 1, 0.5),
                                                MatrixXd::Constant(1, 1, 1.0))),
                                            1.0));
    j.erase("projection");
    try {
        blend_from_json(j);
        FAIL("expected a schema error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("projection") != std::string::npos);
    }
}

TEST_CASE("controller snapshot round-trips") {
    SlController::State s;
    s.t = 7;
    s.what = {VectorXd::Constant(2, 0.5), VectorXd::Constant(2, -1.25)};
    const auto back = controller_state_from_json(controller_state_to_json(s));
    CHECK(back.t == 7);
    REQUIRE(back.what.size() == 2);
    CHECK((back.what[0] - s.what[0]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((back.what[1] - s.what[1]).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("distribution blocks parse all families") {
    auto u = distribution_from_json(json{{"family", "uniform"}, {"eta_max", 0.5}});
    CHECK(u.family() == DisturbanceModel::Family::uniform);
    auto t = distribution_from_json(
        json{{"family", "truncated-gaussian"}, {"sigma", 0.1}, {"eta_max", 1.0}});
    CHECK(t.sigma() == doctest::Approx(0.1));
    auto c = distribution_from_json(
        json{{"family", "clipped-gaussian"}, {"sigma", 0.4}, {"eta_max", 1.0}});
    CHECK(c.atoms().size() == 2);
    auto p = distribution_from_json(json{{"family", "point-mass-list"},
                                         {"eta_max", 1.0},
                                         {"atoms", json::array({json::array({-0.5, 0.5}),
                                                                json::array({0.5, 0.5})})}});
    CHECK(p.second_moment() == doctest::Approx(0.25));
    CHECK_THROWS_AS(distribution_from_json(json{{"family", "weird"}, {"eta_max", 1.0}}),
                    std::invalid_argument);
}

TEST_CASE("config parsing: chain plant, synthesis and simulation blocks") {
    json j;
    j["schema"] = 1;
    j["plant"] = {{"chain", {{"nodes", 6}, {"actuated", "every-other"}}}};
    j["cost"] = {{"Q", 1.0}, {"P", 2.0}};
    j["synthesis"] = {{"T", 8},
                      {"radii", json::array({0.4, 1.0})},
                      {"projection", "saturation"},
                      {"distribution", {{"family", "uniform"}, {"eta_max", 1.0}}},
                      {"safety", {{"x_max", 8.0}, {"u_max", 8.0}, {"eta_max", 1.0}}},
                      {"locality", {{"locality_d", 2}, {"comm_delay", 1}, {"actuation_delay", 1}}},
                      {"dc_reject", {{"zones", json::array({0})}, {"columns", "actuated"}}}};
    j["simulation"] = {{"horizon", 100},
                       {"saturate_input", true},
                       {"u_max", 2.0},
                       {"seed", 5},
                       {"controller", "integral"},
                       {"disturbance",
                        {{"kind", "staggered-steps"},
                         {"nodes", json::array({0, 2})},
                         {"times", json::array({2, 6})},
                         {"amplitude", 0.1}}}};

    auto cfg = parse_config(j);
    CHECK(cfg.plant.n() == 6);
    CHECK(cfg.plant.m() == 3);
    REQUIRE(cfg.locality.has_value());
    CHECK(cfg.locality->actuated_nodes == std::vector<int>{0, 2, 4});
    CHECK(cfg.Q(0, 0) == 1.0);
    CHECK(cfg.P(0, 0) == 2.0);
    REQUIRE(cfg.has_synthesis);
    CHECK(cfg.synth.T == 8);
    REQUIRE(cfg.synth.mask.has_value());
    CHECK(cfg.synth.dc_reject_columns == std::vector<int>{0, 2, 4});
    REQUIRE(cfg.has_simulation);
    CHECK(cfg.sim.controller == "integral");
    CHECK(cfg.sim.has_gen);

    j["schema"] = 2;
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
}

TEST_CASE("trajectory CSV has the documented column layout") {
    Trajectory traj;
    for (int t = 0; t < 3; ++t) {
        traj.x.push_back(VectorXd::Constant(2, t));
        traj.u_raw.push_back(VectorXd::Constant(1, 10.0 + t));
        traj.u_sat.push_back(VectorXd::Constant(1, 20.0 + t));
        traj.w.push_back(VectorXd::Constant(2, 30.0 + t));
    }
    const std::string path = "traj_csv_test.csv";
    write_trajectory_csv(path, traj);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x_1,x_2,u_raw_1,u_sat_1,w_1,w_2");
    std::string line;
    std::getline(in, line);
    CHECK(line == "0,0,0,10,20,30,30");
    std::remove(path.c_str());
}

}  // TEST_SUITE
