#include "fsi/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fsi;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fsi_test_" + name);
    fs::remove_all(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig small_twin() {
    ScenarioConfig c;
    c.N = 16;
    c.radius = 0.12;
    c.T = 0.02;
    c.eps_in_cells = 1;
    c.width_cells = 3;
    c.eps_out_cells = 1;
    c.eps_band_cells = {1, 2, 3};
    c.mesh_level = 2;
    return c;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(ScenarioConfig{}.validate()); }

TEST(Config, RoundTripThroughJson) {
    ScenarioConfig c = small_twin();
    c.seed = 99;
    c.blend = BlendMode::Product;
    c.perturb_V = false;
    const ScenarioConfig d = parse_config(config_to_json(c));
    EXPECT_EQ(config_to_json(c), config_to_json(d));
}

TEST(Config, RejectsSubcriticalGamma) {
    EXPECT_THROW(parse_config(R"({"fluid": {"gamma": 1.2}})"), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
    EXPECT_THROW(parse_config(R"({"grid": {"M": 16}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"body": {"radius": "big"}})"), ConfigError);
    EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, RejectsBodyNearWall) {
    EXPECT_THROW(parse_config(R"({"body": {"X0": [0.5, 0.5, 0.2]}, "coupling": {"kappa": 0.1}})"), ConfigError);
}

TEST(InitialData, DeterministicPerSeed) {
    ScenarioConfig c;
    c.N = 8;
    const FluidState a = initial_fluid(c, 8), b = initial_fluid(c, 8);
    EXPECT_EQ(a.rho, b.rho);
    c.seed = 2;
    EXPECT_NE(initial_fluid(c, 8).rho, a.rho);
}

TEST(InitialData, VelocityIsRigidInsideBody) {
    ScenarioConfig c;
    c.N = 16;
    c.V0 = {0.01, 0, 0};
    c.w0 = {0, 0, 0.2};
    const BodyState b = initial_body(c);
    const FluidState s = initial_fluid(c, 16, 0, &b);
    const Grid& g = s.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const Vec3 x = g.center(i, j, k);
                if ((x - b.X).norm() < c.radius)
                    EXPECT_LT((get(s.u, g.idx(i, j, k)) - rigid_velocity(b, x)).norm(), 1e-15);
            }
}

TEST(RunScenario, QuiescentRunKeepsEnergy) {
    ScenarioConfig c;
    c.N = 12;
    c.radius = 0.15;
    c.rho_amplitude = 0;
    c.u_amplitude = 0;
    c.mesh_level = 1;
    const RunResult r = run_scenario(c, "");
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_NEAR(r.t_end, c.T, 1e-12);
    for (const auto& e : r.energy) EXPECT_NEAR(e.E_total, r.E0, 1e-10 * r.E0);
}

TEST(RunScenario, GapStopAtPredictedTime) {
    ScenarioConfig c;
    c.N = 16;
    c.radius = 0.1;
    c.body_density = 1e4;  // heavy body: drag barely changes its course
    c.X0 = {0.5, 0.5, 0.7};
    c.V0 = {0, 0, 1.0};
    c.kappa = 0.1;
    c.mesh_level = 1;
    c.T = 0.3;
    const std::string dir = scratch("gap");
    const RunResult r = run_scenario(c, dir);
    ASSERT_EQ(r.exit_code, kExitGapStop);
    const double t_star = (0.3 - 0.1 - c.kappa / 2) / 1.0;
    EXPECT_NEAR(r.T_min, t_star, r.dt + 1e-3);
    EXPECT_LE(r.body_log.back().gap, c.kappa / 2);
    EXPECT_GT(r.body_log[r.body_log.size() - 2].gap, c.kappa / 2);
    EXPECT_NE(slurp(dir + "/manifest.json").find("\"T_min\""), std::string::npos);
}

TEST(RunScenario, ReRunIsByteIdentical) {
    ScenarioConfig c;
    c.N = 12;
    c.T = 0.01;
    c.mesh_level = 1;
    const std::string a = scratch("det_a"), b = scratch("det_b");
    run_scenario(c, a);
    run_scenario(c, b);
    EXPECT_EQ(slurp(a + "/body.csv"), slurp(b + "/body.csv"));
    EXPECT_EQ(slurp(a + "/energy.csv"), slurp(b + "/energy.csv"));
}

TEST(Twin, IdenticalDataPasses) {
    ScenarioConfig c = small_twin();
    c.delta = 0;
    c.V0 = {0.05, 0, 0};
    c.w0 = {0, 0, 1};
    const TwinResult r = twin_experiment(c, "");
    EXPECT_TRUE(r.verdict) << r.verdict_reason;
    EXPECT_LE(r.max_E_rel, 1e-12);
    EXPECT_LE(r.max_identity_defect, 1e-10);
    EXPECT_LE(r.o_delta_sup, 1e-10);
}

TEST(Twin, VelocityPerturbationSetsInitialRelativeEnergy) {
    ScenarioConfig c = small_twin();
    c.perturb_V = false;
    const TwinResult r = twin_experiment(c, "");
    const BodyState b = initial_body(c);
    const FluidState A = initial_fluid(c, c.N, 0, &b), B = initial_fluid(c, c.N, c.delta, &b);
    double expect = 0;
    const Grid& g = A.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                if (inside_ball(g.center(i, j, k), b.X, c.radius)) continue;
                const std::size_t id = g.idx(i, j, k);
                expect += 0.5 * A.rho[id] * (get(A.u, id) - get(B.u, id)).squaredNorm() * g.cell_volume();
            }
    EXPECT_NEAR(r.E_rel0, expect, 1e-9 * expect);
    EXPECT_TRUE(r.stability.gronwall_ok);
    EXPECT_TRUE(r.verdict) << r.verdict_reason;
}

TEST(Twin, RefinedStrongRunConvergesWithWeakResolution) {
    std::vector<double> peak;
    for (int N : {16, 32}) {
        ScenarioConfig c = small_twin();
        c.N = N;
        c.delta = 0;
        c.refine_B = 2;
        c.T = 0.01;
        const TwinResult r = twin_experiment(c, "");
        ASSERT_EQ(r.exit_code, kExitOk);
        EXPECT_GT(r.max_E_rel, 0);
        EXPECT_LT(r.max_E_rel_over_E_total, 1e-3);
        for (const auto& e : r.energy) EXPECT_TRUE(std::isfinite(e.h_fit));
        peak.push_back(r.max_E_rel);
    }
    EXPECT_LT(peak[1], 0.5 * peak[0]);
}

TEST(Twin, FittedGrowthRateStableUnderStepHalving) {
    std::vector<double> L;
    for (double dt : {0.002, 0.001}) {
        ScenarioConfig c = small_twin();
        c.dt = dt;
        const TwinResult r = twin_experiment(c, "");
        ASSERT_TRUE(r.stability.gronwall_ok);
        L.push_back(r.stability.growth_rate);
    }
    ASSERT_NE(L[0], 0.0);
    EXPECT_LT(std::abs(L[1] / L[0] - 1), 0.3);
}

TEST(Twin, ArtifactInventory) {
    const std::string dir = scratch("twin");
    ScenarioConfig c = small_twin();
    c.T = 0.01;
    twin_experiment(c, dir);
    for (const char* f : {"erel.svg", "remainder.svg", "estimates.svg", "gap.svg", "energy.csv", "body.csv",
                          "estimates.csv", "eps_trend.csv", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir + "/" + f)) << f;
    const CsvTable t = read_csv(dir + "/energy.csv");
    EXPECT_EQ(t.header.size(), 14u);
    EXPECT_FALSE(t.rows.empty());
}

TEST(Reports, EmptySeriesWarnsWithoutPlot) {
    const std::string dir = scratch("empty");
    fs::create_directories(dir);
    write_energy_csv(dir + "/energy.csv", {});
    std::vector<std::string> warnings;
    EXPECT_EQ(emit_reports(dir, &warnings), 0);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_FALSE(fs::exists(dir + "/erel.svg"));
}

TEST(Reports, LogPlotDropsNonPositiveValues) {
    const std::string svg = svg_line_plot("t", "x", "y", {{"s", {0, 1, 2}, {1e-3, 0, 1e-1}}}, true);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_EQ(svg.find("nan"), std::string::npos);
    EXPECT_EQ(svg.find("inf"), std::string::npos);
}

TEST(Manufactured, IdentityMapWithSteadyStateIsExact) {
    const MmsRow r = transformed_mms(16, FluidParams{}, 0);
    EXPECT_LT(r.identity_momentum, 1e-13);
}

TEST(Manufactured, TransformedResidualOrderNearTwo) {
    FluidParams prm;
    prm.mu = 0.02;
    const MmsRow a = transformed_mms(16, prm, 4), b = transformed_mms(32, prm, 4);
    EXPECT_NEAR(observed_order(a.transformed_momentum, b.transformed_momentum), 2.0, 0.2);
    EXPECT_NEAR(observed_order(a.transformed_continuity, b.transformed_continuity), 2.0, 0.2);
    EXPECT_LT(observed_order(a.mutated_momentum, b.mutated_momentum), 1.0);
}

TEST(Manufactured, EveryMutationIsDetected) {
    FluidParams prm;
    prm.mu = 0.02;
    for (int m = 1; m <= 11; ++m) {
        const MmsRow a = transformed_mms(16, prm, m), b = transformed_mms(32, prm, m);
        EXPECT_LT(observed_order(a.mutated_momentum, b.mutated_momentum), 1.8) << "term " << m;
    }
}
