#include "fsi/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    long long seed = -1;
    int threads = 0;
    int cadence = -1;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
    auto* opt = sub->add_option("config", c.config, "scenario JSON file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "override the RNG seed");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--cadence", c.cadence, "field dump every n steps (0 = off)")->check(CLI::NonNegativeNumber);
}

fsi::ScenarioConfig resolve(const Common& c) {
    fsi::ScenarioConfig s = c.config.empty() ? fsi::ScenarioConfig{} : fsi::load_config(c.config);
    if (c.seed >= 0) s.seed = std::uint64_t(c.seed);
    if (c.threads > 0) s.threads = c.threads;
    if (c.cadence >= 0) s.cadence = c.cadence;
    s.validate();
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressible fluid / rigid body simulator with relative-energy diagnostics"};
    app.require_subcommand(1);
    Common run_o, twin_o, mms_o;
    std::string report_dir;
    auto* run = app.add_subcommand("run", "integrate one coupled scenario");
    add_common(run, run_o, true);
    auto* twin = app.add_subcommand("twin", "weak/strong twin run with relative-energy audit");
    add_common(twin, twin_o, true);
    auto* mms = app.add_subcommand("mms", "manufactured-solution convergence study");
    add_common(mms, mms_o, false);
    auto* rep = app.add_subcommand("report", "regenerate plots from an output directory");
    rep->add_option("dir", report_dir, "output directory")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : fsi::kExitConfig;
    }

    try {
        if (*run) {
            const fsi::RunResult r = fsi::run_scenario(resolve(run_o), run_o.out);
            std::printf("run: %s; steps %d, t_end %.6g, max energy excess %.3e, mass drift %.3e, momentum audit %.3e\n",
                        r.reason.c_str(), r.steps, r.t_end, r.max_energy_excess, r.mass_drift, r.momentum_audit);
            if (!std::isnan(r.T_min)) std::printf("T_min %.6g\n", r.T_min);
            return r.exit_code;
        }
        if (*twin) {
            const fsi::TwinResult r = fsi::twin_experiment(resolve(twin_o), twin_o.out);
            std::printf("twin: %s; verdict %s (%s)\n", r.reason.c_str(), r.verdict ? "pass" : "fail",
                        r.verdict_reason.c_str());
            std::printf("E_rel(0) %.3e, max E_rel %.3e, max E_rel/E_total %.3e, gronwall %s, sup|O1-O2| %.3e\n",
                        r.E_rel0, r.max_E_rel, r.max_E_rel_over_E_total, r.stability.gronwall_ok ? "ok" : "violated",
                        r.o_gap_sup);
            return r.exit_code;
        }
        if (*mms) {
            const fsi::MmsResult r = fsi::manufactured_verification(resolve(mms_o), mms_o.out);
            for (const fsi::MmsRow& row : r.rows)
                std::printf("N %3d  cont %.3e  mom %.3e  mutated %.3e  identity %.3e  solver rho %.3e  u %.3e\n",
                            row.N, row.transformed_continuity, row.transformed_momentum, row.mutated_momentum,
                            row.identity_momentum, row.solver_rho, row.solver_u);
            std::printf("orders: continuity %.2f momentum %.2f mutated %.2f solver rho %.2f u %.2f -> %s\n",
                        r.order_continuity, r.order_momentum, r.order_mutated, r.order_solver_rho, r.order_solver_u,
                        r.pass ? "pass" : "fail");
            return fsi::kExitOk;
        }
        if (*rep) {
            std::vector<std::string> warnings;
            const int n = fsi::emit_reports(report_dir, &warnings);
            for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            std::printf("%d plot(s) written to %s\n", n, report_dir.c_str());
            return fsi::kExitOk;
        }
    } catch (const fsi::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return fsi::kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return fsi::kExitOk;
}
