// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include "fsi/harness.hpp"
#include "fsi/manufactured.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace fsi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s < budget_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::printf("criterion %2d %s  %s: %s [%.2f s of %.0f s%s]\n", id, ok ? "PASS" : "FAIL", name, o.detail.c_str(), s,
                budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char b[128];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    return q.normalized().toRotationMatrix();
}

Vec3 random_vec(std::mt19937_64& rng, double s) {
    std::uniform_real_distribution<double> u(-s, s);
    return {u(rng), u(rng), u(rng)};
}

BodyState test_body(const Vec3& V, const Vec3& w, const Mat3& J0) {
    BodyState b;
    b.m = 1;
    b.J0 = J0;
    b.X = {0.5, 0.5, 0.5};
    b.V = V;
    b.w = w;
    return b;
}

struct Cut {
    double R, in, width, out;
    BlendedField operator()(const BodyState& b) const { return {b, build_cutoff(b, R, in, width, out), BlendMode::Solenoidal}; }
};

/// Two bodies under zero loads with their flow maps, advanced in lockstep.
struct Pair {
    Cut cut;
    BodyState b1, b2;
    FlowMap m1, m2;
    Pair(const Cut& c, const BodyState& a, const BodyState& b, int n)
        : cut(c), b1(a), b2(b), m1(n, a, c(a).zeta), m2(n, b, c(b).zeta) {}
    void step(double dt) {
        const BlendedField f1 = cut(b1), f2 = cut(b2);
        b1 = step_body(b1, Vec3::Zero(), Vec3::Zero(), dt);
        b2 = step_body(b2, Vec3::Zero(), Vec3::Zero(), dt);
        m1.advance(f1, cut(b1), dt);
        m2.advance(f2, cut(b2), dt);
    }
};

TwinResult identical_twin_32;
TwinResult perturbed_twin_32;

}  // namespace

int main() {
    const FluidParams prm;

    criterion(1, "self-distance", 1, [&] {
        ScenarioConfig c;
        const BodyState b = initial_body(c, 0);
        const FluidState s = initial_fluid(c, c.N, 0, &b);
        const RelativeEnergy e = relative_energy(s, b, c.radius, {s.rho, s.u, b.V, b.w}, prm);
        return Outcome{std::abs(e.total()) <= 1e-12, fmt("E_rel(s|s) = %.3e", e.total())};
    });

    criterion(2, "identity-transform degeneracy", 60, [&] {
        ScenarioConfig c;
        c.delta = 0;
        c.V0 = {0.05, 0.0, 0.0};
        c.w0 = {0.0, 0.3, 1.0};
        c.T = 0.05;
        const double h = c.h();
        const Cut cut{c.radius, c.eps_in_cells * h, c.width_cells * h, c.eps_out_cells * h};
        const BodyState b = initial_body(c);
        Pair p(cut, b, b, c.N);
        for (int q = 0; q < 20; ++q) p.step(1e-3);
        const Grid g(c.N);
        const ComposedMaps cm = compose_maps(p.m1, p.m2, cut(p.b1), cut(p.b2), g);
        const FluidState s = initial_fluid(c, c.N, 0, &p.b1);
        double worst = 0;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    if (inside_ball(g.center(i, j, k), p.b1.X, c.radius)) continue;
                    const TransformTensors T = compute_tensors(g, cm.disp, cm.dtZ, i, j, k);
                    const LocalFields f = local_fields(g, s.rho, s.u, prm, i, j, k);
                    worst = std::max({worst, inf_norm(T.H - Mat3::Identity()), inf_norm(T.Gm - Mat3::Identity()),
                                      std::abs(source_G(f, T)), source_F(f, T, prm).total.lpNorm<Eigen::Infinity>()});
                    for (int m = 0; m < 3; ++m) worst = std::max(worst, inf_norm(T.Gamma[m]));
                }
        identical_twin_32 = twin_experiment(c, "");
        const TwinResult& r = identical_twin_32;
        const bool ok = worst <= 1e-10 && r.verdict && r.max_E_rel <= 1e-12;
        return Outcome{ok, fmt("max tensor/source defect %.2e", worst) + fmt(", twin max E_rel %.2e", r.max_E_rel) +
                               ", verdict " + r.verdict_reason};
    });

    criterion(3, "rotation algebra", 1, [&] {
        std::mt19937_64 rng(17);
        double cross = 0, exact = 0;
        for (int q = 0; q < 1000; ++q) {
            const Mat3 R = random_rotation(rng);
            const Vec3 a = random_vec(rng, 1), b = random_vec(rng, 1);
            cross = std::max(cross, ((R * a).cross(R * b) - R * a.cross(b)).lpNorm<Eigen::Infinity>());
            BodyState b1, b2;
            b1.O = random_rotation(rng);
            b2.O = random_rotation(rng);
            b1.w = random_vec(rng, 2);
            b2.w = random_vec(rng, 2);
            const MapEstimateReport r = map_estimate_diagnostics({b1}, {b2}, 1.0, 0.15);
            exact = std::max(exact, r.identity_exact_max);
        }
        // centred-difference path on random spinning pairs at dt and dt/2
        double fd[2] = {0, 0};
        for (int q = 0; q < 10; ++q) {
            const Mat3 J0 = Vec3(1.0, 2.0, 3.0).asDiagonal();
            const BodyState a0 = test_body(Vec3::Zero(), random_vec(rng, 2), J0);
            const BodyState c0 = test_body(Vec3::Zero(), random_vec(rng, 2), J0);
            for (int lv = 0; lv < 2; ++lv) {
                const double dt = 0.01 / (1 << lv);
                std::vector<BodyState> t1, t2;
                BodyState a = a0, c = c0;
                for (int s = 0; s <= (10 << lv); ++s) {
                    t1.push_back(a);
                    t2.push_back(c);
                    a = step_body(a, Vec3::Zero(), Vec3::Zero(), dt);
                    c = step_body(c, Vec3::Zero(), Vec3::Zero(), dt);
                }
                fd[lv] = std::max(fd[lv], map_estimate_diagnostics(t1, t2, dt, 0.15).identity_fd_max);
            }
        }
        const bool ok = cross <= 1e-12 && exact <= 1e-10 && fd[0] <= 0.01 * 10 && fd[1] <= 0.6 * fd[0];
        return Outcome{ok, fmt("cross %.2e", cross) + fmt(", closed-form %.2e", exact) +
                               fmt(", difference path %.2e", fd[0]) + fmt(" -> %.2e at dt/2", fd[1])};
    });

    criterion(4, "map round trip", 120, [&] {
        const int n = 32;
        const double h = 1.0 / n;
        const Cut cut{0.15, 2 * h, 6 * h, h};
        const Mat3 J0 = Vec3(0.01, 0.015, 0.02).asDiagonal();
        Pair p(cut, test_body({0.1, 0.05, 0.0}, {0.5, -1.0, 2.0}, J0), test_body({-0.05, 0.0, 0.08}, {1.5, 0.3, -0.5}, J0),
               n);
        for (int q = 0; q < 500; ++q) p.step(4e-4);
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> U(0.01, 0.99);
        double zy = 0, zz = 0;
        for (int q = 0; q < 2000; ++q) {
            const Vec3 x(U(rng), U(rng), U(rng));
            zy = std::max(zy, (p.m1.eval(p.m1.invert(x)) - x).lpNorm<Eigen::Infinity>());
            zz = std::max(zz, (tilde_z1(p.m1, p.m2, tilde_z2(p.m1, p.m2, x)) - x).lpNorm<Eigen::Infinity>());
        }
        return Outcome{zy <= 1e-8 && zz <= 1e-8, fmt("|Z(Y(x))-x| %.2e", zy) + fmt(", |Z1(Z2(x))-x| %.2e", zz)};
    });

    criterion(5, "manufactured convergence", 600, [&] {
        const MmsResult r = manufactured_verification(ScenarioConfig{}, "");
        std::string d = fmt("orders: transformed continuity %.2f", r.order_continuity) +
                        fmt(", momentum %.2f", r.order_momentum) + fmt(", solver rho %.2f", r.order_solver_rho) +
                        fmt(", u %.2f", r.order_solver_u) + fmt(", mutated %.2f", r.order_mutated);
        return Outcome{r.pass, d};
    });

    criterion(6, "discrete energy inequality", 300, [&] {
        const RunResult r = run_scenario(ScenarioConfig{}, "");
        return Outcome{r.exit_code == kExitOk && r.max_energy_excess <= 1e-3,
                       fmt("max (E + D)/E0 - 1 = %.3e", r.max_energy_excess) + fmt(" over %.0f steps", r.steps)};
    });

    criterion(7, "map estimate ratios", 120, [&] {
        std::mt19937_64 rng(31);
        const int n = 16;
        const Cut cut{0.1, 0.05, 0.15, 0.05};
        const double T = 0.05;
        double worst = 0;
        bool finite = true;
        for (int pair = 0; pair < 10; ++pair) {
            const Mat3 J0 = (Vec3(1, 1, 1) + random_vec(rng, 0.5)).asDiagonal();
            const BodyState a = test_body(random_vec(rng, 0.1), random_vec(rng, 1), 0.01 * J0);
            const BodyState b = test_body(random_vec(rng, 0.1), random_vec(rng, 1), 0.01 * J0);
            std::array<double, 5> sup[2];
            for (int lv = 0; lv < 2; ++lv) {
                const double dt = 0.0025 / (1 << lv);
                Pair p(cut, a, b, n);
                std::vector<BodyState> t1, t2;
                std::vector<FieldNorms> fn;
                const int steps = int(std::lround(T / dt));
                for (int s = 0; s <= steps; ++s) {
                    t1.push_back(p.b1);
                    t2.push_back(p.b2);
                    fn.push_back(composed_field_norms(compose_maps(p.m1, p.m2, cut(p.b1), cut(p.b2), Grid(n)), cut.R));
                    fn.back().t = s * dt;
                    if (s < steps) p.step(dt);
                }
                const MapEstimateReport r = map_estimate_diagnostics(t1, t2, dt, cut.R, fn);
                finite = finite && r.finite && r.guard_ok;
                for (int q = 0; q < 4; ++q) sup[lv][q] = r.sup_ratio[q];
                sup[lv][4] = r.sup_ratio_inverse;
            }
            for (int q = 0; q < 5; ++q) {
                if (!(sup[0][q] > 0) || !std::isfinite(sup[0][q])) finite = false;
                else worst = std::max(worst, std::abs(sup[1][q] / sup[0][q] - 1));
            }
        }
        return Outcome{finite && worst <= 0.2, fmt("max relative change of sup ratios under dt/2: %.2e", worst) +
                                                   (finite ? "" : ", non-finite ratio")};
    });

    criterion(8, "Gronwall stability", 900, [&] {
        ScenarioConfig c;
        perturbed_twin_32 = twin_experiment(c, "");
        const TwinResult& r = perturbed_twin_32;
        const double ident = identical_twin_32.max_E_rel_over_E_total;
        const bool ok = r.exit_code == kExitOk && r.stability.gronwall_ok && ident <= 1e-8 &&
                        !identical_twin_32.energy.empty();
        return Outcome{ok, fmt("perturbed E_rel(0) %.3e", r.E_rel0) + fmt(", max E_rel %.3e", r.max_E_rel) +
                               ", envelope " + (r.stability.gronwall_ok ? "held" : "violated") +
                               fmt(", identical-data max E_rel/E_total %.2e", ident)};
    });

    criterion(9, "inertia quadrature", 10, [&] {
        const double R = 0.15;
        const MassProperties mp = mass_properties([](const Vec3&) { return 1.0; }, Ball{{0.5, 0.5, 0.5}, R}, 64);
        const double ref = 0.4 * mp.m * R * R;
        const double err = inf_norm(mp.J - ref * Mat3::Identity()) / ref;
        return Outcome{err <= 0.01, fmt("max |J - 2/5 m R^2 I| / (2/5 m R^2) = %.2e", err)};
    });

    criterion(10, "O_Delta ODE", 1, [&] {
        const TwinResult& r = perturbed_twin_32;
        if (r.B.body_log.size() < 2) return Outcome{false, "no twin trajectory available"};
        std::vector<Mat3> W;
        for (const BodyRecord& b : r.B.body_log) W.push_back(skew(b.body.O.transpose() * b.body.w));
        const double sup = solve_o_delta(W, r.B.dt);
        return Outcome{sup <= 1e-10, fmt("sup |O_Delta| = %.2e", sup) + fmt(" over %.0f samples", double(W.size()))};
    });

    criterion(11, "closed-surface quadrature", 1, [&] {
        const SurfaceMesh m = icosphere(0.15, 3);
        BodyState b;
        b.X = {0.4, 0.55, 0.5};
        b.O = Eigen::AngleAxisd(0.9, Vec3(1, -2, 0.5).normalized()).toRotationMatrix();
        const auto [sn, sm] = closed_surface_moments(m, b);
        const double rel = std::max(sn.norm(), sm.norm()) / m.total_area();
        return Outcome{rel <= 1e-10, fmt("max(|int n|, |int (x-X) x n|)/area = %.2e", rel)};
    });

    criterion(12, "transport theorem", 60, [&] {
        const auto translating = [](double t) {
            BodyState b;
            b.X = Vec3(0.4 + 0.3 * t, 0.5, 0.5);
            b.V = Vec3(0.3, 0, 0);
            return b;
        };
        const Vec3 w(0.3, -0.2, 1.5);
        const auto rotating = [w](double t) {
            BodyState b;
            b.X = Vec3(0.5, 0.45 + 0.2 * t, 0.5);
            b.V = Vec3(0, 0.2, 0);
            b.O = Eigen::AngleAxisd(w.norm() * t, w.normalized()).toRotationMatrix();
            b.w = w;
            return b;
        };
        const auto f = [](double t, const Vec3& x) { return 1 + x[0] * x[1] + std::sin(2 * x[2] + t); };
        const auto ft = [](double t, const Vec3& x) { return std::cos(2 * x[2] + t); };
        std::string d;
        bool ok = true;
        for (int c = 0; c < 4; ++c) {
            const auto& motion = c % 2 ? std::function<BodyState(double)>(rotating) : translating;
            const TransportRegion region = c < 2 ? TransportRegion::Ball : TransportRegion::Complement;
            double prevC = 0;
            for (int lv = 2; lv <= 5; ++lv) {
                const double h = 0.15 * 1.1 / (1 << lv);
                const double dt = 0.02 / (1 << (lv - 2));
                const TransportResult r = transport_check(f, ft, motion, 0.15, 0.3, dt, lv, region);
                const double C = r.residual / (dt + h * h);
                if (lv > 2 && C > 1.25 * prevC + 1e-12) ok = false;
                prevC = lv > 2 ? std::max(prevC, C) : C;
            }
            d += fmt(c == 0 ? "C = %.2e" : ", %.2e", prevC);
        }
        return Outcome{ok, d + " (ball/complement x translating/rotating)"};
    });

    std::printf("%d criterion failure(s)\n", failures);
    return failures;
}
