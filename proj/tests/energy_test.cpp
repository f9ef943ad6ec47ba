#include "fsi/coupling.hpp"
#include "fsi/energy.hpp"
#include "fsi/manufactured.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fsi;

namespace {

FluidState wavy(int N) {
    const Grid g(N);
    FluidState s(g, 1.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const Vec3 x = g.center(i, j, k);
                s.rho[g.idx(i, j, k)] = 1 + 0.1 * std::cos(M_PI * x[0]) * std::cos(2 * M_PI * x[2]);
                put(s.u, g.idx(i, j, k), Vec3(std::sin(M_PI * x[1]), 0.2 * x[0], -0.1));
            }
    return s;
}

BodyState ball() {
    BodyState b;
    b.m = 0.014;
    b.J0 = 1.3e-4 * Mat3::Identity();
    b.X = {0.5, 0.5, 0.5};
    b.V = {0.01, 0, 0};
    b.w = {0, 0.3, 0};
    return b;
}

Comparison self(const FluidState& s, const BodyState& b) { return {s.rho, s.u, b.V, b.w}; }

}  // namespace

TEST(PressureDistance, VanishesOnDiagonal) {
    FluidParams prm;
    for (double r : {0.1, 1.0, 3.0}) EXPECT_EQ(pressure_distance(r, r, prm), 0.0);
}

TEST(PressureDistance, QuadraticLawIsSquare) {
    FluidParams prm;
    prm.gamma = 2;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.05, 4);
    for (int q = 0; q < 1000; ++q) {
        const double rho = U(rng), r = U(rng);
        EXPECT_NEAR(pressure_distance(rho, r, prm), (rho - r) * (rho - r), 1e-12 * (1 + rho * rho));
    }
}

TEST(PressureDistance, BoundedBelowByCurvature) {
    FluidParams prm;
    const double lo = 0.8, hi = 1.3;
    const double c = pressure_distance_coefficient(lo / 2, 2 * hi, prm);
    EXPECT_GT(c, 0);
    for (int a = 1; a < 100; ++a)
        for (int b = 0; b <= 50; ++b) {
            const double rho = lo / 2 + (2 * hi - lo / 2) * a / 100.0;
            const double r = lo + (hi - lo) * b / 50.0;
            EXPECT_GE(pressure_distance(rho, r, prm), c * (rho - r) * (rho - r) * (1 - 1e-12));
        }
}

TEST(PressureDistance, AccurateForTinyGaps) {
    FluidParams prm;
    const double g = prm.gamma, r = 1.3;
    for (double x : {1e-9, -3e-7, 2e-5}) {
        const double lead = prm.a * std::pow(r, g) / (g - 1) * 0.5 * g * (g - 1) * x * x;
        EXPECT_NEAR(pressure_distance(r * (1 + x), r, prm), lead, 1e-4 * lead);
    }
    // series branch against the closed form just inside the switch
    const double rho = r * (1 + 0.1 - 1e-9), x = rho / r - 1;
    const double closed = prm.a * std::pow(r, g) / (g - 1) * (std::expm1(g * std::log1p(x)) - g * x);
    EXPECT_NEAR(pressure_distance(rho, r, prm), closed, 1e-13 * closed);
}

TEST(PressureDistance, RejectsInvalidDensities) {
    FluidParams prm;
    EXPECT_THROW(pressure_distance(1.0, 0.0, prm), NumericError);
    EXPECT_THROW(pressure_distance(-0.1, 1.0, prm), NumericError);
}

TEST(RelativeEnergy, SelfDistanceIsZero) {
    FluidParams prm;
    const FluidState s = wavy(16);
    const BodyState b = ball();
    const RelativeEnergy e = relative_energy(s, b, 0.15, self(s, b), prm);
    EXPECT_LE(std::abs(e.total()), 1e-12);
}

TEST(RelativeEnergy, DensityPerturbationWithQuadraticLaw) {
    FluidParams prm;
    prm.gamma = 2;
    const FluidState s = wavy(16);
    const BodyState b = ball();
    Comparison c = self(s, b);
    double expect = 0;
    const Grid& g = s.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t id = g.idx(i, j, k);
                const double d = 1e-3 * std::sin(double(id));
                c.r[id] = s.rho[id] - d;
                if (!inside_ball(g.center(i, j, k), b.X, 0.15)) expect += d * d * g.cell_volume();
            }
    const RelativeEnergy e = relative_energy(s, b, 0.15, c, prm);
    EXPECT_NEAR(e.total(), expect, 1e-12 * expect);
    EXPECT_EQ(e.kinetic, 0.0);
}

TEST(RelativeEnergy, BodyVelocityGap) {
    FluidParams prm;
    const FluidState s = wavy(8);
    const BodyState b = ball();
    Comparison c = self(s, b);
    c.Vs = b.V - Vec3(0.02, 0, 0);
    const RelativeEnergy e = relative_energy(s, b, 0.15, c, prm);
    EXPECT_NEAR(e.body, 0.5 * b.m * 0.02 * 0.02, 1e-18);
}

TEST(RelativeEnergy, SmallValueImpliesSmallPointwiseGap) {
    FluidParams prm;
    const FluidState s = wavy(12);
    const BodyState b = ball();
    Comparison c = self(s, b);
    for (std::size_t id = 0; id < s.rho.size(); ++id) c.U[0][id] += 1e-9 * std::cos(double(id));
    const RelativeEnergy e = relative_energy(s, b, 0.15, c, prm);
    ASSERT_LT(e.total(), 1e-12);
    EXPECT_LT(e.max_velocity_gap, 1e-5);
    EXPECT_LT(e.max_density_gap, 1e-5);
}

TEST(Remainder, SteadySelfComparisonVanishes) {
    FluidParams prm;
    const FluidState s = wavy(12);
    const BodyState b = ball();
    const Comparison c = self(s, b);
    const SurfaceMesh mesh = icosphere(0.15, 2);
    const RemainderTerms I = remainder({&s, &b, 0.15, 1.0, &c, &c, &c, 0.01, &mesh}, prm);
    for (double v : I) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(relative_dissipation(s, b, 0.15, c.U, prm), 0.0);
}

TEST(Remainder, ConstantSlipWithUniformPressureHasNoBoundaryTerm) {
    FluidParams prm;
    FluidState s(Grid(16), 1.0);
    const BodyState b = ball();
    Comparison c = self(s, b);
    for (std::size_t id = 0; id < s.rho.size(); ++id) put(c.U, id, Vec3(0.1, -0.2, 0.05));
    const SurfaceMesh mesh = icosphere(0.15, 3);
    const RemainderTerms I = remainder({&s, &b, 0.15, 1.0, &c, &c, &c, 0.01, &mesh}, prm);
    EXPECT_LT(std::abs(I[6]), 1e-12);
}

// Each volume term against a three-point Gauss rule of the exact integrand over the same cells.
TEST(Remainder, ManufacturedTermsConvergeAtSecondOrder) {
    FluidParams prm;
    const TrigField Rho = transform_test_density(), R = mms_density(0.1, 2.0);
    const TrigVector u = mms_velocity(0.1, 2.0), Uf = mms_velocity(0.2, 3.0);
    const double t = 0.25, tu = 0.4, rho_b = 1.7, dt = 1e-3;
    BodyState b = ball();
    b.X = {0.52, 0.47, 0.5};
    const auto exact = [&](const Vec3& x, bool fluid) {
        RemainderTerms I{};
        const double rho = Rho.value(0, x), r = R.value(t, x);
        const Vec3 w = u.value(tu, x), U = Uf.value(t, x);
        const Mat3 gu = u.grad(tu, x), gU = Uf.grad(t, x);
        const Vec3 acc = Uf.dt(t, x) + gU * w;
        if (!fluid) {
            I[1] = rho_b * acc.dot(U - w);
            return I;
        }
        const EosValues er = eos(r, prm), eq = eos(rho, prm);
        I[0] = rho * acc.dot(U - w);
        I[2] = stress(gU, prm).S.cwiseProduct(gU - gu).sum();
        I[3] = gU.trace() * (er.p - eq.p);
        I[4] = (r - rho) * er.d2P * R.dt(t, x);
        I[5] = (r * U - rho * w).dot(er.d2P * R.grad(t, x));
        return I;
    };
    const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)}, gw[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
    std::vector<RemainderTerms> err;
    RemainderTerms scale{};
    for (int N : {16, 32, 64}) {
        const Grid g(N);
        FluidState s(g, 1.0);
        Comparison c[3];
        for (auto& q : c) {
            q.r.assign(g.size(), 0);
            q.U = make_vectors(g.size());
        }
        RemainderTerms ref{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    const Vec3 x = g.center(i, j, k);
                    const std::size_t id = g.idx(i, j, k);
                    s.rho[id] = Rho.value(0, x);
                    put(s.u, id, u.value(tu, x));
                    for (int q = 0; q < 3; ++q) {
                        c[q].r[id] = R.value(t + (q - 1) * dt, x);
                        put(c[q].U, id, Uf.value(t + (q - 1) * dt, x));
                    }
                    const bool fluid = !inside_ball(x, b.X, 0.15);
                    for (int a = 0; a < 3; ++a)
                        for (int bb = 0; bb < 3; ++bb)
                            for (int cc = 0; cc < 3; ++cc) {
                                const Vec3 y = x + 0.5 * g.h * Vec3(gx[a], gx[bb], gx[cc]);
                                const RemainderTerms e = exact(y, fluid);
                                const double wgt = gw[a] * gw[bb] * gw[cc] * g.cell_volume() / 8;
                                for (int m = 0; m < 6; ++m) ref[m] += wgt * e[m];
                            }
                }
        const RemainderTerms I = remainder({&s, &b, 0.15, rho_b, &c[0], &c[1], &c[2], 2 * dt, nullptr}, prm);
        RemainderTerms e{};
        for (int m = 0; m < 6; ++m) {
            e[m] = std::abs(I[m] - ref[m]);
            scale[m] = std::abs(ref[m]);
        }
        err.push_back(e);
    }
    for (int m = 0; m < 6; ++m) {
        EXPECT_GT(scale[m], 1e-6) << "term " << m;
        EXPECT_GT(std::log2(err[1][m] / err[2][m]), 1.8) << "term " << m;
        EXPECT_LT(err[2][m], 0.01 * scale[m]) << "term " << m;
    }
}

TEST(Regimes, FractionsPartitionTheFluid) {
    const FluidState s = wavy(12);
    const BodyState b = ball();
    Scalars r = s.rho;
    const auto f = regime_fractions(s, b, 0.15, r);
    EXPECT_EQ(f[1], 0.0);
    EXPECT_EQ(f[2], 0.0);
    EXPECT_GT(f[0], 0.9);
    for (double& v : r) v *= 3;
    EXPECT_GT(regime_fractions(s, b, 0.15, r)[1], 0.0);
}

TEST(Stability, ExponentialGrowthStaysInEnvelope) {
    const double L = 2.0, E0 = 1e-4;
    std::vector<EnergyReport> series;
    for (int k = 0; k <= 100; ++k) {
        EnergyReport e;
        e.t = 0.01 * k;
        e.E_total = 1.0;
        e.E_rel = E0 * std::exp(L * e.t);
        e.remainder_terms[0] = L * e.E_rel;
        series.push_back(e);
    }
    const StabilityResult r = stability_monitor(series);
    EXPECT_TRUE(r.gronwall_ok);
    EXPECT_NEAR(r.growth_rate, L, 1e-9);
    for (const auto& e : r.series) EXPECT_LT(std::abs(e.REI_residual), 1e-3 * e.E_total);
}

TEST(Stability, JumpOutsideEnvelopeIsFlagged) {
    std::vector<EnergyReport> series;
    for (int k = 0; k <= 10; ++k) {
        EnergyReport e;
        e.t = 0.01 * k;
        e.E_total = 1.0;
        e.E_rel = k < 5 ? 1e-6 : 1e-2;
        series.push_back(e);
    }
    EXPECT_FALSE(stability_monitor(series).gronwall_ok);
}

TEST(Stability, NeedsThreeReports) {
    EXPECT_THROW(stability_monitor(std::vector<EnergyReport>(2)), NumericError);
}
