#include "fsi/kinematics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fsi;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

Vec3 random_vec(std::mt19937_64& rng, double s = 1.0) {
    std::uniform_real_distribution<double> u(-s, s);
    return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST(RigidVelocity, PureTranslation) {
    BodyState b;
    b.V = {1, 0, 0};
    EXPECT_EQ(rigid_velocity(b, {0.3, -2, 7}), Vec3(1, 0, 0));
}

TEST(RigidVelocity, SpinAboutZ) {
    BodyState b;
    b.w = {0, 0, 1};
    EXPECT_TRUE(rigid_velocity(b, {1, 0, 0}).isApprox(Vec3(0, 1, 0)));
    EXPECT_EQ(rigid_velocity(b, {0, 0, 5}), Vec3::Zero());
}

TEST(IntegrateRotation, ZeroSpinKeepsOrientation) {
    std::mt19937_64 rng(3);
    Mat3 O = random_rotation(rng);
    Mat3 O1 = integrate_rotation(O, Vec3::Zero(), Vec3::Zero(), 0.1);
    EXPECT_LT(inf_norm(O1 - O), 1e-14);
}

TEST(IntegrateRotation, MatchesClosedFormSpin) {
    const double omega = 2.0, T = 1.0;
    for (int n : {100, 200}) {
        const double dt = T / n;
        Mat3 O = Mat3::Identity();
        for (int s = 0; s < n; ++s) O = integrate_rotation(O, {0, 0, omega}, {0, 0, omega}, dt);
        Mat3 exact = Eigen::AngleAxisd(omega * T, Vec3::UnitZ()).toRotationMatrix();
        EXPECT_LT(inf_norm(O - exact), 5 * dt * dt);
    }
}

TEST(IntegrateRotation, RejectsNonOrthogonalInput) {
    Mat3 O = Mat3::Identity();
    O(0, 1) = 1e-6;
    EXPECT_THROW(integrate_rotation(O, Vec3::Zero(), Vec3::Zero(), 0.1), NumericError);
}

TEST(IntegrateRotation, OrthogonalityAfterManySteps) {
    Mat3 O = Mat3::Identity();
    for (int s = 0; s < 10000; ++s) {
        const double t = s * 1e-3;
        Vec3 w0(std::sin(t), std::cos(2 * t), 0.5);
        Vec3 w1(std::sin(t + 1e-3), std::cos(2 * (t + 1e-3)), 0.5);
        O = integrate_rotation(O, w0, w1, 1e-3);
    }
    EXPECT_LE(orthogonality_defect(O), 1e-10);
    EXPECT_GT(O.determinant(), 0.0);
}

TEST(IntegrateRotation, OrthogonalityRateVanishes) {
    // d/dt(OᵀO) sampled by a forward difference stays at rounding level
    std::mt19937_64 rng(5);
    Mat3 O = random_rotation(rng);
    Vec3 w = random_vec(rng, 3.0);
    const double dt = 1e-4;
    Mat3 O1 = integrate_rotation(O, w, w, dt);
    Mat3 rate = (O1.transpose() * O1 - O.transpose() * O) / dt;
    EXPECT_LT(inf_norm(rate), 1e-9);
}

TEST(RotationAlgebra, CrossProductCommutesWithRotation) {
    std::mt19937_64 rng(11);
    for (int s = 0; s < 1000; ++s) {
        Mat3 R = random_rotation(rng);
        Vec3 a = random_vec(rng), b = random_vec(rng);
        EXPECT_LT(((R * a).cross(R * b) - R * a.cross(b)).lpNorm<Eigen::Infinity>(), 1e-12);
    }
}

TEST(MassProperties, UniformBallMatchesClosedForm) {
    Ball ball{{0.4, 0.5, 0.6}, 0.15};
    auto mp = mass_properties([](const Vec3&) { return 1.0; }, ball, 64);
    const double R = ball.radius;
    const double vol = 4.0 / 3.0 * std::numbers::pi * R * R * R;
    EXPECT_NEAR(mp.m / vol, 1.0, 0.01);
    EXPECT_LT((mp.X - ball.center).norm(), 1e-3 * R);
    const double Jref = 0.4 * mp.m * R * R;
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(mp.J(a, a) / Jref, 1.0, 0.01);
    EXPECT_LT(inf_norm(mp.J - mp.J.transpose()), 1e-12 * mp.J.norm());
}

TEST(MassProperties, SymmetricDensityCentersOnGeometry) {
    Ball ball{{0.5, 0.5, 0.5}, 0.2};
    auto mp = mass_properties([&](const Vec3& x) { return 1.0 + (x - ball.center).squaredNorm(); }, ball, 48);
    EXPECT_LT((mp.X - ball.center).norm(), 1e-12);
}

TEST(MassProperties, ZeroMassThrows) {
    EXPECT_THROW(mass_properties([](const Vec3&) { return 0.0; }, Ball{}, 16), NumericError);
}

TEST(ConjugateInertia, Degenerate) {
    std::mt19937_64 rng(2);
    Mat3 J = Mat3::Identity();
    Mat3 R = random_rotation(rng);
    EXPECT_LT(inf_norm(conjugate_inertia(J, R) - J), 1e-14);
    Mat3 J2 = Vec3(1, 2, 3).asDiagonal();
    EXPECT_LT(inf_norm(conjugate_inertia(J2, Mat3::Identity()) - J2), 0.0 + 1e-300);
}

TEST(ConjugateInertia, PreservesSpectrum) {
    std::mt19937_64 rng(7);
    for (int s = 0; s < 50; ++s) {
        Eigen::Matrix3d A = Eigen::Matrix3d::Random();
        Mat3 J2 = A * A.transpose() + Mat3::Identity();
        Mat3 R = random_rotation(rng);
        Mat3 J1 = conjugate_inertia(J2, R);
        Eigen::SelfAdjointEigenSolver<Mat3> e1(J1), e2(J2);
        EXPECT_LT((e1.eigenvalues() - e2.eigenvalues()).lpNorm<Eigen::Infinity>(), 1e-12 * J2.norm());
        EXPECT_LT(inf_norm(J1 - J1.transpose()), 1e-13);
    }
}

TEST(Isometry, InverseAndDistances) {
    std::mt19937_64 rng(13);
    for (int s = 0; s < 100; ++s) {
        Isometry a{random_vec(rng), random_rotation(rng)};
        Isometry b{random_vec(rng), random_rotation(rng)};
        Vec3 x = random_vec(rng), y = random_vec(rng);
        EXPECT_LT((a.compose(a.inverse()).apply(x) - x).norm(), 1e-12);
        EXPECT_NEAR((a.apply(x) - a.apply(y)).norm(), (x - y).norm(), 1e-12);
        Isometry rel = Isometry::relative(a, b);
        EXPECT_LT(orthogonality_defect(rel.rotation), 1e-12);
        EXPECT_LT((rel.apply(b.apply(x)) - a.apply(x)).norm(), 1e-12);
    }
    EXPECT_EQ(Isometry{}.apply(Vec3(1, 2, 3)), Vec3(1, 2, 3));
}

TEST(MaterialDerivative, ClosedFormCases) {
    BodyState b;
    EXPECT_EQ(rigid_material_derivative(b, {1, 2, 3}, Vec3::Zero(), {4, 5, 6}), Vec3(1, 2, 3));
    b.w = {0, 0, 1};
    EXPECT_TRUE(rigid_material_derivative(b, Vec3::Zero(), Vec3::Zero(), {1, 0, 0}).isApprox(Vec3(-1, 0, 0)));
}

TEST(MaterialDerivative, MatchesFiniteDifferenceAlongTrajectory) {
    // Du/Dt of a material point riding the body equals the formula to O(dt)
    BodyState b;
    b.J0 = Vec3(1, 2, 3).asDiagonal();
    b.V = {0.1, -0.2, 0.05};
    b.w = {0.3, 0.7, -0.4};
    const Vec3 F(0.2, 0.1, -0.3), T(0.05, -0.02, 0.01);
    const Vec3 p = b.X + Vec3(0.1, 0.05, -0.02);
    for (double dt : {1e-3, 5e-4}) {
        BodyState b1 = step_body(b, F, T, dt);
        Vec3 dVdt = F / b.m;
        Vec3 dwdt = angular_acceleration(b, b.O, b.w, T);
        // material point follows the body isometry
        Vec3 p1 = b1.X + b1.O * b.O.transpose() * (p - b.X);
        Vec3 fd = (rigid_velocity(b1, p1) - rigid_velocity(b, p)) / dt;
        Vec3 exact = rigid_material_derivative(b, dVdt, dwdt, p);
        EXPECT_LT((fd - exact).norm(), 5.0 * dt);
    }
}

TEST(StepBody, FreeTranslation) {
    BodyState b;
    b.X = {0.5, 0.5, 0.5};
    b.V = {0.1, 0, -0.2};
    BodyState s = b;
    for (int k = 0; k < 100; ++k) s = step_body(s, Vec3::Zero(), Vec3::Zero(), 0.01);
    EXPECT_LT((s.X - (b.X + b.V)).norm(), 1e-13);
    EXPECT_EQ(s.V, b.V);
}

TEST(StepBody, IsotropicSpinIsConstant) {
    BodyState b;
    b.w = {0.3, -1.0, 2.0};
    BodyState s = b;
    for (int k = 0; k < 100; ++k) s = step_body(s, Vec3::Zero(), Vec3::Zero(), 0.01);
    EXPECT_LT((s.w - b.w).norm(), 1e-13);
}

TEST(StepBody, TorqueFreeEulerInvariants) {
    BodyState b;
    b.J0 = Vec3(1, 2, 3).asDiagonal();
    b.w = {0.4, 1.0, -0.7};
    for (double dt : {2e-3, 1e-3}) {
        BodyState s = b;
        const double E0 = s.kinetic_energy();
        const double L0 = (s.inertia() * s.w).norm();
        double worst = 0;
        for (int k = 0; k < int(1.0 / dt); ++k) {
            s = step_body(s, Vec3::Zero(), Vec3::Zero(), dt);
            worst = std::max({worst, std::abs(s.kinetic_energy() - E0), std::abs((s.inertia() * s.w).norm() - L0)});
        }
        // per-step error O(dt³) accumulates to O(dt²) over unit time
        EXPECT_LT(worst, 2.0 * dt * dt);
    }
}

TEST(StepBody, SingularInertiaThrows) {
    BodyState b;
    b.J0 = Vec3(1, 0, 1).asDiagonal();
    EXPECT_THROW(step_body(b, Vec3::Zero(), Vec3::Zero(), 0.1), NumericError);
}

TEST(ODelta, ZeroStartStaysZero) {
    std::vector<Mat3> W;
    for (int k = 0; k < 100; ++k) W.push_back(skew(Vec3(std::sin(0.1 * k), 1.0, -0.5)));
    EXPECT_EQ(solve_o_delta(W, 0.01), 0.0);
}

TEST(ODelta, PerturbedStartObeysGronwall) {
    std::vector<Mat3> W;
    double intW = 0;
    const double dt = 0.01;
    for (int k = 0; k <= 100; ++k) {
        Mat3 Wk = Mat3::Random() * 2.0;
        W.push_back(Wk);
        if (k > 0) intW += 0.5 * dt * (Wk.lpNorm<1>() + W[k - 1].lpNorm<1>());
    }
    const double eps = 1e-6;
    const double sup = solve_o_delta(W, dt, eps * Mat3::Identity());
    EXPECT_GE(sup, eps);
    EXPECT_LE(sup, eps * std::exp(intW) * 1.01);
}
