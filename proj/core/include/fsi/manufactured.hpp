#pragma once

#include "fsi/fluid.hpp"
#include "fsi/types.hpp"

#include <array>
#include <vector>

namespace fsi {

/// amp · cos(ωt + θ) · Π_d f_d(k_d x_d + φ_d), f_d = sin or cos.
struct TrigTerm {
    double amp = 1;
    double omega = 0, theta = 0;
    std::array<bool, 3> cosine{false, false, false};
    Vec3 k = Vec3::Zero();
    Vec3 phase = Vec3::Zero();
};

/// offset + Σ terms, with closed-form time and space derivatives.
struct TrigField {
    double offset = 0;
    std::vector<TrigTerm> terms;

    double value(double t, const Vec3& x) const;
    double dt(double t, const Vec3& x) const;
    Vec3 grad(double t, const Vec3& x) const;
    Mat3 hess(double t, const Vec3& x) const;
};

struct TrigVector {
    std::array<TrigField, 3> c;

    Vec3 value(double t, const Vec3& x) const;
    Vec3 dt(double t, const Vec3& x) const;
    Mat3 grad(double t, const Vec3& x) const;  // (i,j) = ∂_j u_i
    Tensor3 hess(double t, const Vec3& x) const;
};

/// Residuals of the compressible system for analytic (ρ, u):
/// R_c = ∂ₜρ + div(ρu), R_m = ∂ₜ(ρu) + div(ρu⊗u) + ∇p − div S.
void analytic_residuals(const TrigField& rho, const TrigVector& u, const FluidParams& prm, double t, const Vec3& x,
                        double& Rc, Vec3& Rm);

/// Forcing that makes (ρ, u) an exact solution.
Forcing manufactured_forcing(const TrigField& rho, const TrigVector& u, const FluidParams& prm);

/// Volume-preserving shear x ↦ (x₁, x₂ + a t s(x₁), x₃ + b t q(x₁, x₂)) with
/// s = sin(2πx₁), q = sin(2πx₁) cos(2πx₂). Its Jacobian is unit lower triangular.
struct ShearMap {
    double a = 0.05, b = 0.05;

    Vec3 value(double t, const Vec3& x) const;
    Vec3 inverse(double t, const Vec3& y) const;
    Mat3 jacobian(double t, const Vec3& x) const;
    Vec3 dt(double t, const Vec3& x) const;
};

/// Smooth fields used by the verification runs: density with zero normal derivative
/// and velocity vanishing on ∂Ω.
TrigField mms_density(double amplitude, double omega);
TrigVector mms_velocity(double amplitude, double omega);
/// Generic (non-solution) trig fields for the transformed-system check.
TrigField transform_test_density();
TrigVector transform_test_velocity();

}  // namespace fsi
