#pragma once

#include "fsi/types.hpp"

#include <functional>
#include <vector>

namespace fsi {

/// Rigid body state. J0 is the body-frame inertia; the world inertia is O J0 Oᵀ.
struct BodyState {
    double m = 1.0;
    Mat3 J0 = Mat3::Identity();
    Vec3 X = Vec3::Zero();
    Vec3 V = Vec3::Zero();
    Mat3 O = Mat3::Identity();
    Vec3 w = Vec3::Zero();

    Mat3 inertia() const { return O * J0 * O.transpose(); }
    double kinetic_energy() const { return 0.5 * m * V.squaredNorm() + 0.5 * w.dot(inertia() * w); }
};

/// x ↦ translation + rotation·x
struct Isometry {
    Vec3 translation = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    Vec3 apply(const Vec3& x) const { return translation + rotation * x; }
    Isometry inverse() const;
    /// (*this) ∘ other
    Isometry compose(const Isometry& other) const;
    /// η[t,s] = η[t] ∘ η[s]⁻¹
    static Isometry relative(const Isometry& at_t, const Isometry& at_s) { return at_t.compose(at_s.inverse()); }
};

/// skew(w) a = w × a
Mat3 skew(const Vec3& w);
Vec3 unskew(const Mat3& Q);

/// ‖OᵀO − I‖∞
double orthogonality_defect(const Mat3& O);

/// Nearest rotation in the Frobenius sense (polar factor).
Mat3 reorthonormalize(const Mat3& O);

Vec3 rigid_velocity(const BodyState& body, const Vec3& x);

/// One RK2-midpoint step of dO/dt = skew(w)O, then polar projection.
/// w_begin and w_end sample w at the step ends; the midpoint uses their mean.
Mat3 integrate_rotation(const Mat3& O, const Vec3& w_begin, const Vec3& w_end, double dt);

struct Ball {
    Vec3 center = Vec3(0.5, 0.5, 0.5);
    double radius = 0.15;
};

struct MassProperties {
    double m = 0.0;
    Vec3 X = Vec3::Zero();
    Mat3 J = Mat3::Zero();
};

/// Midpoint quadrature on an n³ lattice covering the bounding box of the ball.
MassProperties mass_properties(const std::function<double(const Vec3&)>& density, const Ball& ball, int n);

/// Õᵀ J₂ Õ
Mat3 conjugate_inertia(const Mat3& J2, const Mat3& Ot);

/// dV/dt + dw/dt × (x−X) + w × (w × (x−X))
Vec3 rigid_material_derivative(const BodyState& body, const Vec3& dVdt, const Vec3& dwdt, const Vec3& x);

/// Angular acceleration from J dw/dt = J w × w + torque at orientation O.
Vec3 angular_acceleration(const BodyState& body, const Mat3& O, const Vec3& w, const Vec3& torque);

/// RK2 step of the Newton–Euler equations under constant loads.
BodyState step_body(const BodyState& body, const Vec3& force, const Vec3& torque, double dt);

/// Integrates dO_Δ/dt = O_Δ W(t) with RK2 from O_Δ(0) = start on the uniform samples
/// W[k] = W(k dt) and returns sup‖O_Δ‖∞.
double solve_o_delta(const std::vector<Mat3>& W, double dt, const Mat3& start = Mat3::Zero());

/// max-abs-entry norm
inline double inf_norm(const Mat3& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace fsi
