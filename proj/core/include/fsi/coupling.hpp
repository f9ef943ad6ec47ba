#pragma once

#include "fsi/fluid.hpp"
#include "fsi/kinematics.hpp"
#include "fsi/mesh.hpp"

namespace fsi {

struct Loads {
    Vec3 force = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
};

inline bool inside_ball(const Vec3& x, const Vec3& X, double R) { return (x - X).squaredNorm() < R * R; }

/// force = −∮(S − pI)n dS, torque = −∮(x−X)×(S − pI)n dS with n into the body.
/// Stress is sampled at 2h and 3h outside each face and extrapolated linearly to the face.
/// Samples past a wall are clamped onto it.
Loads surface_loads(const FluidState& s, const BodyState& body, const SurfaceMesh& mesh, const FluidParams& prm);

/// Momentum moved by one penalization update.
struct Exchange {
    Vec3 dP = Vec3::Zero();  // change of fluid linear momentum
    Vec3 dL = Vec3::Zero();  // change of fluid angular momentum about body.X
};

/// u ← (u + k u_B)/(1 + k) inside the ball, k = dt/η_p.
Exchange enforce_body_velocity(FluidState& s, const BodyState& body, double radius, double k);

/// Loads that make fluid plus body momentum exact when the penalization update is applied
/// with the post-step body velocity on the current body cells.
Loads penalization_loads(const FluidState& s, const BodyState& body, double radius, double k, double dt);

struct GapStatus {
    double gap = 0;
    bool stop = false;
};

/// Ball in the unit cube: gap = d(B, ∂Ω); stop once gap ≤ κ/2.
GapStatus gap_monitor(const BodyState& body, double radius, double kappa);

enum class LoadMode { Penalization, Surface };

struct CouplingSettings {
    LoadMode mode = LoadMode::Penalization;
    double dt_over_eta = 1e4;
};

struct CoupledStep {
    FluidState fluid;
    BodyState body;
    Loads applied;       // loads used to advance the body
    Loads surface;       // surface-integral loads, always evaluated
    Loads region;        // applied + rate of change of the fluid momentum on the body cells
    Exchange exchange;   // fluid momentum change from penalization
};

/// step_fluid → loads → step_body → enforce_body_velocity. The fluid on the body cells moves
/// with the body, so in penalization mode `applied` acts on m while the hydrodynamic load
/// acts on m plus that fluid; `region` is the latter and is what `surface` approximates.
CoupledStep coupled_step(const FluidState& s, const BodyState& body, double radius, double dt,
                         const FluidParams& prm, const CouplingSettings& cs, const SurfaceMesh& mesh,
                         const StepLimits& lim = {});

/// Indicator sets of the ε construction: [B]_ε, Γ^ε = [B]_{2ε} \ B and F^ε = Ω \ [B]_{2ε}.
struct EpsilonBands {
    double eps = 0;
    Vec3 X = Vec3::Zero();
    double R = 0;

    double distance(const Vec3& x) const { return (x - X).norm() - R; }
    bool in_body(const Vec3& x) const { return distance(x) < 0; }
    bool in_inner(const Vec3& x) const { return distance(x) <= eps; }
    bool in_gamma(const Vec3& x) const { return !in_body(x) && distance(x) <= 2 * eps; }
    bool in_far(const Vec3& x) const { return distance(x) > 2 * eps; }
};

}  // namespace fsi
