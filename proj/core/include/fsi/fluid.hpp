#pragma once

#include "fsi/grid_ops.hpp"
#include "fsi/kinematics.hpp"
#include "fsi/types.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fsi {

struct FluidParams {
    double gamma = 5.0 / 3.0;
    double a = 1.0;
    double mu = 0.1;
    double lambda = 0.0;

    /// Throws ConfigError when γ ≤ 3/2, μ ≤ 0 or μ+λ < 0.
    void validate() const;
};

struct EosValues {
    double p = 0, P = 0, dP = 0, d2P = 0;
};

/// p = aρ^γ, P = aρ^γ/(γ−1) and its first two derivatives.
EosValues eos(double rho, const FluidParams& prm);
inline double pressure(double rho, const FluidParams& prm) { return prm.a * std::pow(rho, prm.gamma); }
inline double sound_speed(double rho, const FluidParams& prm) {
    return std::sqrt(prm.gamma * prm.a * std::pow(rho, prm.gamma - 1));
}

struct StressPair {
    Mat3 D, S;
};

/// D = ½(∇u + ∇uᵀ), S = 2μD + λ tr(∇u) I
StressPair stress(const Mat3& grad_u, const FluidParams& prm);

struct FluidState {
    Grid grid;
    Scalars rho;
    Vectors u;
    double t = 0.0;

    FluidState() = default;
    FluidState(const Grid& g, double rho0) : grid(g), rho(g.size(), rho0), u(make_vectors(g.size())) {}

    double mass() const;
    Vec3 momentum() const;
    double min_rho() const;
};

/// Volumetric source (continuity, momentum) used by manufactured solutions.
using Forcing = std::function<void(double t, const Vec3& x, double& f_rho, Vec3& f_m)>;

struct StepLimits {
    double cfl = 0.4;
    double visc = 0.8;
};

/// Largest dt admitted by the acoustic and viscous limits.
double admissible_dt(const FluidState& s, const FluidParams& prm, const StepLimits& lim = {});

/// One Heun (RK2) step: Rusanov fluxes on linearly reconstructed face states for
/// the convective part, central pressure gradient and viscous terms, no-slip walls.
/// Throws CflError if dt exceeds admissible_dt, NumericError on loss of positivity.
FluidState step_fluid(const FluidState& s, const FluidParams& prm, double dt, const Forcing& forcing = {},
                      const StepLimits& lim = {});

/// Semi-discrete right-hand side for the conserved variables (ρ, ρu).
void fluid_rhs(const Grid& g, const Scalars& rho, const Vectors& mom, const FluidParams& prm, double t,
               const Forcing& forcing, Scalars& drho, Vectors& dmom);

using Region = std::function<bool(const Vec3&)>;

struct EnergyAndDissipation {
    double E = 0;
    double dissipation = 0;
};

/// E = ∫ ½ρ|u|² + P(ρ) and ∫ S(∇u):∇u over the cells whose centre lies in region.
EnergyAndDissipation total_energy(const FluidState& s, const FluidParams& prm, const Region& region = {});

/// Scalar or vector test function φ(t, x).
struct TestFunction {
    std::function<double(double, const Vec3&)> phi;
    std::function<double(double, const Vec3&)> dt_phi;
    std::function<Vec3(double, const Vec3&)> grad_phi;
    std::function<Vec3(double, const Vec3&)> vphi;
    std::function<Vec3(double, const Vec3&)> dt_vphi;
    std::function<Mat3(double, const Vec3&)> grad_vphi;  // (i,j) = ∂_j φ_i
};

struct Renormalization {
    std::function<double(double)> b;
    std::function<double(double)> db;
};

struct WeakResiduals {
    double continuity = 0;
    double renormalized = 0;
    double momentum = 0;
    double scale = 0;  // magnitude of the largest individual contribution
};

/// Left-minus-right of the weak continuity, renormalized continuity and momentum
/// identities over stored snapshots. Midpoint rule in space, trapezoid in time;
/// the initial-data terms use snapshots.front(). Test functions must vanish at the
/// final snapshot time. If body_path is provided the vector test function must have
/// D(φ) = 0 near the body at every snapshot.
WeakResiduals weak_residuals(const std::vector<FluidState>& snapshots, const FluidParams& prm,
                             const TestFunction& phi, const Renormalization& b,
                             const std::vector<std::pair<Vec3, double>>& body_path = {});

/// Transport identity check on a ball moving rigidly. The ball pose at time t is
/// given by motion(t). Returns |d/dt∫_{region} f − ∫ ∂_t f − ∮ f u·n| where the time
/// derivative is a centred difference with step dt, volume integrals use a radial
/// Gauss rule times an icosphere rule on the unit sphere, and the surface integral uses
/// the icosphere at the requested subdivision level.
struct TransportResult {
    double lhs = 0, volume_term = 0, surface_term = 0, residual = 0;
};
enum class TransportRegion { Ball, Complement };
TransportResult transport_check(const std::function<double(double, const Vec3&)>& f,
                                const std::function<double(double, const Vec3&)>& dt_f,
                                const std::function<BodyState(double)>& motion, double radius, double t, double dt,
                                int level, TransportRegion region = TransportRegion::Ball);

/// Plain-text dump: header line "N h t", then one record per cell in row-major
/// order: rho u_x u_y u_z.
void write_field_dump(std::ostream& os, const FluidState& s);
FluidState read_field_dump(std::istream& is);

}  // namespace fsi
