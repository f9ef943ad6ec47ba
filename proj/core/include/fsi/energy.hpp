#pragma once

#include "fsi/fluid.hpp"
#include "fsi/kinematics.hpp"
#include "fsi/mesh.hpp"

#include <array>
#include <vector>

namespace fsi {

/// P(ρ) − P'(r)(ρ − r) − P(r). Throws NumericError if r ≤ 0 or ρ < 0.
double pressure_distance(double rho, double r, const FluidParams& prm);

/// ½ min P'' over [lo, hi]: lower coefficient of the pressure distance against (ρ−r)².
double pressure_distance_coefficient(double lo, double hi, const FluidParams& prm);

/// Comparison pair (r, U) on the frame of the weak state, with the rigid part (V^s, w^s).
struct Comparison {
    Scalars r;
    Vectors U;
    Vec3 Vs = Vec3::Zero();
    Vec3 ws = Vec3::Zero();
};

struct RelativeEnergy {
    double kinetic = 0;            // Σ_fluid ½ρ|u−U|²
    double pressure_distance = 0;  // Σ_fluid P(ρ, r)
    double body = 0;               // m/2|V−V^s|² + ½J(w−w^s)·(w−w^s)
    double total() const { return kinetic + pressure_distance + body; }
    double max_velocity_gap = 0;   // max over fluid cells of |u−U|
    double max_density_gap = 0;    // max over fluid cells of |ρ−r|
};

/// Fluid cells are those with centre outside the ball of the given radius around body.X.
RelativeEnergy relative_energy(const FluidState& s, const BodyState& body, double radius, const Comparison& c,
                               const FluidParams& prm);

/// I1F, I1B, I2, I3, I4, I5, I6
using RemainderTerms = std::array<double, 7>;

struct RemainderInputs {
    const FluidState* weak = nullptr;
    const BodyState* body = nullptr;
    double radius = 0;
    double body_density = 1;
    const Comparison* prev = nullptr;  // comparison at t − dt
    const Comparison* mid = nullptr;   // at t
    const Comparison* next = nullptr;  // at t + dt
    double span = 0;                   // time between prev and next
    const SurfaceMesh* mesh = nullptr;
};

/// Time derivatives are (next − prev)/span; I6 = ∮ p(r)(u−U)·n dS with
/// n the fluid normal pointing into the body.
RemainderTerms remainder(const RemainderInputs& in, const FluidParams& prm);

/// ∫_F (S(∇u) − S(∇U)):(∇u − ∇U)
double relative_dissipation(const FluidState& s, const BodyState& body, double radius, const Vectors& U,
                            const FluidParams& prm);

/// Volume fractions (relative to Ω) of fluid cells with r₋/2 < ρ < 2r₊, ρ ≤ r₋/2, ρ ≥ 2r₊,
/// where r₋, r₊ are the extremes of r over the fluid cells.
std::array<double, 3> regime_fractions(const FluidState& s, const BodyState& body, double radius, const Scalars& r);

struct EnergyReport {
    double t = 0;
    double E_total = 0;
    double dissipation = 0;
    double E_rel = 0;       // fluid part plus E_rel_body
    double E_rel_body = 0;
    double pressure_distance_integral = 0;
    double relative_dissipation = 0;
    RemainderTerms remainder_terms{};
    std::array<double, 3> regime_fractions{};
    double REI_residual = 0;
    double h_fit = 0;

    double remainder_sum() const;
};

struct StabilityResult {
    std::vector<EnergyReport> series;  // with REI_residual and h_fit filled
    std::vector<double> envelope;      // E_rel(0)·exp(∫h) + tolerance
    bool gronwall_ok = true;
    double max_rei_residual = 0;       // max over τ of REI_residual / E_total
    double growth_rate = 0;            // sup_τ ln(E_rel(τ)/E_rel(0))/τ when E_rel(0) > 0
};

/// Trapezoid time integrals over the series (needs at least 3 entries). The Gronwall
/// tolerance is tol_rel·E_total(τ).
StabilityResult stability_monitor(const std::vector<EnergyReport>& series, double tol_rel = 1e-3);

}  // namespace fsi
