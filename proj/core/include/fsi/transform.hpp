#pragma once

#include "fsi/fluid.hpp"
#include "fsi/kinematics.hpp"
#include "fsi/types.hpp"

#include <array>
#include <functional>
#include <vector>

namespace fsi {

/// C² quintic step: 0 for s ≤ 0, 1 for s ≥ 1.
double smoothstep5(double s);
double smoothstep5_derivative(double s);

/// ζ(x) = 1 on d ≤ ε_in, 0 on d ≥ ε_in + width, quintic in between, where d is the
/// signed distance to the ball.
struct CutoffField {
    Vec3 X = Vec3::Zero();
    double R = 0;
    double eps_in = 0;
    double width = 0;
    double eps_out = 0;

    double distance(const Vec3& x) const { return (x - X).norm() - R; }
    double value(const Vec3& x) const;
    Vec3 gradient(const Vec3& x) const;
    bool rigid(const Vec3& x) const { return distance(x) <= eps_in; }
};

/// Throws ConfigError naming the current gap when ε_in + width + ε_out does not fit
/// between the ball and ∂Ω.
CutoffField build_cutoff(const BodyState& body, double radius, double eps_in, double width, double eps_out);

/// Solenoidal: Λ = curl(ζψ) with curl ψ = u_B, which equals u_B where ζ = 1 and keeps
/// the flow volume preserving. Product: Λ = ζ u_B.
enum class BlendMode { Solenoidal, Product };

struct BlendedField {
    BodyState body;
    CutoffField zeta;
    BlendMode mode = BlendMode::Solenoidal;

    Vec3 operator()(const Vec3& x) const;
};

/// Trajectories of dZ/dt = Λ(t, Z) for the vertices of an n³-cell lattice over Ω.
/// Vertices inside the rigid zone move with the body isometry step; the others use Heun.
class FlowMap {
public:
    FlowMap() = default;
    FlowMap(int n, const BodyState& body0, const CutoffField& cut0);

    void advance(const BlendedField& from, const BlendedField& to, double dt);

    int cells() const { return n_; }
    double spacing() const { return h_; }
    double time() const { return t_; }
    const BodyState& initial_pose() const { return pose0_; }
    const BodyState& pose() const { return pose_; }
    const CutoffField& cutoff() const { return cut_; }
    const std::vector<Vec3>& nodes() const { return Z_; }

    /// Trilinear interpolation of Z(t, ·) at y ∈ Ω.
    Vec3 eval(const Vec3& y) const;
    Mat3 jacobian(const Vec3& y) const;
    /// Y(t, x): rigid closed form deep in the rigid zone, damped Newton elsewhere.
    Vec3 invert(const Vec3& x) const;
    /// true when invert(x) takes the closed-form path
    bool in_rigid_core(const Vec3& x) const;

private:
    std::size_t id(int i, int j, int k) const { return (std::size_t(i) * (n_ + 1) + j) * (n_ + 1) + k; }
    void locate(const Vec3& y, int c[3], double s[3]) const;

    int n_ = 0;
    double h_ = 0;
    double t_ = 0;
    BodyState pose0_, pose_;
    CutoffField cut0_, cut_;
    std::vector<Vec3> Z_;
};

/// Z̃₂ sampled at the cell centres of a grid together with ∂ₜZ̃₂ and H.
struct ComposedMaps {
    Grid grid;
    Vectors disp;        // Z̃₂(x) − x
    Vectors dtZ;         // ∂ₜZ̃₂(x)
    std::array<Scalars, 9> H;  // (∇Z̃₂)⁻¹ row-major
    Mat3 Ot = Mat3::Identity();
    BodyState body1, body2;
    double t = 0;

    Mat3 Hat(std::size_t c) const;
    /// Recomputes H from disp by central differences. Throws TransformError if det ∇Z̃₂ < 1e-6.
    void update_inverse_jacobians();
};

/// Z̃₂ = Z₂∘Y₁ and Z̃₁ = Z₁∘Y₂ at single points.
Vec3 tilde_z2(const FlowMap& m1, const FlowMap& m2, const Vec3& x);
Vec3 tilde_z1(const FlowMap& m1, const FlowMap& m2, const Vec3& x);

/// Samples Z̃₂ on the grid. In the rigid zone ∂ₜZ̃₂ = Õ(V^s − V₁ + (w^s − w₁)×(x − X₁));
/// elsewhere ∂ₜZ̃₂ = Λ₂(Z̃₂(x)) − ∇Z̃₂(x) Λ₁(x), which follows from differentiating
/// Z₂(t, Y₁(t, x)) in time.
ComposedMaps compose_maps(const FlowMap& m1, const FlowMap& m2, const BlendedField& L1, const BlendedField& L2,
                          const Grid& g);

/// Õ = O₂O₁ᵀ and dÕ/dt from dO/dt = skew(w)O.
Mat3 tilde_O(const BodyState& b1, const BodyState& b2);
Mat3 tilde_O_rate(const BodyState& b1, const BodyState& b2);

struct TransformTensors {
    Mat3 H = Mat3::Identity();
    Mat3 Gm = Mat3::Identity();
    Tensor3 Gamma{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};   // Gamma[i](a,b) = Γⁱ_{ab}
    Vec3 dtZ = Vec3::Zero();
    Mat3 dtGradZ = Mat3::Zero();                                 // (j,b) = ∂ₜ∂_b(Z̃₂)_j
    Tensor3 d2Z{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};     // d2Z[l](a,b) = ∂_{ab}(Z̃₂)_l
    std::array<Tensor3, 3> d3Z{};                                // d3Z[l][c](a,b) = ∂_{abc}(Z̃₂)_l
    Vec3 lapZ1 = Vec3::Zero();                                   // Δ(Z̃₁) at Z̃₂(x) = −Γⁱ_{ab}G_{ab}
};

/// Central differences of the displacement and ∂ₜZ̃₂ fields at cell (i, j, k).
/// The wall ghost uses the identity map. Throws TransformError if det ∇Z̃₂ < 1e-6.
TransformTensors compute_tensors(const Grid& g, const Vectors& disp, const Vectors& dtZ, int i, int j, int k);

/// Derivatives of (r, U) at a point needed by the sources.
struct LocalFields {
    double r = 1;
    Vec3 grad_r = Vec3::Zero();
    Vec3 U = Vec3::Zero();
    Mat3 gradU = Mat3::Zero();           // (i,a) = ∂_a U_i
    Tensor3 hessU{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};  // hessU[i](a,b) = ∂_{ab}U_i
    Vec3 grad_p = Vec3::Zero();
};

LocalFields local_fields(const Grid& g, const Scalars& r, const Vectors& U, const FluidParams& prm, int i, int j,
                         int k);

/// G(r, U) = H_{jk} ∂ₜ(Z̃₂)_k ∂_j r
double source_G(const LocalFields& f, const TransformTensors& T);

struct FTerms {
    std::array<Vec3, 11> term{};
    Vec3 total = Vec3::Zero();
};

/// The eleven momentum source terms. mutate ∈ 1..11 flips the sign of that term
/// (harness self-check); 0 leaves them intact.
FTerms source_F(const LocalFields& f, const TransformTensors& T, const FluidParams& prm, int mutate = 0);

struct PulledBack {
    Grid grid;
    Scalars r;
    Vectors U;
    Vec3 Vs = Vec3::Zero();
    Vec3 ws = Vec3::Zero();
    Mat3 Ot = Mat3::Identity();
    Vec3 X1 = Vec3::Zero();
};

/// r_s = ρ₂∘Z̃₂, U_s = H u₂∘Z̃₂, V_s = ÕᵀV₂, w_s = Õᵀw₂.
PulledBack pull_back_strong(const FluidState& s2, const ComposedMaps& cm);

/// U_ε = ξ_ε U^s_B + (1 − ξ_ε) U^s with ξ_ε = 1 on [B₁]_ε, 0 outside [B₁]_{2ε}.
Vectors blend_mollified(const PulledBack& pb, double radius, double eps);

struct TransformedResiduals {
    Scalars continuity;  // NaN outside the evaluated cells
    Vectors momentum;
    Vec3 body_linear = Vec3::Zero();
    Vec3 body_angular = Vec3::Zero();
    double continuity_max = 0, momentum_max = 0;
    double continuity_l2 = 0, momentum_l2 = 0;
    std::size_t cells = 0;
};

/// Mask deciding which cells are evaluated.
using CellMask = std::function<bool(int, int, int)>;

/// Residuals of the transformed fluid system from three snapshots (t−dt, t, t+dt) of
/// (r_s, U_s); time derivatives are centred differences. Tensors come from cm at time t.
/// Forcing (continuity, momentum) of the frame-2 data, already mapped to frame 1, may be
/// subtracted via `mapped_forcing`.
TransformedResiduals transformed_residuals(const PulledBack& prev, const PulledBack& mid, const PulledBack& next,
                                           double dt, const ComposedMaps& cm, const FluidParams& prm,
                                           const CellMask& mask, int mutate = 0,
                                           const std::function<void(const Vec3&, double&, Vec3&)>& mapped_forcing = {});

/// Body residuals of the transformed rigid equations given V^s, w^s at t±dt, the body-1
/// state at t, J₁, mass and the surface loads of (r_s, U_s) on ∂B₁.
void transformed_body_residuals(const Vec3& Vs_prev, const Vec3& Vs_next, const Vec3& ws_prev, const Vec3& ws_next,
                                const Vec3& Vs, const Vec3& ws, const Vec3& w1, double m, const Mat3& J1,
                                const Vec3& force, const Vec3& torque, double dt, Vec3& lin, Vec3& ang);

/// Estimates of the composed map against the body velocity mismatch, sampled along two trajectories (uniform dt).
struct MapEstimateSample {
    double t = 0;
    double identity_exact = 0;     // ‖Õᵀ(dÕ/dt)x − (w^s−w₁)×x‖ with dÕ/dt from the exact relation
    double identity_fd = 0;        // same with a centred difference of Õ
    // left sides of: |Z̃₂−id| on ∂B₁, |∂ₜZ̃₂| on ∂B₁, ‖Z̃₂−id‖_{W^{3,∞}(F₁)}, ‖∂ₜZ̃₂‖_{W^{1,∞}(F₁)}
    std::array<double, 4> lhs{};
    std::array<double, 4> rhs{};   // matching right-hand norms (L² in time for 0 and 2)
    std::array<double, 4> ratio{}; // lhs/rhs, NaN when guarded
    double lhs_inverse = 0, ratio_inverse = 0;
};

struct MapEstimateReport {
    std::vector<MapEstimateSample> samples;
    double identity_exact_max = 0;
    double identity_fd_max = 0;
    std::array<double, 4> sup_ratio{};
    double sup_ratio_inverse = 0;
    bool guard_ok = true;   // every guarded sample had lhs < 1e-12
    bool finite = true;
};

/// Evaluates the estimates on ∂B₁ (closed form in the rigid zone). When flow maps are
/// supplied through `field_norms` the W^{3,∞}/W^{1,∞} norms over the fluid region are
/// taken from compose_maps at the sampled times, otherwise those entries are skipped.
struct FieldNorms {
    double t = 0;
    double w3 = 0;        // ‖Z̃₂ − id‖_{W^{3,∞}(F₁)}
    double w1_dt = 0;     // ‖∂ₜZ̃₂‖_{W^{1,∞}(F₁)}
    double inverse_w2 = 0;
};
MapEstimateReport map_estimate_diagnostics(const std::vector<BodyState>& traj1, const std::vector<BodyState>& traj2,
                                  double dt, double radius, const std::vector<FieldNorms>& field_norms = {});

/// W-norms of Z̃₂ − id and ∂ₜZ̃₂ over the cells of cm outside B₁ (central differences).
FieldNorms composed_field_norms(const ComposedMaps& cm, double radius);

}  // namespace fsi
