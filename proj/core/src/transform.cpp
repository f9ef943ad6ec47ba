#include "fsi/transform.hpp"

#include "fsi/grid_ops.hpp"
#include "fsi/mesh.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fsi {

double smoothstep5(double s) {
    if (s <= 0) return 0;
    if (s >= 1) return 1;
    return s * s * s * (10 - 15 * s + 6 * s * s);
}

double smoothstep5_derivative(double s) {
    if (s <= 0 || s >= 1) return 0;
    return 30 * s * s * (1 - s) * (1 - s);
}

double CutoffField::value(const Vec3& x) const { return 1 - smoothstep5((distance(x) - eps_in) / width); }

Vec3 CutoffField::gradient(const Vec3& x) const {
    const Vec3 r = x - X;
    const double n = r.norm();
    if (n == 0) return Vec3::Zero();
    return -smoothstep5_derivative((n - R - eps_in) / width) / width * (r / n);
}

CutoffField build_cutoff(const BodyState& body, double radius, double eps_in, double width, double eps_out) {
    if (!(eps_in > 0) || !(width > 0) || !(eps_out >= 0))
        throw ConfigError("cutoff margins must be positive");
    double gap = std::numeric_limits<double>::infinity();
    for (int d = 0; d < 3; ++d) gap = std::min({gap, body.X[d] - radius, 1.0 - body.X[d] - radius});
    if (gap <= 0) throw ConfigError("body is not strictly inside the domain");
    if (eps_in + width + eps_out >= gap) {
        std::ostringstream os;
        os << "cutoff margins eps_in + width + eps_out = " << eps_in + width + eps_out
           << " do not fit in the current gap " << gap;
        throw ConfigError(os.str());
    }
    return CutoffField{body.X, radius, eps_in, width, eps_out};
}

Vec3 BlendedField::operator()(const Vec3& x) const {
    const double z = zeta.value(x);
    if (z == 0) return Vec3::Zero();
    const Vec3 uB = rigid_velocity(body, x);
    if (mode == BlendMode::Product || z == 1) return z * uB;
    // curl(ζψ) with ψ = ½V×r + (w·r)r, curl ψ = V + w×r. ζ is radial about X, so the
    // rotational part of ψ is parallel to ∇ζ and the rotation is blended as plain ζ w×r.
    const Vec3 r = x - body.X;
    const Vec3 psi = 0.5 * body.V.cross(r) + body.w.dot(r) * r;
    return z * uB + zeta.gradient(x).cross(psi);
}

// ---------------------------------------------------------------- flow map

FlowMap::FlowMap(int n, const BodyState& body0, const CutoffField& cut0)
    : n_(n), h_(1.0 / n), pose0_(body0), pose_(body0), cut0_(cut0), cut_(cut0) {
    Z_.resize(std::size_t(n + 1) * (n + 1) * (n + 1));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            for (int k = 0; k <= n; ++k) Z_[id(i, j, k)] = Vec3(i * h_, j * h_, k * h_);
}

void FlowMap::advance(const BlendedField& from, const BlendedField& to, double dt) {
    const Mat3 dO = to.body.O * from.body.O.transpose();
    parallel_for(0, int(Z_.size()), [&](int lo, int hi) {
        for (int q = lo; q < hi; ++q) {
            Vec3& z = Z_[q];
            if (from.zeta.distance(z) <= from.zeta.eps_in) {
                z = to.body.X + dO * (z - from.body.X);
                continue;
            }
            const Vec3 k1 = from(z);
            if (k1.isZero(0.0) && to(z).isZero(0.0)) continue;
            const Vec3 k2 = to(z + dt * k1);
            z += 0.5 * dt * (k1 + k2);
        }
    });
    for (const Vec3& z : Z_)
        if ((z.array() < -1e-12).any() || (z.array() > 1 + 1e-12).any())
            throw TransformError("flow map trajectory left the domain; cutoff inconsistent with body motion");
    pose_ = to.body;
    cut_ = to.zeta;
    t_ += dt;
}

void FlowMap::locate(const Vec3& y, int c[3], double s[3]) const {
    for (int d = 0; d < 3; ++d) {
        const double q = std::clamp(y[d], 0.0, 1.0) / h_;
        c[d] = std::min(n_ - 1, int(std::floor(q)));
        s[d] = q - c[d];
    }
}

Vec3 FlowMap::eval(const Vec3& y) const {
    int c[3];
    double s[3];
    locate(y, c, s);
    Vec3 v = Vec3::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e) {
                const double w = (a ? s[0] : 1 - s[0]) * (b ? s[1] : 1 - s[1]) * (e ? s[2] : 1 - s[2]);
                v += w * Z_[id(c[0] + a, c[1] + b, c[2] + e)];
            }
    return v;
}

Mat3 FlowMap::jacobian(const Vec3& y) const {
    int c[3];
    double s[3];
    locate(y, c, s);
    Mat3 J = Mat3::Zero();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int e = 0; e < 2; ++e) {
                const double wa = a ? s[0] : 1 - s[0], wb = b ? s[1] : 1 - s[1], we = e ? s[2] : 1 - s[2];
                const double da = a ? 1 : -1, db = b ? 1 : -1, de = e ? 1 : -1;
                const Vec3& z = Z_[id(c[0] + a, c[1] + b, c[2] + e)];
                J.col(0) += da * wb * we / h_ * z;
                J.col(1) += wa * db * we / h_ * z;
                J.col(2) += wa * wb * de / h_ * z;
            }
    return J;
}

bool FlowMap::in_rigid_core(const Vec3& x) const { return cut_.distance(x) <= cut_.eps_in - std::sqrt(3.0) * h_; }

Vec3 FlowMap::invert(const Vec3& x) const {
    if (in_rigid_core(x)) return pose0_.X + pose0_.O * pose_.O.transpose() * (x - pose_.X);
    Vec3 y = x;
    Vec3 r = eval(y) - x;
    double res = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 50 && res > 0; ++it) {
        const Vec3 step = jacobian(y).partialPivLu().solve(r);
        double lam = 1;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
            const Vec3 yn = (y - lam * step).cwiseMax(0.0).cwiseMin(1.0);
            const Vec3 rn = eval(yn) - x;
            const double rr = rn.lpNorm<Eigen::Infinity>();
            if (rr < res) {
                y = yn;
                r = rn;
                res = rr;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (res > 1e-10) throw TransformError("flow map inversion did not converge");
    return y;
}

// ---------------------------------------------------------------- composition

Mat3 tilde_O(const BodyState& b1, const BodyState& b2) { return b2.O * b1.O.transpose(); }

Mat3 tilde_O_rate(const BodyState& b1, const BodyState& b2) {
    const Mat3 Ot = tilde_O(b1, b2);
    return skew(b2.w) * Ot - Ot * skew(b1.w);
}

Vec3 tilde_z2(const FlowMap& m1, const FlowMap& m2, const Vec3& x) { return m2.eval(m1.invert(x)); }
Vec3 tilde_z1(const FlowMap& m1, const FlowMap& m2, const Vec3& x) { return m1.eval(m2.invert(x)); }

Mat3 ComposedMaps::Hat(std::size_t c) const {
    Mat3 M;
    for (int a = 0; a < 9; ++a) M(a / 3, a % 3) = H[a][c];
    return M;
}

void ComposedMaps::update_inverse_jacobians() {
    for (auto& a : H) a.assign(grid.size(), 0.0);
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            for (int k = 0; k < grid.n; ++k) {
                const Mat3 A = Mat3::Identity() + cell_gradient(grid, disp, i, j, k, Parity::Odd);
                if (A.determinant() < 1e-6) throw TransformError("composed map Jacobian is singular");
                const Mat3 Hm = A.inverse();
                const std::size_t c = grid.idx(i, j, k);
                for (int a = 0; a < 9; ++a) H[a][c] = Hm(a / 3, a % 3);
            }
}

ComposedMaps compose_maps(const FlowMap& m1, const FlowMap& m2, const BlendedField& L1, const BlendedField& L2,
                          const Grid& g) {
    ComposedMaps cm;
    cm.grid = g;
    cm.disp = make_vectors(g.size());
    cm.dtZ = make_vectors(g.size());
    cm.body1 = m1.pose();
    cm.body2 = m2.pose();
    cm.t = m1.time();
    cm.Ot = tilde_O(cm.body1, cm.body2);
    const Mat3 dOt = tilde_O_rate(cm.body1, cm.body2);
    const BodyState& b1 = cm.body1;
    const BodyState& b2 = cm.body2;
    std::string failure;
    parallel_for(0, g.n, [&](int lo, int hi) {
        try {
            for (int i = lo; i < hi; ++i)
                for (int j = 0; j < g.n; ++j)
                    for (int k = 0; k < g.n; ++k) {
                        const Vec3 x = g.center(i, j, k);
                        const std::size_t c = g.idx(i, j, k);
                        // displacement as a difference of the two maps at one point, so
                        // coinciding maps give exactly zero regardless of inversion rounding
                        Vec3 disp, dz;
                        if (m1.in_rigid_core(x)) {
                            disp = (b2.X - b1.X) + (b2.O - b1.O) * (b1.O.transpose() * (x - b1.X));
                            dz = b2.V + dOt * (x - b1.X) - cm.Ot * b1.V;
                        } else {
                            const Vec3 y = m1.invert(x);
                            disp = m2.eval(y) - m1.eval(y);
                            const Mat3 grad = m2.jacobian(y) * m1.jacobian(y).inverse();
                            dz = L2(x + disp) - grad * L1(x);
                        }
                        put(cm.disp, c, disp);
                        put(cm.dtZ, c, dz);
                    }
        } catch (const std::exception& e) {
            failure = e.what();
        }
    });
    if (!failure.empty()) throw TransformError(failure);
    cm.update_inverse_jacobians();
    return cm;
}

// ---------------------------------------------------------------- tensors

namespace {

double d3(const Grid& g, const Scalars& f, int i, int j, int k, int a, int b, int c, Parity par) {
    int o[3] = {0, 0, 0};
    o[c] = 1;
    return (d2(g, f, i + o[0], j + o[1], k + o[2], a, b, par) - d2(g, f, i - o[0], j - o[1], k - o[2], a, b, par)) /
           (2 * g.h);
}

}  // namespace

TransformTensors compute_tensors(const Grid& g, const Vectors& disp, const Vectors& dtZ, int i, int j, int k) {
    TransformTensors T;
    const Mat3 A = Mat3::Identity() + cell_gradient(g, disp, i, j, k, Parity::Odd);
    if (A.determinant() < 1e-6) throw TransformError("composed map Jacobian is singular");
    T.H = A.inverse();
    T.Gm = T.H * T.H.transpose();
    for (int l = 0; l < 3; ++l)
        for (int a = 0; a < 3; ++a)
            for (int b = a; b < 3; ++b) {
                const double v = d2(g, disp[l], i, j, k, a, b, Parity::Odd);
                T.d2Z[l](a, b) = T.d2Z[l](b, a) = v;
            }
    for (int l = 0; l < 3; ++l)
        for (int c = 0; c < 3; ++c)
            for (int a = 0; a < 3; ++a)
                for (int b = a; b < 3; ++b) {
                    const double v = d3(g, disp[l], i, j, k, a, b, c, Parity::Odd);
                    T.d3Z[l][c](a, b) = T.d3Z[l][c](b, a) = v;
                }
    for (int m = 0; m < 3; ++m) {
        Mat3 Gi = Mat3::Zero();
        for (int l = 0; l < 3; ++l) Gi += T.H(m, l) * T.d2Z[l];
        T.Gamma[m] = Gi;
    }
    T.dtZ = get(dtZ, g.idx(i, j, k));
    T.dtGradZ = cell_gradient(g, dtZ, i, j, k, Parity::Odd);
    for (int m = 0; m < 3; ++m) T.lapZ1[m] = -(T.Gamma[m].cwiseProduct(T.Gm)).sum();
    return T;
}

LocalFields local_fields(const Grid& g, const Scalars& r, const Vectors& U, const FluidParams& prm, int i, int j,
                         int k) {
    LocalFields f;
    const std::size_t c = g.idx(i, j, k);
    f.r = r[c];
    f.grad_r = cell_gradient(g, r, i, j, k, Parity::Even);
    f.U = get(U, c);
    f.gradU = cell_gradient(g, U, i, j, k, Parity::Odd);
    for (int m = 0; m < 3; ++m)
        for (int a = 0; a < 3; ++a)
            for (int b = a; b < 3; ++b) f.hessU[m](a, b) = f.hessU[m](b, a) = d2(g, U[m], i, j, k, a, b, Parity::Odd);
    f.grad_p = prm.gamma * prm.a * std::pow(f.r, prm.gamma - 1) * f.grad_r;
    return f;
}

double source_G(const LocalFields& f, const TransformTensors& T) { return f.grad_r.dot(T.H * T.dtZ); }

FTerms source_F(const LocalFields& f, const TransformTensors& T, const FluidParams& prm, int mutate) {
    FTerms out;
    auto& F = out.term;
    const double mu = prm.mu, ml = prm.mu + prm.lambda;
    const Mat3 GI = T.Gm - Mat3::Identity();
    const Vec3 HdZ = T.H * T.dtZ;  // H_{αj}(∂ₜZ̃)_j
    Vec3 grad_div;
    for (int a = 0; a < 3; ++a) grad_div[a] = f.hessU[0](a, 0) + f.hessU[1](a, 1) + f.hessU[2](a, 2);
    for (int i = 0; i < 3; ++i) {
        const Mat3& Gi = T.Gamma[i];
        F[0][i] = -f.r * T.H.row(i).dot(T.dtGradZ * f.U);
        F[1][i] = f.r * HdZ.dot(Gi * f.U);
        // ∂_α(rU_i) = r ∂_αU_i + U_i ∂_αr
        F[2][i] = HdZ.dot(f.r * f.gradU.row(i).transpose() + f.U[i] * f.grad_r);
        F[3][i] = -f.r * f.U.dot(Gi * f.U);
        F[4][i] = ml * GI.row(i).dot(grad_div);
        F[5][i] = -GI.row(i).dot(f.grad_p);
        F[6][i] = mu * GI.cwiseProduct(f.hessU[i]).sum();
        F[7][i] = mu * T.lapZ1.dot(f.gradU.row(i));
        // 2Γⁱ_{αγ} G_{αβ} ∂_βU_γ = 2 Σ Γⁱ_{αγ} (G ∇Uᵀ)_{αγ}
        F[8][i] = 2 * mu * Gi.cwiseProduct(T.Gm * f.gradU.transpose()).sum();
        F[9][i] = mu * T.lapZ1.dot(Gi * f.U);
        double s = 0;
        for (int jj = 0; jj < 3; ++jj)
            for (int g = 0; g < 3; ++g) s += T.H(i, jj) * T.Gm.cwiseProduct(T.d3Z[jj][g]).sum() * f.U[g];
        F[10][i] = mu * s;
    }
    if (mutate >= 1 && mutate <= 11) F[mutate - 1] = -F[mutate - 1];
    for (const Vec3& v : F) out.total += v;
    return out;
}

// ---------------------------------------------------------------- pull-back

PulledBack pull_back_strong(const FluidState& s2, const ComposedMaps& cm) {
    const Grid& g = cm.grid;
    PulledBack pb;
    pb.grid = g;
    pb.r.assign(g.size(), 0.0);
    pb.U = make_vectors(g.size());
    pb.Ot = cm.Ot;
    pb.X1 = cm.body1.X;
    pb.Vs = cm.Ot.transpose() * cm.body2.V;
    pb.ws = cm.Ot.transpose() * cm.body2.w;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t c = g.idx(i, j, k);
                const Vec3 y = g.center(i, j, k) + get(cm.disp, c);
                if ((y.array() < -1e-12).any() || (y.array() > 1 + 1e-12).any())
                    throw TransformError("pull-back sample point outside the frame-2 domain");
                pb.r[c] = sample(s2.grid, s2.rho, y, Parity::Even);
                put(pb.U, c, cm.Hat(c) * sample(s2.grid, s2.u, y, Parity::Odd));
            }
    return pb;
}

Vectors blend_mollified(const PulledBack& pb, double radius, double eps) {
    const Grid& g = pb.grid;
    Vectors out = make_vectors(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t c = g.idx(i, j, k);
                const Vec3 x = g.center(i, j, k);
                const double d = (x - pb.X1).norm() - radius;
                const double xi = 1 - smoothstep5((d - eps) / eps);
                const Vec3 uB = pb.Vs + pb.ws.cross(x - pb.X1);
                put(out, c, xi * uB + (1 - xi) * get(pb.U, c));
            }
    return out;
}

TransformedResiduals transformed_residuals(const PulledBack& prev, const PulledBack& mid, const PulledBack& next,
                                           double dt, const ComposedMaps& cm, const FluidParams& prm,
                                           const CellMask& mask, int mutate,
                                           const std::function<void(const Vec3&, double&, Vec3&)>& mapped_forcing) {
    const Grid& g = mid.grid;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TransformedResiduals out;
    out.continuity.assign(g.size(), nan);
    out.momentum = make_vectors(g.size(), nan);
    const double mu = prm.mu, ml = prm.mu + prm.lambda;
    double l2c = 0, l2m = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                if (mask && !mask(i, j, k)) continue;
                const std::size_t c = g.idx(i, j, k);
                const LocalFields f = local_fields(g, mid.r, mid.U, prm, i, j, k);
                const TransformTensors T = compute_tensors(g, cm.disp, cm.dtZ, i, j, k);
                const double divU = f.gradU.trace();
                const double dtr = (next.r[c] - prev.r[c]) / (2 * dt);
                const Vec3 dtm = (next.r[c] * get(next.U, c) - prev.r[c] * get(prev.U, c)) / (2 * dt);
                double fc = 0;
                Vec3 fm = Vec3::Zero();
                if (mapped_forcing) mapped_forcing(g.center(i, j, k), fc, fm);
                const double rc = dtr + f.U.dot(f.grad_r) + f.r * divU - source_G(f, T) - fc;
                Vec3 lap, gdiv;
                for (int a = 0; a < 3; ++a) {
                    lap[a] = f.hessU[a].trace();
                    gdiv[a] = f.hessU[0](a, 0) + f.hessU[1](a, 1) + f.hessU[2](a, 2);
                }
                // div(rU⊗U)_i = U_i(U·∇r) + r(∇U U)_i + rU_i divU
                const Vec3 conv = f.U * f.U.dot(f.grad_r) + f.r * f.gradU * f.U + f.r * divU * f.U;
                const Vec3 rm = dtm + conv - mu * lap - ml * gdiv + f.grad_p - source_F(f, T, prm, mutate).total - fm;
                out.continuity[c] = rc;
                put(out.momentum, c, rm);
                out.continuity_max = std::max(out.continuity_max, std::abs(rc));
                out.momentum_max = std::max(out.momentum_max, rm.lpNorm<Eigen::Infinity>());
                l2c += rc * rc;
                l2m += rm.squaredNorm();
                ++out.cells;
            }
    out.continuity_l2 = std::sqrt(l2c * g.cell_volume());
    out.momentum_l2 = std::sqrt(l2m * g.cell_volume());
    return out;
}

void transformed_body_residuals(const Vec3& Vs_prev, const Vec3& Vs_next, const Vec3& ws_prev, const Vec3& ws_next,
                                const Vec3& Vs, const Vec3& ws, const Vec3& w1, double m, const Mat3& J1,
                                const Vec3& force, const Vec3& torque, double dt, Vec3& lin, Vec3& ang) {
    const Vec3 dV = (Vs_next - Vs_prev) / (2 * dt);
    const Vec3 dw = (ws_next - ws_prev) / (2 * dt);
    lin = m * dV + m * (ws - w1).cross(Vs) - force;
    ang = J1 * dw - (J1 * ws).cross(ws) + J1 * (ws - w1).cross(ws) - torque;
}

// ---------------------------------------------------------------- map estimates

FieldNorms composed_field_norms(const ComposedMaps& cm, double radius) {
    const Grid& g = cm.grid;
    FieldNorms fn;
    fn.t = cm.t;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const Vec3 x = g.center(i, j, k);
                if ((x - cm.body1.X).norm() <= radius) continue;
                const std::size_t c = g.idx(i, j, k);
                const TransformTensors T = compute_tensors(g, cm.disp, cm.dtZ, i, j, k);
                const Vec3 dsp = get(cm.disp, c);
                double w3 = dsp.lpNorm<Eigen::Infinity>();
                w3 = std::max(w3, inf_norm(T.H.inverse() - Mat3::Identity()));
                for (int l = 0; l < 3; ++l) {
                    w3 = std::max(w3, inf_norm(T.d2Z[l]));
                    for (int a = 0; a < 3; ++a) w3 = std::max(w3, inf_norm(T.d3Z[l][a]));
                }
                fn.w3 = std::max(fn.w3, w3);
                fn.w1_dt = std::max({fn.w1_dt, T.dtZ.lpNorm<Eigen::Infinity>(), inf_norm(T.dtGradZ)});
                // (Z̃₁ − id)∘Z̃₂ and its first two derivatives at Z̃₂(x):
                // ∇Z̃₁ = H, ∂_{ab}(Z̃₁)_i = −Γⁱ_{cd} H_{ca} H_{db}
                double inv = std::max(dsp.lpNorm<Eigen::Infinity>(), inf_norm(T.H - Mat3::Identity()));
                for (int m = 0; m < 3; ++m) inv = std::max(inv, inf_norm(T.H.transpose() * T.Gamma[m] * T.H));
                fn.inverse_w2 = std::max(fn.inverse_w2, inv);
            }
    return fn;
}

MapEstimateReport map_estimate_diagnostics(const std::vector<BodyState>& traj1, const std::vector<BodyState>& traj2,
                                           double dt, double radius, const std::vector<FieldNorms>& field_norms) {
    MapEstimateReport rep;
    const std::size_t n = std::min(traj1.size(), traj2.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // unit directions for sampling ∂B₁ and the identity
    const SurfaceMesh dirs = icosphere(1.0, 2);
    double intV = 0, intW = 0;  // ∫|V₁−V^s|², ∫|w₁−w^s|²
    double prevV = 0, prevW = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const BodyState& b1 = traj1[k];
        const BodyState& b2 = traj2[k];
        MapEstimateSample s;
        s.t = k * dt;
        const Mat3 Ot = tilde_O(b1, b2);
        const Mat3 dOt = tilde_O_rate(b1, b2);
        const Vec3 Vs = Ot.transpose() * b2.V, ws = Ot.transpose() * b2.w;
        const Vec3 dw = ws - b1.w, dV = Vs - b1.V;
        Mat3 dOt_fd = Mat3::Constant(nan);
        if (k > 0 && k + 1 < n)
            dOt_fd = (tilde_O(traj1[k + 1], traj2[k + 1]) - tilde_O(traj1[k - 1], traj2[k - 1])) / (2 * dt);
        for (int a = 0; a < 3; ++a) {
            const Vec3 e = Vec3::Unit(a);
            s.identity_exact = std::max(s.identity_exact, (Ot.transpose() * dOt * e - dw.cross(e)).norm());
            if (k > 0 && k + 1 < n)
                s.identity_fd = std::max(s.identity_fd, (Ot.transpose() * dOt_fd * e - dw.cross(e)).norm());
        }
        const double cV = dV.squaredNorm(), cW = dw.squaredNorm();
        if (k > 0) {
            intV += 0.5 * dt * (prevV + cV);
            intW += 0.5 * dt * (prevW + cW);
        }
        prevV = cV;
        prevW = cW;
        const double rhsL2 = std::sqrt(intV) + std::sqrt(intW);
        const double rhsNow = dV.norm() + dw.norm();
        for (const Vec3& v : dirs.vertices) {
            const Vec3 x = b1.X + radius * v;
            const Vec3 z = b2.X + Ot * (x - b1.X);
            s.lhs[0] = std::max(s.lhs[0], (z - x).norm());
            s.lhs[1] = std::max(s.lhs[1], (Ot * (dV + dw.cross(x - b1.X))).norm());
        }
        s.rhs = {rhsL2, rhsNow, rhsL2, rhsNow};
        const FieldNorms* fn = nullptr;
        for (const FieldNorms& f : field_norms)
            if (std::abs(f.t - s.t) <= 1e-9 * std::max(1.0, dt)) fn = &f;
        if (fn) {
            s.lhs[2] = fn->w3;
            s.lhs[3] = fn->w1_dt;
            s.lhs_inverse = fn->inverse_w2;
        }
        auto ratio = [&](double lhs, double rhs) {
            if (rhs < 1e-14) {
                if (!(lhs < 1e-12)) rep.guard_ok = false;
                return nan;
            }
            return lhs / rhs;
        };
        for (int q = 0; q < 4; ++q) s.ratio[q] = (q >= 2 && !fn) ? nan : ratio(s.lhs[q], s.rhs[q]);
        s.ratio_inverse = fn ? ratio(s.lhs_inverse, rhsL2) : nan;
        rep.identity_exact_max = std::max(rep.identity_exact_max, s.identity_exact);
        rep.identity_fd_max = std::max(rep.identity_fd_max, s.identity_fd);
        for (int q = 0; q < 4; ++q)
            if (!std::isnan(s.ratio[q])) {
                if (!std::isfinite(s.ratio[q])) rep.finite = false;
                rep.sup_ratio[q] = std::max(rep.sup_ratio[q], s.ratio[q]);
            }
        if (!std::isnan(s.ratio_inverse)) rep.sup_ratio_inverse = std::max(rep.sup_ratio_inverse, s.ratio_inverse);
        rep.samples.push_back(s);
    }
    return rep;
}

}  // namespace fsi
