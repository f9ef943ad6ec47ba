#include "fsi/fluid.hpp"

#include "fsi/mesh.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fsi {

namespace {
int g_threads = 1;
}

int num_threads() { return g_threads; }
void set_num_threads(int n) { g_threads = std::max(1, n); }

void FluidParams::validate() const {
    if (!(gamma > 1.5)) throw ConfigError("gamma must exceed 3/2");
    if (!(mu > 0)) throw ConfigError("mu must be positive");
    if (!(mu + lambda >= 0)) throw ConfigError("mu + lambda must be non-negative");
    if (!(a > 0)) throw ConfigError("pressure constant must be positive");
}

EosValues eos(double rho, const FluidParams& prm) {
    if (rho < 0) throw NumericError("eos: negative density");
    const double g = prm.gamma;
    EosValues e;
    if (rho == 0) return e;
    const double rg1 = std::pow(rho, g - 1);
    e.p = prm.a * rg1 * rho;
    e.P = e.p / (g - 1);
    e.dP = prm.a * g / (g - 1) * rg1;
    e.d2P = prm.a * g * rg1 / rho;
    return e;
}

StressPair stress(const Mat3& grad_u, const FluidParams& prm) {
    StressPair s;
    s.D = 0.5 * (grad_u + grad_u.transpose());
    s.S = 2 * prm.mu * s.D + prm.lambda * grad_u.trace() * Mat3::Identity();
    return s;
}

double FluidState::mass() const {
    return std::accumulate(rho.begin(), rho.end(), 0.0) * grid.cell_volume();
}

Vec3 FluidState::momentum() const {
    Vec3 m = Vec3::Zero();
    for (std::size_t c = 0; c < rho.size(); ++c) m += rho[c] * get(u, c);
    return m * grid.cell_volume();
}

double FluidState::min_rho() const { return *std::min_element(rho.begin(), rho.end()); }

double admissible_dt(const FluidState& s, const FluidParams& prm, const StepLimits& lim) {
    double smax = 0, rmin = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < s.rho.size(); ++c) {
        const double r = std::max(s.rho[c], 0.0);
        const double un = std::max({std::abs(s.u[0][c]), std::abs(s.u[1][c]), std::abs(s.u[2][c])});
        smax = std::max(smax, un + sound_speed(r, prm));
        rmin = std::min(rmin, r);
    }
    const double h = s.grid.h;
    double dt = smax > 0 ? lim.cfl * h / smax : std::numeric_limits<double>::infinity();
    // explicit diffusion: spectrum of μΔ + (μ+λ)∇div is bounded by (12μ + 3(μ+λ))/h²
    const double nu = (12 * prm.mu + 3 * std::max(prm.mu + prm.lambda, 0.0)) / std::max(rmin, 1e-300);
    if (nu > 0) dt = std::min(dt, lim.visc * 2 * h * h / nu);
    return dt;
}

namespace {

/// Padded storage with two ghost layers per side.
struct Padded {
    int n, P;
    std::vector<double> v;
    explicit Padded(int n_) : n(n_), P(n_ + 4), v(std::size_t(P) * P * P, 0.0) {}
    std::size_t id(int i, int j, int k) const { return (std::size_t(i + 2) * P + (j + 2)) * P + (k + 2); }
    double& operator()(int i, int j, int k) { return v[id(i, j, k)]; }
    double operator()(int i, int j, int k) const { return v[id(i, j, k)]; }

    void fill_ghosts(double parity) {
        for (int axis = 0; axis < 3; ++axis)
            for (int a = -2; a < n + 2; ++a)
                for (int b = -2; b < n + 2; ++b)
                    for (int gl = 1; gl <= 2; ++gl) {
                        auto ref = [&](int c) -> double& {
                            if (axis == 0) return (*this)(c, a, b);
                            if (axis == 1) return (*this)(a, c, b);
                            return (*this)(a, b, c);
                        };
                        ref(-gl) = parity * ref(gl - 1);
                        ref(n - 1 + gl) = parity * ref(n - gl);
                    }
    }
};

}  // namespace

void fluid_rhs(const Grid& g, const Scalars& rho, const Vectors& mom, const FluidParams& prm, double t,
               const Forcing& forcing, Scalars& drho, Vectors& dmom) {
    const int n = g.n;
    const double h = g.h;
    Padded R(n), P(n);
    std::array<Padded, 3> U{Padded(n), Padded(n), Padded(n)};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t c = g.idx(i, j, k);
                const double r = rho[c];
                if (!(r > 0)) throw NumericError("fluid_rhs: non-positive density");
                R(i, j, k) = r;
                for (int d = 0; d < 3; ++d) U[d](i, j, k) = mom[d][c] / r;
            }
    R.fill_ghosts(1.0);
    for (auto& Ud : U) Ud.fill_ghosts(-1.0);
    for (std::size_t c = 0; c < P.v.size(); ++c) P.v[c] = prm.a * std::pow(R.v[c], prm.gamma);

    drho.assign(g.size(), 0.0);
    dmom = make_vectors(g.size());

    const double mu = prm.mu, ml = prm.mu + prm.lambda;
    const double cs2 = prm.gamma * prm.a;

    parallel_for(0, n, [&](int ilo, int ihi) {
        for (int i = ilo; i < ihi; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const int ci[3] = {i, j, k};
                    double acc[4] = {0, 0, 0, 0};
                    for (int d = 0; d < 3; ++d) {
                        int o[3] = {0, 0, 0};
                        o[d] = 1;
                        auto val = [&](const Padded& F, int s) {
                            return F(ci[0] + s * o[0], ci[1] + s * o[1], ci[2] + s * o[2]);
                        };
                        // faces at i-1/2 (s = -1) and i+1/2 (s = 0)
                        double flux[2][4];
                        for (int side = 0; side < 2; ++side) {
                            const int l = side - 1;  // left cell offset of the face
                            auto recon = [&](const Padded& F, double& qL, double& qR) {
                                const double fm = val(F, l - 1), f0 = val(F, l), f1 = val(F, l + 1), f2 = val(F, l + 2);
                                qL = f0 + 0.25 * (f1 - fm);
                                qR = f1 - 0.25 * (f2 - f0);
                            };
                            double rL, rR, uL[3], uR[3];
                            recon(R, rL, rR);
                            for (int e = 0; e < 3; ++e) recon(U[e], uL[e], uR[e]);
                            rL = std::max(rL, 1e-12);
                            rR = std::max(rR, 1e-12);
                            const double cL = std::sqrt(cs2 * std::pow(rL, prm.gamma - 1));
                            const double cR = std::sqrt(cs2 * std::pow(rR, prm.gamma - 1));
                            const double alpha = std::max(std::abs(uL[d]) + cL, std::abs(uR[d]) + cR);
                            flux[side][0] = 0.5 * (rL * uL[d] + rR * uR[d]) - 0.5 * alpha * (rR - rL);
                            for (int e = 0; e < 3; ++e)
                                flux[side][1 + e] = 0.5 * (rL * uL[d] * uL[e] + rR * uR[d] * uR[e]) -
                                                    0.5 * alpha * (rR * uR[e] - rL * uL[e]);
                        }
                        for (int q = 0; q < 4; ++q) acc[q] -= (flux[1][q] - flux[0][q]) / h;
                        acc[1 + d] -= (val(P, 1) - val(P, -1)) / (2 * h);
                    }
                    // viscous terms μΔu + (μ+λ)∇(div u)
                    for (int e = 0; e < 3; ++e) {
                        const Padded& Ue = U[e];
                        const double lap = (Ue(i + 1, j, k) + Ue(i - 1, j, k) + Ue(i, j + 1, k) + Ue(i, j - 1, k) +
                                            Ue(i, j, k + 1) + Ue(i, j, k - 1) - 6 * Ue(i, j, k)) / (h * h);
                        acc[1 + e] += mu * lap;
                    }
                    if (ml != 0) {
                        for (int d = 0; d < 3; ++d) {
                            double gd = 0;
                            for (int e = 0; e < 3; ++e) {
                                const Padded& Ue = U[e];
                                if (d == e) {
                                    int o[3] = {0, 0, 0};
                                    o[d] = 1;
                                    gd += (Ue(i + o[0], j + o[1], k + o[2]) - 2 * Ue(i, j, k) +
                                           Ue(i - o[0], j - o[1], k - o[2])) / (h * h);
                                } else {
                                    int p[3] = {0, 0, 0}, q[3] = {0, 0, 0};
                                    p[d] = 1;
                                    q[e] = 1;
                                    auto v = [&](int sa, int sb) {
                                        return Ue(i + sa * p[0] + sb * q[0], j + sa * p[1] + sb * q[1],
                                                  k + sa * p[2] + sb * q[2]);
                                    };
                                    gd += (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * h * h);
                                }
                            }
                            acc[1 + d] += ml * gd;
                        }
                    }
                    const std::size_t c = g.idx(i, j, k);
                    if (forcing) {
                        double fr = 0;
                        Vec3 fm = Vec3::Zero();
                        forcing(t, g.center(i, j, k), fr, fm);
                        acc[0] += fr;
                        for (int e = 0; e < 3; ++e) acc[1 + e] += fm[e];
                    }
                    drho[c] = acc[0];
                    for (int e = 0; e < 3; ++e) dmom[e][c] = acc[1 + e];
                }
    });
}

FluidState step_fluid(const FluidState& s, const FluidParams& prm, double dt, const Forcing& forcing,
                      const StepLimits& lim) {
    const double adm = admissible_dt(s, prm, lim);
    if (dt > adm * (1 + 1e-12)) {
        std::ostringstream os;
        os << "step_fluid: dt=" << dt << " exceeds admissible dt=" << adm;
        throw CflError(os.str(), adm);
    }
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    Vectors m0 = make_vectors(N);
    for (std::size_t c = 0; c < N; ++c)
        for (int e = 0; e < 3; ++e) m0[e][c] = s.rho[c] * s.u[e][c];

    Scalars dr;
    Vectors dm;
    fluid_rhs(g, s.rho, m0, prm, s.t, forcing, dr, dm);
    Scalars r1(N);
    Vectors m1 = make_vectors(N);
    for (std::size_t c = 0; c < N; ++c) {
        r1[c] = s.rho[c] + dt * dr[c];
        for (int e = 0; e < 3; ++e) m1[e][c] = m0[e][c] + dt * dm[e][c];
    }
    fluid_rhs(g, r1, m1, prm, s.t + dt, forcing, dr, dm);

    FluidState out;
    out.grid = g;
    out.t = s.t + dt;
    out.rho.resize(N);
    out.u = make_vectors(N);
    for (std::size_t c = 0; c < N; ++c) {
        const double r = 0.5 * (s.rho[c] + r1[c] + dt * dr[c]);
        if (!(r > 0) || !std::isfinite(r)) throw NumericError("step_fluid: density lost positivity");
        out.rho[c] = r;
        for (int e = 0; e < 3; ++e) {
            const double m = 0.5 * (m0[e][c] + m1[e][c] + dt * dm[e][c]);
            if (!std::isfinite(m)) throw NumericError("step_fluid: non-finite momentum");
            out.u[e][c] = m / r;
        }
    }
    return out;
}

EnergyAndDissipation total_energy(const FluidState& s, const FluidParams& prm, const Region& region) {
    const Grid& g = s.grid;
    EnergyAndDissipation out;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const Vec3 x = g.center(i, j, k);
                if (region && !region(x)) continue;
                const std::size_t c = g.idx(i, j, k);
                const Vec3 u = get(s.u, c);
                out.E += 0.5 * s.rho[c] * u.squaredNorm() + eos(s.rho[c], prm).P;
                const Mat3 G = cell_gradient(g, s.u, i, j, k);
                out.dissipation += (stress(G, prm).S.cwiseProduct(G)).sum();
            }
    out.E *= g.cell_volume();
    out.dissipation *= g.cell_volume();
    return out;
}

WeakResiduals weak_residuals(const std::vector<FluidState>& snaps, const FluidParams& prm, const TestFunction& tf,
                             const Renormalization& b, const std::vector<std::pair<Vec3, double>>& body_path) {
    WeakResiduals out;
    if (snaps.size() < 2) return out;
    const Grid& g = snaps.front().grid;
    const double dV = g.cell_volume();
    if (tf.vphi && !body_path.empty()) {
        // admissibility: D(φ) = 0 on a neighbourhood (two cells) of every body position
        for (std::size_t s = 0; s < snaps.size(); ++s) {
            const auto& [X, R] = body_path[std::min(s, body_path.size() - 1)];
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j)
                    for (int k = 0; k < g.n; ++k) {
                        const Vec3 x = g.center(i, j, k);
                        if ((x - X).norm() > R + 2 * g.h) continue;
                        Mat3 Gp = tf.grad_vphi(snaps[s].t, x);
                        if (inf_norm(0.5 * (Gp + Gp.transpose())) > 1e-12)
                            throw ConfigError("weak_residuals: test function is not rigid near the body");
                    }
        }
    }
    auto integrand = [&](const FluidState& st, double& c, double& r, double& m) {
        c = r = m = 0;
        const double t = st.t;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    const std::size_t id = g.idx(i, j, k);
                    const Vec3 x = g.center(i, j, k);
                    const double rho = st.rho[id];
                    const Vec3 u = get(st.u, id);
                    const Mat3 Gu = cell_gradient(g, st.u, i, j, k);
                    if (tf.phi) {
                        const double ph = tf.phi(t, x), pt = tf.dt_phi(t, x);
                        const Vec3 gp = tf.grad_phi(t, x);
                        c += rho * pt + rho * u.dot(gp);
                        if (b.b) {
                            const double bv = b.b(rho);
                            r += bv * pt + bv * u.dot(gp) - (rho * b.db(rho) - bv) * Gu.trace() * ph;
                        }
                    }
                    if (tf.vphi) {
                        const Vec3 vt = tf.dt_vphi(t, x);
                        const Mat3 Gp = tf.grad_vphi(t, x);
                        const Mat3 Dp = 0.5 * (Gp + Gp.transpose());
                        const Mat3 S = stress(Gu, prm).S;
                        m += rho * u.dot(vt) + rho * (u * u.transpose()).cwiseProduct(Dp).sum() +
                             pressure(rho, prm) * Gp.trace() - S.cwiseProduct(Dp).sum();
                    }
                }
        c *= dV;
        r *= dV;
        m *= dV;
    };
    double sc = 0, sr = 0, sm = 0;
    double pc = 0, pr = 0, pm = 0;
    for (std::size_t s = 0; s < snaps.size(); ++s) {
        double c, r, m;
        integrand(snaps[s], c, r, m);
        out.scale = std::max({out.scale, std::abs(c), std::abs(r), std::abs(m)});
        if (s > 0) {
            const double dt = snaps[s].t - snaps[s - 1].t;
            sc += 0.5 * dt * (c + pc);
            sr += 0.5 * dt * (r + pr);
            sm += 0.5 * dt * (m + pm);
        }
        pc = c;
        pr = r;
        pm = m;
    }
    // initial-data terms
    const FluidState& s0 = snaps.front();
    double ic = 0, ir = 0, im = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t id = g.idx(i, j, k);
                const Vec3 x = g.center(i, j, k);
                if (tf.phi) {
                    ic += s0.rho[id] * tf.phi(s0.t, x);
                    if (b.b) ir += b.b(s0.rho[id]) * tf.phi(s0.t, x);
                }
                if (tf.vphi) im += s0.rho[id] * get(s0.u, id).dot(tf.vphi(s0.t, x));
            }
    out.continuity = sc + ic * dV;
    out.renormalized = sr + ir * dV;
    out.momentum = sm + im * dV;
    out.scale = std::max({out.scale, std::abs(ic * dV), std::abs(im * dV)});
    return out;
}

namespace {

// Gauss–Legendre nodes and weights on [-1, 1], 8 points.
constexpr double kGLx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                            0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGLw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

double ball_integral(const std::function<double(const Vec3&)>& f, const BodyState& pose, double R,
                     const SurfaceMesh& unit) {
    double sum = 0;
    const double total = unit.total_area();
    for (int q = 0; q < 8; ++q) {
        const double r = 0.5 * R * (kGLx[q] + 1);
        const double wr = 0.5 * R * kGLw[q] * r * r;
        double shell = 0;
        for (std::size_t fc = 0; fc < unit.faces.size(); ++fc) {
            const Vec3 dir = unit.centroids[fc].normalized();
            shell += unit.areas[fc] * f(pose.X + pose.O * (r * dir));
        }
        sum += wr * shell * (4 * M_PI / total);
    }
    return sum;
}

double box_integral(const std::function<double(const Vec3&)>& f) {
    // composite 8-point Gauss rule on a 4³ partition of the unit cube
    double sum = 0;
    const int m = 4;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                for (int p = 0; p < 8; ++p)
                    for (int q = 0; q < 8; ++q)
                        for (int r = 0; r < 8; ++r) {
                            Vec3 x((a + 0.5 * (kGLx[p] + 1)) / m, (b + 0.5 * (kGLx[q] + 1)) / m,
                                   (c + 0.5 * (kGLx[r] + 1)) / m);
                            sum += kGLw[p] * kGLw[q] * kGLw[r] * f(x);
                        }
    return sum / (8.0 * m * m * m);
}

}  // namespace

TransportResult transport_check(const std::function<double(double, const Vec3&)>& f,
                                const std::function<double(double, const Vec3&)>& dt_f,
                                const std::function<BodyState(double)>& motion, double radius, double t, double dt,
                                int level, TransportRegion region) {
    const SurfaceMesh unit = icosphere(1.0, level);
    const SurfaceMesh mesh = icosphere(radius, level);
    auto content = [&](double tt) {
        const BodyState pose = motion(tt);
        // quadrature points ride with the body so the difference quotient sees the material motion
        return ball_integral([&](const Vec3& x) { return f(tt, x); }, pose, radius, unit);
    };
    TransportResult res;
    const double ball_rate = (content(t + dt) - content(t - dt)) / (2 * dt);
    const BodyState pose = motion(t);
    const double ball_vol = ball_integral([&](const Vec3& x) { return dt_f(t, x); }, pose, radius, unit);
    // ∮ f u·n with n into the body
    double surf = 0;
    for (std::size_t fc = 0; fc < mesh.faces.size(); ++fc) {
        const Vec3 x = mesh.centroid(fc, pose);
        surf += mesh.areas[fc] * f(t, x) * rigid_velocity(pose, x).dot(mesh.normal(fc, pose));
    }
    if (region == TransportRegion::Ball) {
        res.lhs = ball_rate;
        res.volume_term = ball_vol;
        res.surface_term = -surf;
    } else {
        const double box_rate = (box_integral([&](const Vec3& x) { return f(t + dt, x); }) -
                                 box_integral([&](const Vec3& x) { return f(t - dt, x); })) / (2 * dt);
        res.lhs = box_rate - ball_rate;
        res.volume_term = box_integral([&](const Vec3& x) { return dt_f(t, x); }) - ball_vol;
        res.surface_term = surf;
    }
    res.residual = std::abs(res.lhs - res.volume_term - res.surface_term);
    return res;
}

void write_field_dump(std::ostream& os, const FluidState& s) {
    os.precision(17);
    os << s.grid.n << ' ' << s.grid.h << ' ' << s.t << '\n';
    for (std::size_t c = 0; c < s.rho.size(); ++c)
        os << s.rho[c] << ' ' << s.u[0][c] << ' ' << s.u[1][c] << ' ' << s.u[2][c] << '\n';
}

FluidState read_field_dump(std::istream& is) {
    int n;
    double h, t;
    if (!(is >> n >> h >> t) || n <= 0) throw NumericError("read_field_dump: malformed header");
    FluidState s(Grid(n), 0.0);
    s.t = t;
    for (std::size_t c = 0; c < s.rho.size(); ++c)
        if (!(is >> s.rho[c] >> s.u[0][c] >> s.u[1][c] >> s.u[2][c]))
            throw NumericError("read_field_dump: truncated record");
    return s;
}

}  // namespace fsi
