#include "fsi/coupling.hpp"

#include <map>

namespace fsi {

double SurfaceMesh::total_area() const {
    double a = 0;
    for (double x : areas) a += x;
    return a;
}

SurfaceMesh icosphere(double radius, int level) {
    const double t = (1 + std::sqrt(5.0)) / 2;
    std::vector<Vec3> V = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : V) v.normalize();
    std::vector<std::array<int, 3>> F = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> cache;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = cache.find(key);
            if (it != cache.end()) return it->second;
            V.push_back((V[a] + V[b]).normalized());
            return cache[key] = int(V.size()) - 1;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(F.size() * 4);
        for (auto [a, b, c] : F) {
            int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        F = std::move(next);
    }
    SurfaceMesh m;
    m.radius = radius;
    for (auto& v : V) m.vertices.push_back(radius * v);
    m.faces = F;
    for (auto [a, b, c] : F) {
        const Vec3 &pa = m.vertices[a], &pb = m.vertices[b], &pc = m.vertices[c];
        Vec3 cr = (pb - pa).cross(pc - pa);
        Vec3 cen = (pa + pb + pc) / 3.0;
        double area = 0.5 * cr.norm();
        Vec3 n = cr / cr.norm();
        if (n.dot(cen) > 0) n = -n;
        m.centroids.push_back(cen);
        m.normals.push_back(n);
        m.areas.push_back(area);
    }
    return m;
}

std::pair<Vec3, Vec3> closed_surface_moments(const SurfaceMesh& mesh, const BodyState& body) {
    Vec3 sn = Vec3::Zero(), sm = Vec3::Zero();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 n = mesh.normal(f, body);
        sn += mesh.areas[f] * n;
        sm += mesh.areas[f] * (mesh.centroid(f, body) - body.X).cross(n);
    }
    return {sn, sm};
}

Loads surface_loads(const FluidState& s, const BodyState& body, const SurfaceMesh& mesh, const FluidParams& prm) {
    const Grid& g = s.grid;
    // cell gradients and pressure, then trilinear sampling off the surface
    std::array<Scalars, 9> grad;
    for (auto& a : grad) a.resize(g.size());
    Scalars p(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t c = g.idx(i, j, k);
                const Mat3 G = cell_gradient(g, s.u, i, j, k);
                for (int a = 0; a < 9; ++a) grad[a][c] = G(a / 3, a % 3);
                p[c] = pressure(s.rho[c], prm);
            }
    auto sigma_at = [&](const Vec3& x) {
        Mat3 G;
        for (int a = 0; a < 9; ++a) G(a / 3, a % 3) = sample(g, grad[a], x, Parity::Even);
        return Mat3(stress(G, prm).S - sample(g, p, x, Parity::Even) * Mat3::Identity());
    };
    Loads L;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 x = mesh.centroid(f, body);
        const Vec3 n = mesh.normal(f, body);
        const Vec3 xa = x - 2 * g.h * n, xb = x - 3 * g.h * n;
        if ((x.array() < 0).any() || (x.array() > 1).any())
            throw NumericError("surface_loads: mesh face outside the domain");
        const Mat3 sig = 3 * sigma_at(xa) - 2 * sigma_at(xb);
        const Vec3 tr = sig * n * mesh.areas[f];
        L.force -= tr;
        L.torque -= (x - body.X).cross(tr);
    }
    return L;
}

Exchange enforce_body_velocity(FluidState& s, const BodyState& body, double radius, double k) {
    const Grid& g = s.grid;
    Exchange ex;
    const double dV = g.cell_volume();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int kk = 0; kk < g.n; ++kk) {
                const Vec3 x = g.center(i, j, kk);
                if (!inside_ball(x, body.X, radius)) continue;
                const std::size_t c = g.idx(i, j, kk);
                const Vec3 u = get(s.u, c);
                const Vec3 un = (u + k * rigid_velocity(body, x)) / (1 + k);
                put(s.u, c, un);
                const Vec3 dp = s.rho[c] * (un - u) * dV;
                ex.dP += dp;
                ex.dL += (x - body.X).cross(dp);
            }
    return ex;
}

Loads penalization_loads(const FluidState& s, const BodyState& body, double radius, double k, double dt) {
    // Unknowns V', w' such that m V' + Σρu' = m V + Σρu and J w' + Σ r×ρu' = J w + Σ r×ρu,
    // with u' = (u + k(V' + w'×r))/(1+k) on the body cells.
    const Grid& g = s.grid;
    const double dV = g.cell_volume();
    const double c = k / (1 + k);
    double Mf = 0;
    Vec3 S1 = Vec3::Zero(), Pf = Vec3::Zero(), Lf = Vec3::Zero();
    Mat3 Jf = Mat3::Zero();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int kk = 0; kk < g.n; ++kk) {
                const Vec3 x = g.center(i, j, kk);
                if (!inside_ball(x, body.X, radius)) continue;
                const std::size_t id = g.idx(i, j, kk);
                const double mc = s.rho[id] * dV;
                const Vec3 r = x - body.X;
                const Vec3 u = get(s.u, id);
                Mf += mc;
                S1 += mc * r;
                Pf += mc * u;
                Lf += mc * r.cross(u);
                Jf += mc * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
            }
    const Mat3 J = body.inertia();
    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> rhs;
    A.block<3, 3>(0, 0) = (body.m + c * Mf) * Mat3::Identity();
    A.block<3, 3>(0, 3) = -c * skew(S1);  // w'×S1 = −S1×w'
    A.block<3, 3>(3, 0) = c * skew(S1);   // S1×V'
    A.block<3, 3>(3, 3) = J + c * Jf;
    rhs.head<3>() = body.m * body.V + c * Pf;
    rhs.tail<3>() = J * body.w + c * Lf;
    Eigen::Matrix<double, 6, 1> sol = A.partialPivLu().solve(rhs);
    Loads L;
    L.force = body.m * (sol.head<3>() - body.V) / dt;
    L.torque = J * (sol.tail<3>() - body.w) / dt;
    return L;
}

GapStatus gap_monitor(const BodyState& body, double radius, double kappa) {
    GapStatus st;
    st.gap = std::numeric_limits<double>::infinity();
    for (int d = 0; d < 3; ++d) st.gap = std::min({st.gap, body.X[d] - radius, 1.0 - body.X[d] - radius});
    st.stop = st.gap <= kappa / 2;
    return st;
}

CoupledStep coupled_step(const FluidState& s, const BodyState& body, double radius, double dt,
                         const FluidParams& prm, const CouplingSettings& cs, const SurfaceMesh& mesh,
                         const StepLimits& lim) {
    CoupledStep out;
    const auto body_cell_momentum = [&](const FluidState& f) {
        Loads m;
        const Grid& g = f.grid;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    const Vec3 x = g.center(i, j, k);
                    if (!inside_ball(x, body.X, radius)) continue;
                    const std::size_t id = g.idx(i, j, k);
                    const Vec3 p = f.rho[id] * g.cell_volume() * get(f.u, id);
                    m.force += p;
                    m.torque += (x - body.X).cross(p);
                }
        return m;
    };
    const Loads before = body_cell_momentum(s);
    out.fluid = step_fluid(s, prm, dt, {}, lim);
    out.surface = surface_loads(out.fluid, body, mesh, prm);
    if (cs.mode == LoadMode::Penalization)
        out.applied = penalization_loads(out.fluid, body, radius, cs.dt_over_eta, dt);
    else
        out.applied = out.surface;
    out.body = step_body(body, out.applied.force, out.applied.torque, dt);
    // penalize on the cells the loads were computed for, towards the new rigid velocity
    BodyState target = body;
    target.V = out.body.V;
    target.w = out.body.w;
    out.exchange = enforce_body_velocity(out.fluid, target, radius, cs.dt_over_eta);
    const Loads after = body_cell_momentum(out.fluid);
    out.region.force = out.applied.force + (after.force - before.force) / dt;
    out.region.torque = out.applied.torque + (after.torque - before.torque) / dt;
    return out;
}

}  // namespace fsi
