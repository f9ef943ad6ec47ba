#include "fsi/energy.hpp"

#include "fsi/coupling.hpp"
#include "fsi/grid_ops.hpp"

#include <cmath>

namespace fsi {

double pressure_distance(double rho, double r, const FluidParams& prm) {
    if (!(r > 0)) throw NumericError("pressure distance needs r > 0");
    if (rho < 0) throw NumericError("pressure distance needs rho >= 0");
    // a r^γ/(γ−1) · f(x), f(x) = (1+x)^γ − 1 − γx, x = ρ/r − 1; series near x = 0 avoids cancellation
    const double g = prm.gamma, x = rho / r - 1;
    double f = 0;
    if (std::abs(x) < 0.1) {
        double term = 0.5 * g * (g - 1) * x * x;
        for (int k = 2; k < 60 && term != 0; ++k) {
            f += term;
            if (std::abs(term) < 1e-18 * std::abs(f)) break;
            term *= (g - k) / (k + 1) * x;
        }
    } else {
        f = std::expm1(g * std::log1p(x)) - g * x;
    }
    return prm.a * std::pow(r, g) / (g - 1) * f;
}

double pressure_distance_coefficient(double lo, double hi, const FluidParams& prm) {
    return 0.5 * std::min(eos(lo, prm).d2P, eos(hi, prm).d2P);
}

namespace {

bool fluid_cell(const Grid& g, const BodyState& body, double radius, int i, int j, int k) {
    return !inside_ball(g.center(i, j, k), body.X, radius);
}

double dP(double r, const FluidParams& prm) { return eos(r, prm).dP; }

}  // namespace

RelativeEnergy relative_energy(const FluidState& s, const BodyState& body, double radius, const Comparison& c,
                               const FluidParams& prm) {
    const Grid& g = s.grid;
    const double dV = g.cell_volume();
    RelativeEnergy e;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                if (!fluid_cell(g, body, radius, i, j, k)) continue;
                const std::size_t id = g.idx(i, j, k);
                const Vec3 du = get(s.u, id) - get(c.U, id);
                e.kinetic += 0.5 * s.rho[id] * du.squaredNorm() * dV;
                e.pressure_distance += pressure_distance(s.rho[id], c.r[id], prm) * dV;
                e.max_velocity_gap = std::max(e.max_velocity_gap, du.norm());
                e.max_density_gap = std::max(e.max_density_gap, std::abs(s.rho[id] - c.r[id]));
            }
    const Vec3 dVb = body.V - c.Vs, dw = body.w - c.ws;
    e.body = 0.5 * body.m * dVb.squaredNorm() + 0.5 * dw.dot(body.inertia() * dw);
    return e;
}

RemainderTerms remainder(const RemainderInputs& in, const FluidParams& prm) {
    const FluidState& s = *in.weak;
    const BodyState& body = *in.body;
    const Comparison& c = *in.mid;
    const Grid& g = s.grid;
    const double dV = g.cell_volume();
    RemainderTerms I{};
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                const std::size_t id = g.idx(i, j, k);
                const Vec3 u = get(s.u, id), U = get(c.U, id);
                const Mat3 gU = cell_gradient(g, c.U, i, j, k);
                const Vec3 dtU = (get(in.next->U, id) - get(in.prev->U, id)) / in.span;
                const Vec3 acc = dtU + gU * u;
                if (!fluid_cell(g, body, in.radius, i, j, k)) {
                    I[1] += in.body_density * acc.dot(U - u) * dV;
                    continue;
                }
                const double rho = s.rho[id], r = c.r[id];
                const Mat3 gu = cell_gradient(g, s.u, i, j, k);
                I[0] += rho * acc.dot(U - u) * dV;
                I[2] += stress(gU, prm).S.cwiseProduct(gU - gu).sum() * dV;
                I[3] += gU.trace() * (pressure(r, prm) - pressure(rho, prm)) * dV;
                const double dtdP = (dP(in.next->r[id], prm) - dP(in.prev->r[id], prm)) / in.span;
                I[4] += (r - rho) * dtdP * dV;
                // ∇P'(r) = P''(r)∇r
                const Vec3 gradP = eos(r, prm).d2P * cell_gradient(g, c.r, i, j, k, Parity::Even);
                I[5] += (r * U - rho * u).dot(gradP) * dV;
            }
    if (in.mesh) {
        for (std::size_t f = 0; f < in.mesh->faces.size(); ++f) {
            const Vec3 x = in.mesh->centroid(f, body);
            const Vec3 n = in.mesh->normal(f, body);
            const double pr = pressure(sample(g, c.r, x, Parity::Even), prm);
            const Vec3 du = sample(g, s.u, x) - sample(g, c.U, x);
            I[6] += pr * du.dot(n) * in.mesh->areas[f];
        }
    }
    return I;
}

double relative_dissipation(const FluidState& s, const BodyState& body, double radius, const Vectors& U,
                            const FluidParams& prm) {
    const Grid& g = s.grid;
    double d = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                if (!fluid_cell(g, body, radius, i, j, k)) continue;
                const Mat3 G = cell_gradient(g, s.u, i, j, k) - cell_gradient(g, U, i, j, k);
                d += stress(G, prm).S.cwiseProduct(G).sum();
            }
    return d * g.cell_volume();
}

std::array<double, 3> regime_fractions(const FluidState& s, const BodyState& body, double radius, const Scalars& r) {
    const Grid& g = s.grid;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k)
                if (fluid_cell(g, body, radius, i, j, k)) {
                    lo = std::min(lo, r[g.idx(i, j, k)]);
                    hi = std::max(hi, r[g.idx(i, j, k)]);
                }
    std::array<double, 3> f{};
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                if (!fluid_cell(g, body, radius, i, j, k)) continue;
                const double rho = s.rho[g.idx(i, j, k)];
                if (rho <= lo / 2) f[1] += 1;
                else if (rho >= 2 * hi) f[2] += 1;
                else f[0] += 1;
            }
    for (double& v : f) v /= double(g.size());
    return f;
}

double EnergyReport::remainder_sum() const {
    double s = 0;
    for (double v : remainder_terms) s += v;
    return s;
}

StabilityResult stability_monitor(const std::vector<EnergyReport>& series, double tol_rel) {
    if (series.size() < 3) throw NumericError("stability monitor needs at least three reports");
    StabilityResult out;
    out.series = series;
    const double E0 = series.front().E_rel;
    double cumD = 0, cumR = 0, cumH = 0;
    out.growth_rate = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < series.size(); ++k) {
        EnergyReport& e = out.series[k];
        e.h_fit = e.remainder_sum() / std::max(e.E_rel, 1e-14);
        if (k > 0) {
            const EnergyReport& p = out.series[k - 1];
            const double dt = e.t - p.t;
            cumD += 0.5 * dt * (p.relative_dissipation + e.relative_dissipation);
            cumR += 0.5 * dt * (p.remainder_sum() + e.remainder_sum());
            cumH += 0.5 * dt * (p.h_fit + e.h_fit);
        }
        e.REI_residual = e.E_rel + cumD - E0 - cumR;
        const double tol = tol_rel * e.E_total;
        const double env = E0 * std::exp(cumH) + tol;
        out.envelope.push_back(env);
        if (!(e.E_rel <= env)) out.gronwall_ok = false;
        if (e.E_total > 0) out.max_rei_residual = std::max(out.max_rei_residual, e.REI_residual / e.E_total);
        if (E0 > 0 && e.t > series.front().t && e.E_rel > 0)
            out.growth_rate = std::max(out.growth_rate, std::log(e.E_rel / E0) / (e.t - series.front().t));
    }
    if (!std::isfinite(out.growth_rate)) out.growth_rate = 0;
    return out;
}

}  // namespace fsi
