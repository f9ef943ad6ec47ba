#include "fsi/manufactured.hpp"

#include <cmath>

namespace fsi {

namespace {

struct Factor {
    double f, df, d2f;
};

Factor factor(bool cosine, double k, double phase, double x) {
    const double a = k * x + phase;
    const double s = std::sin(a), c = std::cos(a);
    if (cosine) return {c, -k * s, -k * k * c};
    return {s, k * c, -k * k * s};
}

}  // namespace

double TrigField::value(double t, const Vec3& x) const {
    double v = offset;
    for (const TrigTerm& q : terms) {
        double p = q.amp * std::cos(q.omega * t + q.theta);
        for (int d = 0; d < 3; ++d) p *= factor(q.cosine[d], q.k[d], q.phase[d], x[d]).f;
        v += p;
    }
    return v;
}

double TrigField::dt(double t, const Vec3& x) const {
    double v = 0;
    for (const TrigTerm& q : terms) {
        double p = -q.amp * q.omega * std::sin(q.omega * t + q.theta);
        for (int d = 0; d < 3; ++d) p *= factor(q.cosine[d], q.k[d], q.phase[d], x[d]).f;
        v += p;
    }
    return v;
}

Vec3 TrigField::grad(double t, const Vec3& x) const {
    Vec3 g = Vec3::Zero();
    for (const TrigTerm& q : terms) {
        const double a = q.amp * std::cos(q.omega * t + q.theta);
        Factor F[3];
        for (int d = 0; d < 3; ++d) F[d] = factor(q.cosine[d], q.k[d], q.phase[d], x[d]);
        g[0] += a * F[0].df * F[1].f * F[2].f;
        g[1] += a * F[0].f * F[1].df * F[2].f;
        g[2] += a * F[0].f * F[1].f * F[2].df;
    }
    return g;
}

Mat3 TrigField::hess(double t, const Vec3& x) const {
    Mat3 H = Mat3::Zero();
    for (const TrigTerm& q : terms) {
        const double a = q.amp * std::cos(q.omega * t + q.theta);
        Factor F[3];
        for (int d = 0; d < 3; ++d) F[d] = factor(q.cosine[d], q.k[d], q.phase[d], x[d]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double p = a;
                for (int d = 0; d < 3; ++d) {
                    const int order = (d == i) + (d == j);
                    p *= order == 0 ? F[d].f : order == 1 ? F[d].df : F[d].d2f;
                }
                H(i, j) += p;
            }
    }
    return H;
}

Vec3 TrigVector::value(double t, const Vec3& x) const { return {c[0].value(t, x), c[1].value(t, x), c[2].value(t, x)}; }
Vec3 TrigVector::dt(double t, const Vec3& x) const { return {c[0].dt(t, x), c[1].dt(t, x), c[2].dt(t, x)}; }

Mat3 TrigVector::grad(double t, const Vec3& x) const {
    Mat3 G;
    for (int i = 0; i < 3; ++i) G.row(i) = c[i].grad(t, x).transpose();
    return G;
}

Tensor3 TrigVector::hess(double t, const Vec3& x) const { return {c[0].hess(t, x), c[1].hess(t, x), c[2].hess(t, x)}; }

void analytic_residuals(const TrigField& rho, const TrigVector& u, const FluidParams& prm, double t, const Vec3& x,
                        double& Rc, Vec3& Rm) {
    const double r = rho.value(t, x);
    const Vec3 gr = rho.grad(t, x);
    const Vec3 v = u.value(t, x);
    const Mat3 G = u.grad(t, x);
    const Tensor3 Hs = u.hess(t, x);
    Rc = rho.dt(t, x) + v.dot(gr) + r * G.trace();
    Vec3 lap, gdiv;
    for (int i = 0; i < 3; ++i) {
        lap[i] = Hs[i].trace();
        gdiv[i] = Hs[0](i, 0) + Hs[1](i, 1) + Hs[2](i, 2);
    }
    const double dp = prm.gamma * prm.a * std::pow(r, prm.gamma - 1);
    Rm = v * Rc + r * (u.dt(t, x) + G * v) + dp * gr - prm.mu * lap - (prm.mu + prm.lambda) * gdiv;
}

Forcing manufactured_forcing(const TrigField& rho, const TrigVector& u, const FluidParams& prm) {
    return [rho, u, prm](double t, const Vec3& x, double& fr, Vec3& fm) { analytic_residuals(rho, u, prm, t, x, fr, fm); };
}

Vec3 ShearMap::value(double t, const Vec3& x) const {
    const double tp = 2 * M_PI;
    return {x[0], x[1] + a * t * std::sin(tp * x[0]),
            x[2] + b * t * std::sin(tp * x[0]) * std::cos(tp * x[1])};
}

Vec3 ShearMap::inverse(double t, const Vec3& y) const {
    const double tp = 2 * M_PI;
    const double x0 = y[0];
    const double x1 = y[1] - a * t * std::sin(tp * x0);
    const double x2 = y[2] - b * t * std::sin(tp * x0) * std::cos(tp * x1);
    return {x0, x1, x2};
}

Mat3 ShearMap::jacobian(double t, const Vec3& x) const {
    const double tp = 2 * M_PI;
    Mat3 A = Mat3::Identity();
    A(1, 0) = a * t * tp * std::cos(tp * x[0]);
    A(2, 0) = b * t * tp * std::cos(tp * x[0]) * std::cos(tp * x[1]);
    A(2, 1) = -b * t * tp * std::sin(tp * x[0]) * std::sin(tp * x[1]);
    return A;
}

Vec3 ShearMap::dt(double, const Vec3& x) const {
    const double tp = 2 * M_PI;
    return {0, a * std::sin(tp * x[0]), b * std::sin(tp * x[0]) * std::cos(tp * x[1])};
}

TrigField mms_density(double amplitude, double omega) {
    TrigField f;
    f.offset = 1;
    f.terms.push_back({amplitude, omega, 0, {true, true, true}, Vec3::Constant(M_PI), Vec3::Zero()});
    return f;
}

TrigVector mms_velocity(double amplitude, double omega) {
    TrigVector v;
    const Vec3 k = Vec3::Constant(M_PI);
    // component-wise distinct weights and mode pairs keep the field genuinely 3D
    v.c[0].terms.push_back({amplitude, omega, 0.0, {false, false, false}, k, Vec3::Zero()});
    v.c[1].terms.push_back({-0.5 * amplitude, omega, 0.3, {false, false, false}, k, Vec3::Zero()});
    v.c[2].terms.push_back({0.75 * amplitude, omega, 0.7, {false, false, false}, k, Vec3::Zero()});
    v.c[0].terms.push_back({0.3 * amplitude, omega, 0.1, {false, false, false}, Vec3(2 * M_PI, M_PI, M_PI), Vec3::Zero()});
    return v;
}

TrigField transform_test_density() {
    TrigField f;
    f.offset = 1;
    f.terms.push_back({0.2, 1.0, 0.0, {false, true, false}, Vec3(2.0, 3.0, 1.5), Vec3(0.3, 0.1, 0.7)});
    return f;
}

TrigVector transform_test_velocity() {
    TrigVector v;
    v.c[0].terms.push_back({0.5, 1.0, 0.0, {true, false, true}, Vec3(1.0, 2.5, 2.0), Vec3(0.2, 0.4, 0.1)});
    v.c[1].terms.push_back({0.4, 0.5, 0.3, {false, true, false}, Vec3(3.0, 1.0, 2.0), Vec3(0.5, 0.0, 0.3)});
    v.c[2].terms.push_back({0.3, 2.0, 0.2, {true, true, false}, Vec3(2.0, 2.0, 3.0), Vec3(0.1, 0.6, 0.2)});
    return v;
}

}  // namespace fsi
