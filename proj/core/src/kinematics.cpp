#include "fsi/kinematics.hpp"

#include <cmath>

namespace fsi {

Isometry Isometry::inverse() const {
    Mat3 Rt = rotation.transpose();
    return {-(Rt * translation), Rt};
}

Isometry Isometry::compose(const Isometry& other) const {
    return {translation + rotation * other.translation, rotation * other.rotation};
}

Mat3 skew(const Vec3& w) {
    Mat3 S;
    S << 0, -w.z(), w.y(),
         w.z(), 0, -w.x(),
         -w.y(), w.x(), 0;
    return S;
}

Vec3 unskew(const Mat3& Q) {
    return 0.5 * Vec3(Q(2, 1) - Q(1, 2), Q(0, 2) - Q(2, 0), Q(1, 0) - Q(0, 1));
}

double orthogonality_defect(const Mat3& O) { return inf_norm(O.transpose() * O - Mat3::Identity()); }

Mat3 reorthonormalize(const Mat3& O) {
    Eigen::JacobiSVD<Mat3> svd(O, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0) throw NumericError("reorthonormalize: reflection encountered");
    return R;
}

Vec3 rigid_velocity(const BodyState& body, const Vec3& x) { return body.V + body.w.cross(x - body.X); }

Mat3 integrate_rotation(const Mat3& O, const Vec3& w_begin, const Vec3& w_end, double dt) {
    if (!(dt > 0)) throw NumericError("integrate_rotation: dt must be positive");
    if (orthogonality_defect(O) > 1e-8) throw NumericError("integrate_rotation: input is not orthogonal");
    const Vec3 w_mid = 0.5 * (w_begin + w_end);
    Mat3 half = O + 0.5 * dt * skew(w_begin) * O;
    Mat3 next = O + dt * skew(w_mid) * half;
    return reorthonormalize(next);
}

MassProperties mass_properties(const std::function<double(const Vec3&)>& density, const Ball& ball, int n) {
    const double R = ball.radius;
    const double h = 2 * R / n;
    const double dV = h * h * h;
    const Vec3 lo = ball.center - Vec3::Constant(R);
    MassProperties mp;
    Vec3 first = Vec3::Zero();
    std::vector<std::pair<Vec3, double>> pts;
    pts.reserve(std::size_t(n) * n * n / 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec3 x = lo + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
                if ((x - ball.center).squaredNorm() > R * R) continue;
                double rho = density(x);
                if (rho < 0) throw NumericError("mass_properties: negative density");
                pts.emplace_back(x, rho);
                mp.m += rho * dV;
                // moments about the geometric centre keep rounding symmetric
                first += rho * dV * (x - ball.center);
            }
    if (!(mp.m > 0)) throw NumericError("mass_properties: zero mass region");
    mp.X = ball.center + first / mp.m;
    for (const auto& [x, rho] : pts) {
        Vec3 r = x - mp.X;
        mp.J += rho * dV * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
    }
    mp.J = 0.5 * (mp.J + mp.J.transpose()).eval();
    return mp;
}

Mat3 conjugate_inertia(const Mat3& J2, const Mat3& Ot) { return Ot.transpose() * J2 * Ot; }

Vec3 rigid_material_derivative(const BodyState& body, const Vec3& dVdt, const Vec3& dwdt, const Vec3& x) {
    Vec3 r = x - body.X;
    return dVdt + dwdt.cross(r) + body.w.cross(body.w.cross(r));
}

Vec3 angular_acceleration(const BodyState& body, const Mat3& O, const Vec3& w, const Vec3& torque) {
    Mat3 J = O * body.J0 * O.transpose();
    Eigen::LLT<Mat3> llt(J);
    if (llt.info() != Eigen::Success || body.J0.diagonal().minCoeff() <= 0)
        throw NumericError("step_body: inertia is not positive definite");
    return llt.solve((J * w).cross(w) + torque);
}

BodyState step_body(const BodyState& body, const Vec3& force, const Vec3& torque, double dt) {
    if (!(dt > 0)) throw NumericError("step_body: dt must be positive");
    if (!(body.m > 0)) throw NumericError("step_body: mass must be positive");
    BodyState next = body;
    const Vec3 a = force / body.m;

    const Vec3 alpha0 = angular_acceleration(body, body.O, body.w, torque);
    const Vec3 w_half = body.w + 0.5 * dt * alpha0;
    const Mat3 O_half = integrate_rotation(body.O, body.w, w_half, 0.5 * dt);
    const Vec3 alpha1 = angular_acceleration(body, O_half, w_half, torque);

    next.V = body.V + dt * a;
    next.X = body.X + dt * (body.V + 0.5 * dt * a);
    next.w = body.w + dt * alpha1;
    next.O = integrate_rotation(body.O, body.w, next.w, dt);
    return next;
}

double solve_o_delta(const std::vector<Mat3>& W, double dt, const Mat3& start) {
    Mat3 D = start;
    double sup = inf_norm(D);
    for (std::size_t k = 0; k + 1 < W.size(); ++k) {
        Mat3 Wm = 0.5 * (W[k] + W[k + 1]);
        Mat3 half = D + 0.5 * dt * D * W[k];
        D = D + dt * half * Wm;
        sup = std::max(sup, inf_norm(D));
    }
    return sup;
}

}  // namespace fsi
