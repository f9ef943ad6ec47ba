#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rank-3 array indexed [i][a][b]; used for Γⁱ_{ab} and second derivatives.
using Tensor3 = std::array<Mat3, 3>;

/// Uniform cell-centred grid of n³ cells over the unit cube.
struct Grid {
    int n = 32;
    double h = 1.0 / 32;

    Grid() = default;
    explicit Grid(int cells) : n(cells), h(1.0 / cells) {}

    std::size_t size() const { return std::size_t(n) * n * n; }
    std::size_t idx(int i, int j, int k) const { return (std::size_t(i) * n + j) * n + k; }
    Vec3 center(int i, int j, int k) const { return {(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h}; }
    double cell_volume() const { return h * h * h; }
};

using Scalars = std::vector<double>;
using Vectors = std::array<std::vector<double>, 3>;

inline Vectors make_vectors(std::size_t n, double v = 0.0) {
    return {Scalars(n, v), Scalars(n, v), Scalars(n, v)};
}

inline Vec3 get(const Vectors& f, std::size_t c) { return {f[0][c], f[1][c], f[2][c]}; }
inline void put(Vectors& f, std::size_t c, const Vec3& v) {
    f[0][c] = v.x();
    f[1][c] = v.y();
    f[2][c] = v.z();
}

/// Failure classes surfaced by the CLI as distinct exit codes.
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct CflError : std::runtime_error {
    double admissible_dt;
    CflError(const std::string& m, double dt) : std::runtime_error(m), admissible_dt(dt) {}
};
struct NumericError : std::runtime_error { using std::runtime_error::runtime_error; };
struct TransformError : std::runtime_error { using std::runtime_error::runtime_error; };

}  // namespace fsi
