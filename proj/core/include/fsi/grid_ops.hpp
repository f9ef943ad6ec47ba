#pragma once

#include "fsi/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

namespace fsi {

/// Wall treatment for off-grid reads: +1 mirrors (zero normal gradient),
/// −1 mirrors with a sign flip (value zero on the wall).
enum class Parity { Even = 1, Odd = -1 };

/// Cell value with one layer of mirror ghosts per side (index range −2..n+1).
inline double at(const Grid& g, const Scalars& f, int i, int j, int k, Parity par) {
    double s = 1.0;
    auto fold = [&](int& a) {
        if (a < 0) { a = -a - 1; s *= double(par); }
        else if (a >= g.n) { a = 2 * g.n - a - 1; s *= double(par); }
    };
    fold(i);
    fold(j);
    fold(k);
    return s * f[g.idx(i, j, k)];
}

/// Trilinear interpolation of a cell-centred field at x ∈ Ω using mirror ghosts.
inline double sample(const Grid& g, const Scalars& f, const Vec3& x, Parity par) {
    double s[3];
    int i0[3];
    for (int d = 0; d < 3; ++d) {
        double c = std::clamp(x[d], 0.0, 1.0) / g.h - 0.5;
        i0[d] = int(std::floor(c));
        s[d] = c - i0[d];
    }
    double v = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                double wgt = (a ? s[0] : 1 - s[0]) * (b ? s[1] : 1 - s[1]) * (c ? s[2] : 1 - s[2]);
                if (wgt != 0) v += wgt * at(g, f, i0[0] + a, i0[1] + b, i0[2] + c, par);
            }
    return v;
}

inline Vec3 sample(const Grid& g, const Vectors& f, const Vec3& x, Parity par = Parity::Odd) {
    return {sample(g, f[0], x, par), sample(g, f[1], x, par), sample(g, f[2], x, par)};
}

/// Central first derivative ∂_d f at a cell.
inline double d1(const Grid& g, const Scalars& f, int i, int j, int k, int d, Parity par) {
    int o[3] = {0, 0, 0};
    o[d] = 1;
    return (at(g, f, i + o[0], j + o[1], k + o[2], par) - at(g, f, i - o[0], j - o[1], k - o[2], par)) / (2 * g.h);
}

/// Central second derivative ∂_a∂_b f at a cell.
inline double d2(const Grid& g, const Scalars& f, int i, int j, int k, int a, int b, Parity par) {
    if (a == b) {
        int o[3] = {0, 0, 0};
        o[a] = 1;
        return (at(g, f, i + o[0], j + o[1], k + o[2], par) - 2 * at(g, f, i, j, k, par) +
                at(g, f, i - o[0], j - o[1], k - o[2], par)) / (g.h * g.h);
    }
    int p[3] = {0, 0, 0}, q[3] = {0, 0, 0};
    p[a] = 1;
    q[b] = 1;
    auto v = [&](int sa, int sb) {
        return at(g, f, i + sa * p[0] + sb * q[0], j + sa * p[1] + sb * q[1], k + sa * p[2] + sb * q[2], par);
    };
    return (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * g.h * g.h);
}

/// (∇u)_{ij} = ∂_j u_i
inline Mat3 cell_gradient(const Grid& g, const Vectors& u, int i, int j, int k, Parity par = Parity::Odd) {
    Mat3 G;
    for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) G(c, d) = d1(g, u[c], i, j, k, d, par);
    return G;
}

inline Vec3 cell_gradient(const Grid& g, const Scalars& f, int i, int j, int k, Parity par = Parity::Even) {
    return {d1(g, f, i, j, k, 0, par), d1(g, f, i, j, k, 1, par), d1(g, f, i, j, k, 2, par)};
}

/// Worker count used by data-parallel stencil sweeps. Sweeps only write
/// disjoint cells, so results do not depend on the count.
int num_threads();
void set_num_threads(int n);

/// Runs body(lo, hi) over a partition of [begin, end).
inline void parallel_for(int begin, int end, const std::function<void(int, int)>& body) {
    const int nt = std::max(1, std::min(num_threads(), end - begin));
    if (nt == 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (end - begin + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        int lo = begin + t * chunk, hi = std::min(end, lo + chunk);
        if (lo < hi) pool.emplace_back(body, lo, hi);
    }
    for (auto& th : pool) th.join();
}

}  // namespace fsi
