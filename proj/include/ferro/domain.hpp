#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "ferro/grid.hpp"

namespace ferro {

struct SurfaceQuadrature {
    std::vector<Vec3> nodes;
    std::vector<double> weights;
    std::vector<Vec3> normals;
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 1.0;
    int level = 0;

    std::size_t size() const { return nodes.size(); }
    double total_weight() const
    {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

/**
 * Icosahedron subdivided `level` times. One node per triangle at the
 * projected centroid; weights are flat areas scaled to sum to 4 pi R^2.
 */
inline SurfaceQuadrature make_icosphere_quadrature(double R, int level, const Vec3& center = {0.0, 0.0, 0.0})
{
    if (level < 0) throw DomainError("icosphere level must be >= 0");
    if (!(R > 0.0)) throw DomainError("sphere radius must be positive");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p = (1.0 / norm(p)) * p;
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (int s = 0; s < level; ++s) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            Vec3 m = 0.5 * (v[a] + v[b]);
            v.push_back((1.0 / norm(m)) * m);
            int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        faces.swap(next);
    }

    SurfaceQuadrature q;
    q.center = center;
    q.radius = R;
    q.level = level;
    q.nodes.reserve(faces.size());
    q.weights.reserve(faces.size());
    q.normals.reserve(faces.size());
    double area = 0.0;
    for (const auto& f : faces) {
        Vec3 a = R * v[f[0]], b = R * v[f[1]], c = R * v[f[2]];
        double w = 0.5 * norm(cross(b - a, c - a));
        Vec3 n = a + b + c;
        n = (1.0 / norm(n)) * n;
        q.normals.push_back(n);
        q.nodes.push_back(center + R * n);
        q.weights.push_back(w);
        area += w;
    }
    const double scale = 4.0 * std::numbers::pi * R * R / area;
    for (double& w : q.weights) w *= scale;
    return q;
}

/** Smallest icosphere level whose mean node spacing is at most `spacing`. */
inline int icosphere_level_for_spacing(double R, double spacing, int min_level = 0, int max_level = 7)
{
    for (int L = min_level; L < max_level; ++L) {
        double nodes = 20.0 * std::pow(4.0, L);
        if (std::sqrt(4.0 * std::numbers::pi * R * R / nodes) <= spacing) return L;
    }
    return max_level;
}

struct DomainBall {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 1.0;
    Grid3 grid;
    std::vector<double> indicator;
    SurfaceQuadrature surface;

    double volume() const
    {
        double s = 0.0;
        for (double c : indicator) s += c;
        return s * grid.cell_volume();
    }
    double surface_area() const { return 4.0 * std::numbers::pi * radius * radius; }
};

/** Occupancy fractions of a ball by 2x2x2 subsampling at offsets +-h/4. */
inline std::vector<double> ball_indicator(const Grid3& g, const Vec3& c, double R)
{
    std::vector<double> chi(g.size(), 0.0);
    const double h = g.h;
    const double half_diag = 0.5 * std::sqrt(3.0) * h;
    for_chunks(g.size(), 4096, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            Vec3 x = g.center(k);
            double r = norm(x - c);
            if (r + half_diag <= R) { chi[k] = 1.0; continue; }
            if (r - half_diag > R) continue;
            int inside = 0;
            for (int s = 0; s < 8; ++s) {
                Vec3 y{x[0] + ((s & 4) ? 0.25 : -0.25) * h, x[1] + ((s & 2) ? 0.25 : -0.25) * h,
                       x[2] + ((s & 1) ? 0.25 : -0.25) * h};
                Vec3 d = y - c;
                if (dot(d, d) <= R * R) ++inside;
            }
            chi[k] = inside / 8.0;
        }
    });
    return chi;
}

/**
 * Ball of radius R resolved by N cells across its diameter, with `margin`
 * empty cells on every side. level < 0 picks the icosphere level whose node
 * spacing does not exceed h.
 */
inline DomainBall make_ball_domain(double R, int N, int level = -1, const Vec3& center = {0.0, 0.0, 0.0},
                                   int margin = 2)
{
    if (!(R > 0.0)) throw DomainError("ball radius must be positive");
    if (N < 2) throw DomainError("N must be >= 2");
    if (margin < 1) throw DomainError("margin must be >= 1");
    DomainBall d;
    d.center = center;
    d.radius = R;
    d.grid.h = 2.0 * R / N;
    int n = N + 2 * margin;
    d.grid.dims = {n, n, n};
    for (int a = 0; a < 3; ++a) d.grid.origin[a] = center[a] - 0.5 * n * d.grid.h;
    d.indicator = ball_indicator(d.grid, center, R);
    if (level < 0) level = icosphere_level_for_spacing(R, d.grid.h, 2);
    d.surface = make_icosphere_quadrature(R, level, center);
    return d;
}

/** P . nu at every surface node, P trilinearly interpolated. */
inline std::vector<double> normal_trace(const VectorField& P, const SurfaceQuadrature& surf)
{
    check_field(P);
    std::vector<double> t(surf.size());
    for_chunks(surf.size(), 1024, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) {
            Trilinear s = trilinear_stencil(P.grid, surf.nodes[j]);
            Vec3 p{interpolate(s, P.comp[0].data()), interpolate(s, P.comp[1].data()),
                   interpolate(s, P.comp[2].data())};
            t[j] = dot(p, surf.normals[j]);
        }
    });
    return t;
}

/** Transpose of trilinear interpolation: scatters node values onto the grid. */
inline void spread_to_grid(const std::vector<double>& values, const SurfaceQuadrature& surf, const Grid3& g,
                           double* out)
{
    for (std::size_t j = 0; j < surf.size(); ++j) {
        Trilinear s = trilinear_stencil(g, surf.nodes[j]);
        for (int m = 0; m < 8; ++m) out[s.idx[m]] += s.w[m] * values[j];
    }
}

/** Transpose of normal_trace. */
inline VectorField normal_trace_adjoint(const std::vector<double>& values, const SurfaceQuadrature& surf,
                                        const Grid3& g)
{
    VectorField out(g);
    for (std::size_t j = 0; j < surf.size(); ++j) {
        Trilinear s = trilinear_stencil(g, surf.nodes[j]);
        for (int a = 0; a < 3; ++a) {
            double q = values[j] * surf.normals[j][a];
            for (int m = 0; m < 8; ++m) out.comp[a][s.idx[m]] += s.w[m] * q;
        }
    }
    return out;
}

/** Weighted surface integral sum_j w_j t_j^2. */
inline double surface_norm_sq(const std::vector<double>& t, const SurfaceQuadrature& surf)
{
    double s = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) s += surf.weights[j] * t[j] * t[j];
    return s;
}

} // namespace ferro
