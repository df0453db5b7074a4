#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ferro/errors.hpp"
#include "ferro/parallel.hpp"

namespace ferro {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/** Uniform cell-centred grid. Cell (i,j,l) has centre origin + (i+1/2, j+1/2, l+1/2) h. */
struct Grid3 {
    Vec3 origin{0.0, 0.0, 0.0};
    double h = 1.0;
    std::array<int, 3> dims{2, 2, 2};

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int l) const
    {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + l;
    }
    std::array<int, 3> unindex(std::size_t k) const
    {
        int l = static_cast<int>(k % dims[2]);
        k /= dims[2];
        int j = static_cast<int>(k % dims[1]);
        int i = static_cast<int>(k / dims[1]);
        return {i, j, l};
    }
    /** linear-index step along an axis */
    std::size_t stride(int axis) const
    {
        if (axis == 0) return static_cast<std::size_t>(dims[1]) * dims[2];
        if (axis == 1) return static_cast<std::size_t>(dims[2]);
        return 1;
    }
    Vec3 center(int i, int j, int l) const
    {
        return {origin[0] + (i + 0.5) * h, origin[1] + (j + 0.5) * h, origin[2] + (l + 0.5) * h};
    }
    Vec3 center(std::size_t k) const
    {
        auto c = unindex(k);
        return center(c[0], c[1], c[2]);
    }
    double cell_volume() const { return h * h * h; }

    void validate() const
    {
        if (!(h > 0.0) || !std::isfinite(h)) throw InvalidField("grid spacing must be positive");
        for (int d : dims)
            if (d < 2) throw InvalidField("grid dims must be >= 2 per axis");
    }
};

inline bool same_grid(const Grid3& a, const Grid3& b)
{
    return a.dims == b.dims && a.h == b.h && a.origin == b.origin;
}

struct ScalarField {
    Grid3 grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const Grid3& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
};

struct VectorField {
    Grid3 grid;
    std::array<std::vector<double>, 3> comp;

    VectorField() = default;
    explicit VectorField(const Grid3& g)
        : grid(g), comp{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0),
                        std::vector<double>(g.size(), 0.0)} {}

    Vec3 at(std::size_t k) const { return {comp[0][k], comp[1][k], comp[2][k]}; }
    void set(std::size_t k, const Vec3& v)
    {
        comp[0][k] = v[0];
        comp[1][k] = v[1];
        comp[2][k] = v[2];
    }
};

inline void check_field(const ScalarField& f)
{
    f.grid.validate();
    if (f.values.size() != f.grid.size()) throw InvalidField("scalar field length does not match grid");
}

inline void check_field(const VectorField& P)
{
    P.grid.validate();
    for (const auto& c : P.comp)
        if (c.size() != P.grid.size()) throw InvalidField("vector component length does not match grid");
}

/** Samples a callable x -> Vec3 at cell centres. */
template <class F>
VectorField sample_vector(const Grid3& g, F&& f)
{
    VectorField P(g);
    for (std::size_t k = 0; k < g.size(); ++k) P.set(k, f(g.center(k)));
    return P;
}

template <class F>
ScalarField sample_scalar(const Grid3& g, F&& f)
{
    ScalarField s(g);
    for (std::size_t k = 0; k < g.size(); ++k) s.values[k] = f(g.center(k));
    return s;
}

namespace detail {

// visits every grid line along `axis`; fn(base index, stride, length)
template <class Fn>
void for_lines(const Grid3& g, int axis, Fn&& fn)
{
    int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    std::size_t s = g.stride(axis);
    int n = g.dims[axis];
    std::size_t nlines = static_cast<std::size_t>(g.dims[a1]) * g.dims[a2];
    for_chunks(nlines, 256, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
            std::array<int, 3> c{};
            c[axis] = 0;
            c[a1] = static_cast<int>(q / g.dims[a2]);
            c[a2] = static_cast<int>(q % g.dims[a2]);
            fn(g.index(c[0], c[1], c[2]), s, n);
        }
    });
}

} // namespace detail

/**
 * out += d/dx_axis f. Central differences inside, one-sided second order at
 * the two end cells of each line.
 */
inline void add_derivative(const Grid3& g, const double* f, int axis, double* out, double scale = 1.0)
{
    if (g.dims[axis] < 3) throw InvalidField("derivative stencil needs >= 3 cells per axis");
    const double c = scale / (2.0 * g.h);
    detail::for_lines(g, axis, [&](std::size_t b, std::size_t s, int n) {
        out[b] += c * (-3.0 * f[b] + 4.0 * f[b + s] - f[b + 2 * s]);
        for (int i = 1; i < n - 1; ++i) {
            std::size_t k = b + i * s;
            out[k] += c * (f[k + s] - f[k - s]);
        }
        std::size_t e = b + (n - 1) * s;
        out[e] += c * (3.0 * f[e] - 4.0 * f[e - s] + f[e - 2 * s]);
    });
}

/** out += (d/dx_axis)^T g, the transpose of add_derivative. */
inline void add_derivative_adjoint(const Grid3& g, const double* v, int axis, double* out, double scale = 1.0)
{
    if (g.dims[axis] < 3) throw InvalidField("derivative stencil needs >= 3 cells per axis");
    const double c = scale / (2.0 * g.h);
    detail::for_lines(g, axis, [&](std::size_t b, std::size_t s, int n) {
        // gather form: out[i] = sum_k D[k][i] v[k], so each line is owned by one worker
        auto at = [&](int i) { return v[b + i * s]; };
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            if (i == 0) acc += -3.0 * at(0);
            if (i == 1) acc += 4.0 * at(0);
            if (i == 2) acc += -at(0);
            if (i == n - 1) acc += 3.0 * at(n - 1);
            if (i == n - 2) acc += -4.0 * at(n - 1);
            if (i == n - 3) acc += at(n - 1);
            if (i - 1 >= 1 && i - 1 <= n - 2) acc += at(i - 1);
            if (i + 1 >= 1 && i + 1 <= n - 2) acc -= at(i + 1);
            out[b + i * s] += c * acc;
        }
    });
}

inline ScalarField divergence(const VectorField& P)
{
    check_field(P);
    ScalarField d(P.grid);
    for (int a = 0; a < 3; ++a) add_derivative(P.grid, P.comp[a].data(), a, d.values.data());
    return d;
}

inline VectorField gradient(const ScalarField& s)
{
    check_field(s);
    VectorField G(s.grid);
    for (int a = 0; a < 3; ++a) add_derivative(s.grid, s.values.data(), a, G.comp[a].data());
    return G;
}

inline VectorField curl(const VectorField& P)
{
    check_field(P);
    VectorField C(P.grid);
    for (int a = 0; a < 3; ++a) {
        int b = (a + 1) % 3, c = (a + 2) % 3;
        add_derivative(P.grid, P.comp[c].data(), b, C.comp[a].data(), 1.0);
        add_derivative(P.grid, P.comp[b].data(), c, C.comp[a].data(), -1.0);
    }
    return C;
}

/** Forward difference (f[i+1]-f[i])/h on the faces normal to `axis`, stored at the lower cell; last layer is 0. */
inline std::vector<double> forward_difference(const Grid3& g, const double* f, int axis)
{
    std::vector<double> out(g.size(), 0.0);
    const double inv_h = 1.0 / g.h;
    detail::for_lines(g, axis, [&](std::size_t b, std::size_t s, int n) {
        for (int i = 0; i + 1 < n; ++i) {
            std::size_t k = b + i * s;
            out[k] = (f[k + s] - f[k]) * inv_h;
        }
    });
    return out;
}

/** Eight-point trilinear stencil for a point, from cell-centre values. */
struct Trilinear {
    std::array<std::size_t, 8> idx{};
    std::array<double, 8> w{};
};

inline Trilinear trilinear_stencil(const Grid3& g, const Vec3& x)
{
    Trilinear t;
    std::array<int, 3> i0{};
    std::array<double, 3> f{};
    for (int a = 0; a < 3; ++a) {
        double s = (x[a] - g.origin[a]) / g.h - 0.5;
        double fl = std::floor(s);
        if (!(fl >= 0.0) || fl + 1.0 > g.dims[a] - 1)
            throw OutOfRange("point outside the grid's interpolation range");
        i0[a] = static_cast<int>(fl);
        f[a] = s - fl;
    }
    int m = 0;
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dl = 0; dl < 2; ++dl, ++m) {
                t.idx[m] = g.index(i0[0] + di, i0[1] + dj, i0[2] + dl);
                t.w[m] = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) * (dl ? f[2] : 1.0 - f[2]);
            }
    return t;
}

inline double interpolate(const Trilinear& t, const double* f)
{
    double v = 0.0;
    for (int m = 0; m < 8; ++m) v += t.w[m] * f[t.idx[m]];
    return v;
}

} // namespace ferro
