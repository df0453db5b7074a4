#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ferro/domain.hpp"
#include "ferro/fields.hpp"
#include "ferro/grid.hpp"

using namespace ferro;

namespace {

Grid3 cube(int n, double h = 0.1)
{
    Grid3 g;
    g.h = h;
    g.dims = {n, n, n};
    g.origin = {-0.5 * n * h, -0.5 * n * h, -0.5 * n * h};
    return g;
}

bool interior(const Grid3& g, std::size_t k)
{
    auto c = g.unindex(k);
    for (int a = 0; a < 3; ++a)
        if (c[a] == 0 || c[a] == g.dims[a] - 1) return false;
    return true;
}

} // namespace

TEST(Grid, IndexRoundTrip)
{
    Grid3 g;
    g.dims = {3, 4, 5};
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto c = g.unindex(k);
        EXPECT_EQ(g.index(c[0], c[1], c[2]), k);
    }
    EXPECT_EQ(g.index(1, 2, 3), (1u * 4 + 2) * 5 + 3);
}

TEST(Grid, RejectsTinyDims)
{
    Grid3 g;
    g.dims = {1, 4, 4};
    EXPECT_THROW(g.validate(), InvalidField);
}

TEST(Divergence, IdentityFieldIsThree)
{
    Grid3 g = cube(10);
    auto P = sample_vector(g, [](const Vec3& x) { return x; });
    auto d = divergence(P);
    for (double v : d.values) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(Divergence, RotationIsFree)
{
    Grid3 g = cube(10);
    auto P = sample_vector(g, [](const Vec3& x) { return Vec3{-x[1], x[0], 0.0}; });
    for (double v : divergence(P).values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Divergence, SplayFieldMatchesHandDerivative)
{
    Grid3 g = cube(16);
    auto P = make_named_field("tangential-splay", g, {0, 0, 0}, 1.0);
    auto d = divergence(P);
    // symbolic: div = -2x; checked at 10 random cells
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, g.dims[0] - 1);
    int checked = 0;
    while (checked < 10) {
        std::size_t k = g.index(pick(rng), pick(rng), pick(rng));
        if (!interior(g, k)) continue;
        EXPECT_NEAR(d.values[k], -2.0 * g.center(k)[0], 1e-12);
        ++checked;
    }
    // one-sided faces are second order, so also exact on quadratics
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(d.values[k], -2.0 * g.center(k)[0], 1e-11);
}

TEST(Divergence, MismatchedComponentsThrow)
{
    Grid3 g = cube(5);
    VectorField P(g);
    P.comp[1].pop_back();
    EXPECT_THROW(divergence(P), InvalidField);
}

TEST(Gradient, ConstantLinearQuadratic)
{
    Grid3 g = cube(9);
    auto c = sample_scalar(g, [](const Vec3&) { return 4.2; });
    auto gc = gradient(c);
    for (int a = 0; a < 3; ++a)
        for (double v : gc.comp[a]) EXPECT_NEAR(v, 0.0, 1e-12);

    Vec3 av{0.3, -1.2, 2.0};
    auto lin = gradient(sample_scalar(g, [&](const Vec3& x) { return dot(av, x); }));
    for (int a = 0; a < 3; ++a)
        for (double v : lin.comp[a]) EXPECT_NEAR(v, av[a], 1e-12);

    auto q = gradient(sample_scalar(g, [](const Vec3& x) { return dot(x, x); }));
    for (std::size_t k = 0; k < g.size(); ++k)
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(q.comp[a][k], 2.0 * g.center(k)[a], 1e-12);
}

TEST(Gradient, DivGradOfQuadraticIsLaplacian)
{
    Grid3 g = cube(12);
    auto s = sample_scalar(g, [](const Vec3& x) { return 2.0 * x[0] * x[0] - x[1] * x[2] + 0.5 * x[2] * x[2] + x[0]; });
    auto lap = divergence(gradient(s));
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto c = g.unindex(k);
        bool deep = true;
        for (int a = 0; a < 3; ++a) deep = deep && c[a] >= 2 && c[a] <= g.dims[a] - 3;
        if (deep) EXPECT_NEAR(lap.values[k], 5.0, 1e-10);
    }
}

TEST(Gradient, AdjointIsTranspose)
{
    Grid3 g = cube(7);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> f(g.size()), v(g.size()), Df(g.size(), 0.0), Dtv(g.size(), 0.0);
        for (auto& x : f) x = n(rng);
        for (auto& x : v) x = n(rng);
        add_derivative(g, f.data(), axis, Df.data());
        add_derivative_adjoint(g, v.data(), axis, Dtv.data());
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            a += Df[k] * v[k];
            b += f[k] * Dtv[k];
        }
        EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
    }
}

TEST(Icosphere, CountsAndWeights)
{
    auto q0 = make_icosphere_quadrature(1.0, 0);
    EXPECT_EQ(q0.size(), 20u);
    EXPECT_NEAR(q0.total_weight(), 4.0 * std::numbers::pi, 1e-12);
    auto q3 = make_icosphere_quadrature(2.0, 3);
    EXPECT_EQ(q3.size(), 1280u);
    EXPECT_NEAR(q3.total_weight() / (16.0 * std::numbers::pi), 1.0, 1e-12);
    for (std::size_t j = 0; j < q3.size(); ++j) {
        EXPECT_NEAR(norm(q3.normals[j]), 1.0, 1e-14);
        EXPECT_GT(dot(q3.normals[j], q3.nodes[j]), 0.0);
        EXPECT_GT(q3.weights[j], 0.0);
    }
}

TEST(Icosphere, WeightRatioBound)
{
    // observed ratio ~1.37 at level 2 and ~1.44 for level 5; 1.8 is the regression bound
    for (int level = 2; level <= 5; ++level) {
        auto q = make_icosphere_quadrature(1.0, level);
        double lo = 1e300, hi = 0.0;
        for (double w : q.weights) {
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
        EXPECT_LE(hi / lo, 1.8) << "level " << level;
    }
}

TEST(Icosphere, SecondMomentIsExact)
{
    // the node set is icosahedrally symmetric, so second moments are isotropic
    // and the rescaled weights integrate x1^2 exactly at every level
    const double R = 1.3;
    const double exact = 4.0 * std::numbers::pi * std::pow(R, 4) / 3.0;
    for (int level = 0; level <= 5; ++level) {
        auto q = make_icosphere_quadrature(R, level);
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += q.weights[j] * q.nodes[j][0] * q.nodes[j][0];
        EXPECT_NEAR(s / exact, 1.0, 1e-12) << "level " << level;
    }
}

TEST(Icosphere, RefinementReducesQuadratureError)
{
    // int_{S^2} exp(a.x) dS = 4 pi sinh|a| / |a|
    const Vec3 a{1.0, 0.3, -0.4};
    const double exact = 4.0 * std::numbers::pi * std::sinh(norm(a)) / norm(a);
    double prev = -1.0;
    for (int level = 1; level <= 5; ++level) {
        auto q = make_icosphere_quadrature(1.0, level);
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += q.weights[j] * std::exp(dot(a, q.nodes[j]));
        double err = std::abs(s - exact);
        if (prev > 0.0) EXPECT_LE(err * 3.0, prev) << "level " << level;
        prev = err;
    }
}

TEST(DomainBall, IndicatorVolumeConverges)
{
    // subsampling error is not monotone in N; it is bounded and shrinks overall
    const double ball = 4.0 * std::numbers::pi / 3.0;
    double coarse = std::abs(make_ball_domain(1.0, 16).volume() / ball - 1.0);
    for (int N : {32, 64}) EXPECT_LT(std::abs(make_ball_domain(1.0, N).volume() / ball - 1.0), 1.5e-3);
    auto fine = make_ball_domain(1.0, 128);
    double err = std::abs(fine.volume() / ball - 1.0);
    EXPECT_LT(err, 2e-4);
    EXPECT_LT(err, coarse / 10.0);
    for (double c : fine.indicator) {
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
    }
}

TEST(DomainBall, AutoLevelSpacing)
{
    auto d = make_ball_domain(1.0, 64);
    EXPECT_EQ(d.surface.level, 5);
    double spacing = std::sqrt(d.surface_area() / d.surface.size());
    EXPECT_LE(spacing, d.grid.h);
}

TEST(NormalTrace, AnalyticFields)
{
    auto d = make_ball_domain(1.0, 64);
    auto rot = make_named_field("rigid-rotation", d.grid, d.center, 1.0);
    for (double t : normal_trace(rot, d.surface)) EXPECT_NEAR(t, 0.0, 1e-2);
    auto rad = make_named_field("radial", d.grid, d.center, 1.0);
    for (double t : normal_trace(rad, d.surface)) EXPECT_NEAR(t, 1.0, 1e-12);

    auto ax = make_named_field("axis", d.grid, d.center, 1.0);
    SurfaceQuadrature probe;
    probe.nodes = {{0, 0, 1}, {1, 0, 0}};
    probe.normals = {{0, 0, 1}, {1, 0, 0}};
    probe.weights = {1.0, 1.0};
    auto t = normal_trace(ax, probe);
    EXPECT_NEAR(t[0], 1.0, 1e-12);
    EXPECT_NEAR(t[1], 0.0, 1e-12);
}

TEST(NormalTrace, OutsideGridThrows)
{
    auto d = make_ball_domain(1.0, 16);
    auto P = make_named_field("axis", d.grid, d.center, 1.0);
    SurfaceQuadrature far;
    far.nodes = {{5, 0, 0}};
    far.normals = {{1, 0, 0}};
    far.weights = {1.0};
    EXPECT_THROW(normal_trace(P, far), OutOfRange);
}

TEST(NormalTrace, AdjointIsTranspose)
{
    auto d = make_ball_domain(1.0, 16, 3);
    auto P = make_named_field("random-smooth", d.grid, d.center, 1.0, 11);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> q(d.surface.size());
    for (auto& x : q) x = n(rng);
    auto t = normal_trace(P, d.surface);
    auto A = normal_trace_adjoint(q, d.surface, d.grid);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) lhs += t[j] * q[j];
    for (int a = 0; a < 3; ++a)
        for (std::size_t k = 0; k < d.grid.size(); ++k) rhs += P.comp[a][k] * A.comp[a][k];
    EXPECT_NEAR(lhs, rhs, 1e-11 * std::abs(lhs));
}
