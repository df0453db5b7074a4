#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ferro/fields.hpp"
#include "ferro/minimize.hpp"

using namespace ferro;

namespace {

const DomainBall& ball20()
{
    static DomainBall d = make_ball_domain(1.0, 20);
    return d;
}

EnergyParams eparams(double eps)
{
    EnergyParams ep;
    ep.solver.eps = eps;
    return ep;
}

double inner(const VectorField& a, const VectorField& b)
{
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < a.comp[c].size(); ++k) s += a.comp[c][k] * b.comp[c][k];
    return s;
}

VectorField random_field(const DomainBall& d, std::uint64_t seed)
{
    return make_named_field("random-smooth", d.grid, d.center, d.radius, seed);
}

// central difference of `energy` along Q against <grad, Q>
template <class Energy>
double directional_error(const VectorField& P, const VectorField& Q, const VectorField& grad, Energy&& energy)
{
    const double t = 1e-5 * std::sqrt(inner(P, P) / inner(Q, Q));
    VectorField Pp = P, Pm = P;
    detail::add_scaled(Pp, Q, t);
    detail::add_scaled(Pm, Q, -t);
    double fd = (energy(Pp) - energy(Pm)) / (2.0 * t);
    double an = inner(grad, Q);
    return std::abs(an - fd) / std::abs(an);
}

// cyclic axis permutation (x,y,z) -> (z,x,y) of the field values and components
VectorField permuted(const VectorField& P)
{
    const Grid3& g = P.grid;
    VectorField out(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto c = g.unindex(k);
        std::size_t m = g.index(c[2], c[0], c[1]);
        Vec3 p = P.at(k);
        out.set(m, Vec3{p[2], p[0], p[1]});
    }
    return out;
}

} // namespace

TEST(Gradient, RelaxedEnergyMatchesFiniteDifference)
{
    const auto& d = ball20();
    auto ep = eparams(0.3);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        // seed 1 starts from P = x, so the surface-trace adjoint carries a large share
        VectorField P = seed == 1 ? make_named_field("radial", d.grid, d.center, 1.0) : random_field(d, seed);
        VectorField Q = random_field(d, 100 + seed);
        auto g = grad_energy_eps(P, d, ep);
        double err = directional_error(P, Q, g, [&](const VectorField& X) { return relaxed_energy_eps(X, d, ep); });
        EXPECT_LE(err, 1e-4) << "seed " << seed;
    }
}

TEST(Gradient, LimitEnergyMatchesFiniteDifference)
{
    const auto& d = ball20();
    auto ep = eparams(0.3);
    ep.solver.alpha = 0.7;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        VectorField P = random_field(d, seed), Q = random_field(d, 200 + seed);
        auto g = grad_energy_limit(P, d, ep);
        double err = directional_error(P, Q, g, [&](const VectorField& X) { return relaxed_energy_limit(X, d, ep); });
        EXPECT_LE(err, 1e-4) << "seed " << seed;
    }
}

TEST(Gradient, ZeroFieldIsCritical)
{
    const auto& d = ball20();
    VectorField Z(d.grid);
    for (const auto& g : {grad_energy_eps(Z, d, eparams(0.3)), grad_energy_limit(Z, d, eparams(0.3))})
        EXPECT_EQ(inner(g, g), 0.0);
}

TEST(Gradient, InteractionPartIsLinear)
{
    const auto& d = ball20();
    auto p = eparams(0.3).solver;
    auto P = random_field(d, 4);
    VectorField P2 = P;
    for (auto& c : P2.comp)
        for (double& v : c) v *= -2.5;
    VectorField a(d.grid), b(d.grid);
    detail::add_interaction_gradient(a, P, d, p);
    detail::add_interaction_gradient(b, P2, d, p);
    detail::add_scaled(b, a, 2.5);
    EXPECT_LE(std::sqrt(inner(b, b)), 1e-12 * 2.5 * std::sqrt(inner(a, a)));
}

TEST(Gradient, DirectSumRejected)
{
    const auto& d = ball20();
    auto ep = eparams(0.3);
    ep.solver.surface_mode = SurfaceMode::direct_sum;
    EXPECT_THROW(grad_energy_eps(random_field(d, 1), d, ep), SolverConfigError);
}

TEST(Descent, CriticalStartReturnsImmediately)
{
    const auto& d = ball20();
    OptimParams op;
    op.limit_model = true;
    op.mode = DescentMode::relaxed;
    auto ep = eparams(0.3);
    ep.eta = 1.0;
    // |P| = 1 everywhere with zero gradients is critical for the bulk terms
    auto P = sample_vector(d.grid, [](const Vec3&) { return Vec3{0.0, 0.0, 1.0}; });
    auto r = descend(P, d, ep, op);
    EXPECT_TRUE(r.trace.converged);
    EXPECT_EQ(r.trace.energy.size(), 1u);
    EXPECT_EQ(r.trace.energy[0], 0.0);
}

TEST(Descent, RadialLosesNormalCharge)
{
    const auto& d = ball20();
    OptimParams op;
    op.max_iters = 15;
    op.step = 0.05;
    op.smoothing_length = 0.2;
    auto r = descend(make_named_field("radial", d.grid, d.center, 1.0), d, eparams(0.2), op);
    const auto& t = r.trace;
    ASSERT_GE(t.energy.size(), 2u);
    EXPECT_LT(t.boundary_norm_sq.back(), t.boundary_norm_sq.front());
    for (std::size_t i = 1; i < t.energy.size(); ++i) EXPECT_LE(t.energy[i], t.energy[i - 1]);
}

TEST(Descent, PlainGradientIsMonotone)
{
    const auto& d = ball20();
    OptimParams op;
    op.max_iters = 10;
    op.step = 1e-2;
    auto r = descend(random_field(d, 3), d, eparams(0.3), op);
    for (std::size_t i = 1; i < r.trace.energy.size(); ++i) EXPECT_LE(r.trace.energy[i], r.trace.energy[i - 1]);
}

TEST(Descent, ConstrainedKeepsUnitLength)
{
    const auto& d = ball20();
    auto P = random_field(d, 6);
    renormalize(P, d);
    OptimParams op;
    op.mode = DescentMode::constrained;
    op.max_iters = 8;
    op.step = 0.05;
    op.smoothing_length = 0.2;
    auto r = descend(P, d, eparams(0.3), op);
    EXPECT_GE(r.trace.energy.size(), 2u);
    for (std::size_t k = 0; k < d.grid.size(); ++k)
        if (d.indicator[k] > 0.0) EXPECT_NEAR(norm(r.P.at(k)), 1.0, 1e-12);

    auto Q = sample_vector(d.grid, [](const Vec3&) { return Vec3{0.0, 0.5, 0.0}; });
    EXPECT_THROW(descend(Q, d, eparams(0.3), op), ConstraintViolation);
}

TEST(Descent, BandProjectionMakesFieldTangential)
{
    const auto& d = ball20();
    OptimParams op;
    op.limit_model = true;
    op.tangency = TangencyEnforcement::project_band;
    op.max_iters = 20;
    op.step = 0.05;
    op.smoothing_length = 0.2;
    auto r = descend(make_named_field("axis", d.grid, d.center, 1.0), d, eparams(0.3), op);
    EXPECT_LT(r.trace.boundary_norm_sq.front(), 1e-2 * 4.0 * std::numbers::pi / 3.0);
    for (std::size_t i = 1; i < r.trace.energy.size(); ++i) EXPECT_LE(r.trace.energy[i], r.trace.energy[i - 1]);
}

TEST(Descent, NonFiniteEnergyDiverges)
{
    const auto& d = ball20();
    auto P = sample_vector(d.grid, [](const Vec3&) { return Vec3{1e200, 0.0, 0.0}; });
    OptimParams op;
    op.limit_model = true;
    try {
        descend(P, d, eparams(0.3), op);
        FAIL() << "expected DescentDiverged";
    } catch (const DescentDiverged& e) {
        EXPECT_TRUE(e.trace.energy.empty());
    }
}

TEST(Descent, PermutationEquivariant)
{
    const auto& d = ball20();
    auto P = random_field(d, 8);
    OptimParams op;
    op.max_iters = 5;
    op.step = 0.05;
    op.smoothing_length = 0.2;
    auto ep = eparams(0.3);
    auto a = descend(P, d, ep, op);
    auto b = descend(permuted(P), d, ep, op);
    ASSERT_EQ(a.trace.energy.size(), b.trace.energy.size());
    for (std::size_t i = 0; i < a.trace.energy.size(); ++i)
        EXPECT_NEAR(a.trace.energy[i], b.trace.energy[i], 1e-10 * std::abs(a.trace.energy[i]));
    VectorField pa = permuted(a.P);
    detail::add_scaled(pa, b.P, -1.0);
    EXPECT_LE(std::sqrt(inner(pa, pa)), 1e-9 * std::sqrt(inner(b.P, b.P)));
}

TEST(Experiment, BoundaryChargeShrinks)
{
    SweepSpec s;
    s.eps = {0.4, 0.283, 0.2, 0.141};
    OptimParams op;
    op.max_iters = 6;
    op.step = 0.05;
    op.smoothing_length = 0.2;
    auto r = minimizer_convergence_experiment(
        [](const DomainBall& d) { return make_named_field("axis", d.grid, d.center, d.radius); }, s, op);
    ASSERT_TRUE(r.aborted.empty());
    ASSERT_EQ(r.points.size(), 4u);
    EXPECT_TRUE(r.boundary_decreasing);
    for (const auto& p : r.points) {
        EXPECT_GE(p.l2_distance, 0.0);
        EXPECT_LT(p.limit_boundary_norm_sq, 1e-2 * p.boundary_norm_sq);
    }
}
