#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ferro/energies.hpp"
#include "ferro/gamma_lab.hpp"

namespace ferro {

enum class DescentMode { relaxed, constrained };
enum class TangencyEnforcement { none, project_band };

struct OptimParams {
    double step = 1e-3;
    int max_iters = 200;
    double grad_tol = 1e-6;
    DescentMode mode = DescentMode::relaxed;
    bool limit_model = false;
    TangencyEnforcement tangency = TangencyEnforcement::none;
    // > 0 descends along (1 - l^2 Lap)^{-1} grad instead of grad
    double smoothing_length = 0.0;

    void validate() const
    {
        if (!(step > 0.0) || !std::isfinite(step)) throw SolverConfigError("step must be positive");
        if (!(smoothing_length >= 0.0)) throw SolverConfigError("smoothing_length must be >= 0");
        if (max_iters < 0) throw SolverConfigError("max_iters must be >= 0");
        if (!(grad_tol > 0.0)) throw SolverConfigError("grad_tol must be positive");
    }
};

/** One entry per accepted iterate, the starting point included. */
struct DescentTrace {
    std::vector<double> energy;
    std::vector<double> grad_norm;
    std::vector<double> boundary_norm_sq;
    std::vector<double> step;
    bool converged = false;
    bool stalled = false;
};

struct DescentDiverged : Error {
    DescentTrace trace;
    DescentDiverged(const std::string& what, DescentTrace t) : Error(what), trace(std::move(t)) {}
};

namespace detail {

inline void add_scaled(VectorField& a, const VectorField& b, double s)
{
    for (int c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < a.comp[c].size(); ++k) a.comp[c][k] += s * b.comp[c][k];
}

/** h^3 sum_a d_a^T (chi d_a P_c) per component c. */
inline VectorField frank_gradient(const VectorField& P, const DomainBall& dom)
{
    const Grid3& g = dom.grid;
    const double vol = g.cell_volume();
    VectorField out(g);
    std::vector<double> d(g.size());
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a) {
            std::fill(d.begin(), d.end(), 0.0);
            add_derivative(g, P.comp[c].data(), a, d.data());
            for (std::size_t k = 0; k < d.size(); ++k) d[k] *= dom.indicator[k];
            add_derivative_adjoint(g, d.data(), a, out.comp[c].data(), vol);
        }
    return out;
}

inline void add_gl_gradient(VectorField& out, const VectorField& P, const DomainBall& dom, double eta)
{
    const double c = dom.grid.cell_volume() / (eta * eta);
    for (std::size_t k = 0; k < dom.grid.size(); ++k) {
        if (dom.indicator[k] == 0.0) continue;
        Vec3 p = P.at(k);
        double m = c * dom.indicator[k] * (dot(p, p) - 1.0);
        for (int a = 0; a < 3; ++a) out.comp[a][k] += m * p[a];
    }
}

/** (h^3 / alpha^2) d_a^T (chi div P) for component a. */
inline void add_splay_gradient(VectorField& out, const VectorField& P, const DomainBall& dom, double alpha)
{
    ScalarField dv = divergence(P);
    for (std::size_t k = 0; k < dv.values.size(); ++k) dv.values[k] *= dom.indicator[k];
    const double s = dom.grid.cell_volume() / (alpha * alpha);
    for (int a = 0; a < 3; ++a) add_derivative_adjoint(dom.grid, dv.values.data(), a, out.comp[a].data(), s);
}

/**
 * The interaction is 1/2 h^3 <W P, C B P> with B P the padded charge density,
 * C the symmetric convolution and W P the padded field whose pairing with u
 * gives the face sum. Its gradient is 1/2 h^3 (W^T u + B^T C W P).
 */
inline void add_interaction_gradient(VectorField& out, const VectorField& P, const DomainBall& dom,
                                     const SolverParams& p)
{
    if (p.surface_mode != SurfaceMode::grid_spread)
        throw SolverConfigError("interaction gradient needs surface_mode = grid_spread");
    const Grid3& g = dom.grid;
    const double h = g.h, vol = g.cell_volume();
    PotentialSolution sol = solve_potential(P, dom, p);
    const PaddedLayout& L = sol.layout;
    const double* u = sol.u.values.data();

    std::vector<double> wp(L.padded.size(), 0.0);
    for (int a = 0; a < 3; ++a) {
        const std::size_t st = g.stride(a), pst = L.padded.stride(a);
        for (std::size_t k = 0; k < g.size(); ++k) {
            auto c = g.unindex(k);
            if (c[a] + 1 >= g.dims[a]) continue;
            double chi = 0.5 * (dom.indicator[k] + dom.indicator[k + st]);
            if (chi == 0.0) continue;
            std::size_t pk = L.padded_index_of_domain(k);
            // W^T u
            double gu = 0.5 * vol * chi * (u[pk + pst] - u[pk]) / h;
            out.comp[a][k] += 0.5 * gu;
            out.comp[a][k + st] += 0.5 * gu;
            // W P
            double f = chi * 0.5 * (P.comp[a][k] + P.comp[a][k + st]) / h;
            wp[pk + pst] += f;
            wp[pk] -= f;
        }
    }
    ScalarField v = convolve_padded(wp, L, p);

    // B^T v = -div^T (chi v) + N^T (w / h^3 * interpolated v)
    std::vector<double> cv(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) cv[k] = dom.indicator[k] * v.values[L.padded_index_of_domain(k)];
    for (int a = 0; a < 3; ++a) add_derivative_adjoint(g, cv.data(), a, out.comp[a].data(), -0.5 * vol);
    std::vector<double> nv(dom.surface.size());
    for (std::size_t j = 0; j < nv.size(); ++j)
        nv[j] = 0.5 * dom.surface.weights[j] *
                interpolate(trilinear_stencil(L.padded, dom.surface.nodes[j]), v.values.data());
    add_scaled(out, normal_trace_adjoint(nv, dom.surface, g), 1.0);
}

/** (1 - l^2 Lap)^{-1} per component, 7-point Laplacian, periodic on the grid box. */
inline VectorField sobolev_smooth(const VectorField& g, double l)
{
    const Grid3& G = g.grid;
    const std::array<int, 3> L = G.dims;
    InPlaceFft fft(L);
    const double c = l * l * 4.0 / (G.h * G.h);
    std::array<std::vector<double>, 3> s;
    for (int a = 0; a < 3; ++a) {
        s[a].resize(L[a]);
        for (int q = 0; q < L[a]; ++q) {
            double t = std::sin(std::numbers::pi * q / L[a]);
            s[a][q] = c * t * t;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(G.size());
    const int nz = L[2] / 2 + 1;
    VectorField out(G);
    for (int comp = 0; comp < 3; ++comp) {
        for (int i = 0; i < L[0]; ++i)
            for (int j = 0; j < L[1]; ++j)
                for (int k = 0; k < L[2]; ++k) fft.real_at(i, j, k) = g.comp[comp][G.index(i, j, k)];
        fftw_execute(fft.fwd);
        auto* z = fft.spectrum();
        for (int i = 0; i < L[0]; ++i)
            for (int j = 0; j < L[1]; ++j)
                for (int k = 0; k < nz; ++k)
                    z[(static_cast<std::size_t>(i) * L[1] + j) * nz + k] *= inv_n / (1.0 + s[0][i] + s[1][j] + s[2][k]);
        fftw_execute(fft.bwd);
        for (int i = 0; i < L[0]; ++i)
            for (int j = 0; j < L[1]; ++j)
                for (int k = 0; k < L[2]; ++k) out.comp[comp][G.index(i, j, k)] = fft.real_at(i, j, k);
    }
    return out;
}

inline void project_tangential(VectorField& G, const VectorField& P, const DomainBall& dom)
{
    for (std::size_t k = 0; k < dom.grid.size(); ++k) {
        if (dom.indicator[k] == 0.0) continue;
        Vec3 p = P.at(k), gk = G.at(k);
        double pp = dot(p, p);
        if (pp == 0.0) continue;
        G.set(k, gk - (dot(gk, p) / pp) * p);
    }
}

} // namespace detail

/** Gradient of the relaxed discrete energy Frank + interaction + GL with respect to the cell values of P. */
inline VectorField grad_energy_eps(const VectorField& P, const DomainBall& dom, const EnergyParams& ep)
{
    check_on_domain(P, dom);
    ep.validate();
    VectorField g = detail::frank_gradient(P, dom);
    detail::add_gl_gradient(g, P, dom, ep.eta);
    detail::add_interaction_gradient(g, P, dom, ep.solver);
    return g;
}

/** Gradient of Frank + splay + GL, the finite branch of the limit energy. */
inline VectorField grad_energy_limit(const VectorField& P, const DomainBall& dom, const EnergyParams& ep)
{
    check_on_domain(P, dom);
    ep.validate();
    VectorField g = detail::frank_gradient(P, dom);
    detail::add_gl_gradient(g, P, dom, ep.eta);
    detail::add_splay_gradient(g, P, dom, ep.solver.alpha);
    return g;
}

/** Relaxed Frank + interaction + GL without the diagnostic terms of energy_eps. */
inline double relaxed_energy_eps(const VectorField& P, const DomainBall& dom, const EnergyParams& ep)
{
    PotentialSolution sol = solve_potential(P, dom, ep.solver);
    return frank_equal_constants(P, dom) + gl_penalty(P, dom, ep.eta) + interaction_energy(P, sol, dom);
}

/** Frank + splay + GL; tangency is not checked. */
inline double relaxed_energy_limit(const VectorField& P, const DomainBall& dom, const EnergyParams& ep)
{
    return frank_equal_constants(P, dom) + gl_penalty(P, dom, ep.eta) + splay_limit_energy(P, dom, ep.solver.alpha);
}

/** Removes P.nu at cells whose centre lies within one cell of the sphere. */
inline void project_band(VectorField& P, const DomainBall& dom)
{
    const Grid3& g = dom.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        Vec3 r = g.center(k) - dom.center;
        double d = norm(r);
        if (d == 0.0 || std::abs(d - dom.radius) > g.h) continue;
        Vec3 nu = (1.0 / d) * r;
        Vec3 p = P.at(k);
        P.set(k, p - dot(p, nu) * nu);
    }
}

/** P / |P| on cells meeting the domain. */
inline void renormalize(VectorField& P, const DomainBall& dom)
{
    for (std::size_t k = 0; k < dom.grid.size(); ++k) {
        if (dom.indicator[k] == 0.0) continue;
        Vec3 p = P.at(k);
        double n = norm(p);
        if (n > 0.0) P.set(k, (1.0 / n) * p);
    }
}

struct DescentResult {
    VectorField P;
    DescentTrace trace;
};

/**
 * Backtracking gradient descent along -grad / h^3. The step halves until the
 * energy drops and doubles after every accepted step.
 */
inline DescentResult descend(const VectorField& P0, const DomainBall& dom, const EnergyParams& ep,
                             const OptimParams& op)
{
    check_on_domain(P0, dom);
    check_finite(P0);
    ep.validate();
    op.validate();
    const bool constrained = op.mode == DescentMode::constrained;
    if (constrained) check_unit_length(P0, dom);

    auto energy = [&](const VectorField& P) {
        if (op.limit_model) {
            double e = frank_equal_constants(P, dom) + splay_limit_energy(P, dom, ep.solver.alpha);
            return constrained ? e : e + gl_penalty(P, dom, ep.eta);
        }
        PotentialSolution sol = solve_potential(P, dom, ep.solver);
        double e = frank_equal_constants(P, dom) + interaction_energy(P, sol, dom);
        return constrained ? e : e + gl_penalty(P, dom, ep.eta);
    };
    auto gradient_of = [&](const VectorField& P) {
        VectorField g = detail::frank_gradient(P, dom);
        if (!constrained) detail::add_gl_gradient(g, P, dom, ep.eta);
        if (op.limit_model)
            detail::add_splay_gradient(g, P, dom, ep.solver.alpha);
        else
            detail::add_interaction_gradient(g, P, dom, ep.solver);
        if (op.tangency == TangencyEnforcement::project_band) project_band(g, dom);
        if (constrained) detail::project_tangential(g, P, dom);
        return g;
    };
    auto constrain = [&](VectorField& P) {
        if (op.tangency == TangencyEnforcement::project_band) project_band(P, dom);
        if (constrained) renormalize(P, dom);
    };
    auto bnorm = [&](const VectorField& P) { return surface_norm_sq(normal_trace(P, dom.surface), dom.surface); };

    const double vol = dom.grid.cell_volume();
    DescentResult res{P0, {}};
    VectorField& P = res.P;
    DescentTrace& tr = res.trace;
    constrain(P);
    double E = energy(P);
    double step = op.step;
    for (int it = 0;; ++it) {
        if (!std::isfinite(E)) throw DescentDiverged("energy is not finite", tr);
        VectorField g = gradient_of(P);
        double gn = 0.0;
        for (const auto& c : g.comp)
            for (double v : c) gn += v * v;
        gn = std::sqrt(gn / vol);
        tr.energy.push_back(E);
        tr.grad_norm.push_back(gn);
        tr.boundary_norm_sq.push_back(bnorm(P));
        tr.step.push_back(step);
        if (gn <= op.grad_tol) {
            tr.converged = true;
            break;
        }
        if (it >= op.max_iters) break;
        // projecting on both sides keeps the smoothed direction a descent direction
        VectorField dir = g;
        if (op.smoothing_length > 0.0) {
            dir = detail::sobolev_smooth(g, op.smoothing_length);
            if (op.tangency == TangencyEnforcement::project_band) project_band(dir, dom);
            if (constrained) detail::project_tangential(dir, P, dom);
        }

        bool accepted = false;
        while (step > 1e-12 * op.step) {
            VectorField Q = P;
            detail::add_scaled(Q, dir, -step / vol);
            constrain(Q);
            double EQ = energy(Q);
            if (!std::isfinite(EQ)) {
                step *= 0.5;
                continue;
            }
            if (EQ < E) {
                P = std::move(Q);
                E = EQ;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            tr.stalled = true;
            break;
        }
    }
    return res;
}

struct MinimizerPoint {
    double eps = 0.0;
    int N = 0;
    bool resolvable = true;
    double energy_eps = 0.0;    // E~_eps(P*_eps)
    double energy_limit = 0.0;  // E~_0(P*_0) on the same grid
    double gap = 0.0;
    double l2_distance = 0.0;   // |P*_eps - P*_0| on Omega
    double boundary_norm_sq = 0.0;
    double grad_norm = 0.0;
    double limit_boundary_norm_sq = 0.0;
};

struct MinimizerReport {
    std::vector<MinimizerPoint> points;
    bool gap_decreasing = false;
    bool boundary_decreasing = false;
    bool passed = false;
    std::string aborted;  // message of a diverged descent, empty otherwise
};

/**
 * For each sweep eps: minimizes E~_eps and E~_0 (band-projected) from the
 * same start on the eps grid. Monotonicity is asserted over the last
 * `spec.fit_tail` resolvable points.
 */
inline MinimizerReport minimizer_convergence_experiment(const FieldFactory& start, const SweepSpec& spec,
                                                        const OptimParams& optim)
{
    spec.validate();
    optim.validate();
    MinimizerReport r;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        EnergyParams ep = spec.energy_at(e);
        MinimizerPoint pt;
        pt.eps = e;
        pt.N = spec.grid_n(e);
        pt.resolvable = is_resolvable(dom.grid.h, e, ep.solver.alpha);
        VectorField P0 = start(dom);
        try {
            OptimParams oe = optim;
            oe.limit_model = false;
            oe.tangency = TangencyEnforcement::none;
            auto se = descend(P0, dom, ep, oe);
            OptimParams o0 = optim;
            o0.limit_model = true;
            o0.tangency = TangencyEnforcement::project_band;
            auto s0 = descend(P0, dom, ep, o0);
            pt.energy_eps = se.trace.energy.back();
            pt.energy_limit = s0.trace.energy.back();
            pt.gap = pt.energy_eps - pt.energy_limit;
            pt.boundary_norm_sq = se.trace.boundary_norm_sq.back();
            pt.limit_boundary_norm_sq = s0.trace.boundary_norm_sq.back();
            pt.grad_norm = se.trace.grad_norm.back();
            std::vector<double> d2(dom.grid.size());
            for (std::size_t k = 0; k < d2.size(); ++k) {
                Vec3 d = se.P.at(k) - s0.P.at(k);
                d2[k] = dot(d, d);
            }
            pt.l2_distance = std::sqrt(detail::weighted_sum(dom, d2));
        } catch (const DescentDiverged& ex) {
            r.aborted = std::string("eps ") + std::to_string(e) + ": " + ex.what();
            return r;
        }
        r.points.push_back(pt);
    }
    std::vector<const MinimizerPoint*> used;
    for (const auto& p : r.points)
        if (p.resolvable) used.push_back(&p);
    if (spec.fit_tail > 0 && used.size() > static_cast<std::size_t>(spec.fit_tail))
        used.erase(used.begin(), used.end() - spec.fit_tail);
    if (used.size() < 2) return r;
    r.gap_decreasing = r.boundary_decreasing = true;
    for (std::size_t i = 1; i < used.size(); ++i) {
        if (!(std::abs(used[i]->gap) < std::abs(used[i - 1]->gap))) r.gap_decreasing = false;
        if (!(used[i]->boundary_norm_sq < used[i - 1]->boundary_norm_sq)) r.boundary_decreasing = false;
    }
    r.passed = r.gap_decreasing && r.boundary_decreasing;
    return r;
}

} // namespace ferro
