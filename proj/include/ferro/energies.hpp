#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ferro/domain.hpp"
#include "ferro/yukawa.hpp"

namespace ferro {

struct FrankConstants {
    double k1 = 1.0;
    double k2 = 1.0;
    double k3 = 1.0;
    void validate() const
    {
        if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0)) throw DomainError("Frank constants must be positive");
    }
};

struct EnergyParams {
    double eta = 0.3;
    FrankConstants frank;
    SolverParams solver;
    void validate() const
    {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw SolverConfigError("eta must be positive");
        frank.validate();
        solver.validate();
    }
};

struct EnergyBreakdown {
    double frank = 0.0;
    double gl = 0.0;
    double electro_interaction = 0.0;
    double electro_field = 0.0;
    double term_I = 0.0;
    double term_II = 0.0;
    double term_III = 0.0;
    double splay_limit = 0.0;
    double boundary_norm_sq = 0.0;
    double total = 0.0;
};

struct TermDecomposition {
    double I = 0.0;
    double II = 0.0;
    double III = 0.0;
};

/** Limit-model value: `infinite` marks a non-tangential field; breakdown.total is then +inf. */
struct LimitEnergy {
    EnergyBreakdown breakdown;
    bool infinite = false;
    double tangency_tol = 0.0;
};

namespace detail {

inline double weighted_sum(const DomainBall& dom, const std::vector<double>& v)
{
    return parallel_sum(v.size(), 1 << 14, [&](std::size_t k) { return dom.indicator[k] * v[k]; }) *
           dom.grid.cell_volume();
}

} // namespace detail

/** 1/2 sum chi h^3 |grad P|^2, central-difference gradient per component. */
inline double frank_equal_constants(const VectorField& P, const DomainBall& dom)
{
    check_on_domain(P, dom);
    const Grid3& g = dom.grid;
    std::vector<double> dens(g.size(), 0.0);
    std::vector<double> d(g.size());
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a) {
            std::fill(d.begin(), d.end(), 0.0);
            add_derivative(g, P.comp[c].data(), a, d.data());
            for (std::size_t k = 0; k < g.size(); ++k) dens[k] += d[k] * d[k];
        }
    return 0.5 * detail::weighted_sum(dom, dens);
}

inline double frank_general(const VectorField& P, const DomainBall& dom, const FrankConstants& K)
{
    check_on_domain(P, dom);
    K.validate();
    ScalarField dv = divergence(P);
    VectorField cu = curl(P);
    std::vector<double> dens(dom.grid.size());
    for (std::size_t k = 0; k < dens.size(); ++k) {
        Vec3 p = P.at(k), c = cu.at(k);
        double twist = dot(c, p);
        Vec3 bend = cross(c, p);
        dens[k] = K.k1 * dv.values[k] * dv.values[k] + K.k2 * twist * twist + K.k3 * dot(bend, bend);
    }
    return 0.5 * detail::weighted_sum(dom, dens);
}

inline double gl_penalty(const VectorField& P, const DomainBall& dom, double eta)
{
    check_on_domain(P, dom);
    if (!(eta > 0.0)) throw DomainError("eta must be positive");
    std::vector<double> dens(dom.grid.size());
    const double c = 1.0 / (4.0 * eta * eta);
    for (std::size_t k = 0; k < dens.size(); ++k) {
        Vec3 p = P.at(k);
        double m = dot(p, p) - 1.0;
        dens[k] = c * m * m;
    }
    return detail::weighted_sum(dom, dens);
}

/** (1/2 alpha^2) sum chi h^3 (div P)^2 */
inline double splay_limit_energy(const VectorField& P, const DomainBall& dom, double alpha)
{
    ScalarField dv = divergence(P);
    for (double& v : dv.values) v *= v;
    return detail::weighted_sum(dom, dv.values) / (2.0 * alpha * alpha);
}

/** 1/2 h^3 sum [eps^2 |D+u|^2 + alpha^2 u^2] over the padded grid, D+ on cell faces. */
inline double electrostatic_field_energy(const PotentialSolution& sol)
{
    const Grid3& g = sol.u.grid;
    const double e2 = sol.params.eps * sol.params.eps, a2 = sol.params.alpha * sol.params.alpha;
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        auto du = forward_difference(g, sol.u.values.data(), a);
        s += e2 * parallel_sum(g.size(), 1 << 14, [&](std::size_t k) { return du[k] * du[k]; });
    }
    s += a2 * parallel_sum(g.size(), 1 << 14, [&](std::size_t k) { return sol.u.values[k] * sol.u.values[k]; });
    return 0.5 * g.cell_volume() * s;
}

/**
 * 1/2 sum_faces h^3 chi_f P_f (u_+ - u_-)/h: on each face the indicator and
 * the normal component of P are averaged from the two adjacent cells.
 */
inline double interaction_energy(const VectorField& P, const PotentialSolution& sol, const DomainBall& dom)
{
    check_on_domain(P, dom);
    const Grid3& g = dom.grid;
    const PaddedLayout& L = sol.layout;
    const double* u = sol.u.values.data();
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const std::size_t st = g.stride(a), pst = L.padded.stride(a);
        s += parallel_sum(g.size(), 1 << 14, [&](std::size_t k) {
            auto c = g.unindex(k);
            if (c[a] + 1 >= g.dims[a]) return 0.0;
            double chi = 0.5 * (dom.indicator[k] + dom.indicator[k + st]);
            if (chi == 0.0) return 0.0;
            double pf = 0.5 * (P.comp[a][k] + P.comp[a][k + st]);
            std::size_t pk = L.padded_index_of_domain(k);
            return chi * pf * (u[pk + pst] - u[pk]);
        });
    }
    return 0.5 * g.h * g.h * s;
}

inline TermDecomposition term_decomposition(const VectorField& P, const DomainBall& dom, const SolverParams& p)
{
    check_on_domain(P, dom);
    TermDecomposition t;
    ScalarField dv = divergence(P);
    ScalarField vc = volume_convolve(dv, dom, p);
    PaddedLayout L = make_padded_layout(dom.grid, p);
    std::vector<double> prod(dom.grid.size());
    for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = dv.values[k] * vc.values[L.padded_index_of_domain(k)];
    t.I = detail::weighted_sum(dom, prod);

    int level = pair_level(dom, p);
    SurfaceQuadrature pq = level == dom.surface.level ? dom.surface
                                                      : make_icosphere_quadrature(dom.radius, level, dom.center);
    std::vector<double> tr = normal_trace(P, pq);
    t.II = surface_pair_sum(tr, tr, pq, p);
    double s = 0.0;
    for (std::size_t j = 0; j < pq.size(); ++j)
        s += pq.weights[j] * tr[j] * interpolate(trilinear_stencil(vc.grid, pq.nodes[j]), vc.values.data());
    t.III = -2.0 * s;
    return t;
}

/**
 * Relative tolerance for |I+II+III - 2 interaction|. The grid carries the
 * surface charge as a layer about two cells thick, which costs O(h alpha/eps)
 * plus an O(h/R) part from smearing the sphere. Measured coefficients are
 * about 0.47 and 0.81.
 */
inline double decomposition_tolerance(double h, double R, const SolverParams& p)
{
    return h * (0.6 * p.alpha / p.eps + 1.2 / R);
}

/** 1e-3 (4 pi R^2) max(1, mean over Omega of |P|^2) */
inline double tangency_tolerance(const VectorField& P, const DomainBall& dom)
{
    std::vector<double> m(dom.grid.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        Vec3 p = P.at(k);
        m[k] = dot(p, p);
    }
    double mean = detail::weighted_sum(dom, m) / dom.volume();
    return 1e-3 * dom.surface_area() * std::max(1.0, mean);
}

inline void check_finite(const VectorField& P)
{
    for (const auto& c : P.comp)
        for (double v : c)
            if (!std::isfinite(v)) throw DegenerateInput("field has non-finite entries");
}

inline void check_unit_length(const VectorField& P, const DomainBall& dom, double tol = 1e-6)
{
    for (std::size_t k = 0; k < dom.grid.size(); ++k) {
        if (dom.indicator[k] <= 0.0) continue;
        if (std::abs(norm(P.at(k)) - 1.0) > tol)
            throw ConstraintViolation("constrained mode needs |P| = 1 on Omega");
    }
}

/** E_eps (constrained) or the relaxed E~_eps, with every term of the breakdown. */
inline EnergyBreakdown energy_eps(const VectorField& P, const DomainBall& dom, const EnergyParams& ep,
                                  bool constrained)
{
    check_on_domain(P, dom);
    check_finite(P);
    ep.validate();
    if (constrained) check_unit_length(P, dom);
    EnergyBreakdown b;
    b.frank = frank_equal_constants(P, dom);
    b.gl = constrained ? 0.0 : gl_penalty(P, dom, ep.eta);
    PotentialSolution sol = solve_potential(P, dom, ep.solver);
    b.electro_field = electrostatic_field_energy(sol);
    b.electro_interaction = interaction_energy(P, sol, dom);
    TermDecomposition t = term_decomposition(P, dom, ep.solver);
    b.term_I = t.I;
    b.term_II = t.II;
    b.term_III = t.III;
    b.splay_limit = splay_limit_energy(P, dom, ep.solver.alpha);
    b.boundary_norm_sq = surface_norm_sq(normal_trace(P, dom.surface), dom.surface);
    b.total = b.frank + b.electro_interaction + b.gl;
    return b;
}

/** E_0 / E~_0: Frank + splay (+ GL) for tangential fields, +inf otherwise. */
inline LimitEnergy energy_limit(const VectorField& P, const DomainBall& dom, const EnergyParams& ep,
                                bool constrained)
{
    check_on_domain(P, dom);
    check_finite(P);
    ep.validate();
    if (constrained) check_unit_length(P, dom);
    LimitEnergy r;
    EnergyBreakdown& b = r.breakdown;
    b.boundary_norm_sq = surface_norm_sq(normal_trace(P, dom.surface), dom.surface);
    r.tangency_tol = tangency_tolerance(P, dom);
    b.frank = frank_equal_constants(P, dom);
    b.gl = constrained ? 0.0 : gl_penalty(P, dom, ep.eta);
    b.splay_limit = splay_limit_energy(P, dom, ep.solver.alpha);
    if (b.boundary_norm_sq > r.tangency_tol) {
        r.infinite = true;
        b.total = std::numeric_limits<double>::infinity();
    } else {
        b.total = b.frank + b.splay_limit + b.gl;
    }
    return r;
}

} // namespace ferro
