#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ferro/energies.hpp"

namespace ferro {

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    bool conclusive = true;
};

/** Least squares of log|y| against log x. Values below 1e-12 in magnitude make the fit inconclusive. */
inline RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size()) throw DomainError("rate fit needs matching x and y");
    if (x.size() < 4) throw DomainError("rate fit needs at least 4 points");
    RateFit f;
    for (double v : y)
        if (!(std::abs(v) > 1e-12)) {
            f.conclusive = false;
            return f;
        }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double den = n * sxx - sx * sx;
    if (den == 0.0) throw DomainError("rate fit needs distinct x values");
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double mean = sy / n, ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(std::abs(y[i]));
        double pred = f.intercept + f.slope * lx;
        ss_res += (ly - pred) * (ly - pred);
        ss_tot += (ly - mean) * (ly - mean);
    }
    f.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return f;
}

/** The last n entries of v (all of them when n is 0 or too large). */
inline std::vector<double> tail(const std::vector<double>& v, int n)
{
    if (n <= 0 || static_cast<std::size_t>(n) >= v.size()) return v;
    return std::vector<double>(v.end() - n, v.end());
}

/** eps >= 4 h alpha: the screening length spans at least four cells. */
inline bool is_resolvable(double h, double eps, double alpha)
{
    return eps >= 4.0 * h * alpha * (1.0 - 1e-12);
}

/** Smallest even N with 2R/N <= eps/(4 alpha). */
inline int resolvable_n(double eps, double alpha, double R)
{
    int N = static_cast<int>(std::ceil(8.0 * R * alpha / eps - 1e-9));
    return N + (N % 2);
}

inline std::vector<double> default_eps_sweep()
{
    return {0.4, 0.283, 0.2, 0.141, 0.1, 0.0707, 0.05};
}

/**
 * How a sweep builds its domains: N = 0 picks the resolvable N per eps, never
 * below min_n. Rate fits use the last `fit_tail` resolvable points (0 = all).
 */
struct SweepSpec {
    double R = 1.0;
    std::vector<double> eps = default_eps_sweep();
    int N = 0;
    int min_n = 32;
    int level = -1;
    int fit_tail = 4;
    EnergyParams energy;

    void validate() const
    {
        if (eps.empty()) throw DomainError("sweep needs eps values");
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!(eps[i] > 0.0)) throw DomainError("sweep eps values must be positive");
            if (i && !(eps[i] < eps[i - 1])) throw DomainError("sweep eps values must be strictly decreasing");
        }
        if (!(R > 0.0)) throw DomainError("sweep radius must be positive");
        if (N < 0) throw DomainError("sweep N must be >= 0");
        if (fit_tail < 0 || (fit_tail > 0 && fit_tail < 4)) throw DomainError("fit_tail must be 0 or >= 4");
    }
    int grid_n(double e) const { return N > 0 ? N : std::max(min_n, resolvable_n(e, energy.solver.alpha, R)); }
    SolverParams solver_at(double e) const
    {
        SolverParams p = energy.solver;
        p.eps = e;
        return p;
    }
    EnergyParams energy_at(double e) const
    {
        EnergyParams ep = energy;
        ep.solver.eps = e;
        return ep;
    }
    DomainBall domain_at(double e) const { return make_ball_domain(R, grid_n(e), level); }
};

using FieldFactory = std::function<VectorField(const DomainBall&)>;

struct SweepRecord {
    double eps = 0.0;
    int N = 0;
    bool resolvable = true;
    EnergyBreakdown energy;
};

struct EpsSweep {
    std::vector<double> eps_values;
    std::vector<SweepRecord> records;

    std::vector<const SweepRecord*> resolvable() const
    {
        std::vector<const SweepRecord*> r;
        for (const auto& rec : records)
            if (rec.resolvable) r.push_back(&rec);
        return r;
    }
};

/** Full energy breakdown per eps (sequential: fine grids need most of the memory). */
inline EpsSweep run_sweep(const SweepSpec& spec, const FieldFactory& field, bool constrained = false)
{
    spec.validate();
    EpsSweep s;
    s.eps_values = spec.eps;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        SweepRecord r;
        r.eps = e;
        r.N = spec.grid_n(e);
        r.resolvable = is_resolvable(dom.grid.h, e, spec.energy.solver.alpha);
        r.energy = energy_eps(field(dom), dom, spec.energy_at(e), constrained);
        s.records.push_back(r);
    }
    return s;
}

/** <volume_convolve(f), f> with indicator weights. */
inline double check_positivity_volume(const ScalarField& f, const DomainBall& dom, const SolverParams& p)
{
    ScalarField c = volume_convolve(f, dom, p);
    PaddedLayout L = make_padded_layout(dom.grid, p);
    std::vector<double> prod(f.values.size());
    for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = f.values[k] * c.values[L.padded_index_of_domain(k)];
    return detail::weighted_sum(dom, prod);
}

/** sum_ij G h_i h_j w_i w_j with the disk-integral diagonal. */
inline double check_positivity_surface(const std::vector<double>& h, const SurfaceQuadrature& surf,
                                       const SolverParams& p)
{
    return surface_pair_sum(h, h, surf, p);
}

struct CrossTermReport {
    std::vector<double> eps;
    std::vector<double> values;
    RateFit fit;
    double bound_constant = 0.0;  // max |term| sqrt(eps) / (|f| |h|)
    bool conclusive = true;
    bool passed = false;
};

/** |int_Omega int_dOmega G f h| across the sweep; the fitted exponent must stay >= -0.6. */
inline CrossTermReport check_cross_term_bound(const SweepSpec& spec, const std::function<double(const Vec3&)>& f,
                                              const std::function<double(const Vec3&)>& h)
{
    spec.validate();
    CrossTermReport r;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        if (!is_resolvable(dom.grid.h, e, spec.energy.solver.alpha)) continue;
        SolverParams p = spec.solver_at(e);
        ScalarField fs = sample_scalar(dom.grid, f);
        ScalarField c = volume_convolve(fs, dom, p);
        double s = 0.0, hn = 0.0;
        for (std::size_t j = 0; j < dom.surface.size(); ++j) {
            double hj = h(dom.surface.nodes[j]);
            s += dom.surface.weights[j] * hj * interpolate(trilinear_stencil(c.grid, dom.surface.nodes[j]), c.values.data());
            hn += dom.surface.weights[j] * hj * hj;
        }
        std::vector<double> f2(fs.values.size());
        for (std::size_t k = 0; k < f2.size(); ++k) f2[k] = fs.values[k] * fs.values[k];
        double fn = std::sqrt(detail::weighted_sum(dom, f2));
        r.eps.push_back(e);
        r.values.push_back(s);
        if (fn > 0.0 && hn > 0.0)
            r.bound_constant = std::max(r.bound_constant, std::abs(s) * std::sqrt(e) / (fn * std::sqrt(hn)));
    }
    r.fit = fit_rate(r.eps, r.values);
    r.conclusive = r.fit.conclusive;
    r.passed = r.conclusive && r.fit.slope >= -0.6;
    return r;
}

struct MollifierReport {
    std::vector<double> eps;
    std::vector<double> errors;  // |alpha^2 G*f - f|_{L2}
    std::vector<bool> resolvable;
    double f_norm = 0.0;
    double final_error = -1.0;  // at the smallest resolvable eps, -1 if none
    bool monotone = false;
    bool passed = false;
};

/**
 * |alpha^2 (G_eps * f) - f| in L2 per eps, f on its own grid. `periodic`
 * convolves on f's grid as a torus; otherwise f is zero-padded.
 */
inline MollifierReport check_mollifier_limit(const ScalarField& f, const std::vector<double>& eps, double alpha,
                                             bool periodic = false)
{
    check_field(f);
    MollifierReport r;
    const double vol = f.grid.cell_volume();
    double n2 = 0.0;
    for (double v : f.values) n2 += v * v;
    r.f_norm = std::sqrt(n2 * vol);
    for (double e : eps) {
        SolverParams p;
        p.eps = e;
        p.alpha = alpha;
        double err2 = 0.0;
        if (periodic) {
            ScalarField c = convolve_periodic(f, p);
            for (std::size_t k = 0; k < c.values.size(); ++k) {
                double d = alpha * alpha * c.values[k] - f.values[k];
                err2 += d * d;
            }
        } else {
            PaddedLayout L = make_padded_layout(f.grid, p);
            std::vector<double> src(L.padded.size(), 0.0);
            for (std::size_t k = 0; k < f.values.size(); ++k) src[L.padded_index_of_domain(k)] = f.values[k];
            ScalarField c = convolve_padded(src, L, p);
            for (std::size_t k = 0; k < c.values.size(); ++k) {
                double d = alpha * alpha * c.values[k] - src[k];
                err2 += d * d;
            }
        }
        r.eps.push_back(e);
        r.errors.push_back(std::sqrt(err2 * vol));
        r.resolvable.push_back(is_resolvable(f.grid.h, e, alpha));
    }
    bool mono = true;
    double last = -1.0, prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.eps.size(); ++i) {
        if (!r.resolvable[i]) continue;
        // sweep runs from large to small eps, so errors must fall
        if (r.errors[i] > prev) mono = false;
        prev = r.errors[i];
        last = r.errors[i];
    }
    r.monotone = mono;
    r.final_error = last;
    r.passed = mono && last >= 0.0 && last <= 0.05 * r.f_norm;
    return r;
}

/** II alone: surface double sum of the normal trace on the pair quadrature. */
inline double surface_term_II(const VectorField& P, const DomainBall& dom, const SolverParams& p)
{
    int level = pair_level(dom, p);
    SurfaceQuadrature q = level == dom.surface.level ? dom.surface
                                                     : make_icosphere_quadrature(dom.radius, level, dom.center);
    std::vector<double> t = normal_trace(P, q);
    return surface_pair_sum(t, t, q, p);
}

struct ConcentrationReport {
    std::vector<double> eps;
    std::vector<double> eps_II;
    std::vector<double> limit;  // (1/2 alpha) int (P.nu)^2
    bool tangential = false;
    bool passed = false;
};

/** eps II -> (1/2 alpha) int (P.nu)^2, checked within 10% at the smallest resolvable eps. */
inline ConcentrationReport check_boundary_concentration(const SweepSpec& spec, const FieldFactory& field)
{
    spec.validate();
    ConcentrationReport r;
    const double alpha = spec.energy.solver.alpha;
    double tol_limit = 0.0;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        if (!is_resolvable(dom.grid.h, e, alpha)) continue;
        VectorField P = field(dom);
        double bn = surface_norm_sq(normal_trace(P, dom.surface), dom.surface);
        r.tangential = bn <= tangency_tolerance(P, dom);
        tol_limit = tangency_tolerance(P, dom) / (2.0 * alpha);
        r.eps.push_back(e);
        r.eps_II.push_back(e * surface_term_II(P, dom, spec.solver_at(e)));
        r.limit.push_back(bn / (2.0 * alpha));
    }
    if (r.eps.empty()) return r;
    double v = r.eps_II.back(), L = r.limit.back();
    r.passed = r.tangential ? v <= 1.1 * tol_limit : std::abs(v - L) <= 0.1 * L;
    return r;
}

struct DominanceReport {
    std::vector<double> eps;
    std::vector<double> II;
    std::vector<double> III;
    std::vector<double> boundary_norm_sq;
    RateFit fit_II;
    RateFit fit_III;
    bool ratio_increasing = false;
    bool conclusive = true;
    bool passed = false;
};

/** II ~ eps^-1 outgrows |III| (exponent >= -0.6); the ratio II/|III| must grow as eps falls. */
inline DominanceReport check_II_dominance(const SweepSpec& spec, const FieldFactory& field)
{
    spec.validate();
    DominanceReport r;
    const double alpha = spec.energy.solver.alpha;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        if (!is_resolvable(dom.grid.h, e, alpha)) continue;
        VectorField P = field(dom);
        auto t = term_decomposition(P, dom, spec.solver_at(e));
        r.eps.push_back(e);
        r.II.push_back(t.II);
        r.III.push_back(t.III);
        r.boundary_norm_sq.push_back(surface_norm_sq(normal_trace(P, dom.surface), dom.surface));
    }
    r.fit_II = fit_rate(tail(r.eps, spec.fit_tail), tail(r.II, spec.fit_tail));
    r.fit_III = fit_rate(tail(r.eps, spec.fit_tail), tail(r.III, spec.fit_tail));
    r.conclusive = r.fit_II.conclusive && r.fit_III.conclusive;
    if (!r.conclusive) return r;
    r.ratio_increasing = true;
    std::size_t first = spec.fit_tail > 0 && static_cast<std::size_t>(spec.fit_tail) < r.eps.size()
                            ? r.eps.size() - spec.fit_tail
                            : 0;
    for (std::size_t i = first + 1; i < r.eps.size(); ++i)
        if (!(r.II[i] / std::abs(r.III[i]) > r.II[i - 1] / std::abs(r.III[i - 1]))) r.ratio_increasing = false;
    r.passed = r.fit_II.slope >= -1.15 && r.fit_II.slope <= -0.85 && r.fit_III.slope >= -0.6 && r.ratio_increasing;
    return r;
}

/** sum_{i != j} (h_i - h_j)^2 / |y_i - y_j|^3 w_i w_j */
inline double h_half_seminorm(const std::vector<double>& h, const SurfaceQuadrature& surf)
{
    const std::size_t n = surf.size();
    if (h.size() != n) throw InvalidField("surface samples do not match quadrature nodes");
    return 2.0 * parallel_sum(n, 16, [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = norm(surf.nodes[i] - surf.nodes[j]);
            double dh = h[i] - h[j];
            s += dh * dh / (d * d * d) * surf.weights[j];
        }
        return s * surf.weights[i];
    });
}

struct TangentialLimitReport {
    std::vector<double> eps;
    std::vector<double> interaction;
    std::vector<double> splay;
    std::vector<double> gap;  // |E_eps(P) - E_0(P)|
    bool gap_decreasing = false;
    bool passed = false;
};

/** Recovery check: for tangential P, E_eps(P) -> E_0(P). */
inline TangentialLimitReport check_gamma_limit_tangential(const SweepSpec& spec, const FieldFactory& field)
{
    spec.validate();
    TangentialLimitReport r;
    const double alpha = spec.energy.solver.alpha;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        if (!is_resolvable(dom.grid.h, e, alpha)) continue;
        VectorField P = field(dom);
        double bn = surface_norm_sq(normal_trace(P, dom.surface), dom.surface);
        if (bn > tangency_tolerance(P, dom))
            throw WrongRegime("field is not tangential; use check_blowup_nontangential");
        PotentialSolution sol = solve_potential(P, dom, spec.solver_at(e));
        double ie = interaction_energy(P, sol, dom);
        double sp = splay_limit_energy(P, dom, alpha);
        r.eps.push_back(e);
        r.interaction.push_back(ie);
        r.splay.push_back(sp);
        // Frank and GL parts are identical in both energies
        r.gap.push_back(std::abs(ie - sp));
    }
    if (r.eps.empty()) return r;
    r.gap_decreasing = true;
    for (std::size_t i = 1; i < r.gap.size(); ++i)
        if (!(r.gap[i] < r.gap[i - 1])) r.gap_decreasing = false;
    double sp = r.splay.back();
    bool close = sp > 0.0 ? r.gap.back() <= 0.15 * sp : r.gap.back() <= 1e-8;
    r.passed = r.gap_decreasing && close;
    return r;
}

struct BlowupReport {
    std::vector<double> eps;
    std::vector<double> interaction;
    RateFit fit;
    bool passed = false;
};

/**
 * For P.nu != 0 the interaction grows like 1/eps: fitted exponent over the
 * sweep tail in [-1.15, -0.85]. The tail matters: the O(1) part of the
 * interaction steepens the slope at large eps.
 */
inline BlowupReport check_blowup_nontangential(const SweepSpec& spec, const FieldFactory& field)
{
    spec.validate();
    BlowupReport r;
    const double alpha = spec.energy.solver.alpha;
    for (double e : spec.eps) {
        DomainBall dom = spec.domain_at(e);
        if (!is_resolvable(dom.grid.h, e, alpha)) continue;
        VectorField P = field(dom);
        double bn = surface_norm_sq(normal_trace(P, dom.surface), dom.surface);
        if (bn <= tangency_tolerance(P, dom))
            throw WrongRegime("field is tangential; use check_gamma_limit_tangential");
        PotentialSolution sol = solve_potential(P, dom, spec.solver_at(e));
        r.eps.push_back(e);
        r.interaction.push_back(interaction_energy(P, sol, dom));
    }
    r.fit = fit_rate(tail(r.eps, spec.fit_tail), tail(r.interaction, spec.fit_tail));
    r.passed = r.fit.conclusive && r.fit.slope >= -1.15 && r.fit.slope <= -0.85;
    return r;
}

} // namespace ferro
