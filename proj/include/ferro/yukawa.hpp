#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include "ferro/domain.hpp"
#include "ferro/grid.hpp"

namespace ferro {

enum class SurfaceMode {
    direct_sum,  // node-by-cell summation of the kernel
    grid_spread  // nodes scattered onto the grid, then one FFT convolution
};

struct SolverParams {
    double eps = 0.2;
    double alpha = 1.0;
    double pad_factor = 8.0;
    SurfaceMode surface_mode = SurfaceMode::grid_spread;
    // icosphere level for surface-surface double sums; < 0 picks it from eps/alpha
    int pair_level = -1;

    void validate() const
    {
        if (!(eps > 0.0) || !std::isfinite(eps)) throw SolverConfigError("eps must be positive");
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw SolverConfigError("alpha must be positive");
        if (!(pad_factor > 0.0)) throw SolverConfigError("pad_factor must be positive");
    }
    double screening_length() const { return eps / alpha; }
};

/** e^{-alpha r/eps} / (4 pi eps^2 r) */
inline double yukawa_kernel(double r, const SolverParams& p)
{
    if (!(r > 0.0)) throw DomainError("yukawa_kernel needs r > 0");
    return std::exp(-p.alpha * r / p.eps) / (4.0 * std::numbers::pi * p.eps * p.eps * r);
}

namespace detail {

template <class F>
double simpson(F&& f, double a, double b, int n)
{
    if (n % 2) ++n;
    double dx = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * dx) * ((i % 2) ? 4.0 : 2.0);
    return s * dx / 3.0;
}

} // namespace detail

/** 4 pi int_0^inf r^2 G(r) dr by composite Simpson over [0, 60 eps/alpha]. */
inline double kernel_mass_3d(const SolverParams& p)
{
    p.validate();
    const double k = p.alpha / p.eps;
    auto f = [&](double r) { return r * std::exp(-k * r) / (p.eps * p.eps); };
    return detail::simpson(f, 0.0, 60.0 / k, 40000);
}

/** 2 pi int_0^inf r eps G(r) dr. */
inline double kernel_mass_2d(const SolverParams& p)
{
    p.validate();
    const double k = p.alpha / p.eps;
    auto f = [&](double r) { return std::exp(-k * r) / (2.0 * p.eps); };
    return detail::simpson(f, 0.0, 60.0 / k, 40000);
}

/** Mean of G over a ball of volume h^3 centred at the singularity. */
inline double self_cell_average(double h, const SolverParams& p)
{
    const double r0 = std::cbrt(3.0 / (4.0 * std::numbers::pi)) * h;
    const double x = p.alpha * r0 / p.eps;
    return (-std::expm1(-x) - x * std::exp(-x)) / (p.alpha * p.alpha * h * h * h);
}

/** Integral of G over a flat disk of area w centred at the singularity. */
inline double disk_integral(double w, const SolverParams& p)
{
    const double rho = std::sqrt(w / std::numbers::pi);
    return -std::expm1(-p.alpha * rho / p.eps) / (2.0 * p.alpha * p.eps);
}

inline int fft_good_size(int n)
{
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int f : {2, 3, 5, 7})
            while (r % f == 0) r /= f;
        if (r == 1) return m;
    }
}

/** Domain grid, the grid padded by `pad` cells per side, and the FFT box. */
struct PaddedLayout {
    Grid3 domain;
    Grid3 padded;
    int pad = 0;
    std::array<int, 3> fft_dims{};

    std::size_t padded_index_of_domain(std::size_t k) const
    {
        auto c = domain.unindex(k);
        return padded.index(c[0] + pad, c[1] + pad, c[2] + pad);
    }
};

inline PaddedLayout make_padded_layout(const Grid3& domain, const SolverParams& p)
{
    p.validate();
    domain.validate();
    PaddedLayout L;
    L.domain = domain;
    L.pad = std::max(1, static_cast<int>(std::ceil(p.pad_factor * p.eps / (p.alpha * domain.h) - 1e-9)));
    L.padded.h = domain.h;
    for (int a = 0; a < 3; ++a) {
        L.padded.dims[a] = domain.dims[a] + 2 * L.pad;
        L.padded.origin[a] = domain.origin[a] - L.pad * domain.h;
        L.fft_dims[a] = fft_good_size(L.padded.dims[a]);
    }
    return L;
}

namespace detail {

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    double* data = nullptr;
    std::size_t count = 0;
    explicit FftwBuffer(std::size_t n) : count(n)
    {
        data = static_cast<double*>(fftw_malloc(sizeof(double) * n));
        if (!data) throw std::bad_alloc();
        std::memset(data, 0, sizeof(double) * n);
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

// In-place r2c / c2r over an L0 x L1 x L2 box; the last axis is padded to 2(L2/2+1).
struct InPlaceFft {
    std::array<int, 3> L;
    int Lz2;
    FftwBuffer buf;
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;

    explicit InPlaceFft(const std::array<int, 3>& dims)
        : L(dims), Lz2(2 * (dims[2] / 2 + 1)),
          buf(static_cast<std::size_t>(dims[0]) * dims[1] * (2 * (dims[2] / 2 + 1)))
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fwd = fftw_plan_dft_r2c_3d(L[0], L[1], L[2], buf.data, reinterpret_cast<fftw_complex*>(buf.data),
                                   FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(L[0], L[1], L[2], reinterpret_cast<fftw_complex*>(buf.data), buf.data,
                                   FFTW_ESTIMATE);
        if (!fwd || !bwd) throw SolverConfigError("FFTW planning failed");
    }
    ~InPlaceFft()
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
    InPlaceFft(const InPlaceFft&) = delete;
    InPlaceFft& operator=(const InPlaceFft&) = delete;

    double& real_at(int i, int j, int l) { return buf.data[(static_cast<std::size_t>(i) * L[1] + j) * Lz2 + l]; }
    std::size_t spectral_size() const { return static_cast<std::size_t>(L[0]) * L[1] * (L[2] / 2 + 1); }
    std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(buf.data); }
};

} // namespace detail

/**
 * Real DFT symbol of the sampled kernel on a periodic box, minimum-image
 * distances, self cell replaced by its ball average. Scaled by h^3 / |box|
 * so that multiplying and inverting yields h^3 sum_y K(x-y) f(y).
 */
struct KernelSpectrum {
    std::array<int, 3> dims{};
    double h = 0.0;
    std::vector<double> symbol;
};

inline std::shared_ptr<const KernelSpectrum> kernel_spectrum(const std::array<int, 3>& L, double h,
                                                             const SolverParams& p)
{
    using Key = std::tuple<int, int, int, double, double, double>;
    static std::mutex cache_mutex;
    static std::map<Key, std::shared_ptr<const KernelSpectrum>> cache;
    Key key{L[0], L[1], L[2], h, p.eps, p.alpha};
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto ks = std::make_shared<KernelSpectrum>();
    ks->dims = L;
    ks->h = h;
    {
        detail::InPlaceFft fft(L);
        const double self = self_cell_average(h, p);
        const double k = p.alpha / p.eps;
        const double c = 1.0 / (4.0 * std::numbers::pi * p.eps * p.eps);
        for_chunks(static_cast<std::size_t>(L[0]), 1, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t ii = b; ii < e; ++ii) {
                int i = static_cast<int>(ii);
                double dx = std::min(i, L[0] - i) * h;
                for (int j = 0; j < L[1]; ++j) {
                    double dy = std::min(j, L[1] - j) * h;
                    for (int l = 0; l < L[2]; ++l) {
                        double dz = std::min(l, L[2] - l) * h;
                        double r = std::sqrt(dx * dx + dy * dy + dz * dz);
                        fft.real_at(i, j, l) = (r == 0.0) ? self : c * std::exp(-k * r) / r;
                    }
                }
            }
        });
        fftw_execute(fft.fwd);
        const double scale = h * h * h / (static_cast<double>(L[0]) * L[1] * L[2]);
        std::size_t ns = fft.spectral_size();
        ks->symbol.resize(ns);
        auto* z = fft.spectrum();
        for (std::size_t q = 0; q < ns; ++q) ks->symbol[q] = z[q].real() * scale;
    }
    std::shared_ptr<const KernelSpectrum> out = ks;
    std::lock_guard<std::mutex> lock(cache_mutex);
    // keep the cache small: spectra of fine grids are hundreds of MB
    if (cache.size() >= 4) cache.clear();
    cache.emplace(key, out);
    return out;
}

/** h^3 sum_y K(x-y) src(y) for src given on the padded grid (support inside the domain block). */
inline ScalarField convolve_padded(const std::vector<double>& src, const PaddedLayout& layout,
                                   const SolverParams& p)
{
    const Grid3& g = layout.padded;
    auto spec = kernel_spectrum(layout.fft_dims, g.h, p);
    detail::InPlaceFft fft(layout.fft_dims);
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int l = 0; l < g.dims[2]; ++l) fft.real_at(i, j, l) = src[g.index(i, j, l)];
    fftw_execute(fft.fwd);
    auto* z = fft.spectrum();
    const std::size_t ns = fft.spectral_size();
    for (std::size_t q = 0; q < ns; ++q) z[q] *= spec->symbol[q];
    fftw_execute(fft.bwd);
    ScalarField out(g);
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int l = 0; l < g.dims[2]; ++l) out.values[g.index(i, j, l)] = fft.real_at(i, j, l);
    return out;
}

/** Periodic convolution over f's own grid (no padding): h^3 sum_y K_per(x-y) f(y). */
inline ScalarField convolve_periodic(const ScalarField& f, const SolverParams& p)
{
    check_field(f);
    p.validate();
    PaddedLayout L;
    L.domain = f.grid;
    L.padded = f.grid;
    L.pad = 0;
    L.fft_dims = f.grid.dims;
    return convolve_padded(f.values, L, p);
}

/** Max |u| on the outermost layer of its grid. */
inline double shell_max(const ScalarField& u)
{
    const Grid3& g = u.grid;
    double m = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto c = g.unindex(k);
        bool shell = false;
        for (int a = 0; a < 3; ++a) shell = shell || c[a] == 0 || c[a] == g.dims[a] - 1;
        if (shell) m = std::max(m, std::abs(u.values[k]));
    }
    return m;
}

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/** Throws when the padded shell carries more than 1e-3 of the peak (above a roundoff floor). */
inline void check_decay(const ScalarField& u, double floor)
{
    double peak = max_abs(u.values);
    if (peak <= floor) return;
    double shell = shell_max(u);
    if (shell > 1e-3 * peak + floor)
        throw SolverConfigError("padding too small: boundary shell holds " + std::to_string(shell / peak) +
                                " of the peak potential");
}

/** x -> int_Omega G(|x-y|) f(y) chi(y) dy on the padded grid. */
inline ScalarField volume_convolve(const ScalarField& f, const DomainBall& dom, const SolverParams& p)
{
    check_field(f);
    if (!same_grid(f.grid, dom.grid)) throw InvalidField("f must live on the domain grid");
    PaddedLayout L = make_padded_layout(dom.grid, p);
    std::vector<double> src(L.padded.size(), 0.0);
    double smax = 0.0;
    for (std::size_t k = 0; k < dom.grid.size(); ++k) {
        src[L.padded_index_of_domain(k)] = f.values[k] * dom.indicator[k];
        smax = std::max(smax, std::abs(src[L.padded_index_of_domain(k)]));
    }
    ScalarField u = convolve_padded(src, L, p);
    check_decay(u, 1e-12 * smax / (p.alpha * p.alpha));
    return u;
}

/** sum_j G(|x - y_j|) h_j w_j at every cell of `target`. */
inline ScalarField surface_convolve(const std::vector<double>& samples, const SurfaceQuadrature& surf,
                                    const SolverParams& p, const Grid3& target)
{
    p.validate();
    target.validate();
    if (samples.size() != surf.size()) throw InvalidField("surface samples do not match quadrature nodes");
    if (p.surface_mode == SurfaceMode::grid_spread) {
        PaddedLayout L = make_padded_layout(target, p);
        std::vector<double> src(L.padded.size(), 0.0);
        std::vector<double> q(surf.size());
        const double inv_vol = 1.0 / target.cell_volume();
        for (std::size_t j = 0; j < surf.size(); ++j) q[j] = samples[j] * surf.weights[j] * inv_vol;
        spread_to_grid(q, surf, L.padded, src.data());
        ScalarField full = convolve_padded(src, L, p);
        ScalarField out(target);
        for (std::size_t k = 0; k < target.size(); ++k) out.values[k] = full.values[L.padded_index_of_domain(k)];
        return out;
    }
    ScalarField out(target);
    const double half_h = 0.5 * target.h;
    for_chunks(target.size(), 64, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            Vec3 x = target.center(k);
            double s = 0.0;
            for (std::size_t j = 0; j < surf.size(); ++j) {
                double qj = samples[j] * surf.weights[j];
                if (qj == 0.0) continue;
                double r = norm(x - surf.nodes[j]);
                if (r < half_h)
                    s += disk_integral(surf.weights[j], p) * samples[j];
                else
                    s += yukawa_kernel(r, p) * qj;
            }
            out.values[k] = s;
        }
    });
    return out;
}

/** Screened potential on the padded grid; grad_u is derived on demand. */
struct PotentialSolution {
    ScalarField u;
    PaddedLayout layout;
    SolverParams params;

    VectorField grad_u() const { return gradient(u); }
};

/**
 * Charge density on the padded grid whose convolution with h^3 K is u:
 * -chi div P on the domain block plus the trace P.nu spread with weight w/h^3.
 */
inline std::vector<double> charge_density(const ScalarField& divP, const std::vector<double>& trace,
                                          const DomainBall& dom, const PaddedLayout& L)
{
    std::vector<double> src(L.padded.size(), 0.0);
    for (std::size_t k = 0; k < dom.grid.size(); ++k)
        src[L.padded_index_of_domain(k)] = -dom.indicator[k] * divP.values[k];
    std::vector<double> q(trace.size());
    const double inv_vol = 1.0 / dom.grid.cell_volume();
    for (std::size_t j = 0; j < trace.size(); ++j) q[j] = trace[j] * dom.surface.weights[j] * inv_vol;
    spread_to_grid(q, dom.surface, L.padded, src.data());
    return src;
}

inline void check_on_domain(const VectorField& P, const DomainBall& dom)
{
    check_field(P);
    if (!same_grid(P.grid, dom.grid)) throw InvalidField("field must live on the domain grid");
}

inline PotentialSolution solve_potential(const VectorField& P, const DomainBall& dom, const SolverParams& p)
{
    check_on_domain(P, dom);
    p.validate();
    PotentialSolution sol;
    sol.params = p;
    sol.layout = make_padded_layout(dom.grid, p);
    ScalarField divP = divergence(P);
    std::vector<double> trace = normal_trace(P, dom.surface);
    double scale = std::max(max_abs(divP.values), max_abs(trace) / dom.grid.h);
    if (p.surface_mode == SurfaceMode::grid_spread) {
        sol.u = convolve_padded(charge_density(divP, trace, dom, sol.layout), sol.layout, p);
    } else {
        sol.u = volume_convolve(divP, dom, p);
        for (double& v : sol.u.values) v = -v;
        ScalarField s = surface_convolve(trace, dom.surface, p, sol.layout.padded);
        for (std::size_t k = 0; k < s.values.size(); ++k) sol.u.values[k] += s.values[k];
    }
    check_decay(sol.u, 1e-12 * scale / (p.alpha * p.alpha));
    return sol;
}

/**
 * Discrete weak-form residual
 *   sum h^3 [eps^2 D+u D+phi + alpha^2 u phi] + sum h^3 chi divP phi - sum_j w_j (P.nu)_j phi(y_j)
 * with phi on the padded grid.
 */
inline double weak_residual(const PotentialSolution& sol, const VectorField& P, const DomainBall& dom,
                            const ScalarField& phi)
{
    check_on_domain(P, dom);
    check_field(phi);
    const Grid3& g = sol.layout.padded;
    if (!same_grid(phi.grid, g)) throw InvalidTestFunction("test function must live on the padded grid");
    double pk = max_abs(phi.values);
    if (shell_max(phi) > 1e-12 * pk) throw InvalidTestFunction("test function is nonzero on the padded boundary shell");
    const double e2 = sol.params.eps * sol.params.eps, a2 = sol.params.alpha * sol.params.alpha;
    const double vol = g.cell_volume();
    double field = 0.0;
    for (int a = 0; a < 3; ++a) {
        auto du = forward_difference(g, sol.u.values.data(), a);
        auto dp = forward_difference(g, phi.values.data(), a);
        field += parallel_sum(g.size(), 1 << 14, [&](std::size_t k) { return du[k] * dp[k]; }) * e2;
    }
    field += a2 * parallel_sum(g.size(), 1 << 14, [&](std::size_t k) { return sol.u.values[k] * phi.values[k]; });
    ScalarField divP = divergence(P);
    double bulk = 0.0;
    for (std::size_t k = 0; k < dom.grid.size(); ++k)
        bulk += dom.indicator[k] * divP.values[k] * phi.values[sol.layout.padded_index_of_domain(k)];
    std::vector<double> t = normal_trace(P, dom.surface);
    double surf = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j)
        surf += dom.surface.weights[j] * t[j] * interpolate(trilinear_stencil(g, dom.surface.nodes[j]), phi.values.data());
    return vol * (field + bulk) - surf;
}

/** Icosphere level for surface double sums: node spacing at most eps/(2 alpha), at least level 4. */
inline int pair_level(const DomainBall& dom, const SolverParams& p)
{
    if (p.pair_level >= 0) return p.pair_level;
    return icosphere_level_for_spacing(dom.radius, 0.5 * p.eps / p.alpha, 4, 6);
}

/**
 * sum_i sum_j G(|y_i - y_j|) a_i b_j w_i w_j, the diagonal replaced by the
 * disk integral over area w_i.
 */
inline double surface_pair_sum(const std::vector<double>& a, const std::vector<double>& b,
                               const SurfaceQuadrature& surf, const SolverParams& p)
{
    const std::size_t n = surf.size();
    if (a.size() != n || b.size() != n) throw InvalidField("surface samples do not match quadrature nodes");
    const double k = p.alpha / p.eps;
    const double c = 1.0 / (4.0 * std::numbers::pi * p.eps * p.eps);
    std::vector<double> wa(n), wb(n);
    for (std::size_t i = 0; i < n; ++i) {
        wa[i] = a[i] * surf.weights[i];
        wb[i] = b[i] * surf.weights[i];
    }
    return parallel_sum(n, 16, [&](std::size_t i) {
        double s = disk_integral(surf.weights[i], p) * a[i] * wb[i];
        const Vec3 yi = surf.nodes[i];
        double off = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = yi[0] - surf.nodes[j][0], dy = yi[1] - surf.nodes[j][1], dz = yi[2] - surf.nodes[j][2];
            double r = std::sqrt(dx * dx + dy * dy + dz * dz);
            off += c * std::exp(-k * r) / r * (wa[i] * wb[j] + wa[j] * wb[i]);
        }
        return s + off;
    });
}

} // namespace ferro
