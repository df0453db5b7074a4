#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ferro/fields.hpp"
#include "ferro/gamma_lab.hpp"
#include "ferro/io.hpp"
#include "ferro/minimize.hpp"

namespace ferro {

inline const std::vector<std::string>& verify_checks()
{
    static const std::vector<std::string> names = {"boundary-concentration", "blowup",     "gamma-limit",
                                                   "dominance",              "cross-term", "positivity",
                                                   "minimizer-convergence"};
    return names;
}

namespace cli_detail {

struct Overrides {
    std::string config;
    std::optional<std::string> field;
    std::vector<double> eps;
    std::optional<int> N;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> alpha;
    std::optional<double> eta;
};

inline RunConfig resolve(const Overrides& o)
{
    RunConfig c;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ConfigError("cannot open config " + o.config);
        // validated once below, after the command-line overrides
        c = parse_config(in, c, false);
    }
    if (o.field) c.field = *o.field;
    if (!o.eps.empty()) c.eps = o.eps;
    if (o.N) c.N = *o.N;
    if (o.seed) {
        c.seed = *o.seed;
        c.seed_set = true;
    }
    if (o.out) c.output = *o.out;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.eta) c.eta = *o.eta;
    if (!is_named_field(c.field)) throw ConfigError("unknown field '" + c.field + "'");
    c.validate();
    return c;
}

inline FieldFactory factory(const RunConfig& c)
{
    return [c](const DomainBall& d) { return make_named_field(c.field, d.grid, d.center, d.radius, c.seed); };
}

inline std::string out_path(const RunConfig& c, const std::string& name)
{
    std::filesystem::create_directories(c.output);
    return (std::filesystem::path(c.output) / name).string();
}

inline void save_table(const RunConfig& c, const std::string& name, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows, std::ostream& out)
{
    std::string path = out_path(c, name);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    write_table(f, header, rows);
    write_table(out, header, rows);
}

inline void print_fit(std::ostream& out, const char* what, const RateFit& f)
{
    out << what << " slope " << format_g17(f.slope) << " r2 " << format_g17(f.r_squared)
        << (f.conclusive ? "" : " (inconclusive)") << '\n';
}

inline int verdict(std::ostream& out, const std::string& name, bool passed)
{
    out << name << ": " << (passed ? "PASS" : "FAIL") << '\n';
    return passed ? 0 : 1;
}

inline int run_verify(const std::string& check, const RunConfig& c, std::ostream& out)
{
    SweepSpec s = c.sweep();
    auto field = factory(c);
    if (check == "boundary-concentration") {
        auto r = check_boundary_concentration(s, field);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < r.eps.size(); ++i) rows.push_back({r.eps[i], r.eps_II[i], r.limit[i]});
        save_table(c, "boundary-concentration.csv", {"eps", "eps_II", "limit"}, rows, out);
        return verdict(out, check, r.passed);
    }
    if (check == "blowup") {
        auto r = check_blowup_nontangential(s, field);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < r.eps.size(); ++i) rows.push_back({r.eps[i], r.interaction[i]});
        save_table(c, "blowup.csv", {"eps", "electro_interaction"}, rows, out);
        print_fit(out, "electro_interaction", r.fit);
        return verdict(out, check, r.passed);
    }
    if (check == "gamma-limit") {
        auto r = check_gamma_limit_tangential(s, field);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < r.eps.size(); ++i) rows.push_back({r.eps[i], r.interaction[i], r.splay[i], r.gap[i]});
        save_table(c, "gamma-limit.csv", {"eps", "electro_interaction", "splay_limit", "gap"}, rows, out);
        return verdict(out, check, r.passed);
    }
    if (check == "dominance") {
        auto r = check_II_dominance(s, field);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < r.eps.size(); ++i)
            rows.push_back({r.eps[i], r.II[i], r.III[i], r.boundary_norm_sq[i]});
        save_table(c, "dominance.csv", {"eps", "term_II", "term_III", "boundary_norm_sq"}, rows, out);
        if (!r.conclusive) {
            out << "inconclusive\n";
            return 1;
        }
        print_fit(out, "term_II", r.fit_II);
        print_fit(out, "term_III", r.fit_III);
        return verdict(out, check, r.passed);
    }
    if (check == "cross-term") {
        auto r = check_cross_term_bound(s, [](const Vec3&) { return 3.0; }, [](const Vec3&) { return 1.0; });
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < r.eps.size(); ++i) rows.push_back({r.eps[i], r.values[i]});
        save_table(c, "cross-term.csv", {"eps", "cross_term"}, rows, out);
        print_fit(out, "cross_term", r.fit);
        out << "bound_constant " << format_g17(r.bound_constant) << '\n';
        return verdict(out, check, r.passed);
    }
    if (check == "positivity") {
        DomainBall d = make_ball_domain(c.R, c.N > 0 ? c.N : 20, c.level > 0 ? c.level : 3);
        std::vector<std::vector<double>> rows;
        bool ok = true;
        for (double e : c.eps) {
            SolverParams p = s.solver_at(e);
            for (std::uint64_t seed = 1; seed <= 20; ++seed) {
                std::mt19937_64 rng(c.seed * 1000003u + seed);
                std::normal_distribution<double> n(0.0, 1.0);
                ScalarField f(d.grid);
                for (double& v : f.values) v = n(rng);
                std::vector<double> h(d.surface.size());
                for (double& v : h) v = n(rng);
                std::vector<double> f2(f.values.size());
                for (std::size_t k = 0; k < f2.size(); ++k) f2[k] = f.values[k] * f.values[k];
                double fn = detail::weighted_sum(d, f2), hn = surface_norm_sq(h, d.surface);
                double vf = check_positivity_volume(f, d, p), sf = check_positivity_surface(h, d.surface, p);
                ok = ok && vf >= -1e-8 * fn && sf >= -1e-8 * hn;
                rows.push_back({e, static_cast<double>(seed), vf / fn, sf / hn});
            }
        }
        save_table(c, "positivity.csv", {"eps", "seed", "volume_ratio", "surface_ratio"}, rows, out);
        return verdict(out, check, ok);
    }
    if (check == "minimizer-convergence") {
        auto r = minimizer_convergence_experiment(field, s, c.optim);
        std::vector<std::vector<double>> rows;
        for (const auto& p : r.points)
            rows.push_back({p.eps, static_cast<double>(p.N), p.energy_eps, p.energy_limit, p.gap, p.l2_distance,
                            p.boundary_norm_sq, p.grad_norm});
        save_table(c, "minimizer-convergence.csv",
                   {"eps", "N", "energy_eps", "energy_limit", "gap", "l2_distance", "boundary_norm_sq", "grad_norm"},
                   rows, out);
        if (!r.aborted.empty()) out << "aborted: " << r.aborted << '\n';
        return verdict(out, check, r.passed);
    }
    throw ConfigError("unknown check '" + check + "'");
}

inline double directional_check(const VectorField& P, const VectorField& Q, const VectorField& g,
                                const std::function<double(const VectorField&)>& energy)
{
    double pp = 0.0, qq = 0.0, gq = 0.0;
    for (int a = 0; a < 3; ++a)
        for (std::size_t k = 0; k < P.comp[a].size(); ++k) {
            pp += P.comp[a][k] * P.comp[a][k];
            qq += Q.comp[a][k] * Q.comp[a][k];
            gq += g.comp[a][k] * Q.comp[a][k];
        }
    const double t = 1e-5 * std::sqrt(pp / qq);
    VectorField Pp = P, Pm = P;
    detail::add_scaled(Pp, Q, t);
    detail::add_scaled(Pm, Q, -t);
    return std::abs(gq - (energy(Pp) - energy(Pm)) / (2.0 * t)) / std::abs(gq);
}

inline int run_selftest(std::ostream& out)
{
    bool ok = true;
    auto line = [&](const std::string& what, bool pass, const std::string& detail) {
        out << (pass ? "ok   " : "FAIL ") << what << ' ' << detail << '\n';
        ok = ok && pass;
    };
    SolverParams p;
    p.alpha = 1.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "kernel_mass_3d(alpha=1) = %.10f", kernel_mass_3d(p));
    out << buf << '\n';
    for (double a : {0.5, 1.0, 2.0}) {
        p.alpha = a;
        double m3 = kernel_mass_3d(p) * a * a, m2 = kernel_mass_2d(p) * 2.0 * a;
        std::snprintf(buf, sizeof buf, "alpha=%g rel3=%.2e rel2=%.2e", a, std::abs(m3 - 1.0), std::abs(m2 - 1.0));
        line("kernel masses", std::abs(m3 - 1.0) <= 1e-6 && std::abs(m2 - 1.0) <= 1e-6, buf);
    }

    DomainBall d = make_ball_domain(1.0, 20, 3);
    p = SolverParams{};
    p.eps = 0.3;
    {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> n(0.0, 1.0);
        ScalarField f(d.grid);
        for (double& v : f.values) v = n(rng);
        std::vector<double> h(d.surface.size());
        for (double& v : h) v = n(rng);
        double vf = check_positivity_volume(f, d, p), sf = check_positivity_surface(h, d.surface, p);
        std::snprintf(buf, sizeof buf, "volume=%.4g surface=%.4g", vf, sf);
        line("positivity", vf >= 0.0 && sf >= 0.0, buf);
    }
    {
        DomainBall d32 = make_ball_domain(1.0, 32);
        auto P = make_named_field("axis", d32.grid, d32.center, 1.0);
        SolverParams q;
        q.eps = 0.3;
        auto sol = solve_potential(P, d32, q);
        double fe = electrostatic_field_energy(sol), ie = interaction_energy(P, sol, d32);
        std::snprintf(buf, sizeof buf, "field=%.6g interaction=%.6g", fe, ie);
        line("integration by parts", std::abs(fe - ie) <= 0.05 * fe, buf);
    }
    {
        EnergyParams ep;
        ep.solver.eps = 0.3;
        auto P = make_named_field("random-smooth", d.grid, d.center, 1.0, 1);
        auto Q = make_named_field("random-smooth", d.grid, d.center, 1.0, 2);
        double e1 = directional_check(P, Q, grad_energy_eps(P, d, ep),
                                      [&](const VectorField& X) { return relaxed_energy_eps(X, d, ep); });
        double e0 = directional_check(P, Q, grad_energy_limit(P, d, ep),
                                      [&](const VectorField& X) { return relaxed_energy_limit(X, d, ep); });
        std::snprintf(buf, sizeof buf, "eps=%.2e limit=%.2e", e1, e0);
        line("gradients", e1 <= 1e-4 && e0 <= 1e-4, buf);
    }
    return ok ? 0 : 1;
}

} // namespace cli_detail

/** Entry point of the ferro_gamma tool: 0 success, 1 failed check, 2 usage or config error. */
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Screened-electrostatics energies and Gamma-limit checks for polar nematics"};
    app.require_subcommand(1);
    cli_detail::Overrides o;
    auto common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "key = value config file");
        s->add_option("--field", o.field, "named field");
        s->add_option("--eps", o.eps, "eps values (decreasing)")->delimiter(',');
        s->add_option("--N", o.N, "grid cells across the ball diameter (0 = per-eps)");
        s->add_option("--seed", o.seed, "seed for random fields");
        s->add_option("--out", o.out, "output directory");
        s->add_option("--alpha", o.alpha, "screening parameter");
        s->add_option("--eta", o.eta, "Ginzburg-Landau width");
    };
    auto* energy = app.add_subcommand("energy", "all energy terms for a field, one row per eps");
    bool constrained = false;
    energy->add_flag("--constrained", constrained, "unit-length model (no GL term)");
    auto* solve = app.add_subcommand("solve", "potential u_eps for a field, written as a field file");
    auto* verify = app.add_subcommand("verify", "run a named check");
    std::string check;
    verify->add_option("check", check, "check name")->required();
    auto* minimize = app.add_subcommand("minimize", "descent from a named field");
    bool limit = false;
    std::optional<int> iters;
    std::optional<double> step, smoothing;
    minimize->add_flag("--limit", limit, "minimize the limit energy with band projection");
    minimize->add_option("--iters", iters, "iteration cap");
    minimize->add_option("--step", step, "initial step");
    minimize->add_option("--smoothing", smoothing, "Sobolev smoothing length (0 = plain gradient)");
    auto* sweep = app.add_subcommand("sweep", "energy breakdown over the eps sweep, written as CSV");
    auto* selftest = app.add_subcommand("selftest", "kernel masses, positivity, IBP identity, gradient checks");
    for (auto* s : {energy, solve, verify, minimize, sweep}) common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (selftest->parsed()) return cli_detail::run_selftest(out);
        RunConfig c = cli_detail::resolve(o);
        if (iters) c.optim.max_iters = *iters;
        if (step) c.optim.step = *step;
        if (smoothing) c.optim.smoothing_length = *smoothing;
        c.validate();
        auto field = cli_detail::factory(c);
        if (energy->parsed() || sweep->parsed()) {
            SweepSpec s = c.sweep();
            EpsSweep sw = run_sweep(s, field, constrained);
            std::string path = cli_detail::out_path(c, sweep->parsed() ? "sweep.csv" : "energy.csv");
            write_csv(path, sw);
            write_csv(out, sw);
            return 0;
        }
        if (solve->parsed()) {
            SweepSpec s = c.sweep();
            for (double e : c.eps) {
                DomainBall d = s.domain_at(e);
                auto sol = solve_potential(field(d), d, s.solver_at(e));
                std::string name = "potential_eps" + format_g17(e) + ".fld";
                write_field(cli_detail::out_path(c, name), sol.u);
                out << format_g17(e) << ',' << name << '\n';
            }
            return 0;
        }
        if (verify->parsed()) return cli_detail::run_verify(check, c, out);
        if (minimize->parsed()) {
            SweepSpec s = c.sweep();
            const double e = c.eps.back();
            DomainBall d = s.domain_at(e);
            OptimParams op = c.optim;
            op.limit_model = limit;
            if (limit) op.tangency = TangencyEnforcement::project_band;
            auto r = descend(field(d), d, s.energy_at(e), op);
            std::ofstream t(cli_detail::out_path(c, "trace.csv"), std::ios::binary);
            write_trace_csv(t, r.trace);
            write_trace_csv(out, r.trace);
            write_field(cli_detail::out_path(c, "minimizer.fld"), r.P);
            return 0;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const WrongRegime& e) {
        err << "wrong regime: " << e.what() << '\n';
        return 2;
    } catch (const DescentDiverged& e) {
        err << "descent diverged: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace ferro
