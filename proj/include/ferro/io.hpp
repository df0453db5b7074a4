#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ferro/gamma_lab.hpp"
#include "ferro/minimize.hpp"

namespace ferro {

static_assert(std::endian::native == std::endian::little, "field files are written with native little-endian IO");

/** Everything a CLI run needs; defaults match the library defaults. */
struct RunConfig {
    double R = 1.0;
    int N = 0;  // 0: per-eps resolvable N
    int level = -1;
    double alpha = 1.0;
    double eta = 0.3;
    std::vector<double> eps = default_eps_sweep();
    double pad_factor = 8.0;
    OptimParams optim;
    std::string experiment = "energy";
    std::string field = "radial";
    std::string output = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;

    SweepSpec sweep() const
    {
        SweepSpec s;
        s.R = R;
        s.eps = eps;
        s.N = N;
        s.level = level;
        s.energy.eta = eta;
        s.energy.solver.alpha = alpha;
        s.energy.solver.pad_factor = pad_factor;
        return s;
    }

    void validate() const
    {
        if (!(R > 0.0)) throw ConfigError("domain.R must be positive");
        if (N < 0 || (N > 0 && N < 4)) throw ConfigError("domain.N must be 0 or >= 4");
        if (eps.empty()) throw ConfigError("sweep.eps is empty");
        for (double e : eps)
            if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("sweep.eps values must be positive");
        for (std::size_t i = 1; i < eps.size(); ++i)
            if (!(eps[i] < eps[i - 1])) throw ConfigError("sweep.eps must be strictly decreasing");
        if (!(alpha > 0.0)) throw ConfigError("physics.alpha must be positive");
        if (!(eta > 0.0)) throw ConfigError("physics.eta must be positive");
        if (!(pad_factor >= 1.0)) throw ConfigError("solver.pad_factor must be >= 1");
        try {
            optim.validate();
        } catch (const SolverConfigError& e) {
            throw ConfigError(std::string("optim: ") + e.what());
        }
        if (field == "random-smooth" && !seed_set) throw ConfigError("random-smooth needs a seed");
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
    return d;
}

inline long long parse_int(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    long long d = 0;
    try {
        d = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": not an integer: '" + v + "'");
    }
    if (used != v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
    return d;
}

} // namespace detail

/** Applies one `key = value` pair; unknown keys are errors. */
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v)
{
    using detail::parse_double;
    using detail::parse_int;
    if (key == "domain.R") c.R = parse_double(key, v);
    else if (key == "domain.N") c.N = static_cast<int>(parse_int(key, v));
    else if (key == "domain.level") c.level = static_cast<int>(parse_int(key, v));
    else if (key == "physics.alpha") c.alpha = parse_double(key, v);
    else if (key == "physics.eta") c.eta = parse_double(key, v);
    else if (key == "solver.pad_factor") c.pad_factor = parse_double(key, v);
    else if (key == "sweep.eps") {
        c.eps.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) c.eps.push_back(parse_double(key, detail::trim(item)));
    } else if (key == "optim.step") c.optim.step = parse_double(key, v);
    else if (key == "optim.iters") c.optim.max_iters = static_cast<int>(parse_int(key, v));
    else if (key == "optim.tol") c.optim.grad_tol = parse_double(key, v);
    else if (key == "optim.smoothing") c.optim.smoothing_length = parse_double(key, v);
    else if (key == "optim.mode") {
        if (v == "relaxed") c.optim.mode = DescentMode::relaxed;
        else if (v == "constrained") c.optim.mode = DescentMode::constrained;
        else throw ConfigError(key + ": expected relaxed or constrained");
    } else if (key == "experiment.name") c.experiment = v;
    else if (key == "experiment.field") c.field = v;
    else if (key == "output.dir") c.output = v;
    else if (key == "seed") {
        long long s = parse_int(key, v);
        if (s < 0) throw ConfigError("seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(s);
        c.seed_set = true;
    } else
        throw ConfigError("unknown config key '" + key + "'");
}

/** Flat `key = value` text, `#` starts a comment. */
inline RunConfig parse_config(std::istream& in, RunConfig c = {}, bool validate = true)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
        set_config_value(c, key, value);
    }
    if (validate) c.validate();
    return c;
}

inline RunConfig read_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse_config(in);
}

inline const char* csv_header()
{
    return "eps,N,frank,gl,electro_interaction,electro_field,term_I,term_II,term_III,splay_limit,boundary_norm_sq";
}

inline std::string format_g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const EpsSweep& s)
{
    out << csv_header() << '\n';
    for (const auto& r : s.records) {
        const auto& b = r.energy;
        out << format_g17(r.eps) << ',' << r.N;
        for (double v : {b.frank, b.gl, b.electro_interaction, b.electro_field, b.term_I, b.term_II, b.term_III,
                         b.splay_limit, b.boundary_norm_sq})
            out << ',' << format_g17(v);
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const EpsSweep& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    write_csv(out, s);
}

/** Generic table with a header row; used for reports and traces. */
inline void write_table(std::ostream& out, const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& rows)
{
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_g17(row[i]);
        out << '\n';
    }
}

inline void write_trace_csv(std::ostream& out, const DescentTrace& t)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t.energy.size(); ++i)
        rows.push_back({static_cast<double>(i), t.energy[i], t.grad_norm[i], t.boundary_norm_sq[i], t.step[i]});
    write_table(out, {"iter", "energy", "grad_norm", "boundary_norm_sq", "step"}, rows);
}

constexpr char field_magic[8] = {'F', 'N', 'P', 'F', 'L', 'D', '0', '1'};
constexpr std::size_t field_header_bytes = 8 + 4 * 4 + 4 * 8;

namespace detail {

template <class T>
void put(std::string& buf, T v)
{
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf.append(b, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& off, const char* what)
{
    if (buf.size() < off + sizeof(T))
        throw FormatError(std::string("truncated field file: ") + what + " at byte offset " + std::to_string(off));
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

inline std::string encode_field(const Grid3& g, const std::vector<const std::vector<double>*>& comps)
{
    std::string buf(field_magic, 8);
    for (int a = 0; a < 3; ++a) put<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dims[a]));
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(comps.size()));
    for (int a = 0; a < 3; ++a) put<double>(buf, g.origin[a]);
    put<double>(buf, g.h);
    buf.reserve(buf.size() + comps.size() * g.size() * 8);
    for (const auto* c : comps)
        buf.append(reinterpret_cast<const char*>(c->data()), c->size() * sizeof(double));
    return buf;
}

struct DecodedField {
    Grid3 grid;
    std::vector<std::vector<double>> comps;
};

inline DecodedField decode_field(const std::string& buf)
{
    if (buf.size() < 8 || std::memcmp(buf.data(), field_magic, 8) != 0)
        throw FormatError("bad magic at byte offset 0 (expected FNPFLD01)");
    std::size_t off = 8;
    DecodedField f;
    for (int a = 0; a < 3; ++a) {
        std::size_t at = off;
        auto n = get<std::uint32_t>(buf, off, "dimension");
        if (n == 0 || n > (1u << 20))
            throw FormatError("dimension " + std::to_string(n) + " out of range at byte offset " + std::to_string(at));
        f.grid.dims[a] = static_cast<int>(n);
    }
    std::size_t at = off;
    auto nc = get<std::uint32_t>(buf, off, "component count");
    if (nc != 1 && nc != 3)
        throw FormatError("component count " + std::to_string(nc) + " at byte offset " + std::to_string(at));
    for (int a = 0; a < 3; ++a) f.grid.origin[a] = get<double>(buf, off, "origin");
    at = off;
    f.grid.h = get<double>(buf, off, "spacing");
    if (!(f.grid.h > 0.0) || !std::isfinite(f.grid.h))
        throw FormatError("spacing must be positive at byte offset " + std::to_string(at));
    const unsigned __int128 cells = static_cast<unsigned __int128>(f.grid.dims[0]) * f.grid.dims[1] * f.grid.dims[2];
    const unsigned __int128 need = cells * nc * 8u;
    if (need > static_cast<unsigned __int128>(buf.size() - off))
        throw FormatError("truncated payload: need " + std::to_string(static_cast<unsigned long long>(need)) +
                          " bytes from byte offset " + std::to_string(off) + ", file has " +
                          std::to_string(buf.size() - off));
    if (need < static_cast<unsigned __int128>(buf.size() - off))
        throw FormatError("trailing bytes after payload at byte offset " +
                          std::to_string(off + static_cast<std::size_t>(need)));
    const std::size_t n = static_cast<std::size_t>(cells);
    f.comps.resize(nc);
    for (auto& c : f.comps) {
        c.resize(n);
        std::memcpy(c.data(), buf.data() + off, n * sizeof(double));
        off += n * sizeof(double);
    }
    return f;
}

inline std::string read_all(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_all(const std::string& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path);
}

} // namespace detail

inline std::string encode_field(const VectorField& P)
{
    check_field(P);
    return detail::encode_field(P.grid, {&P.comp[0], &P.comp[1], &P.comp[2]});
}

inline std::string encode_field(const ScalarField& f)
{
    check_field(f);
    return detail::encode_field(f.grid, {&f.values});
}

inline void write_field(const std::string& path, const VectorField& P) { detail::write_all(path, encode_field(P)); }
inline void write_field(const std::string& path, const ScalarField& f) { detail::write_all(path, encode_field(f)); }

inline VectorField decode_vector_field(const std::string& bytes)
{
    auto d = detail::decode_field(bytes);
    if (d.comps.size() != 3) throw FormatError("expected 3 components at byte offset 20");
    VectorField P(d.grid);
    for (int a = 0; a < 3; ++a) P.comp[a] = std::move(d.comps[a]);
    return P;
}

inline ScalarField decode_scalar_field(const std::string& bytes)
{
    auto d = detail::decode_field(bytes);
    if (d.comps.size() != 1) throw FormatError("expected 1 component at byte offset 20");
    ScalarField f(d.grid);
    f.values = std::move(d.comps[0]);
    return f;
}

inline VectorField read_vector_field(const std::string& path) { return decode_vector_field(detail::read_all(path)); }
inline ScalarField read_scalar_field(const std::string& path) { return decode_scalar_field(detail::read_all(path)); }

} // namespace ferro
