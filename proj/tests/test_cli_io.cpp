#include <gtest/gtest.h>

#include <filesystem>
#include <algorithm>
#include <cstring>
#include <sstream>

#include "ferro/cli.hpp"

using namespace ferro;

namespace {

Grid3 small_grid()
{
    Grid3 g;
    g.dims = {5, 4, 3};
    g.origin = {-0.3, 0.125, 1e-17};
    g.h = 0.1 / 3.0;
    return g;
}

std::string temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("ferro_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr)
{
    args.insert(args.begin(), "ferro_gamma");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

void expect_format_error(const std::string& bytes, const std::string& fragment)
{
    try {
        decode_vector_field(bytes);
        FAIL() << "expected FormatError containing '" << fragment << "'";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

} // namespace

TEST(FieldFile, VectorRoundTripIsBitExact)
{
    Grid3 g = small_grid();
    VectorField P(g);
    for (std::size_t k = 0; k < g.size(); ++k)
        P.set(k, Vec3{std::sin(1.0 + k) / 3.0, -1e-300 * k, std::nextafter(1.0, 2.0) * k});
    auto dir = temp_dir("vec");
    write_field(dir + "/p.fld", P);
    VectorField Q = read_vector_field(dir + "/p.fld");
    EXPECT_EQ(Q.grid.dims, g.dims);
    EXPECT_EQ(Q.grid.origin, g.origin);
    EXPECT_EQ(Q.grid.h, g.h);
    for (int a = 0; a < 3; ++a) EXPECT_EQ(Q.comp[a], P.comp[a]);
    EXPECT_EQ(std::filesystem::file_size(dir + "/p.fld"), field_header_bytes + 3 * g.size() * 8);
}

TEST(FieldFile, ScalarRoundTripIsBitExact)
{
    Grid3 g = small_grid();
    ScalarField f(g);
    for (std::size_t k = 0; k < g.size(); ++k) f.values[k] = std::exp(-0.37 * k) - 0.5;
    ScalarField h = decode_scalar_field(encode_field(f));
    EXPECT_EQ(h.values, f.values);
    EXPECT_EQ(h.grid.h, g.h);
    EXPECT_THROW(decode_vector_field(encode_field(f)), FormatError);
}

TEST(FieldFile, MalformedInputsNameOffsets)
{
    Grid3 g = small_grid();
    VectorField P(g);
    std::string good = encode_field(P);

    std::string bad = good;
    bad[3] = 'X';
    expect_format_error(bad, "byte offset 0");

    expect_format_error(good.substr(0, good.size() - 8), "truncated payload");
    expect_format_error(good.substr(0, 14), "byte offset 12");
    expect_format_error(good + "x", "trailing bytes");

    bad = good;
    std::uint32_t huge = (1u << 20) + 1;
    std::memcpy(bad.data() + 12, &huge, 4);
    expect_format_error(bad, "byte offset 12");

    bad = good;
    std::uint32_t two = 2;
    std::memcpy(bad.data() + 20, &two, 4);
    expect_format_error(bad, "component count 2 at byte offset 20");

    bad = good;
    double neg = -1.0;
    std::memcpy(bad.data() + 48, &neg, 8);
    expect_format_error(bad, "spacing must be positive at byte offset 48");

    EXPECT_THROW(read_vector_field("/nonexistent/ferro.fld"), FormatError);
}

TEST(Csv, HeaderAndFullPrecision)
{
    EXPECT_STREQ(csv_header(),
                 "eps,N,frank,gl,electro_interaction,electro_field,term_I,term_II,term_III,splay_limit,boundary_norm_sq");
    EXPECT_EQ(std::stod(format_g17(0.1)), 0.1);
    EXPECT_EQ(format_g17(0.1), "0.10000000000000001");

    EpsSweep s;
    SweepRecord r;
    r.eps = 0.2;
    r.N = 32;
    r.energy.frank = 1.0 / 3.0;
    s.records.push_back(r);
    std::ostringstream out;
    write_csv(out, s);
    std::istringstream in(out.str());
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, csv_header());
    EXPECT_EQ(row.substr(0, row.find(',', row.find(',') + 1)), "0.20000000000000001,32");
    EXPECT_NE(row.find("0.33333333333333331"), std::string::npos);
}

TEST(Config, ParsesKnownKeys)
{
    std::istringstream in("# comment\n"
                          "domain.R = 1.5\n"
                          "domain.N = 40   # trailing\n"
                          "physics.alpha = 2\n"
                          "sweep.eps = 0.4, 0.2 ,0.1\n"
                          "optim.mode = constrained\n"
                          "experiment.field = random-smooth\n"
                          "seed = 7\n");
    RunConfig c = parse_config(in);
    EXPECT_EQ(c.R, 1.5);
    EXPECT_EQ(c.N, 40);
    EXPECT_EQ(c.alpha, 2.0);
    EXPECT_EQ(c.eps, (std::vector<double>{0.4, 0.2, 0.1}));
    EXPECT_EQ(c.optim.mode, DescentMode::constrained);
    EXPECT_EQ(c.field, "random-smooth");
    EXPECT_TRUE(c.seed_set);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.sweep().energy.solver.alpha, 2.0);
}

TEST(Config, RejectsBadInput)
{
    auto bad = [](const std::string& text) {
        std::istringstream in(text);
        EXPECT_THROW(parse_config(in), ConfigError) << text;
    };
    bad("sweep.eps = 0.2, 0\n");
    bad("sweep.eps = 0.2, -0.1\n");
    bad("sweep.eps = 0.1, 0.2\n");
    bad("domain.radius = 1\n");
    bad("physics.alpha = 1x\n");
    bad("physics.alpha = 0\n");
    bad("no equals sign\n");
    bad("experiment.field = random-smooth\n");
    bad("optim.mode = sideways\n");
    bad("seed = -3\n");
}

TEST(Cli, SelftestPasses)
{
    std::string out;
    EXPECT_EQ(run({"selftest"}, &out), 0);
    EXPECT_EQ(out.rfind("kernel_mass_3d(alpha=1) = 1.", 0), 0u) << out;
    EXPECT_EQ(out.find("FAIL"), std::string::npos) << out;
}

TEST(Cli, UsageAndConfigErrorsExitTwo)
{
    std::string err;
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"bogus"}), 2);
    EXPECT_EQ(run({"energy", "--eps", "notanumber"}), 2);
    EXPECT_EQ(run({"energy", "--field", "nope"}, nullptr, &err), 2);
    EXPECT_NE(err.find("unknown field"), std::string::npos);
    EXPECT_EQ(run({"energy", "--eps", "0.2,0.4"}), 2);
    EXPECT_EQ(run({"energy", "--config", "/nonexistent/ferro.cfg"}), 2);
    EXPECT_EQ(run({"verify", "no-such-check", "--eps", "0.3"}), 2);
    EXPECT_EQ(run({"energy", "--field", "random-smooth", "--eps", "0.3"}), 2);
}

TEST(Cli, EnergyWritesCsv)
{
    auto dir = temp_dir("energy");
    std::string out;
    ASSERT_EQ(run({"energy", "--field", "axis", "--eps", "0.4", "--N", "24", "--out", dir}, &out), 0);
    std::string file = detail::read_all(dir + "/energy.csv");
    EXPECT_EQ(file, out);
    EXPECT_EQ(file.substr(0, file.find('\n')), csv_header());
    EXPECT_EQ(std::count(file.begin(), file.end(), '\n'), 2);
}

TEST(Cli, SolveWritesReadableField)
{
    auto dir = temp_dir("solve");
    ASSERT_EQ(run({"solve", "--field", "radial", "--eps", "0.4", "--N", "20", "--out", dir}), 0);
    ScalarField u = read_scalar_field(dir + "/potential_eps0.40000000000000002.fld");
    EXPECT_GE(u.grid.dims[0], make_ball_domain(1.0, 20).grid.dims[0]);
    double mx = 0.0;
    for (double v : u.values) mx = std::max(mx, std::abs(v));
    EXPECT_GT(mx, 0.0);
}

TEST(Cli, MinimizeWritesTraceAndField)
{
    auto dir = temp_dir("minimize");
    ASSERT_EQ(run({"minimize", "--field", "radial", "--eps", "0.4", "--N", "20", "--iters", "3", "--step", "0.05",
                   "--smoothing", "0.2", "--out", dir}),
              0);
    std::string trace = detail::read_all(dir + "/trace.csv");
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,energy,grad_norm,boundary_norm_sq,step");
    VectorField P = read_vector_field(dir + "/minimizer.fld");
    EXPECT_EQ(P.grid.dims, make_ball_domain(1.0, 20).grid.dims);
}

TEST(Cli, ConfigFileWithOverride)
{
    auto dir = temp_dir("config");
    {
        std::ofstream f(dir + "/run.cfg");
        f << "experiment.field = axis\nsweep.eps = 0.4\ndomain.N = 20\noutput.dir = " << dir << "/a\n";
    }
    ASSERT_EQ(run({"sweep", "--config", dir + "/run.cfg"}), 0);
    ASSERT_EQ(run({"sweep", "--config", dir + "/run.cfg", "--out", dir + "/b"}), 0);
    EXPECT_EQ(detail::read_all(dir + "/a/sweep.csv"), detail::read_all(dir + "/b/sweep.csv"));
}
