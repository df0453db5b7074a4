#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ferro/grid.hpp"

namespace ferro {

/** Band-limited random field: cosine modes with wave numbers pi k / R, k in {0,1,2,3} per axis. */
struct RandomSmoothField {
    struct Mode {
        Vec3 k;
        double phase;
        Vec3 amp;
    };
    std::vector<Mode> modes;
    Vec3 center{0.0, 0.0, 0.0};

    RandomSmoothField(std::uint64_t seed, double R, const Vec3& c) : center(c)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int d = 0; d < 4; ++d) {
                    Mode m;
                    m.k = {std::numbers::pi * a / R, std::numbers::pi * b / R, std::numbers::pi * d / R};
                    m.phase = std::numbers::pi * u(rng);
                    double decay = 1.0 / (1.0 + a * a + b * b + d * d);
                    m.amp = {decay * u(rng), decay * u(rng), decay * u(rng)};
                    modes.push_back(m);
                }
    }

    Vec3 operator()(const Vec3& x) const
    {
        Vec3 y = x - center, v{0.0, 0.0, 0.0};
        for (const auto& m : modes) {
            double c = std::cos(dot(m.k, y) + m.phase);
            v = v + c * m.amp;
        }
        return v;
    }
};

inline const std::vector<std::string>& named_field_list()
{
    static const std::vector<std::string> names = {"radial", "rigid-rotation", "tangential-splay", "axis",
                                                   "random-smooth"};
    return names;
}

inline bool is_named_field(const std::string& name)
{
    if (name == "tangential-divfree") return true;
    for (const auto& n : named_field_list())
        if (n == name) return true;
    return false;
}

/**
 * Built-in fields about `center`: radial P = x, rigid-rotation (-y,x,0)
 * (alias tangential-divfree), tangential-splay (-y,x,0)+(1-|x|^2)e1,
 * axis e3, random-smooth (seeded).
 */
inline VectorField make_named_field(const std::string& name, const Grid3& g, const Vec3& center, double R,
                                    std::uint64_t seed = 0)
{
    if (name == "radial") return sample_vector(g, [&](const Vec3& x) { return x - center; });
    if (name == "rigid-rotation" || name == "tangential-divfree")
        return sample_vector(g, [&](const Vec3& x) {
            Vec3 y = x - center;
            return Vec3{-y[1], y[0], 0.0};
        });
    if (name == "tangential-splay")
        return sample_vector(g, [&](const Vec3& x) {
            Vec3 y = x - center;
            return Vec3{-y[1] + 1.0 - dot(y, y), y[0], 0.0};
        });
    if (name == "axis") return sample_vector(g, [](const Vec3&) { return Vec3{0.0, 0.0, 1.0}; });
    if (name == "random-smooth") {
        RandomSmoothField f(seed, R, center);
        return sample_vector(g, f);
    }
    throw ConfigError("unknown field name '" + name + "'");
}

} // namespace ferro
