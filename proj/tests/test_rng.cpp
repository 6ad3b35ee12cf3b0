#include <doctest.h>

#include <cmath>
#include <set>

#include "kacrice/rng.hpp"

using namespace kacrice;

TEST_CASE("philox4x32-10 known answers") {
    auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(ones == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    CHECK(pi == std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams replay and do not collide") {
    RngStream a(7, 1), b(7, 1), c(7, 2), d(8, 1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        CHECK(x != c());
        CHECK(x != d());
    }
    RngStream e(7, 1);
    RngStream copy = e;
    for (int i = 0; i < 5; ++i) CHECK(e.normal() == copy.normal());
}

TEST_CASE("uniform and normal moments") {
    RngStream s(123, 0);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = s.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sn / n) < 5 / std::sqrt(double(n)));
    CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
}
