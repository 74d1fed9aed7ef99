#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fishrec/errors.hpp"
#include "fishrec/saliency.hpp"

using namespace fishrec;

namespace {

std::pair<int, int> argmax(const SaliencyMap& m) {
    int bx = 0, by = 0;
    double best = -1.0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y) > best) {
                best = m.at(x, y);
                bx = x;
                by = y;
            }
    return {bx, by};
}

Image impulse_image(int w, int h, int x, int y) {
    Image img(w, h, 1);
    img.at(x, y) = 1.0f;
    return img;
}

}  // namespace

TEST_CASE("pft_saliency peaks at an impulse") {
    SaliencyConfig cfg;
    const Image img = impulse_image(64, 64, 20, 31);
    const SaliencyMap map = pft_saliency(img, cfg);
    CHECK(argmax(map) == std::pair<int, int>{20, 31});
    for (double v : map.values) CHECK(v >= 0.0);
}

TEST_CASE("pft_saliency shift theorem") {
    SaliencyConfig cfg;
    const auto m1 = pft_saliency(impulse_image(64, 64, 10, 12), cfg);
    const auto m2 = pft_saliency(impulse_image(64, 64, 17, 25), cfg);
    const auto p1 = argmax(m1);
    const auto p2 = argmax(m2);
    CHECK(p2.first - p1.first == 7);
    CHECK(p2.second - p1.second == 13);
}

TEST_CASE("pft_saliency ignores global intensity scale") {
    SaliencyConfig cfg;
    Image img(80, 60, 1);  // non-power-of-two on purpose
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x)
            img.at(x, y) = 0.1f + 0.05f * ((x * 31 + y * 17) % 13);
    img.at(40, 30) = 1.0f;
    Image half = img;
    for (auto& v : half.data()) v *= 0.5f;

    const auto m1 = pft_saliency(img, cfg);
    const auto m2 = pft_saliency(half, cfg);
    CHECK(argmax(m1) == argmax(m2));
}

TEST_CASE("nonmax_suppress") {
    SaliencyConfig cfg;
    cfg.nms_radius = 4;

    SaliencyMap map;
    map.width = 40;
    map.height = 40;
    map.values.assign(40 * 40, 0.0);
    auto set = [&](int x, int y, double v) { map.values[y * 40 + x] = v; };

    SUBCASE("distant equal impulses both survive, mask gates") {
        set(5, 5, 1.0);
        set(30, 30, 1.0);
        set(20, 8, 0.7);
        Mask mask(40, 40, true);
        for (int y = 0; y < 40; ++y)
            for (int x = 15; x < 25; ++x) mask.set(x, y, false);  // hole over (20,8)

        const auto pts = nonmax_suppress(map, mask, cfg);
        REQUIRE(pts.size() >= 2);
        CHECK(pts[0].value == doctest::Approx(1.0));
        CHECK(pts[1].value == doctest::Approx(1.0));
        for (const auto& p : pts) CHECK(mask.at(p.x, p.y));
        // excluded background point
        for (const auto& p : pts) CHECK(!(p.x == 20 && p.y == 8));
    }

    SUBCASE("plateau keeps one lexicographic representative") {
        for (int y = 10; y < 13; ++y)
            for (int x = 10; x < 13; ++x) set(x, y, 2.0);
        Mask mask(40, 40, true);
        const auto pts = nonmax_suppress(map, mask, cfg);
        int plateau_hits = 0;
        for (const auto& p : pts)
            if (p.value == 2.0) {
                ++plateau_hits;
                CHECK(p.x == 10);
                CHECK(p.y == 10);
            }
        CHECK(plateau_hits == 1);
    }

    SUBCASE("results sorted and separated") {
        set(3, 3, 0.5);
        set(12, 3, 0.9);
        set(25, 25, 0.7);
        Mask mask(40, 40, true);
        const auto pts = nonmax_suppress(map, mask, cfg);
        for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].value >= pts[i].value);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
                CHECK(std::sqrt(dx * dx + dy * dy) > cfg.nms_radius);
            }
    }
}

TEST_CASE("init_parts") {
    SaliencyConfig cfg;
    cfg.nms_radius = 6;
    cfg.init_part_side = 48;

    SaliencyMap map;
    map.width = 120;
    map.height = 100;
    map.values.assign(120 * 100, 0.0);
    const int px[] = {20, 60, 100, 20, 60, 100, 40};
    const int py[] = {20, 25, 30, 70, 75, 80, 50};
    for (int i = 0; i < 7; ++i) map.values[py[i] * 120 + px[i]] = 1.0 - 0.05 * i;
    Mask mask(120, 100, true);

    SUBCASE("six 48x48 parts, clamped feasible") {
        const auto rects = init_parts(map, mask, 6, cfg);
        REQUIRE(rects.size() == 6);
        for (const auto& r : rects) {
            CHECK(r.feasible());
            CHECK(r.size.x == doctest::Approx(48.0 / 120.0));
            CHECK(r.size.y == doctest::Approx(48.0 / 100.0));
        }
    }

    SUBCASE("single maximum at the center") {
        SaliencyMap one;
        one.width = 100;
        one.height = 100;
        one.values.assign(100 * 100, 0.0);
        one.values[50 * 100 + 50] = 1.0;
        Mask m2(100, 100, true);
        const auto rects = init_parts(one, m2, 1, cfg);
        REQUIRE(rects.size() == 1);
        CHECK(rects[0].center.x == doctest::Approx(0.505));
        CHECK(rects[0].center.y == doctest::Approx(0.505));
    }

    SUBCASE("too few maxima is an error") {
        SaliencyMap two;
        two.width = 64;
        two.height = 64;
        two.values.assign(64 * 64, 0.0);
        two.values[10 * 64 + 10] = 1.0;
        two.values[50 * 64 + 50] = 0.9;
        // mask covers discs around the impulses, not the flat background
        Mask m3(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                if ((x - 10) * (x - 10) + (y - 10) * (y - 10) <= 25) m3.set(x, y, true);
                if ((x - 50) * (x - 50) + (y - 50) * (y - 50) <= 25) m3.set(x, y, true);
            }
        CHECK(init_parts(two, m3, 2, cfg).size() == 2);
        CHECK_THROWS_AS(init_parts(two, m3, 3, cfg), data_error);
    }
}
