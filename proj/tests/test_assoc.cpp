#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fishrec/assoc.hpp"
#include "fishrec/errors.hpp"
#include "fishrec/rng.hpp"

using namespace fishrec;

namespace {

std::vector<Vec2> random_layout(Rng& rng, int k) {
    // rejection-sample so no two parts nearly coincide
    std::vector<Vec2> pts;
    while (static_cast<int>(pts.size()) < k) {
        Vec2 p{rng.uniform(0.3, 0.7), rng.uniform(0.35, 0.65)};
        bool ok = true;
        for (const auto& q : pts)
            if ((p - q).norm() < 0.06) ok = false;
        if (ok) pts.push_back(p);
    }
    return pts;
}

std::vector<Vec2> transform_layout(const std::vector<Vec2>& pts, double angle_deg, double scale,
                                   bool flip, Vec2 shift = {0, 0}) {
    Vec2 c{0, 0};
    for (const auto& p : pts) c = c + p;
    c = c * (1.0 / pts.size());
    const double a = angle_deg * M_PI / 180.0;
    std::vector<Vec2> out;
    for (auto p : pts) {
        Vec2 d = p - c;
        if (flip) d.x = -d.x;
        Vec2 r{d.x * std::cos(a) - d.y * std::sin(a), d.x * std::sin(a) + d.y * std::cos(a)};
        out.push_back(c + r * scale + shift);
    }
    return out;
}

double total_compatibility(const std::vector<Vec2>& u, const std::vector<Vec2>& v,
                           const std::vector<int>& perm) {
    double s = 0.0;
    const int k = static_cast<int>(u.size());
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (i != j) s += compatibility(u[i], u[j], v[perm[i]], v[perm[j]]);
    return s;
}

}  // namespace

TEST_CASE("principal_axes_project on an elongated mask") {
    Mask mask(100, 60);
    // ellipse, long axis horizontal, plus a bar sticking out on the right
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 100; ++x) {
            const double dx = (x - 40.0) / 30.0, dy = (y - 30.0) / 12.0;
            if (dx * dx + dy * dy <= 1.0) mask.set(x, y, true);
            if (x >= 70 && x < 96 && y >= 26 && y < 34) mask.set(x, y, true);
        }

    const std::vector<Vec2> pts = {{0.2, 0.5}, {0.5, 0.5}, {0.9, 0.5}};
    const PartSet ps = make_part_set(pts, mask);
    CHECK(std::abs(ps.axis1.x) > 0.99);  // first axis along elongation
    const auto proj = principal_axes_project(ps);
    for (const auto& p : proj) CHECK(std::abs(p.y) < 0.02);  // points on the axis
    // skew convention points toward the heavy right side
    CHECK(ps.axis1.x > 0.0);
    CHECK(proj[2].x > proj[0].x);
}

TEST_CASE("projection preserves distances up to the extent scale") {
    Rng rng(5);
    const auto pts = random_layout(rng, 6);
    const PartSet ps = make_part_set_from_points(pts);
    const auto proj = principal_axes_project(ps);
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) {
            const double d0 = (pts[i] - pts[j]).norm() / ps.extent1;
            const double d1 = (proj[i] - proj[j]).norm();
            CHECK(d1 == doctest::Approx(d0).epsilon(1e-9));
        }
}

TEST_CASE("compatibility values") {
    // identical local geometry
    CHECK(compatibility({0, 0}, {0.5, 0}, {0, 0}, {0.5, 0}) == doctest::Approx(1.0));
    // pure distance disparity of 1
    CHECK(compatibility({0, 0}, {2, 0}, {0, 0}, {1, 0}) == doctest::Approx(std::exp(-1.0)));
    // large disparity drives compatibility to zero
    CHECK(compatibility({0, 0}, {40, 0}, {0, 0}, {1, 0}) < 1e-12);
    // coincident points leave the angle term out
    CHECK(compatibility({0.3, 0.3}, {0.3, 0.3}, {0, 0}, {1, 0}) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("sinkhorn_normalize") {
    SUBCASE("uniform matrix is a fixed point up to scale") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 4, 3.0);
        const Eigen::MatrixXd out = sinkhorn_normalize(m);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(out(i, j) == doctest::Approx(0.25));
    }

    SUBCASE("diagonal matrix normalizes to identity") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
        m(0, 0) = 2.0;
        m(1, 1) = 2.0;
        const Eigen::MatrixXd out = sinkhorn_normalize(m);
        CHECK(out(0, 0) == doctest::Approx(1.0));
        CHECK(out(1, 1) == doctest::Approx(1.0));
        CHECK(out(0, 1) == doctest::Approx(0.0));
    }

    SUBCASE("random positive matrices end doubly stochastic") {
        Rng rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 3 + trial % 8;
            Eigen::MatrixXd m(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(0.05, 1.0);
            const Eigen::MatrixXd out = sinkhorn_normalize(m);
            for (int i = 0; i < n; ++i) {
                CHECK(out.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
                CHECK(out.col(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }

    SUBCASE("zero row cannot converge") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
        m(1, 0) = 1.0;
        m(2, 2) = 1.0;
        CHECK_THROWS_AS(sinkhorn_normalize(m), numeric_error);
    }
}

TEST_CASE("mutual_knn symmetry") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = random_layout(rng, 8);
        const auto nb = mutual_knn(pts, 3);
        for (int i = 0; i < 8; ++i)
            for (int j : nb[i])
                CHECK(std::find(nb[j].begin(), nb[j].end(), i) != nb[j].end());
    }
}

TEST_CASE("relax_label identity on identical sets") {
    Rng rng(31);
    const auto pts = random_layout(rng, 6);
    const PartSet ref = make_part_set_from_points(pts);
    const auto result = relax_label(ref, ref);
    REQUIRE(result.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(result[i] == i);

    // oracle: identity is the argmax of total pairwise compatibility
    const auto proj = principal_axes_project(ref);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    const std::vector<int> identity = perm;
    const double id_score = total_compatibility(proj, proj, identity);
    do {
        CHECK(total_compatibility(proj, proj, perm) <= id_score + 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("relax_label recovers rotated, scaled and flipped layouts") {
    Rng rng(37);
    int correct = 0, total = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const auto ref_pts = random_layout(rng, 6);
        const double ang = rng.uniform(-30.0, 30.0);
        const double sc = rng.uniform(0.8, 1.2);
        const bool flip = trial % 2 == 1;
        const auto cand_pts = transform_layout(ref_pts, ang, sc, flip);

        const auto result = relax_label(make_part_set_from_points(cand_pts),
                                        make_part_set_from_points(ref_pts));
        for (int i = 0; i < 6; ++i) {
            ++total;
            if (result[i] == i) ++correct;
        }
    }
    CHECK(static_cast<double>(correct) / total >= 0.95);
}

TEST_CASE("relax_label single pair") {
    const PartSet a = make_part_set_from_points({{0.4, 0.4}});
    const PartSet b = make_part_set_from_points({{0.6, 0.6}});
    const auto result = relax_label(a, b);
    REQUIRE(result.size() == 1);
    CHECK(result[0] == 0);
}

TEST_CASE("relax_label assignment is injective and translation/scale invariant") {
    Rng rng(41);
    for (int trial = 0; trial < 8; ++trial) {
        const auto ref_pts = random_layout(rng, 6);
        auto cand_pts = transform_layout(ref_pts, rng.uniform(-20.0, 20.0), 1.0, false);

        const auto base = relax_label(make_part_set_from_points(cand_pts),
                                      make_part_set_from_points(ref_pts));
        std::vector<char> used(6, 0);
        for (int r : base) {
            if (r < 0) continue;
            CHECK(!used[r]);
            used[r] = 1;
        }

        // translate both sets together, scale both sets jointly
        auto shift = [](const std::vector<Vec2>& v, Vec2 d, double s) {
            std::vector<Vec2> out;
            for (auto p : v) out.push_back({p.x * s + d.x, p.y * s + d.y});
            return out;
        };
        const Vec2 d{0.08, -0.05};
        const auto moved = relax_label(make_part_set_from_points(shift(cand_pts, d, 0.5)),
                                       make_part_set_from_points(shift(ref_pts, d, 0.5)));
        CHECK(moved == base);
    }
}
