#include <cmath>

#include "doctest.h"
#include "fishrec/descriptor.hpp"
#include "fishrec/errors.hpp"
#include "fishrec/rng.hpp"

using namespace fishrec;

namespace {

Image textured_patch(Rng& rng, int side, int channels) {
    Image img(side, side, channels);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0.0, 1.0));
    return img;
}

PcaModel quick_pca(Rng& rng, const DescriptorConfig& cfg, int n = 40) {
    std::vector<Eigen::VectorXd> raw;
    for (int i = 0; i < n; ++i) raw.push_back(dense_grad_descriptors(textured_patch(rng, 32, 1), cfg));
    return fit_pca(raw, cfg.pca_dim);
}

}  // namespace

TEST_CASE("dense_grad_descriptors") {
    DescriptorConfig cfg;

    SUBCASE("constant patch gives the zero vector") {
        Image flat(30, 30, 1, 0.7f);
        const Eigen::VectorXd raw = dense_grad_descriptors(flat, cfg);
        CHECK(raw.size() == raw_grad_dim(cfg));
        CHECK(raw.norm() == 0.0);
    }

    SUBCASE("deterministic on identical patches") {
        Rng rng(3);
        const Image p = textured_patch(rng, 40, 3);
        const Image q = p;
        CHECK((dense_grad_descriptors(p, cfg) - dense_grad_descriptors(q, cfg)).norm() == 0.0);
    }

    SUBCASE("vertical step edge concentrates on horizontal-gradient bins") {
        Image edge(48, 48, 1);
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x) edge.at(x, y) = x < 24 ? 0.1f : 0.9f;
        const Eigen::VectorXd raw = dense_grad_descriptors(edge, cfg);
        // orientation bins 0 (gx>0) and 4 (gx<0) hold horizontal gradients
        double horiz = 0.0, total = 0.0;
        for (int i = 0; i < raw.size(); ++i) {
            total += raw[i];
            const int bin = i % 8;
            if (bin == 0 || bin == 4) horiz += raw[i];
        }
        REQUIRE(total > 0.0);
        CHECK(horiz / total > 0.95);
    }
}

TEST_CASE("fit_pca and apply") {
    SUBCASE("white data keeps norms") {
        Rng rng(5);
        std::vector<Eigen::VectorXd> data;
        for (int i = 0; i < 400; ++i) {
            Eigen::VectorXd v(128);
            for (int d = 0; d < 128; ++d) v[d] = rng.gaussian();
            data.push_back(v);
        }
        const PcaModel pca = fit_pca(data, 128);
        // basis columns orthonormal
        const Eigen::MatrixXd gram = pca.basis.transpose() * pca.basis;
        CHECK((gram - Eigen::MatrixXd::Identity(128, 128)).cwiseAbs().maxCoeff() < 1e-6);
        for (int i = 0; i < 10; ++i)
            CHECK(pca.apply(data[i]).norm() ==
                  doctest::Approx((data[i] - pca.mean).norm()).epsilon(1e-9));
    }

    SUBCASE("rank-1 data uses a single component") {
        Rng rng(6);
        Eigen::VectorXd dir(20);
        for (int d = 0; d < 20; ++d) dir[d] = rng.gaussian();
        dir.normalize();
        std::vector<Eigen::VectorXd> data;
        for (int i = 0; i < 30; ++i) data.push_back(dir * rng.uniform(-3.0, 3.0));
        const PcaModel pca = fit_pca(data, 8);
        for (const auto& v : data) {
            const Eigen::VectorXd proj = pca.apply(v);
            CHECK(proj.tail(7).cwiseAbs().maxCoeff() < 1e-8);
        }
        CHECK(pca.basis.col(1).norm() == doctest::Approx(0.0));
    }

    SUBCASE("mean maps to zero") {
        Rng rng(7);
        std::vector<Eigen::VectorXd> data;
        for (int i = 0; i < 50; ++i) {
            Eigen::VectorXd v(10);
            for (int d = 0; d < 10; ++d) v[d] = rng.uniform(0.0, 1.0);
            data.push_back(v);
        }
        const PcaModel pca = fit_pca(data, 4);
        CHECK(pca.apply(pca.mean).norm() < 1e-10);
    }

    SUBCASE("full basis reconstructs no worse than any column-drop") {
        Rng rng(8);
        std::vector<Eigen::VectorXd> data;
        for (int i = 0; i < 60; ++i) {
            Eigen::VectorXd v(12);
            for (int d = 0; d < 12; ++d) v[d] = rng.gaussian() * (d + 1);
            data.push_back(v);
        }
        const PcaModel pca = fit_pca(data, 6);
        auto recon_mse = [&](const Eigen::MatrixXd& basis) {
            double mse = 0.0;
            for (const auto& v : data) {
                const Eigen::VectorXd centered = v - pca.mean;
                mse += (centered - basis * (basis.transpose() * centered)).squaredNorm();
            }
            return mse / data.size();
        };
        const double full = recon_mse(pca.basis);
        for (int drop = 0; drop < 6; ++drop) {
            Eigen::MatrixXd sub = pca.basis;
            sub.col(drop).setZero();
            CHECK(full <= recon_mse(sub) + 1e-9);
        }
    }
}

TEST_CASE("weighted_hist") {
    DescriptorConfig color_cfg;
    DescriptorConfig gray_cfg;
    gray_cfg.color = false;

    SUBCASE("single color puts all mass in one bin") {
        Image patch(20, 20, 3);
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) {
                patch.at(x, y, 0) = 0.8f;
                patch.at(x, y, 1) = 0.2f;
                patch.at(x, y, 2) = 0.2f;
            }
        const Eigen::VectorXd h = weighted_hist(patch, color_cfg);
        CHECK(h.sum() == doctest::Approx(1.0));
        CHECK(h.maxCoeff() == doctest::Approx(1.0));
    }

    SUBCASE("histograms are probability vectors") {
        Rng rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const Image patch = textured_patch(rng, 5 + trial * 3, trial % 2 ? 3 : 1);
            const auto& cfg = trial % 2 ? color_cfg : gray_cfg;
            const Eigen::VectorXd h = weighted_hist(patch, cfg);
            CHECK(h.sum() == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(h.minCoeff() >= 0.0);
        }
    }

    SUBCASE("center tone gets more than its pixel share") {
        // tone A only in the middle quarter, tone B elsewhere
        Image patch(32, 32, 1);
        int a_pixels = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const bool center = x >= 12 && x < 20 && y >= 12 && y < 20;
                patch.at(x, y) = center ? 0.9f : 0.1f;
                if (center) ++a_pixels;
            }
        const Eigen::VectorXd h = weighted_hist(patch, gray_cfg);
        const double a_share = static_cast<double>(a_pixels) / (32 * 32);
        const int a_bin = static_cast<int>(0.9f * 32);
        CHECK(h[a_bin] > a_share);
    }
}

TEST_CASE("phi") {
    DescriptorConfig cfg;
    cfg.color = false;
    Rng rng(10);
    const PcaModel pca = quick_pca(rng, cfg);

    Image img(100, 100, 1, 0.5f);
    // two identical textured squares and one different texture
    Rng tex(77);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            const float v = static_cast<float>(tex.uniform(0.0, 1.0));
            img.at(10 + x, 10 + y) = v;
            img.at(60 + x, 60 + y) = v;
        }
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) img.at(60 + x, 10 + y) = (x % 4 < 2) ^ (y % 4 < 2) ? 1.0f : 0.0f;

    const Rect r1({0.22, 0.22}, {0.24, 0.24});
    const Rect r2({0.72, 0.72}, {0.24, 0.24});
    const Rect r3({0.72, 0.22}, {0.24, 0.24});

    SUBCASE("deterministic and unit length") {
        const Eigen::VectorXd a = phi(img, r1, pca, cfg);
        const Eigen::VectorXd b = phi(img, r1, pca, cfg);
        CHECK((a - b).norm() == 0.0);
        CHECK(a.norm() == doctest::Approx(1.0));
        CHECK(a.size() == cfg.part_dim());
    }

    SUBCASE("copies are closer than unrelated texture") {
        const Eigen::VectorXd a = phi(img, r1, pca, cfg);
        const Eigen::VectorXd b = phi(img, r2, pca, cfg);
        const Eigen::VectorXd c = phi(img, r3, pca, cfg);
        CHECK(descriptor_distance(a, b) < descriptor_distance(a, c));
    }
}

TEST_CASE("descriptor_distance") {
    Eigen::VectorXd p(3), q(3);
    p << 1, 0, 0;
    q << 0, 1, 0;
    CHECK(descriptor_distance(p, p) == doctest::Approx(0.0));
    CHECK(descriptor_distance(p, q) == doctest::Approx(1.0));
    CHECK(descriptor_distance(p, Eigen::VectorXd(-p)) == doctest::Approx(2.0));
    CHECK(descriptor_distance(p, q) == doctest::Approx(descriptor_distance(q, p)));
    CHECK_THROWS_AS(descriptor_distance(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("assemble_feature") {
    Rng rng(11);

    SUBCASE("color dimension arithmetic") {
        DescriptorConfig cfg;
        CHECK(cfg.part_dim() == 256);
        CHECK(feature_dim(cfg, 6) == 1816);
    }
    SUBCASE("gray dimension arithmetic") {
        DescriptorConfig cfg;
        cfg.color = false;
        CHECK(cfg.part_dim() == 160);
        CHECK(feature_dim(cfg, 6) == 1144);
    }

    SUBCASE("canonical part order and missing-part error") {
        DescriptorConfig cfg;
        cfg.color = false;
        const PcaModel pca = quick_pca(rng, cfg, 20);
        const Image img = textured_patch(rng, 80, 1);
        const Rect global({0.5, 0.5}, {0.9, 0.9});

        std::vector<PartObservation> parts;
        for (int i = 0; i < 3; ++i) {
            PartObservation p;
            p.part = i;
            p.rect = Rect({0.25 + 0.2 * i, 0.5}, {0.2, 0.2});
            p.desc = phi(img, p.rect, pca, cfg);
            parts.push_back(p);
        }
        const Eigen::VectorXd canonical = assemble_feature(img, global, parts, pca, cfg);
        CHECK(canonical.size() == feature_dim(cfg, 3));

        std::swap(parts[0], parts[2]);
        const Eigen::VectorXd permuted = assemble_feature(img, global, parts, pca, cfg);
        CHECK((canonical - permuted).norm() == 0.0);

        parts.pop_back();
        parts[0].part = 2;  // indices {2,1} no longer cover 0..1
        CHECK_THROWS_AS(assemble_feature(img, global, parts, pca, cfg), data_error);
    }
}
