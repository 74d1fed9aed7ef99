#include <cmath>

#include "doctest.h"
#include "fishrec/errors.hpp"
#include "fishrec/partmodel.hpp"
#include "fishrec/rng.hpp"

using namespace fishrec;

namespace {

// gray canvas with mild deterministic background texture
Image noisy_canvas(int w, int h, std::uint64_t seed, float lo = 0.35f, float hi = 0.45f) {
    Image img(w, h, 1);
    Rng rng(seed);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform(lo, hi));
    return img;
}

// smooth two-frequency pattern; mean-shift needs a basin, not pixel noise
void plant_texture(Image& img, int cx, int cy, int side, std::uint64_t seed) {
    Rng rng(seed);
    const double fx = rng.uniform(1.0, 2.0), fy = rng.uniform(1.0, 2.0);
    const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
    const int half = side / 2;
    for (int y = cy - half; y < cy - half + side; ++y)
        for (int x = cx - half; x < cx - half + side; ++x)
            if (x >= 0 && x < img.width() && y >= 0 && y < img.height()) {
                const double u = (x - cx) / static_cast<double>(side);
                const double v = (y - cy) / static_cast<double>(side);
                img.at(x, y) = static_cast<float>(
                    0.5 + 0.24 * std::sin(2.0 * M_PI * fx * u + p1) +
                    0.24 * std::sin(2.0 * M_PI * fy * v + p2));
            }
}

PcaModel pca_for(const Image& img, const DescriptorConfig& dc, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::VectorXd> raw;
    for (int i = 0; i < 24; ++i) {
        const double sx = rng.uniform(0.2, 0.4);
        const double sy = rng.uniform(0.2, 0.4);
        Rect r({rng.uniform(sx / 2, 1 - sx / 2), rng.uniform(sy / 2, 1 - sy / 2)}, {sx, sy});
        raw.push_back(dense_grad_descriptors(crop_region(img, r), dc));
    }
    return fit_pca(raw, dc.pca_dim);
}

LearnConfig small_cfg(int k) {
    LearnConfig cfg;
    cfg.k = k;
    cfg.descriptor.color = false;
    cfg.descriptor.pca_dim = 32;
    cfg.saliency.nms_radius = 6;
    cfg.saliency.init_part_side = 24;
    return cfg;
}

Rect rect_at_px(double cx, double cy, double side, int w, int h) {
    return clamp_rect(Rect({cx / w, cy / h}, {side / w, side / h}));
}

}  // namespace

TEST_CASE("objective breakdown") {
    LearnConfig cfg = small_cfg(1);
    Image img = noisy_canvas(64, 64, 1);
    plant_texture(img, 32, 32, 20, 2);
    const PcaModel pca = pca_for(img, cfg.descriptor, 3);

    SUBCASE("single part has zero separation and discrimination") {
        PartModel model;
        model.k = 1;
        model.config = cfg;
        model.pca = pca;
        const Rect r = rect_at_px(32, 32, 20, 64, 64);
        model.layout = {{r}};
        model.appearance = {phi(img, r, pca, cfg.descriptor)};
        const auto b = objective(model, {img});
        CHECK(b.separation == 0.0);
        CHECK(b.discrimination == 0.0);
        // appearance equals the region descriptor, but the cache snaps the
        // rect to its pixel span, so allow rounding slack
        CHECK(b.fitness == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(b.total == doctest::Approx(b.fitness));
    }

    SUBCASE("identical rects double-count separation") {
        LearnConfig cfg2 = small_cfg(2);
        PartModel model;
        model.k = 2;
        model.config = cfg2;
        model.pca = pca;
        const Rect r = rect_at_px(32, 32, 20, 64, 64);
        model.layout = {{r, r}};
        const Eigen::VectorXd d = phi(img, r, pca, cfg2.descriptor);
        model.appearance = {d, d};
        const auto b = objective(model, {img});
        CHECK(b.separation == doctest::Approx(2.0));  // ordered pairs (0,1) and (1,0)
        CHECK(b.discrimination == doctest::Approx(0.0));
        CHECK(b.total ==
              doctest::Approx(cfg2.lambda_fit * b.fitness + cfg2.lambda_sep * b.separation +
                              cfg2.lambda_disc * b.discrimination));
    }
}

TEST_CASE("localize_part finds a planted patch") {
    LearnConfig cfg = small_cfg(1);
    Image img = noisy_canvas(96, 96, 11);
    plant_texture(img, 48, 48, 24, 12);
    const PcaModel pca = pca_for(img, cfg.descriptor, 13);

    const Rect target = rect_at_px(48, 48, 24, 96, 96);
    const std::vector<Eigen::VectorXd> app = {phi(img, target, pca, cfg.descriptor)};

    SUBCASE("init within 8 px converges to the plant") {
        ImageContext ctx;
        ctx.image = &img;
        ctx.rects = {rect_at_px(54, 44, 24, 96, 96)};
        localize_part(ctx, 0, app, pca, cfg);
        const double dx = ctx.rects[0].center.x * 96 - 48;
        const double dy = ctx.rects[0].center.y * 96 - 48;
        // eps_x around the fixed point, which pixel snapping can offset by
        // up to half a pixel from the plant
        CHECK(std::sqrt(dx * dx + dy * dy) <= cfg.ms_eps_px + 0.5);
    }

    SUBCASE("init at the optimum stays put") {
        ImageContext ctx;
        ctx.image = &img;
        ctx.rects = {target};
        const bool moved = localize_part(ctx, 0, app, pca, cfg);
        CHECK(!moved);
    }

    SUBCASE("optimum at the border stays feasible") {
        Image edge = noisy_canvas(96, 96, 14);
        plant_texture(edge, 6, 48, 24, 12);  // plant hangs over the left border
        ImageContext ctx;
        ctx.image = &edge;
        ctx.rects = {rect_at_px(20, 48, 24, 96, 96)};
        localize_part(ctx, 0, app, pca, cfg);
        CHECK(ctx.rects[0].feasible());
    }
}

TEST_CASE("localize_part matches the exhaustive grid oracle on tiny instances") {
    LearnConfig cfg = small_cfg(1);
    cfg.descriptor.pca_dim = 16;
    Rng rng(21);
    int checked = 0;
    for (int trial = 0; trial < 15; ++trial) {
        Image img(16, 16, 1);
        for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0.2, 0.8));
        const int tx = rng.uniform_int(7, 9), ty = rng.uniform_int(7, 9);
        plant_texture(img, tx, ty, 10, rng.next_u64());
        const PcaModel pca = pca_for(img, cfg.descriptor, rng.next_u64());

        // part side 14 leaves exactly the 3x3 integer-center grid {7,8,9}^2
        const Rect target = rect_at_px(tx, ty, 14, 16, 16);
        const std::vector<Eigen::VectorXd> app = {phi(img, target, pca, cfg.descriptor)};

        ImageContext ctx;
        ctx.image = &img;
        ctx.rects = {rect_at_px(8, 8, 14, 16, 16)};
        localize_part(ctx, 0, app, pca, cfg);
        const double got = part_local_cost(ctx, 0, ctx.rects[0], app, pca, cfg, 2.0);

        double best = 1e9;
        for (int gy = 7; gy <= 9; ++gy)
            for (int gx = 7; gx <= 9; ++gx) {
                const Rect cand = rect_at_px(gx, gy, 14, 16, 16);
                best = std::min(best, part_local_cost(ctx, 0, cand, app, pca, cfg, 2.0));
            }
        CHECK(got <= best + 1e-6);
        ++checked;
    }
    CHECK(checked == 15);
}

TEST_CASE("fit_part_size") {
    LearnConfig cfg = small_cfg(1);
    Image img = noisy_canvas(128, 128, 31);
    plant_texture(img, 64, 64, 48, 32);
    const PcaModel pca = pca_for(img, cfg.descriptor, 33);

    SUBCASE("planted pattern at the current size leaves it unchanged") {
        const Rect target = rect_at_px(64, 64, 48, 128, 128);
        const std::vector<Eigen::VectorXd> app = {phi(img, target, pca, cfg.descriptor)};
        ImageContext ctx;
        ctx.image = &img;
        ctx.rects = {target};
        const bool changed = fit_part_size(ctx, 0, app, pca, cfg);
        CHECK(!changed);
    }

    SUBCASE("pattern at twice the size pulls the rect out") {
        const Rect target = rect_at_px(64, 64, 48, 128, 128);
        const std::vector<Eigen::VectorXd> app = {phi(img, target, pca, cfg.descriptor)};
        ImageContext ctx;
        ctx.image = &img;
        ctx.rects = {rect_at_px(64, 64, 24, 128, 128)};
        fit_part_size(ctx, 0, app, pca, cfg);
        const double side = ctx.rects[0].size.x * 128;
        CHECK(side >= 48.0 / cfg.scale_base - 1.0);
        CHECK(side <= 48.0 * cfg.scale_base + 1.0);
    }

    SUBCASE("growth clamps against the image bounds") {
        Image big = noisy_canvas(64, 64, 41);
        plant_texture(big, 56, 32, 60, 42);
        const Rect near_edge = rect_at_px(56, 32, 14, 64, 64);
        const std::vector<Eigen::VectorXd> app = {phi(big, near_edge, pca, cfg.descriptor)};
        ImageContext ctx;
        ctx.image = &big;
        ctx.rects = {near_edge};
        fit_part_size(ctx, 0, app, pca, cfg);
        CHECK(ctx.rects[0].feasible());
        CHECK(ctx.rects[0].center.x == doctest::Approx(near_edge.center.x));
    }
}

TEST_CASE("learn_part_appearance") {
    LearnConfig cfg = small_cfg(2);

    SUBCASE("single part and image returns the normalized region descriptor") {
        LearnConfig c1 = small_cfg(1);
        Eigen::VectorXd d(4);
        d << 0.5, 1.0, 0.25, 0.0;
        const auto p = learn_part_appearance({d}, {Eigen::VectorXd::Unit(4, 3)}, 0, c1);
        CHECK((p - d.normalized()).norm() < 1e-12);
    }

    SUBCASE("identical regions match the single-image answer") {
        LearnConfig c1 = small_cfg(1);
        Eigen::VectorXd d(4);
        d << 0.3, 0.1, 0.9, 0.2;
        const auto p = learn_part_appearance({d, d, d}, {Eigen::VectorXd::Unit(4, 0)}, 0, c1);
        CHECK((p - d.normalized()).norm() < 1e-12);
    }

    SUBCASE("lambda_disc = 0 reduces to the mean of region descriptors") {
        LearnConfig c2 = small_cfg(3);
        c2.lambda_disc = 0.0;
        Eigen::VectorXd d1(4), d2(4);
        d1 << 1, 0, 0, 0;
        d2 << 0, 1, 0, 0;
        std::vector<Eigen::VectorXd> app = {Eigen::VectorXd::Unit(4, 2), Eigen::VectorXd::Unit(4, 3),
                                            Eigen::VectorXd::Unit(4, 1)};
        const auto p = learn_part_appearance({d1, d2}, app, 0, c2);
        CHECK((p - (d1 + d2).normalized()).norm() < 1e-12);
    }

    SUBCASE("discrimination pushes away from a fixed neighbor") {
        Eigen::VectorXd d(3);
        d << 0.6, 0.8, 0.0;  // region descriptor with a clear e1 component
        std::vector<Eigen::VectorXd> app = {Eigen::VectorXd::Unit(3, 2),  // old p_0 far away
                                            Eigen::VectorXd::Unit(3, 0)};  // fixed neighbor e1
        const auto p = learn_part_appearance({d, d}, app, 0, cfg);
        const double fitness_only_alignment = d.normalized()[0];
        CHECK(p[0] < fitness_only_alignment);
        CHECK(p.norm() == doctest::Approx(1.0));
    }

    SUBCASE("updates never increase the appearance objective") {
        Rng rng(55);
        for (int trial = 0; trial < 10; ++trial) {
            const int dim = 6, k = 3, n = 4;
            std::vector<Eigen::VectorXd> app;
            for (int j = 0; j < k; ++j) {
                Eigen::VectorXd v(dim);
                for (int i = 0; i < dim; ++i) v[i] = rng.gaussian();
                app.push_back(v.normalized());
            }
            std::vector<Eigen::VectorXd> region;
            for (int m = 0; m < n; ++m) {
                Eigen::VectorXd v(dim);
                for (int i = 0; i < dim; ++i) v[i] = rng.uniform(0.0, 1.0);
                region.push_back(v.normalized());
            }
            auto cost = [&](const Eigen::VectorXd& p) {
                double fit = 0, disc = 0;
                for (const auto& r : region) fit += descriptor_distance(p, r);
                for (int j = 1; j < k; ++j) disc += descriptor_distance(p, app[j]);
                return cfg.lambda_fit * fit - 2.0 * cfg.lambda_disc * disc;
            };
            const double before = cost(app[0]);
            const auto updated = learn_part_appearance(region, app, 0, cfg);
            CHECK(cost(updated) <= before + 1e-9);
        }
    }
}

namespace {

// tiny synthetic "objects": distinct single-lobe bumps at part positions, so
// each part cost surface has one basin
Image blob_image(const std::vector<Vec2>& centers_px, int w, int h, std::uint64_t seed) {
    Image img = noisy_canvas(w, h, seed, 0.1f, 0.2f);
    for (std::size_t i = 0; i < centers_px.size(); ++i) {
        const double sx = 2.5 + i, sy = 4.5 - i;  // distinct elongation per part
        for (int dy = -8; dy <= 8; ++dy)
            for (int dx = -8; dx <= 8; ++dx) {
                const int x = static_cast<int>(centers_px[i].x) + dx;
                const int y = static_cast<int>(centers_px[i].y) + dy;
                if (x >= 0 && x < w && y >= 0 && y < h) {
                    const double r2 = dx * dx / (2 * sx * sx) + dy * dy / (2 * sy * sy);
                    img.at(x, y) += static_cast<float>(0.7 * std::exp(-r2));
                }
            }
    }
    return img;
}

Mask ellipse_mask(int w, int h, double rx, double ry) {
    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = (x - w / 2.0) / rx, dy = (y - h / 2.0) / ry;
            if (dx * dx + dy * dy <= 1.0) m.set(x, y, true);
        }
    return m;
}

}  // namespace

TEST_CASE("train_part_model on a tiny synthetic set") {
    LearnConfig cfg = small_cfg(3);
    cfg.max_iter = 12;
    cfg.part_conv_tol = 1e-9;  // run to a joint fixed point
    cfg.saliency.init_part_side = 16;
    cfg.saliency.nms_radius = 5;

    const std::vector<Vec2> base = {{30, 48}, {64, 40}, {92, 56}};
    std::vector<Image> images;
    std::vector<Mask> masks;
    for (int m = 0; m < 4; ++m) {
        std::vector<Vec2> centers;
        for (const auto& c : base) centers.push_back({c.x + 2.0 * m, c.y + (m % 2 ? 3.0 : 0.0)});
        images.push_back(blob_image(centers, 128, 96, 100 + m));
        masks.push_back(ellipse_mask(128, 96, 58, 40));
    }

    TrainLog log;
    const PartModel model = train_part_model(images, masks, cfg, &log);

    SUBCASE("model shape and feasibility") {
        CHECK(model.k == 3);
        CHECK(model.appearance.size() == 3);
        CHECK(model.layout.size() == 4);
        for (const auto& per_image : model.layout)
            for (const auto& r : per_image) CHECK(r.feasible());
        for (const auto& p : model.appearance) CHECK(p.norm() == doctest::Approx(1.0));
    }

    SUBCASE("objective is non-increasing across iterations") {
        REQUIRE(!log.iterations.empty());
        for (std::size_t i = 1; i < log.iterations.size(); ++i)
            CHECK(log.iterations[i].total <= log.iterations[i - 1].total + 1e-9);
    }

    SUBCASE("identical images get identical layouts") {
        std::vector<Image> twins = {images[0], images[0]};
        std::vector<Mask> twin_masks = {masks[0], masks[0]};
        const PartModel twin = train_part_model(twins, twin_masks, cfg);
        REQUIRE(twin.layout.size() == 2);
        for (int j = 0; j < twin.k; ++j) {
            CHECK(twin.layout[0][j].center.x == doctest::Approx(twin.layout[1][j].center.x));
            CHECK(twin.layout[0][j].center.y == doctest::Approx(twin.layout[1][j].center.y));
            CHECK(twin.layout[0][j].size.x == doctest::Approx(twin.layout[1][j].size.x));
        }
    }

    SUBCASE("detection on a training image reproduces its stored layout") {
        const std::size_t idx = 0;
        const auto rects = detect_parts(images[log.kept[idx]], masks[log.kept[idx]], model);
        REQUIRE(rects.size() == 3);
        for (int j = 0; j < 3; ++j) {
            const double dx = (rects[j].center.x - model.layout[idx][j].center.x) * 128;
            const double dy = (rects[j].center.y - model.layout[idx][j].center.y) * 96;
            // eps_x plus one pixel: span rounding quantizes both trajectories
            CHECK(std::sqrt(dx * dx + dy * dy) <= cfg.ms_eps_px + 1.0);
            const double ratio = rects[j].size.x / model.layout[idx][j].size.x;
            CHECK(ratio >= 1.0 / (cfg.scale_base + 1e-9));
            CHECK(ratio <= cfg.scale_base + 1e-9);
        }
    }

    SUBCASE("detection is deterministic") {
        const auto r1 = detect_parts(images[1], masks[1], model);
        const auto r2 = detect_parts(images[1], masks[1], model);
        REQUIRE(r1.size() == r2.size());
        for (std::size_t j = 0; j < r1.size(); ++j) {
            CHECK(r1[j].center.x == r2[j].center.x);
            CHECK(r1[j].size.y == r2[j].size.y);
        }
    }

    SUBCASE("fewer than two usable images fails") {
        std::vector<Image> one = {images[0]};
        std::vector<Mask> one_mask = {masks[0]};
        CHECK_THROWS_AS(train_part_model(one, one_mask, cfg), data_error);
    }
}

TEST_CASE("train defaults follow the reference configuration") {
    LearnConfig cfg;
    CHECK(cfg.k == 6);
    CHECK(cfg.max_iter == 15);
    CHECK(cfg.part_conv_tol == 0.5);
    CHECK(cfg.ms_eps_px == 0.5);
    CHECK(cfg.scale_base == doctest::Approx(std::pow(2.0, 1.0 / 3.0)));
    CHECK(cfg.scale_range == 2);
    CHECK(cfg.saliency.init_part_side == 48);
}
