#include "fishrec/partmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fishrec/errors.hpp"
#include "fishrec/parallel.hpp"
#include "fishrec/rng.hpp"
#include "fishrec/simplex.hpp"

namespace fishrec {

namespace {

std::uint64_t span_key(const PixelSpan& s) {
    return (static_cast<std::uint64_t>(s.x0) << 48) | (static_cast<std::uint64_t>(s.y0) << 32) |
           (static_cast<std::uint64_t>(s.x1) << 16) | static_cast<std::uint64_t>(s.y1);
}

Eigen::VectorXd normalized_or(const Eigen::VectorXd& v, const Eigen::VectorXd& fallback) {
    const double n = v.norm();
    if (n <= 1e-12) return fallback;
    return v / n;
}

double separation_sum(const std::vector<Rect>& rects, int part, const Rect& candidate) {
    double s = 0.0;
    for (std::size_t j = 0; j < rects.size(); ++j)
        if (static_cast<int>(j) != part) s += overlap_rate(candidate, rects[j]);
    return s;
}

Rect clamp_size_for_center(Rect r, double min_size_x, double min_size_y) {
    r.size.x = std::clamp(r.size.x, min_size_x,
                          std::min({1.0, 2.0 * r.center.x, 2.0 * (1.0 - r.center.x)}));
    r.size.y = std::clamp(r.size.y, min_size_y,
                          std::min({1.0, 2.0 * r.center.y, 2.0 * (1.0 - r.center.y)}));
    return r;
}

}  // namespace

const Eigen::VectorXd& DescriptorCache::get(const Image& image, const Rect& rect,
                                            const PcaModel& pca, const DescriptorConfig& cfg) {
    const PixelSpan s = rect_pixel_span(rect, image.width(), image.height());
    const std::uint64_t key = span_key(s);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    Rect snapped;  // evaluate exactly the span the key describes
    snapped.center = {(s.x0 + s.x1) / (2.0 * image.width()), (s.y0 + s.y1) / (2.0 * image.height())};
    snapped.size = {static_cast<double>(s.x1 - s.x0) / image.width(),
                    static_cast<double>(s.y1 - s.y0) / image.height()};
    return map_.emplace(key, phi(image, clamp_rect(snapped), pca, cfg)).first->second;
}

double part_local_cost(ImageContext& ctx, int part, const Rect& rect,
                       const std::vector<Eigen::VectorXd>& appearance, const PcaModel& pca,
                       const LearnConfig& cfg, double sep_factor) {
    const Eigen::VectorXd& desc = ctx.cache.get(*ctx.image, rect, pca, cfg.descriptor);
    const double fit = descriptor_distance(appearance[part], desc);
    const double sep = separation_sum(ctx.rects, part, rect);
    return cfg.lambda_fit * fit + sep_factor * cfg.lambda_sep * sep;
}

bool localize_part(ImageContext& ctx, int part, const std::vector<Eigen::VectorXd>& appearance,
                   const PcaModel& pca, const LearnConfig& cfg) {
    const int w = ctx.image->width(), h = ctx.image->height();
    const Rect start = ctx.rects[part];
    Rect cur = start;

    auto steer_cost = [&](const Rect& r) {
        return part_local_cost(ctx, part, r, appearance, pca, cfg, 1.0);
    };
    auto guard_cost = [&](const Rect& r) {
        return part_local_cost(ctx, part, r, appearance, pca, cfg, 2.0);
    };

    auto at_center_px = [&](double cx, double cy) {
        Rect r = cur;
        r.center = {cx / w, cy / h};
        return clamp_rect(r);
    };

    double cur_guard = guard_cost(cur);
    for (int iter = 0; iter < cfg.ms_max_iter; ++iter) {
        const double cx = cur.center.x * w, cy = cur.center.y * h;

        // finite-difference gradient of the local cost under 1-pixel shifts
        const double gx = 0.5 * (steer_cost(at_center_px(cx + 1, cy)) -
                                 steer_cost(at_center_px(cx - 1, cy)));
        const double gy = 0.5 * (steer_cost(at_center_px(cx, cy + 1)) -
                                 steer_cost(at_center_px(cx, cy - 1)));
        if (gx == 0.0 && gy == 0.0) break;

        // kernel-weighted mean shift over the pixels of the current region
        const PixelSpan span = rect_pixel_span(cur, w, h);
        const double hx = std::max(0.5 * (span.x1 - span.x0), 0.5);
        const double hy = std::max(0.5 * (span.y1 - span.y0), 0.5);
        double num_x = 0, num_y = 0, den = 0;
        for (int py = span.y0; py < span.y1; ++py) {
            for (int px = span.x0; px < span.x1; ++px) {
                const double dx = px + 0.5 - cx, dy = py + 0.5 - cy;
                const double k = 1.0 - (dx * dx) / (hx * hx) - (dy * dy) / (hy * hy);
                if (k <= 0.0) continue;
                const double wgt = -(gx * dx + gy * dy);  // descent-aligned sample weight
                if (wgt <= 0.0) continue;
                num_x += k * wgt * dx;
                num_y += k * wgt * dy;
                den += k * wgt;
            }
        }
        if (den <= 0.0) break;
        const double sx = num_x / den, sy = num_y / den;
        if (std::sqrt(sx * sx + sy * sy) < cfg.ms_eps_px) break;

        const Rect cand = at_center_px(cx + sx, cy + sy);
        const double cand_guard = guard_cost(cand);
        if (cand_guard > cur_guard) break;
        cur = cand;
        cur_guard = cand_guard;
    }

    // greedy one-pixel refinement; keeps the accepted cost at the local
    // integer-grid optimum
    for (int round = 0; round < 20; ++round) {
        const double cx = cur.center.x * w, cy = cur.center.y * h;
        Rect best = cur;
        double best_guard = cur_guard;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const Rect cand = at_center_px(cx + dx, cy + dy);
                const double g = guard_cost(cand);
                if (g < best_guard - 1e-12) {
                    best_guard = g;
                    best = cand;
                }
            }
        if (best_guard >= cur_guard - 1e-12) break;
        cur = best;
        cur_guard = best_guard;
    }

    const bool moved = cur.center.x != start.center.x || cur.center.y != start.center.y;
    ctx.rects[part] = cur;
    return moved;
}

bool fit_part_size(ImageContext& ctx, int part, const std::vector<Eigen::VectorXd>& appearance,
                   const PcaModel& pca, const LearnConfig& cfg) {
    const int w = ctx.image->width(), h = ctx.image->height();
    const double min_sx = static_cast<double>(cfg.min_part_px) / w;
    const double min_sy = static_cast<double>(cfg.min_part_px) / h;
    const Rect start = ctx.rects[part];
    Rect cur = start;

    auto steer_cost = [&](const Rect& r) {
        return part_local_cost(ctx, part, r, appearance, pca, cfg, 1.0);
    };
    auto guard_cost = [&](const Rect& r) {
        return part_local_cost(ctx, part, r, appearance, pca, cfg, 2.0);
    };
    auto scaled = [&](const Rect& base, double factor) {
        Rect r = base;
        r.size.x *= factor;
        r.size.y *= factor;
        return clamp_size_for_center(r, min_sx, min_sy);
    };

    double cur_guard = guard_cost(cur);
    for (int iter = 0; iter < cfg.size_max_iter; ++iter) {
        const double c0 = steer_cost(cur);
        double num = 0.0, den = 0.0;
        for (int om = -cfg.scale_range; om <= cfg.scale_range; ++om) {
            if (om == 0) continue;
            const double improvement = c0 - steer_cost(scaled(cur, std::pow(cfg.scale_base, om)));
            if (improvement <= 0.0) continue;
            const double kern = std::exp(-0.5 * om * om);  // Gaussian scale kernel
            num += kern * improvement * om;
            den += kern * improvement;
        }
        if (den <= 0.0) break;
        const double rp = num / den;
        if (std::abs(rp) < 0.1) break;

        const Rect cand = scaled(cur, std::pow(cfg.scale_base, rp));
        const double cand_guard = guard_cost(cand);
        if (cand_guard > cur_guard) break;
        if (cand.size.x == cur.size.x && cand.size.y == cur.size.y) break;
        cur = cand;
        cur_guard = cand_guard;
    }

    const bool changed = cur.size.x != start.size.x || cur.size.y != start.size.y;
    ctx.rects[part] = cur;
    return changed;
}

Eigen::VectorXd learn_part_appearance(const std::vector<Eigen::VectorXd>& region_descs,
                                      const std::vector<Eigen::VectorXd>& appearance, int part,
                                      const LearnConfig& cfg) {
    if (region_descs.empty()) throw data_error("learn_part_appearance: no region descriptors");
    const int dim = static_cast<int>(region_descs[0].size());
    const int k = static_cast<int>(appearance.size());
    const Eigen::VectorXd& old = appearance[part];

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& d : region_descs) mean += d;
    const Eigen::VectorXd mean_candidate = normalized_or(mean, old);

    // Without discrimination pressure the objective is pure fitness and the
    // normalized mean of the region descriptors is the exact minimizer.
    if (k <= 1 || cfg.lambda_disc == 0.0) return mean_candidate;

    auto eq23_cost = [&](const Eigen::VectorXd& p) {
        double fit = 0.0;
        for (const auto& d : region_descs) fit += descriptor_distance(p, d);
        double disc = 0.0;
        for (int j = 0; j < k; ++j)
            if (j != part) disc += descriptor_distance(p, appearance[j]);
        return cfg.lambda_fit * fit - 2.0 * cfg.lambda_disc * disc;
    };

    // LP over p in [-1,1]^dim and scalar c (split into c+ - c-), substituting
    // y = p + 1 so all variables are non-negative:
    //   min q.y - c+ + c-   s.t.  -i_m.y + c+ - c- <= -sum(i_m),  y <= 2
    Eigen::VectorXd q = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < k; ++j)
        if (j != part) q += appearance[j];

    const int m = static_cast<int>(region_descs.size());
    LpProblem lp;
    lp.c.resize(dim + 2);
    lp.c.head(dim) = q;
    lp.c[dim] = -1.0;
    lp.c[dim + 1] = 1.0;
    lp.a.resize(m, dim + 2);
    lp.b.resize(m);
    for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd unit = region_descs[i].normalized();
        lp.a.row(i).head(dim) = -unit.transpose();
        lp.a(i, dim) = 1.0;
        lp.a(i, dim + 1) = -1.0;
        lp.b[i] = -unit.sum();
    }
    lp.upper = Eigen::VectorXd::Constant(dim + 2, std::numeric_limits<double>::infinity());
    lp.upper.head(dim).setConstant(2.0);

    Eigen::VectorXd candidate;
    const LpResult res = solve_lp(lp);
    if (res.status == LpResult::Status::optimal) {
        candidate = normalized_or(res.x.head(dim) - Eigen::VectorXd::Ones(dim), mean_candidate);
    } else {
        candidate = mean_candidate;
    }

    // keep whichever of {LP result, mean, previous} minimizes the appearance
    // objective; never accept an increase
    double best_cost = eq23_cost(old);
    Eigen::VectorXd best = old;
    const Eigen::VectorXd* candidates[] = {&candidate, &mean_candidate};
    for (const Eigen::VectorXd* c : candidates) {
        const double cost = eq23_cost(*c);
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best = *c;
        }
    }
    return best;
}

namespace {

ObjectiveBreakdown breakdown_from_contexts(std::vector<ImageContext>& ctxs,
                                           const std::vector<Eigen::VectorXd>& appearance,
                                           const PcaModel& pca, const LearnConfig& cfg) {
    ObjectiveBreakdown b;
    const int k = static_cast<int>(appearance.size());
    for (auto& ctx : ctxs) {
        for (int i = 0; i < k; ++i) {
            b.fitness += descriptor_distance(
                appearance[i], ctx.cache.get(*ctx.image, ctx.rects[i], pca, cfg.descriptor));
            b.separation += separation_sum(ctx.rects, i, ctx.rects[i]);
        }
    }
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (i != j) b.discrimination -= descriptor_distance(appearance[i], appearance[j]);
    b.total = cfg.lambda_fit * b.fitness + cfg.lambda_sep * b.separation +
              cfg.lambda_disc * b.discrimination;
    return b;
}

struct SeedInfo {
    std::vector<SalientPoint> points;  // top-k salient points
    double saliency_sum = 0.0;
    bool usable = false;
};

SeedInfo seed_image(const Image& image, const Mask& mask, const LearnConfig& cfg) {
    SeedInfo info;
    const SaliencyMap map = pft_saliency(image, cfg.saliency);
    auto pts = nonmax_suppress(map, mask, cfg.saliency);
    if (static_cast<int>(pts.size()) < cfg.k) return info;
    pts.resize(cfg.k);
    for (const auto& p : pts) info.saliency_sum += p.value;
    info.points = std::move(pts);
    info.usable = true;
    return info;
}

std::vector<Vec2> to_normalized(const std::vector<SalientPoint>& pts, int w, int h) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back({(p.x + 0.5) / w, (p.y + 0.5) / h});
    return out;
}

}  // namespace

ObjectiveBreakdown objective(const PartModel& model, const std::vector<Image>& images) {
    if (images.size() != model.layout.size())
        throw data_error("objective: image/layout count mismatch");
    std::vector<ImageContext> ctxs(images.size());
    for (std::size_t m = 0; m < images.size(); ++m) {
        ctxs[m].image = &images[m];
        ctxs[m].rects = model.layout[m];
    }
    return breakdown_from_contexts(ctxs, model.appearance, model.pca, model.config);
}

PartModel train_part_model(const std::vector<Image>& images, const std::vector<Mask>& masks,
                           const LearnConfig& cfg, TrainLog* log, int workers) {
    if (images.size() != masks.size()) throw data_error("train_part_model: image/mask mismatch");
    TrainLog local_log;
    TrainLog& out_log = log ? *log : local_log;

    // seed every image: saliency map, top-k points
    std::vector<SeedInfo> seeds(images.size());
    parallel_for(images.size(), workers,
                 [&](std::size_t m) { seeds[m] = seed_image(images[m], masks[m], cfg); });

    std::vector<std::size_t> kept;
    for (std::size_t m = 0; m < images.size(); ++m) {
        if (seeds[m].usable) {
            kept.push_back(m);
        } else {
            out_log.dropped.push_back(m);
            out_log.warnings.push_back("image " + std::to_string(m) +
                                       " dropped: cannot seed " + std::to_string(cfg.k) + " parts");
        }
    }
    if (kept.size() < 2) throw data_error("train_part_model: fewer than 2 usable images");
    out_log.kept = kept;

    // reference image: largest top-k saliency mass
    std::size_t ref = kept[0];
    for (std::size_t m : kept)
        if (seeds[m].saliency_sum > seeds[ref].saliency_sum) ref = m;

    PartModel model;
    model.k = cfg.k;
    model.config = cfg;
    model.reference_index = static_cast<int>(ref);
    model.reference = make_part_set(
        to_normalized(seeds[ref].points, images[ref].width(), images[ref].height()), masks[ref]);

    const int n = static_cast<int>(kept.size());
    std::vector<ImageContext> ctxs(n);

    // initial layouts: associate each image's salient points to the reference
    std::vector<Rect> ref_rects(cfg.k);
    {
        const Image& rimg = images[ref];
        for (int j = 0; j < cfg.k; ++j) {
            Rect r;
            r.center = {(seeds[ref].points[j].x + 0.5) / rimg.width(),
                        (seeds[ref].points[j].y + 0.5) / rimg.height()};
            r.size = {cfg.saliency.init_part_side / static_cast<double>(rimg.width()),
                      cfg.saliency.init_part_side / static_cast<double>(rimg.height())};
            ref_rects[j] = clamp_rect(r);
        }
    }
    model.reference_rects = ref_rects;

    parallel_for(kept.size(), workers, [&](std::size_t idx) {
        const std::size_t m = kept[idx];
        ctxs[idx].image = &images[m];
        ctxs[idx].rects.assign(cfg.k, Rect{});
        const auto cand_pts = to_normalized(seeds[m].points, images[m].width(), images[m].height());
        std::vector<int> match(cfg.k, -1);
        if (m == ref) {
            std::iota(match.begin(), match.end(), 0);
        } else {
            const PartSet cand = make_part_set(cand_pts, masks[m]);
            const auto assign = relax_label(cand, model.reference, cfg.assoc);
            match = assign;
        }
        std::vector<char> filled(cfg.k, 0);
        for (int i = 0; i < cfg.k; ++i) {
            const int j = match[i];
            if (j < 0) continue;
            Rect r;
            r.center = cand_pts[i];
            r.size = {cfg.saliency.init_part_side / static_cast<double>(images[m].width()),
                      cfg.saliency.init_part_side / static_cast<double>(images[m].height())};
            ctxs[idx].rects[j] = clamp_rect(r);
            filled[j] = 1;
        }
        for (int j = 0; j < cfg.k; ++j)  // unmatched parts borrow the reference rect
            if (!filled[j]) ctxs[idx].rects[j] = clamp_rect(ref_rects[j]);
    });

    // PCA on the raw gradient blocks of the initial parts, frozen afterwards
    {
        std::vector<Eigen::VectorXd> raw(static_cast<std::size_t>(n) * cfg.k);
        parallel_for(kept.size(), workers, [&](std::size_t idx) {
            for (int j = 0; j < cfg.k; ++j) {
                const Image patch = crop_region(*ctxs[idx].image, ctxs[idx].rects[j]);
                raw[idx * cfg.k + j] = dense_grad_descriptors(patch, cfg.descriptor);
            }
        });
        if (static_cast<int>(raw.size()) > cfg.pca_fit_cap) {
            Rng rng(derive_seed(cfg.seed, 0x9c7a));
            std::vector<std::size_t> order(raw.size());
            std::iota(order.begin(), order.end(), 0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.pca_fit_cap); ++i) {
                const std::size_t j = i + rng.uniform_int(0, static_cast<int>(order.size() - i - 1));
                std::swap(order[i], order[j]);
            }
            std::vector<Eigen::VectorXd> sub;
            sub.reserve(cfg.pca_fit_cap);
            for (int i = 0; i < cfg.pca_fit_cap; ++i) sub.push_back(std::move(raw[order[i]]));
            model.pca = fit_pca(sub, cfg.descriptor.pca_dim);
        } else {
            model.pca = fit_pca(raw, cfg.descriptor.pca_dim);
        }
    }

    // initial appearances: average region descriptor per part
    model.appearance.assign(cfg.k, Eigen::VectorXd());
    for (int j = 0; j < cfg.k; ++j) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg.descriptor.part_dim());
        for (int idx = 0; idx < n; ++idx)
            acc += ctxs[idx].cache.get(*ctxs[idx].image, ctxs[idx].rects[j], model.pca,
                                       cfg.descriptor);
        model.appearance[j] = normalized_or(acc, Eigen::VectorXd::Ones(acc.size()).normalized());
    }

    // alternating optimization: locations, sizes, appearances
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        parallel_for(ctxs.size(), workers, [&](std::size_t idx) {
            for (int j = 0; j < cfg.k; ++j)
                localize_part(ctxs[idx], j, model.appearance, model.pca, cfg);
        });
        parallel_for(ctxs.size(), workers, [&](std::size_t idx) {
            for (int j = 0; j < cfg.k; ++j)
                fit_part_size(ctxs[idx], j, model.appearance, model.pca, cfg);
        });

        double delta_p = 0.0;
        for (int j = 0; j < cfg.k; ++j) {
            std::vector<Eigen::VectorXd> region;
            region.reserve(ctxs.size());
            for (auto& ctx : ctxs)
                region.push_back(ctx.cache.get(*ctx.image, ctx.rects[j], model.pca, cfg.descriptor));
            Eigen::VectorXd updated = learn_part_appearance(region, model.appearance, j, cfg);
            delta_p += (updated - model.appearance[j]).norm();
            model.appearance[j] = std::move(updated);
        }

        out_log.iterations.push_back(
            breakdown_from_contexts(ctxs, model.appearance, model.pca, cfg));
        if (delta_p <= cfg.part_conv_tol) {
            out_log.converged = true;
            break;
        }
    }

    model.layout.resize(n);
    for (int idx = 0; idx < n; ++idx) model.layout[idx] = ctxs[idx].rects;

    model.mean_layout.assign(cfg.k, Rect{});
    for (int j = 0; j < cfg.k; ++j) {
        Vec2 c{0, 0}, s{0, 0};
        for (int idx = 0; idx < n; ++idx) {
            c = c + model.layout[idx][j].center;
            s = s + model.layout[idx][j].size;
        }
        model.mean_layout[j] =
            clamp_rect(Rect{c * (1.0 / n), s * (1.0 / n)});
    }
    return model;
}

std::vector<Rect> detect_parts(const Image& image, const Mask& mask, const PartModel& model) {
    const LearnConfig& cfg = model.config;
    ImageContext ctx;
    ctx.image = &image;
    ctx.rects.assign(cfg.k, Rect{});

    bool seeded = false;
    try {
        const SeedInfo seed = seed_image(image, mask, cfg);
        if (seed.usable) {
            const auto cand_pts = to_normalized(seed.points, image.width(), image.height());
            const PartSet cand = make_part_set(cand_pts, mask);
            const auto match = relax_label(cand, model.reference, cfg.assoc);
            std::vector<char> filled(cfg.k, 0);
            for (int i = 0; i < cfg.k && i < static_cast<int>(match.size()); ++i) {
                const int j = match[i];
                if (j < 0) continue;
                Rect r;
                r.center = cand_pts[i];
                // same seed size as training so re-detection replays the
                // training dynamics on a converged model
                r.size = {cfg.saliency.init_part_side / static_cast<double>(image.width()),
                          cfg.saliency.init_part_side / static_cast<double>(image.height())};
                ctx.rects[j] = clamp_rect(r);
                filled[j] = 1;
            }
            for (int j = 0; j < cfg.k; ++j)
                if (!filled[j]) ctx.rects[j] = model.mean_layout[j];
            seeded = true;
        }
    } catch (const std::exception&) {
        seeded = false;
    }
    if (!seeded) ctx.rects = model.mean_layout;

    for (int round = 0; round < 10; ++round) {
        bool changed = false;
        for (int j = 0; j < cfg.k; ++j)
            changed |= localize_part(ctx, j, model.appearance, model.pca, cfg);
        for (int j = 0; j < cfg.k; ++j)
            changed |= fit_part_size(ctx, j, model.appearance, model.pca, cfg);
        if (!changed) break;
    }
    return ctx.rects;
}

}  // namespace fishrec
