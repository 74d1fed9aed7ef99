#include "fishrec/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "fishrec/errors.hpp"
#include "fishrec/fft.hpp"

namespace fishrec {

namespace {

// Separable Gaussian blur with edge replication.
void gaussian_blur(std::vector<double>& buf, int w, int h, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    std::vector<double> tmp(buf.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += kernel[i + radius] * buf[static_cast<std::size_t>(y) * w + xx];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += kernel[i + radius] * tmp[static_cast<std::size_t>(yy) * w + x];
            }
            buf[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

}  // namespace

SaliencyMap pft_saliency(const Image& image, const SaliencyConfig& cfg) {
    if (image.empty()) throw data_error("pft_saliency: empty image");
    const Image gray = image.to_gray();
    const int w = gray.width(), h = gray.height();
    const int pw = next_pow2(w), ph = next_pow2(h);

    std::vector<std::complex<double>> spec(static_cast<std::size_t>(pw) * ph, {0.0, 0.0});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            spec[static_cast<std::size_t>(y) * pw + x] = {static_cast<double>(gray.at(x, y)), 0.0};

    fft2d(spec, pw, ph, false);
    for (auto& v : spec) {
        const double mag = std::abs(v);
        v = mag > 0.0 ? v / mag : std::complex<double>(0.0, 0.0);
    }
    fft2d(spec, pw, ph, true);

    SaliencyMap map;
    map.width = w;
    map.height = h;
    map.values.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            map.values[static_cast<std::size_t>(y) * w + x] = std::norm(spec[static_cast<std::size_t>(y) * pw + x]);

    gaussian_blur(map.values, w, h, cfg.sigma);
    return map;
}

std::vector<SalientPoint> nonmax_suppress(const SaliencyMap& map, const Mask& mask,
                                          const SaliencyConfig& cfg) {
    if (mask.width() != map.width || mask.height() != map.height)
        throw data_error("nonmax_suppress: mask/map dimension mismatch");
    const int w = map.width, h = map.height, r = cfg.nms_radius;
    const int r2 = r * r;

    std::vector<SalientPoint> points;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = map.at(x, y);
            bool is_max = true;
            for (int dy = -r; dy <= r && is_max; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (dx * dx + dy * dy > r2) continue;
                    const int xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    const double u = map.at(xx, yy);
                    // Ties keep only the lexicographically smallest (row, col).
                    if (u > v || (u == v && (yy < y || (yy == y && xx < x)))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max && mask.at(x, y)) points.push_back({x, y, v});
        }
    }

    std::sort(points.begin(), points.end(), [](const SalientPoint& a, const SalientPoint& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    return points;
}

std::vector<Rect> init_parts(const SaliencyMap& map, const Mask& mask, int k,
                             const SaliencyConfig& cfg) {
    const auto points = nonmax_suppress(map, mask, cfg);
    if (static_cast<int>(points.size()) < k)
        throw data_error("init_parts: only " + std::to_string(points.size()) +
                         " salient points for " + std::to_string(k) + " parts");
    std::vector<Rect> rects;
    rects.reserve(k);
    const double w = map.width, h = map.height;
    for (int i = 0; i < k; ++i) {
        Rect r;
        r.center = {(points[i].x + 0.5) / w, (points[i].y + 0.5) / h};
        r.size = {cfg.init_part_side / w, cfg.init_part_side / h};
        rects.push_back(clamp_rect(r));
    }
    return rects;
}

}  // namespace fishrec
