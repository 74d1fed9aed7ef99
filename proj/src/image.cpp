#include "fishrec/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fishrec/errors.hpp"

namespace fishrec {

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

Image::Image(int width, int height, int channels, float fill)
    : w_(width), h_(height), c_(channels),
      data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || (channels != 1 && channels != 3))
        throw std::invalid_argument("bad image dimensions");
}

Image Image::to_gray() const {
    if (c_ == 1) return *this;
    Image g(w_, h_, 1);
    for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x)
            g.at(x, y) = 0.299f * at(x, y, 0) + 0.587f * at(x, y, 1) + 0.114f * at(x, y, 2);
    return g;
}

Mask::Mask(int width, int height, bool fill)
    : w_(width), h_(height),
      data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto v : data_) n += v != 0;
    return n;
}

bool Mask::bbox(int& x0, int& y0, int& x1, int& y1) const {
    x0 = w_;
    y0 = h_;
    x1 = 0;
    y1 = 0;
    bool any = false;
    for (int y = 0; y < h_; ++y) {
        for (int x = 0; x < w_; ++x) {
            if (!at(x, y)) continue;
            any = true;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x + 1);
            y1 = std::max(y1, y + 1);
        }
    }
    return any;
}

bool Rect::feasible(double eps) const {
    auto axis_ok = [eps](double c, double s) {
        return s >= -eps && s <= 1.0 + eps && c - 0.5 * s >= -eps && c + 0.5 * s <= 1.0 + eps;
    };
    return axis_ok(center.x, size.x) && axis_ok(center.y, size.y);
}

Rect clamp_rect(Rect r) {
    r.size.x = std::clamp(r.size.x, 0.0, 1.0);
    r.size.y = std::clamp(r.size.y, 0.0, 1.0);
    r.center.x = std::clamp(r.center.x, 0.5 * r.size.x, 1.0 - 0.5 * r.size.x);
    r.center.y = std::clamp(r.center.y, 0.5 * r.size.y, 1.0 - 0.5 * r.size.y);
    return r;
}

double overlap_rate(const Rect& a, const Rect& b) {
    const double ax0 = a.center.x - 0.5 * a.size.x, ax1 = a.center.x + 0.5 * a.size.x;
    const double ay0 = a.center.y - 0.5 * a.size.y, ay1 = a.center.y + 0.5 * a.size.y;
    const double bx0 = b.center.x - 0.5 * b.size.x, bx1 = b.center.x + 0.5 * b.size.x;
    const double by0 = b.center.y - 0.5 * b.size.y, by1 = b.center.y + 0.5 * b.size.y;

    const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    const double inter = iw * ih;
    const double uni = a.size.x * a.size.y + b.size.x * b.size.y - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

namespace {
int round_half_away(double v) { return static_cast<int>(std::llround(v)); }
}  // namespace

PixelSpan rect_pixel_span(const Rect& rect, int w, int h) {
    int x0 = round_half_away((rect.center.x - 0.5 * rect.size.x) * w);
    int x1 = round_half_away((rect.center.x + 0.5 * rect.size.x) * w);
    int y0 = round_half_away((rect.center.y - 0.5 * rect.size.y) * h);
    int y1 = round_half_away((rect.center.y + 0.5 * rect.size.y) * h);
    x0 = std::clamp(x0, 0, w - 1);
    y0 = std::clamp(y0, 0, h - 1);
    x1 = std::clamp(x1, x0 + 1, w);
    y1 = std::clamp(y1, y0 + 1, h);
    return {x0, y0, x1, y1};
}

Image crop_region(const Image& image, const Rect& rect) {
    if (image.empty()) throw std::invalid_argument("crop_region: empty image");
    if (!rect.feasible()) throw std::invalid_argument("crop_region: infeasible rect");
    const PixelSpan s = rect_pixel_span(rect, image.width(), image.height());
    Image out(s.x1 - s.x0, s.y1 - s.y0, image.channels());
    for (int y = s.y0; y < s.y1; ++y)
        for (int x = s.x0; x < s.x1; ++x)
            for (int c = 0; c < image.channels(); ++c)
                out.at(x - s.x0, y - s.y0, c) = image.at(x, y, c);
    return out;
}

Image resample_bilinear(const Image& img, int new_w, int new_h) {
    Image out(new_w, new_h, img.channels());
    const double sx = static_cast<double>(img.width()) / new_w;
    const double sy = static_cast<double>(img.height()) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height() - 1);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < new_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width() - 1);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < img.channels(); ++c) {
                const double top = img.at(x0, y0, c) * (1 - wx) + img.at(x1, y0, c) * wx;
                const double bot = img.at(x0, y1, c) * (1 - wx) + img.at(x1, y1, c) * wx;
                out.at(x, y, c) = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

Mask resample_nearest(const Mask& mask, int new_w, int new_h) {
    Mask out(new_w, new_h);
    const double sx = static_cast<double>(mask.width()) / new_w;
    const double sy = static_cast<double>(mask.height()) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const int src_y = std::clamp(static_cast<int>((y + 0.5) * sy), 0, mask.height() - 1);
        for (int x = 0; x < new_w; ++x) {
            const int src_x = std::clamp(static_cast<int>((x + 0.5) * sx), 0, mask.width() - 1);
            out.set(x, y, mask.at(src_x, src_y));
        }
    }
    return out;
}

std::pair<Image, Mask> rescale_to_bbox(const Image& image, const Mask& mask, int max_side) {
    int x0, y0, x1, y1;
    if (!mask.bbox(x0, y0, x1, y1))
        throw data_error("rescale_to_bbox: empty mask, sample unusable");

    Image img = image;
    Mask msk = mask;
    for (int pass = 0; pass < 4; ++pass) {
        const int bw = x1 - x0, bh = y1 - y0;
        const int longest = std::max(bw, bh);
        if (longest <= max_side) break;
        const double f = static_cast<double>(max_side) / longest;
        const int nw = std::max(1, static_cast<int>(std::llround(img.width() * f)));
        const int nh = std::max(1, static_cast<int>(std::llround(img.height() * f)));
        img = resample_bilinear(img, nw, nh);
        msk = resample_nearest(msk, nw, nh);
        if (!msk.bbox(x0, y0, x1, y1))
            throw data_error("rescale_to_bbox: mask vanished during rescale");
    }
    return {std::move(img), std::move(msk)};
}

Rect mask_bbox_rect(const Mask& mask) {
    int x0, y0, x1, y1;
    if (!mask.bbox(x0, y0, x1, y1)) throw data_error("mask_bbox_rect: empty mask");
    const double w = mask.width(), h = mask.height();
    Rect r;
    r.center = {(x0 + x1) / (2.0 * w), (y0 + y1) / (2.0 * h)};
    r.size = {(x1 - x0) / w, (y1 - y0) / h};
    return clamp_rect(r);
}

}  // namespace fishrec
