#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fishrec {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const;
};

// Row-major raster with interleaved channels (1 = grayscale, 3 = RGB),
// intensities in [0,1]. Immutable by convention once handed to the pipeline.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f);

    int width() const { return w_; }
    int height() const { return h_; }
    int channels() const { return c_; }
    bool empty() const { return w_ == 0 || h_ == 0; }

    float& at(int x, int y, int ch = 0) { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]; }
    float at(int x, int y, int ch = 0) const { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    // Rec. 601 luma for color inputs; identity for grayscale.
    Image to_gray() const;

private:
    int w_ = 0, h_ = 0, c_ = 1;
    std::vector<float> data_;
};

// Boolean raster paired with an Image of the same dimensions.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false);

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty() const { return w_ == 0 || h_ == 0; }

    bool at(int x, int y) const { return data_[static_cast<std::size_t>(y) * w_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * w_ + x] = v ? 1 : 0; }

    std::size_t count() const;

    // Tight bounding box of true pixels as {x0, y0, x1, y1}, exclusive on the
    // far side. Returns false when the mask has no foreground.
    bool bbox(int& x0, int& y0, int& x1, int& y1) const;

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

private:
    int w_ = 0, h_ = 0;
    std::vector<std::uint8_t> data_;
};

// Axis-aligned rectangle in normalized image coordinates: center and size
// both live in [0,1]^2 and the rectangle must stay inside the unit square.
struct Rect {
    Vec2 center;
    Vec2 size;

    Rect() = default;
    Rect(Vec2 c, Vec2 s) : center(c), size(s) {}

    bool feasible(double eps = 1e-9) const;
};

// Projects a rect onto the feasible set: size is clipped to [0,1] first, then
// the center is translated minimally so the rect fits the unit square.
Rect clamp_rect(Rect r);

// Intersection-over-union of two rects; 0 when the union has zero area.
double overlap_rate(const Rect& a, const Rect& b);

// Extracts the pixel patch covered by a feasible rect. Edges round half away
// from zero; degenerate spans become 1 pixel. Throws std::invalid_argument on
// an infeasible rect.
Image crop_region(const Image& image, const Rect& rect);

// Integer pixel span of a rect on a w x h raster: {x0, y0, x1, y1}, far side
// exclusive, at least 1 pixel each way. Shared by crop_region and callers
// that key caches on the rounded rect.
struct PixelSpan {
    int x0, y0, x1, y1;
};
PixelSpan rect_pixel_span(const Rect& rect, int w, int h);

// Downscales image and mask together so the tight mask bounding box fits in
// max_side x max_side, preserving aspect ratio; never upscales. Throws
// data_error on an empty mask.
std::pair<Image, Mask> rescale_to_bbox(const Image& image, const Mask& mask, int max_side = 200);

Image resample_bilinear(const Image& img, int new_w, int new_h);
Mask resample_nearest(const Mask& mask, int new_w, int new_h);

// Normalized rect covering the mask's tight bounding box.
Rect mask_bbox_rect(const Mask& mask);

}  // namespace fishrec
