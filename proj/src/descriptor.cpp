#include "fishrec/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fishrec/errors.hpp"

namespace fishrec {

namespace {

constexpr int kOrientBins = 8;
constexpr int kCellGrid = 4;  // 4x4 cells per descriptor

int grid_positions(const DescriptorConfig& cfg) {
    // descriptor centers where the full window fits inside the canvas
    const int half = cfg.desc_window / 2;
    int count = 0;
    for (int c = half; c + half <= cfg.canvas; c += cfg.grid_step) ++count;
    return count;
}

void rgb_to_hsv(float r, float g, float b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r) h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
    else h = 60.0 * ((r - g) / d + 4.0);
}

}  // namespace

int raw_grad_dim(const DescriptorConfig& cfg) {
    const int n = grid_positions(cfg);
    return n * n * kCellGrid * kCellGrid * kOrientBins;
}

Eigen::VectorXd dense_grad_descriptors(const Image& patch, const DescriptorConfig& cfg) {
    if (patch.empty()) throw data_error("dense_grad_descriptors: empty patch");
    const Image canvas = resample_bilinear(patch.to_gray(), cfg.canvas, cfg.canvas);
    const int n = cfg.canvas;

    // per-orientation magnitude planes with summed-area tables
    std::vector<std::vector<double>> sat(kOrientBins,
                                         std::vector<double>(static_cast<std::size_t>(n + 1) * (n + 1), 0.0));
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, n - 1);
            const int ym = std::max(y - 1, 0), yp = std::min(y + 1, n - 1);
            const double gx = canvas.at(xp, y) - canvas.at(xm, y);
            const double gy = canvas.at(x, yp) - canvas.at(x, ym);
            const double mag = std::sqrt(gx * gx + gy * gy);
            int bin = 0;
            if (mag > 0.0) {
                double ang = std::atan2(gy, gx);
                if (ang < 0) ang += 2.0 * M_PI;
                bin = std::min(kOrientBins - 1,
                               static_cast<int>(ang / (2.0 * M_PI) * kOrientBins));
            }
            for (int b = 0; b < kOrientBins; ++b) {
                const double v = b == bin ? mag : 0.0;
                sat[b][static_cast<std::size_t>(y + 1) * (n + 1) + (x + 1)] =
                    v + sat[b][static_cast<std::size_t>(y) * (n + 1) + (x + 1)] +
                    sat[b][static_cast<std::size_t>(y + 1) * (n + 1) + x] -
                    sat[b][static_cast<std::size_t>(y) * (n + 1) + x];
            }
        }
    }
    auto box_sum = [&](int b, int x0, int y0, int x1, int y1) {
        return sat[b][static_cast<std::size_t>(y1) * (n + 1) + x1] -
               sat[b][static_cast<std::size_t>(y0) * (n + 1) + x1] -
               sat[b][static_cast<std::size_t>(y1) * (n + 1) + x0] +
               sat[b][static_cast<std::size_t>(y0) * (n + 1) + x0];
    };

    const int half = cfg.desc_window / 2;
    const int cell = cfg.desc_window / kCellGrid;
    const int desc_len = kCellGrid * kCellGrid * kOrientBins;
    Eigen::VectorXd raw(raw_grad_dim(cfg));
    int offset = 0;
    for (int cy = half; cy + half <= n; cy += cfg.grid_step) {
        for (int cx = half; cx + half <= n; cx += cfg.grid_step) {
            Eigen::VectorXd d(desc_len);
            int idx = 0;
            for (int gy = 0; gy < kCellGrid; ++gy)
                for (int gx = 0; gx < kCellGrid; ++gx) {
                    const int x0 = cx - half + gx * cell, y0 = cy - half + gy * cell;
                    for (int b = 0; b < kOrientBins; ++b)
                        d[idx++] = box_sum(b, x0, y0, x0 + cell, y0 + cell);
                }
            // standard clipped renormalization; zero descriptors stay zero
            double nrm = d.norm();
            if (nrm > 0.0) {
                d /= nrm;
                d = d.cwiseMin(0.2);
                nrm = d.norm();
                if (nrm > 0.0) d /= nrm;
            }
            raw.segment(offset, desc_len) = d;
            offset += desc_len;
        }
    }
    return raw;
}

PcaModel fit_pca(const std::vector<Eigen::VectorXd>& raw, int out_dim) {
    if (raw.empty()) throw data_error("fit_pca: no training vectors");
    const int dim = static_cast<int>(raw[0].size());
    const int n = static_cast<int>(raw.size());

    PcaModel model;
    model.mean = Eigen::VectorXd::Zero(dim);
    for (const auto& v : raw) model.mean += v;
    model.mean /= static_cast<double>(n);

    const int out = std::min(out_dim, dim);
    model.basis = Eigen::MatrixXd::Zero(dim, out_dim);

    if (n <= dim) {
        // Gram trick: eigenvectors of X X^T lift to covariance eigenvectors.
        Eigen::MatrixXd x(n, dim);
        for (int i = 0; i < n; ++i) x.row(i) = (raw[i] - model.mean).transpose();
        Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const double floor = std::max(1e-12, eig.eigenvalues().maxCoeff() * 1e-12);
        int col = 0;
        for (int i = n - 1; i >= 0 && col < out; --i) {  // descending eigenvalues
            const double lambda = eig.eigenvalues()(i);
            if (lambda <= floor) break;
            Eigen::VectorXd dir = x.transpose() * eig.eigenvectors().col(i) / std::sqrt(lambda);
            model.basis.col(col++) = dir;
        }
    } else {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& v : raw) {
            const Eigen::VectorXd d = v - model.mean;
            cov.noalias() += d * d.transpose();
        }
        cov /= static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const double floor = std::max(1e-12, eig.eigenvalues().maxCoeff() * 1e-12);
        int col = 0;
        for (int i = dim - 1; i >= 0 && col < out; --i) {
            if (eig.eigenvalues()(i) <= floor) break;
            model.basis.col(col++) = eig.eigenvectors().col(i);
        }
    }

    // fix signs so repeated fits of the same data are bit-stable
    for (int c = 0; c < model.basis.cols(); ++c) {
        int arg = 0;
        model.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (model.basis(arg, c) < 0.0) model.basis.col(c) = -model.basis.col(c);
    }
    return model;
}

Eigen::VectorXd weighted_hist(const Image& patch, const DescriptorConfig& cfg) {
    if (patch.empty()) throw data_error("weighted_hist: empty patch");
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(cfg.hist_bins());
    const double cx = patch.width() / 2.0, cy = patch.height() / 2.0;

    for (int y = 0; y < patch.height(); ++y) {
        for (int x = 0; x < patch.width(); ++x) {
            const double dx = cx > 0 ? (x + 0.5 - cx) / cx : 0.0;
            const double dy = cy > 0 ? (y + 0.5 - cy) / cy : 0.0;
            const double w = std::max(0.0, 1.0 - 0.5 * (dx * dx + dy * dy));
            if (w <= 0.0) continue;
            int bin;
            if (cfg.color && patch.channels() == 3) {
                double h, s, v;
                rgb_to_hsv(patch.at(x, y, 0), patch.at(x, y, 1), patch.at(x, y, 2), h, s, v);
                const int hb = std::min(7, static_cast<int>(h / 45.0));
                const int sb = std::min(3, static_cast<int>(s * 4.0));
                const int vb = std::min(3, static_cast<int>(v * 4.0));
                bin = hb * 16 + sb * 4 + vb;
            } else {
                const float g = patch.channels() == 3
                                    ? 0.299f * patch.at(x, y, 0) + 0.587f * patch.at(x, y, 1) +
                                          0.114f * patch.at(x, y, 2)
                                    : patch.at(x, y);
                bin = std::min(cfg.hist_bins() - 1, static_cast<int>(g * cfg.hist_bins()));
            }
            hist[bin] += w;
        }
    }
    const double total = hist.sum();
    if (total > 0.0) hist /= total;
    return hist;
}

Eigen::VectorXd phi(const Image& image, const Rect& rect, const PcaModel& pca,
                    const DescriptorConfig& cfg) {
    const Image patch = crop_region(image, rect);
    const Eigen::VectorXd grad = pca.apply(dense_grad_descriptors(patch, cfg));
    const Eigen::VectorXd hist = weighted_hist(patch, cfg);
    Eigen::VectorXd out(grad.size() + hist.size());
    out << grad, hist;
    const double nrm = out.norm();
    if (nrm > 0.0) out /= nrm;
    return out;
}

double descriptor_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    const double np = p.norm(), nq = q.norm();
    if (np <= 0.0 || nq <= 0.0) throw std::invalid_argument("descriptor_distance: zero vector");
    const double d = 1.0 - p.dot(q) / (np * nq);
    return std::clamp(d, 0.0, 2.0);
}

int feature_dim(const DescriptorConfig& cfg, int k) {
    return cfg.part_dim() + k * (cfg.part_dim() + 4);
}

Eigen::VectorXd assemble_feature(const Image& image, const Rect& global_rect,
                                 std::vector<PartObservation> parts, const PcaModel& pca,
                                 const DescriptorConfig& cfg) {
    const int k = static_cast<int>(parts.size());
    std::sort(parts.begin(), parts.end(),
              [](const PartObservation& a, const PartObservation& b) { return a.part < b.part; });
    for (int i = 0; i < k; ++i)
        if (parts[i].part != i)
            throw data_error("assemble_feature: part indices must cover 0.." + std::to_string(k - 1));

    const int d = cfg.part_dim();
    Eigen::VectorXd out(feature_dim(cfg, k));
    out.segment(0, d) = phi(image, global_rect, pca, cfg);
    int off = d;
    for (const auto& p : parts) {
        if (p.desc.size() != d) throw data_error("assemble_feature: descriptor dimension mismatch");
        out.segment(off, d) = p.desc;
        off += d;
        out[off++] = p.rect.center.x;
        out[off++] = p.rect.center.y;
        out[off++] = p.rect.size.x;
        out[off++] = p.rect.size.y;
    }
    return out;
}

}  // namespace fishrec
