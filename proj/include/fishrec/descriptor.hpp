#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fishrec/image.hpp"

namespace fishrec {

struct DescriptorConfig {
    bool color = true;   // HSV 8x4x4 histogram; false = 32-bin intensity
    int canvas = 48;     // fixed resampling side for patches
    int grid_step = 4;   // dense sampling stride in canvas pixels
    int desc_window = 16;  // support side of one gradient descriptor
    int pca_dim = 128;

    int hist_bins() const { return color ? 128 : 32; }
    // part descriptor length: PCA-reduced gradient block + histogram
    int part_dim() const { return pca_dim + hist_bins(); }
};

// Gradient-orientation descriptors (4x4 cells x 8 bins) sampled every
// grid_step pixels on the fixed canvas, concatenated into one raw vector.
Eigen::VectorXd dense_grad_descriptors(const Image& patch, const DescriptorConfig& cfg);

int raw_grad_dim(const DescriptorConfig& cfg);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;  // raw_dim x out_dim; rank-deficient tails are zero columns

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const {
        return basis.transpose() * (raw - mean);
    }
    bool empty() const { return basis.size() == 0; }
};

// PCA of the raw vectors; reduced-rank inputs yield zero-padded basis
// columns so the output dimension stays fixed.
PcaModel fit_pca(const std::vector<Eigen::VectorXd>& raw, int out_dim);

// Kernel-weighted color (or intensity) histogram; Epanechnikov profile peaks
// at the patch center and vanishes at the corners. Sums to 1.
Eigen::VectorXd weighted_hist(const Image& patch, const DescriptorConfig& cfg);

// Appearance descriptor of an image region: PCA-reduced dense gradient block
// concatenated with the weighted histogram, unit L2 norm.
Eigen::VectorXd phi(const Image& image, const Rect& rect, const PcaModel& pca,
                    const DescriptorConfig& cfg);

// Normalized-correlation distance 1 - p_hat . q_hat in [0, 2]. Throws
// std::invalid_argument on a zero vector.
double descriptor_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct PartObservation {
    int part = 0;
    Rect rect;
    Eigen::VectorXd desc;
};

// Per-image feature vector: global descriptor over global_rect, then for each
// part (ordered by part index): descriptor, center, size.
Eigen::VectorXd assemble_feature(const Image& image, const Rect& global_rect,
                                 std::vector<PartObservation> parts, const PcaModel& pca,
                                 const DescriptorConfig& cfg);

int feature_dim(const DescriptorConfig& cfg, int k);

}  // namespace fishrec
