#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fishrec/image.hpp"

namespace fishrec {

// A set of part locations together with the projection frame of the object
// they came from (mask centroid, principal axes, first-axis extent).
struct PartSet {
    std::vector<Vec2> points;  // normalized [0,1]^2 locations
    Vec2 centroid;
    Vec2 axis1;  // first principal axis, skew-oriented
    Vec2 axis2;  // perpendicular axis
    double extent1 = 1.0;  // first-axis extent of the source cloud
};

// Builds the projection frame from the mask foreground pixel cloud.
PartSet make_part_set(const std::vector<Vec2>& points, const Mask& mask);

// Frame derived from the points themselves (synthetic layouts, tests).
PartSet make_part_set_from_points(const std::vector<Vec2>& points);

// Coordinates of the part locations in the principal basis, origin at the
// centroid, scaled so the first-axis extent is 1.
std::vector<Vec2> principal_axes_project(const PartSet& ps);

// Pairwise geometric compatibility of associations (u_i -> v_j), (u_k -> v_l)
// on projected coordinates. Returns exp(-(a + b)) in (0, 1].
double compatibility(const Vec2& u_i, const Vec2& u_k, const Vec2& v_j, const Vec2& v_l);

// Mutual k-nearest-neighbor index sets: i lists k only when each is among the
// other's k nearest.
std::vector<std::vector<int>> mutual_knn(const std::vector<Vec2>& pts, int k);

struct AssocConfig {
    int knn = 3;
    double conv_eps = 0.05;   // max |pi - round(pi)| convergence threshold
    int max_iter = 200;
    // Near-permutation matrices in the late relaxation stage need far more
    // alternations than random positive ones, hence the large default.
    int sinkhorn_max = 2000;
    double sinkhorn_tol = 1e-6;
};

// Alternating row/column normalization toward a doubly stochastic matrix.
// Throws numeric_error when the cap is reached before row and column sums are
// all within tol of 1.
Eigen::MatrixXd sinkhorn_normalize(Eigen::MatrixXd m, int max_iter = 100, double tol = 1e-6);

// Relaxation-labeling association from candidate parts to reference parts.
// result[i] is the matched reference index for candidate i, or -1 (outlier).
// The non-outlier sub-assignment is injective.
std::vector<int> relax_label(const PartSet& candidates, const PartSet& reference,
                             const AssocConfig& cfg = {});

}  // namespace fishrec
