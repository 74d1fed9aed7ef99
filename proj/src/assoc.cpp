#include "fishrec/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fishrec/errors.hpp"

namespace fishrec {

namespace {

// Principal frame of a 2-D point cloud. The first axis is oriented so the
// projected skewness is non-negative (ties toward positive image-x), which
// makes the frame stable under left-right flips of the object.
void principal_frame(const std::vector<Vec2>& cloud, Vec2& centroid, Vec2& axis1, Vec2& axis2,
                     double& extent1) {
    const std::size_t n = cloud.size();
    centroid = {0.0, 0.0};
    for (const auto& p : cloud) centroid = centroid + p;
    centroid = centroid * (1.0 / static_cast<double>(n));

    double cxx = 0, cxy = 0, cyy = 0;
    for (const auto& p : cloud) {
        const double dx = p.x - centroid.x, dy = p.y - centroid.y;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }

    // eigenvector of the larger eigenvalue of [[cxx,cxy],[cxy,cyy]]
    const double tr = cxx + cyy;
    const double det = cxx * cyy - cxy * cxy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double l1 = 0.5 * tr + disc;
    Vec2 e1;
    if (std::abs(cxy) > 1e-15) {
        e1 = {l1 - cyy, cxy};
    } else {
        e1 = cxx >= cyy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    }
    const double nrm = e1.norm();
    if (nrm > 0) e1 = e1 * (1.0 / nrm);
    else e1 = {1.0, 0.0};

    double skew = 0.0;
    for (const auto& p : cloud) {
        const double t = (p - centroid).dot(e1);
        skew += t * t * t;
    }
    if (skew < -1e-12 || (std::abs(skew) <= 1e-12 && (e1.x < 0 || (e1.x == 0 && e1.y < 0))))
        e1 = e1 * -1.0;

    axis1 = e1;
    axis2 = {-e1.y, e1.x};

    double lo = 0, hi = 0;
    bool first = true;
    for (const auto& p : cloud) {
        const double t = (p - centroid).dot(axis1);
        if (first) {
            lo = hi = t;
            first = false;
        } else {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    extent1 = std::max(hi - lo, 1e-12);
}

}  // namespace

PartSet make_part_set(const std::vector<Vec2>& points, const Mask& mask) {
    if (points.empty()) throw data_error("make_part_set: no points");
    std::vector<Vec2> cloud;
    cloud.reserve(mask.count());
    const double w = mask.width(), h = mask.height();
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) cloud.push_back({(x + 0.5) / w, (y + 0.5) / h});
    if (cloud.empty()) throw data_error("make_part_set: empty mask");

    PartSet ps;
    ps.points = points;
    principal_frame(cloud, ps.centroid, ps.axis1, ps.axis2, ps.extent1);
    return ps;
}

PartSet make_part_set_from_points(const std::vector<Vec2>& points) {
    if (points.empty()) throw data_error("make_part_set_from_points: no points");
    PartSet ps;
    ps.points = points;
    if (points.size() == 1) {
        // single part: identity basis at the point
        ps.centroid = points[0];
        ps.axis1 = {1.0, 0.0};
        ps.axis2 = {0.0, 1.0};
        ps.extent1 = 1.0;
        return ps;
    }
    principal_frame(points, ps.centroid, ps.axis1, ps.axis2, ps.extent1);
    return ps;
}

std::vector<Vec2> principal_axes_project(const PartSet& ps) {
    std::vector<Vec2> out;
    out.reserve(ps.points.size());
    const double inv = 1.0 / ps.extent1;
    for (const auto& p : ps.points) {
        const Vec2 d = p - ps.centroid;
        out.push_back({d.dot(ps.axis1) * inv, d.dot(ps.axis2) * inv});
    }
    return out;
}

double compatibility(const Vec2& u_i, const Vec2& u_k, const Vec2& v_j, const Vec2& v_l) {
    const Vec2 du = u_k - u_i;
    const Vec2 dv = v_l - v_j;
    const double nu = du.norm(), nv = dv.norm();
    const double a = (nu - nv) * (nu - nv);
    // angle against the first axis; undefined for coincident points
    double b = 0.0;
    if (nu > 1e-12 && nv > 1e-12) {
        const double cu = du.x / nu;
        const double cv = dv.x / nv;
        b = (cu - cv) * (cu - cv);
    }
    return std::exp(-(a + b));
}

std::vector<std::vector<int>> mutual_knn(const std::vector<Vec2>& pts, int k) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<int>> nearest(n);
    for (int i = 0; i < n; ++i) {
        std::vector<int> idx;
        for (int j = 0; j < n; ++j)
            if (j != i) idx.push_back(j);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            const double da = (pts[a] - pts[i]).norm(), db = (pts[b] - pts[i]).norm();
            if (da != db) return da < db;
            return a < b;
        });
        idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
        nearest[i] = std::move(idx);
    }
    std::vector<std::vector<int>> out(n);
    for (int i = 0; i < n; ++i)
        for (int j : nearest[i])
            if (std::find(nearest[j].begin(), nearest[j].end(), i) != nearest[j].end())
                out[i].push_back(j);
    return out;
}

Eigen::MatrixXd sinkhorn_normalize(Eigen::MatrixXd m, int max_iter, double tol) {
    if ((m.array() < 0.0).any()) throw numeric_error("sinkhorn: negative entries");
    for (int it = 0; it < max_iter; ++it) {
        for (int r = 0; r < m.rows(); ++r) {
            const double s = m.row(r).sum();
            if (s <= 0.0) throw numeric_error("sinkhorn: zero row");
            m.row(r) /= s;
        }
        for (int c = 0; c < m.cols(); ++c) {
            const double s = m.col(c).sum();
            if (s <= 0.0) throw numeric_error("sinkhorn: zero column");
            m.col(c) /= s;
        }
        double worst = 0.0;
        for (int r = 0; r < m.rows(); ++r) worst = std::max(worst, std::abs(m.row(r).sum() - 1.0));
        for (int c = 0; c < m.cols(); ++c) worst = std::max(worst, std::abs(m.col(c).sum() - 1.0));
        if (worst <= tol) return m;
    }
    throw numeric_error("sinkhorn: no convergence within iteration cap");
}

std::vector<int> relax_label(const PartSet& candidates, const PartSet& reference,
                             const AssocConfig& cfg) {
    const int kc = static_cast<int>(candidates.points.size());
    const int kr = static_cast<int>(reference.points.size());
    if (kc == 0 || kr == 0) throw data_error("relax_label: empty part set");
    if (kc == 1 && kr == 1) return {0};

    const auto u = principal_axes_project(candidates);
    const auto v = principal_axes_project(reference);
    const auto nu = mutual_knn(candidates.points, cfg.knn);
    const auto nv = mutual_knn(reference.points, cfg.knn);

    const int n = std::max(kc, kr) + 1;  // square with outlier row/col
    Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(n, n, 1.0 / n);

    // compatibility lookup r[(i*kr+j)*kc*kr + k*kr+l]
    std::vector<double> compat(static_cast<std::size_t>(kc) * kr * kc * kr);
    for (int i = 0; i < kc; ++i)
        for (int j = 0; j < kr; ++j)
            for (int k = 0; k < kc; ++k)
                for (int l = 0; l < kr; ++l)
                    compat[((static_cast<std::size_t>(i) * kr + j) * kc + k) * kr + l] =
                        compatibility(u[i], u[k], v[j], v[l]);

    for (int it = 0; it < cfg.max_iter; ++it) {
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
        std::vector<double> supports;
        supports.reserve(static_cast<std::size_t>(kc) * kr);
        for (int i = 0; i < kc; ++i) {
            for (int j = 0; j < kr; ++j) {
                double s = 0.0;
                for (int k : nu[i])
                    for (int l : nv[j])
                        s += pi(k, l) * compat[((static_cast<std::size_t>(i) * kr + j) * kc + k) * kr + l];
                q(i, j) = s;
                supports.push_back(s);
            }
        }
        // outliers get the median non-outlier support: competitive, not dominant
        std::nth_element(supports.begin(), supports.begin() + supports.size() / 2, supports.end());
        const double med = supports[supports.size() / 2];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i >= kc || j >= kr) q(i, j) = med;

        try {
            pi = sinkhorn_normalize(pi.cwiseProduct(q), cfg.sinkhorn_max, cfg.sinkhorn_tol);
        } catch (const numeric_error&) {
            break;  // keep the last normalized state; read-out below still applies
        }

        double dist = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dist = std::max(dist, std::abs(pi(i, j) - std::round(pi(i, j))));
        if (dist < cfg.conv_eps) break;
    }

    // argmax read-out, greedy by confidence to keep the assignment injective
    std::vector<int> order(kc);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> best(kc);
    std::vector<int> best_j(kc);
    for (int i = 0; i < kc; ++i) {
        double bv = -1.0;
        int bj = -1;
        for (int j = 0; j < kr; ++j) {
            if (pi(i, j) > bv) {
                bv = pi(i, j);
                bj = j;
            }
        }
        // outlier column (last) competes with the best reference
        if (pi(i, n - 1) >= bv) {
            bj = -1;
            bv = pi(i, n - 1);
        }
        best[i] = bv;
        best_j[i] = bj;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (best[a] != best[b]) return best[a] > best[b];
        return a < b;
    });

    std::vector<int> result(kc, -1);
    std::vector<char> taken(kr, 0);
    for (int i : order) {
        const int j = best_j[i];
        if (j >= 0 && !taken[j]) {
            result[i] = j;
            taken[j] = 1;
        }
    }
    return result;
}

}  // namespace fishrec
