#include "fishrec/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fishrec/errors.hpp"
#include "fishrec/rng.hpp"

namespace fishrec {

namespace {

constexpr double kVarFloor = 1e-6;

double log_gaussian_diag(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& var) {
    const Eigen::ArrayXd d = (x - mean).array();
    return -0.5 * (d * d / var.array()).sum() -
           0.5 * (var.array().log() + std::log(2.0 * M_PI)).sum();
}

struct EmRun {
    MoG2 model;
    double loglik = -std::numeric_limits<double>::infinity();
};

EmRun run_em_once(const Eigen::MatrixXd& x, std::uint64_t seed, int max_iter) {
    const int n = static_cast<int>(x.rows());
    Rng rng(seed);

    // k-means++-style pick of the two seeds
    const int first = rng.uniform_int(0, n - 1);
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2[i] = (x.row(i) - x.row(first)).squaredNorm();
    int second = first;
    const double total = d2.sum();
    if (total > 0.0) {
        double pick = rng.uniform() * total;
        for (int i = 0; i < n; ++i) {
            pick -= d2[i];
            if (pick <= 0.0) {
                second = i;
                break;
            }
        }
    } else {
        second = (first + 1) % n;  // identical samples; split arbitrarily
    }

    EmRun run;
    MoG2& m = run.model;
    m.mean[0] = x.row(first);
    m.mean[1] = x.row(second);
    m.var[0] = m.var[1] = Eigen::VectorXd::Constant(x.cols(), 1.0);
    m.weight[0] = m.weight[1] = 0.5;

    // initialize variances from the nearest-seed split
    {
        Eigen::VectorXd acc[2] = {Eigen::VectorXd::Zero(x.cols()), Eigen::VectorXd::Zero(x.cols())};
        Eigen::VectorXd acc2[2] = {Eigen::VectorXd::Zero(x.cols()), Eigen::VectorXd::Zero(x.cols())};
        int cnt[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
            const int c = (x.row(i) - m.mean[0].transpose()).squaredNorm() <=
                                  (x.row(i) - m.mean[1].transpose()).squaredNorm()
                              ? 0
                              : 1;
            acc[c] += x.row(i);
            acc2[c] += x.row(i).array().square().matrix();
            ++cnt[c];
        }
        for (int c = 0; c < 2; ++c) {
            if (cnt[c] == 0) continue;
            const Eigen::VectorXd mu = acc[c] / cnt[c];
            m.mean[c] = mu;
            m.var[c] =
                (acc2[c] / cnt[c] - mu.array().square().matrix()).cwiseMax(kVarFloor);
        }
    }

    Eigen::MatrixXd resp(n, 2);
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        // E step
        double loglik = 0.0;
        for (int i = 0; i < n; ++i) {
            const double l0 = std::log(std::max(m.weight[0], 1e-300)) +
                              log_gaussian_diag(x.row(i), m.mean[0], m.var[0]);
            const double l1 = std::log(std::max(m.weight[1], 1e-300)) +
                              log_gaussian_diag(x.row(i), m.mean[1], m.var[1]);
            const double mx = std::max(l0, l1);
            const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
            resp(i, 0) = std::exp(l0 - lse);
            resp(i, 1) = std::exp(l1 - lse);
            loglik += lse;
        }
        run.model.loglik_trace.push_back(loglik);
        run.loglik = loglik;

        // M step
        for (int c = 0; c < 2; ++c) {
            const double nk = resp.col(c).sum();
            if (nk <= 1e-12) {
                m.weight[c] = 0.0;
                continue;
            }
            m.weight[c] = nk / n;
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(x.cols());
            for (int i = 0; i < n; ++i) mu += resp(i, c) * x.row(i).transpose();
            mu /= nk;
            Eigen::VectorXd var = Eigen::VectorXd::Zero(x.cols());
            for (int i = 0; i < n; ++i)
                var += resp(i, c) * (x.row(i).transpose() - mu).array().square().matrix();
            m.mean[c] = mu;
            m.var[c] = (var / nk).cwiseMax(kVarFloor);
        }
        const double wsum = m.weight[0] + m.weight[1];
        m.weight[0] /= wsum;
        m.weight[1] /= wsum;

        if (loglik - prev < 1e-7 * (1.0 + std::abs(loglik)) && iter > 0) break;
        prev = loglik;
    }

    m.assignment.resize(n);
    for (int i = 0; i < n; ++i) m.assignment[i] = resp(i, 0) >= resp(i, 1) ? 0 : 1;
    return run;
}

}  // namespace

MoG2 em_mog2(const Eigen::MatrixXd& features, std::uint64_t seed, int restarts, int max_iter) {
    if (features.rows() < 2) throw data_error("em_mog2: need at least 2 samples");
    EmRun best;
    for (int r = 0; r < restarts; ++r) {
        EmRun run = run_em_once(features, derive_seed(seed, 0x6d06, r), max_iter);
        if (run.loglik > best.loglik) best = std::move(run);
    }
    return best.model;
}

std::vector<int> relabel_by_majority(const std::vector<int>& cluster,
                                     const std::vector<int>& species) {
    if (cluster.size() != species.size())
        throw data_error("relabel_by_majority: size mismatch");
    std::map<int, std::pair<int, int>> counts;  // species -> (cluster0, cluster1)
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        auto& c = counts[species[i]];
        if (cluster[i] == 0) ++c.first;
        else ++c.second;
    }
    std::map<int, int> sign;  // ties go to cluster 0, mapped to +1
    for (const auto& [sp, c] : counts) sign[sp] = c.first >= c.second ? +1 : -1;
    std::vector<int> out(cluster.size());
    for (std::size_t i = 0; i < cluster.size(); ++i) out[i] = sign[species[i]];
    return out;
}

double SvmModel::decision(const Eigen::VectorXd& x) const {
    double f = bias;
    for (int i = 0; i < support_vectors.rows(); ++i)
        f += coef[i] * std::exp(-gamma * (support_vectors.row(i).transpose() - x).squaredNorm());
    return f;
}

SvmModel train_biased_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double c,
                          double gamma, double tol) {
    const int n = static_cast<int>(x.rows());
    if (n == 0 || static_cast<int>(y.size()) != n)
        throw data_error("train_biased_svm: bad inputs");
    int n_pos = 0, n_neg = 0;
    for (int v : y) (v > 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw data_error("train_biased_svm: single-class input");

    SvmModel model;
    model.c_pos = c * static_cast<double>(n_neg) / n;
    model.c_neg = c * static_cast<double>(n_pos) / n;

    if (gamma <= 0.0) {
        const Eigen::RowVectorXd mean = x.colwise().mean();
        const double var =
            (x.rowwise() - mean).array().square().sum() / (static_cast<double>(n) * x.cols());
        gamma = 1.0 / (static_cast<double>(x.cols()) * std::max(var, 1e-12));
    }
    model.gamma = gamma;

    // kernel matrix
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double v = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
            k(i, j) = v;
            k(j, i) = v;
        }
    }

    std::vector<double> alpha(n, 0.0);
    std::vector<double> u(n, 0.0);  // decision values without bias
    auto cap = [&](int i) { return y[i] > 0 ? model.c_pos : model.c_neg; };
    constexpr double kBoundEps = 1e-12;  // keep bound dust out of the working set

    const long max_steps = std::max(200000L, 2000L * n);
    double m_up = 0.0, m_low = 0.0;
    long step = 0;
    for (; step < max_steps; ++step) {
        // maximal violating pair over v_t = y_t - u_t
        int i = -1, j = -1;
        m_up = -std::numeric_limits<double>::infinity();
        m_low = std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t) {
            const double v = y[t] - u[t];
            const bool free_low = alpha[t] > kBoundEps;
            const bool free_up = alpha[t] < cap(t) - kBoundEps;
            const bool in_up = (y[t] > 0 && free_up) || (y[t] < 0 && free_low);
            const bool in_low = (y[t] < 0 && free_up) || (y[t] > 0 && free_low);
            if (in_up && v > m_up) {
                m_up = v;
                i = t;
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || m_up - m_low <= tol) break;

        const double eta = std::max(k(i, i) + k(j, j) - 2.0 * k(i, j), 1e-12);
        double aj = alpha[j] - y[j] * (m_up - m_low) / eta;

        double lo, hi;
        if (y[i] != y[j]) {
            lo = std::max(0.0, alpha[j] - alpha[i]);
            hi = std::min(cap(j), cap(i) + alpha[j] - alpha[i]);
        } else {
            lo = std::max(0.0, alpha[i] + alpha[j] - cap(i));
            hi = std::min(cap(j), alpha[i] + alpha[j]);
        }
        aj = std::clamp(aj, lo, hi);
        if (aj - lo < kBoundEps) aj = lo;
        if (hi - aj < kBoundEps) aj = hi;
        double ai = alpha[i] + y[i] * y[j] * (alpha[j] - aj);
        ai = std::clamp(ai, 0.0, cap(i));
        if (ai < kBoundEps) ai = 0.0;
        if (cap(i) - ai < kBoundEps) ai = cap(i);

        const double di = (ai - alpha[i]) * y[i];
        const double dj = (aj - alpha[j]) * y[j];
        if (std::abs(di) < 1e-15 && std::abs(dj) < 1e-15) break;  // numerically stuck
        for (int t = 0; t < n; ++t) u[t] += di * k(i, t) + dj * k(j, t);
        alpha[i] = ai;
        alpha[j] = aj;
    }

    model.kkt_gap = std::max(0.0, m_up - m_low);
    model.bias = 0.5 * (m_up + m_low);

    std::vector<int> sv;
    for (int t = 0; t < n; ++t)
        if (alpha[t] > 1e-12) sv.push_back(t);
    model.support_vectors.resize(static_cast<int>(sv.size()), x.cols());
    model.coef.resize(static_cast<int>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
        model.support_vectors.row(static_cast<int>(s)) = x.row(sv[s]);
        model.coef[static_cast<int>(s)] = alpha[sv[s]] * y[sv[s]];
    }
    return model;
}

double empirical_benefit(double t, const std::vector<double>& a) {
    if (a.empty()) return 0.0;
    double gain = 0.0, loss = 0.0;
    for (double ai : a) {
        if (t <= ai) gain += std::exp(-ai);
        if (t <= -ai) loss += std::exp(ai);
    }
    return (gain - loss) / static_cast<double>(a.size());
}

double exp_benefit(double t, const std::vector<double>& a) {
    if (a.empty()) return 0.0;
    double s1 = 0.0, s2 = 0.0;
    for (double ai : a) {
        s1 += std::exp(-ai);
        s2 += std::exp(-2.0 * ai);
    }
    const double n = static_cast<double>(a.size());
    return (s1 - std::exp(t) * s2) / n - std::exp(-t);
}

namespace {

struct ThresholdSetup {
    double f_min = 0.0, f_max = 0.0;
    double t_u = 0.0;    // unconstrained maximizer of the exponential benefit
    double lo = 0.0, hi = -1.0;  // feasible interval; empty when hi < lo
};

ThresholdSetup threshold_setup(const std::vector<double>& a) {
    ThresholdSetup s;
    if (a.empty()) return s;
    s.f_min = std::numeric_limits<double>::infinity();
    s.f_max = 0.0;
    double s2 = 0.0;
    for (double ai : a) {
        s.f_min = std::min(s.f_min, std::abs(ai));
        s.f_max = std::max(s.f_max, std::abs(ai));
        s2 += std::exp(-2.0 * ai);
    }
    s.t_u = 0.5 * std::log(static_cast<double>(a.size()) / s2);

    // {t >= 0 : B_exp(t) >= B_exp(0)} is [0, t_hi] by concavity
    double t_hi = 0.0;
    if (s.t_u > 0.0) {
        const double b0 = exp_benefit(0.0, a);
        double lo = s.t_u, hi = s.t_u + 1.0;
        while (exp_benefit(hi, a) >= b0 && hi < 1e6) hi = s.t_u + (hi - s.t_u) * 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (exp_benefit(mid, a) >= b0) lo = mid;
            else hi = mid;
        }
        t_hi = 0.5 * (lo + hi);
    }

    s.lo = s.f_min;
    s.hi = std::min(s.f_max, t_hi);
    return s;
}

}  // namespace

double optimal_threshold_closed_form(const std::vector<double>& a) {
    const ThresholdSetup s = threshold_setup(a);
    if (a.empty() || s.hi < s.lo - 1e-12) return 0.0;
    return std::clamp(s.t_u, s.lo, s.hi);
}

double optimal_threshold(const std::vector<double>& a) {
    if (a.empty()) return 0.0;
    const ThresholdSetup s = threshold_setup(a);
    if (s.hi < s.lo - 1e-12) return 0.0;  // constraints cannot be met
    const double width = s.hi - s.lo;
    if (width < 1e-9) return std::clamp(s.t_u, s.lo, std::max(s.lo, s.hi));

    double n = static_cast<double>(a.size());
    double s2 = 0.0;
    const double b0 = exp_benefit(0.0, a);
    for (double ai : a) s2 += std::exp(-2.0 * ai);

    // derivatives of -B_exp(t); the constant term of B_exp drops out
    auto neg_b1 = [&](double t) { return std::exp(t) * s2 / n - std::exp(-t); };
    auto neg_b2 = [&](double t) { return std::exp(t) * s2 / n + std::exp(-t); };

    // strict interior start near the clipped analytic optimum
    double t = std::clamp(s.t_u, s.lo + 0.05 * width, s.hi - 0.05 * width);

    // log barrier over t > f_min, t < hi-edge constraints and the benefit gain
    for (double mu = 1.0; mu < 1e10; mu *= 10.0) {
        for (int newton = 0; newton < 60; ++newton) {
            const double g1 = t - s.lo;            // > 0
            const double g2 = s.f_max - t;         // > 0
            const double h = exp_benefit(t, a) - b0;  // >= 0, tight at t_hi
            const double hp = -neg_b1(t);
            const double hpp = -neg_b2(t);
            const double safe_h = std::max(h, 1e-14);

            const double grad = mu * neg_b1(t) - 1.0 / g1 + 1.0 / g2 - hp / safe_h;
            const double hess = mu * neg_b2(t) + 1.0 / (g1 * g1) + 1.0 / (g2 * g2) -
                                hpp / safe_h + (hp * hp) / (safe_h * safe_h);
            double step = -grad / std::max(hess, 1e-12);
            // backtrack into the strict interior
            double cand = t + step;
            for (int bt = 0; bt < 60; ++bt) {
                if (cand > s.lo && cand < s.f_max && exp_benefit(cand, a) - b0 > -1e-15 &&
                    cand <= s.hi + 1e-9)
                    break;
                step *= 0.5;
                cand = t + step;
            }
            t = std::clamp(cand, s.lo + 1e-15, s.hi);
            if (std::abs(step) < 1e-13) break;
        }
    }
    return t;
}

namespace {

std::unique_ptr<HierarchyNode> build_node(const Eigen::MatrixXd& features,
                                          const std::vector<int>& species,
                                          const std::vector<int>& indices,
                                          const HierarchyConfig& cfg, std::uint64_t salt) {
    auto node = std::make_unique<HierarchyNode>();

    std::vector<int> present;
    for (int i : indices)
        if (std::find(present.begin(), present.end(), species[i]) == present.end())
            present.push_back(species[i]);
    std::sort(present.begin(), present.end());

    if (present.size() == 1) {
        node->species = present[0];
        return node;
    }

    Eigen::MatrixXd sub(indices.size(), features.cols());
    std::vector<int> sub_species(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        sub.row(static_cast<int>(r)) = features.row(indices[r]);
        sub_species[r] = species[indices[r]];
    }

    const MoG2 mog = em_mog2(sub, derive_seed(cfg.seed, 0xc1a5, salt));
    std::vector<int> labels = relabel_by_majority(mog.assignment, sub_species);

    std::vector<int> pos_sp, neg_sp;
    for (int sp : present) {
        for (std::size_t r = 0; r < indices.size(); ++r) {
            if (sub_species[r] != sp) continue;
            (labels[r] > 0 ? pos_sp : neg_sp).push_back(sp);
            break;
        }
    }

    if (pos_sp.empty() || neg_sp.empty()) {
        // degenerate clustering: split the species list into two halves by
        // descending sample count
        std::map<int, int> count;
        for (int sp : sub_species) ++count[sp];
        std::vector<int> order = present;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (count[a] != count[b]) return count[a] > count[b];
            return a < b;
        });
        pos_sp.assign(order.begin(), order.begin() + (order.size() + 1) / 2);
        neg_sp.assign(order.begin() + (order.size() + 1) / 2, order.end());
        std::sort(pos_sp.begin(), pos_sp.end());
        std::sort(neg_sp.begin(), neg_sp.end());
        for (std::size_t r = 0; r < indices.size(); ++r)
            labels[r] = std::binary_search(pos_sp.begin(), pos_sp.end(), sub_species[r]) ? 1 : -1;
    }

    node->pos_species = pos_sp;
    node->neg_species = neg_sp;
    node->svm = train_biased_svm(sub, labels, cfg.c, cfg.gamma, cfg.svm_tol);

    std::vector<double> a(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r)
        a[r] = labels[r] * node->svm.decision(sub.row(static_cast<int>(r)));
    node->threshold = optimal_threshold(a);

    std::vector<int> pos_idx, neg_idx;
    for (std::size_t r = 0; r < indices.size(); ++r)
        (labels[r] > 0 ? pos_idx : neg_idx).push_back(indices[r]);
    node->pos_child = build_node(features, species, pos_idx, cfg, salt * 2 + 1);
    node->neg_child = build_node(features, species, neg_idx, cfg, salt * 2 + 2);
    return node;
}

}  // namespace

std::unique_ptr<HierarchyNode> build_hierarchy(const Eigen::MatrixXd& features,
                                               const std::vector<int>& species,
                                               const HierarchyConfig& cfg) {
    if (features.rows() == 0 || static_cast<int>(species.size()) != features.rows())
        throw data_error("build_hierarchy: bad inputs");
    std::vector<int> indices(features.rows());
    std::iota(indices.begin(), indices.end(), 0);
    return build_node(features, species, indices, cfg, 1);
}

PartialLabel classify_partial(const HierarchyNode& root, const Eigen::VectorXd& x,
                              bool force_full) {
    PartialLabel out;
    const HierarchyNode* node = &root;
    while (!node->is_leaf()) {
        const double f = node->svm.decision(x);
        if (!force_full && std::abs(f) < node->threshold) return out;  // indecision
        const int side = f >= 0.0 ? +1 : -1;
        out.decisions.push_back(side);
        node = side > 0 ? node->pos_child.get() : node->neg_child.get();
    }
    out.complete = true;
    out.species = node->species;
    return out;
}

}  // namespace fishrec
