#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

namespace fishrec {

// Two-component Gaussian mixture with diagonal covariances.
struct MoG2 {
    double weight[2] = {0.5, 0.5};
    Eigen::VectorXd mean[2];
    Eigen::VectorXd var[2];
    std::vector<int> assignment;        // hard argmax per sample
    std::vector<double> loglik_trace;   // per EM iteration, non-decreasing
};

MoG2 em_mog2(const Eigen::MatrixXd& features, std::uint64_t seed, int restarts = 5,
             int max_iter = 100);

// Per-sample superclass labels (+1/-1): every sample of a species follows the
// cluster holding the majority of that species; ties go to cluster 0 (+1).
std::vector<int> relabel_by_majority(const std::vector<int>& cluster,
                                     const std::vector<int>& species);

// RBF-kernel soft-margin SVM with class-frequency-biased penalties
// C+ = C N- / N, C- = C N+ / N, trained by sequential minimal optimization.
struct SvmModel {
    double gamma = 0.0;
    Eigen::MatrixXd support_vectors;  // one row per SV
    Eigen::VectorXd coef;             // alpha_i * y_i per SV
    double bias = 0.0;
    double c_pos = 0.0, c_neg = 0.0;
    double kkt_gap = 0.0;  // violating-pair gap at termination

    double decision(const Eigen::VectorXd& x) const;
};

// gamma <= 0 selects 1 / (dim * mean feature variance).
SvmModel train_biased_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, double c,
                          double gamma, double tol = 1e-3);

// Empirical benefit of deciding only when |f| >= t, with exponential scores
// exp(-|f|) for both correct and wrong decisions. a holds y_i f(x_i).
double empirical_benefit(double t, const std::vector<double>& a);

// Exponential lower bound of the benefit.
double exp_benefit(double t, const std::vector<double>& a);

// Maximizes exp_benefit subject to f_min <= t <= f_max and
// B_exp(t) >= B_exp(0), via a log-barrier interior method; returns 0 when the
// constraints cannot be met.
double optimal_threshold(const std::vector<double>& a);

// Analytic route: unconstrained maximizer 0.5*ln(N / sum e^{-2a_i}) clipped
// to the feasible interval. Cross-check oracle for optimal_threshold.
double optimal_threshold_closed_form(const std::vector<double>& a);

// Binary class hierarchy: internal nodes carry an SVM and its indecision
// threshold; leaves carry one species.
struct HierarchyNode {
    int species = -1;  // valid at leaves
    SvmModel svm;
    double threshold = 0.0;
    std::vector<int> pos_species, neg_species;
    std::unique_ptr<HierarchyNode> pos_child, neg_child;

    bool is_leaf() const { return !pos_child && !neg_child; }
};

struct HierarchyConfig {
    double c = 1.0;
    double gamma = 0.0;  // <= 0: auto per node
    std::uint64_t seed = 1;
    double svm_tol = 1e-3;
};

std::unique_ptr<HierarchyNode> build_hierarchy(const Eigen::MatrixXd& features,
                                               const std::vector<int>& species,
                                               const HierarchyConfig& cfg);

struct PartialLabel {
    std::vector<int> decisions;  // +1/-1 per layer from the root
    bool complete = false;
    int species = -1;  // valid when complete
};

// Descends the tree; stops with an incomplete label when |f(x)| < t* at any
// node. force_full ignores every stored threshold.
PartialLabel classify_partial(const HierarchyNode& root, const Eigen::VectorXd& x,
                              bool force_full = false);

}  // namespace fishrec
