#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fishrec/assoc.hpp"
#include "fishrec/descriptor.hpp"
#include "fishrec/image.hpp"
#include "fishrec/saliency.hpp"

namespace fishrec {

struct LearnConfig {
    int k = 6;
    int max_iter = 15;
    double part_conv_tol = 0.5;  // stop when sum ||dP_i|| falls below this
    double ms_eps_px = 0.5;      // mean-shift convergence threshold in pixels
    double scale_base = 1.2599210498948732;  // 2^(1/3)
    int scale_range = 2;                     // scale offsets -range..range
    double lambda_fit = 1.0;
    double lambda_sep = 1.0;
    double lambda_disc = 1.0;
    int ms_max_iter = 30;
    int size_max_iter = 10;
    int min_part_px = 8;     // parts may not shrink below this side length
    int pca_fit_cap = 1024;  // raw vectors used for the PCA fit
    std::uint64_t seed = 1;

    SaliencyConfig saliency;
    DescriptorConfig descriptor;
    AssocConfig assoc;
};

struct ObjectiveBreakdown {
    double fitness = 0.0;
    double separation = 0.0;
    double discrimination = 0.0;
    double total = 0.0;
};

// Learned non-rigid part model: shared part appearances plus the per-training-
// image part layout, the frozen PCA, and the reference layout used to seed
// part detection on new images.
struct PartModel {
    int k = 0;
    std::vector<Eigen::VectorXd> appearance;  // unit-norm part descriptors
    std::vector<std::vector<Rect>> layout;    // per training image, k rects
    PcaModel pca;
    LearnConfig config;
    PartSet reference;             // reference part layout (association target)
    std::vector<Rect> reference_rects;
    std::vector<Rect> mean_layout;  // average training layout, detection fallback
    int reference_index = -1;
};

// Memoizes phi per rounded pixel rect of one image.
class DescriptorCache {
public:
    const Eigen::VectorXd& get(const Image& image, const Rect& rect, const PcaModel& pca,
                               const DescriptorConfig& cfg);
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::uint64_t, Eigen::VectorXd> map_;
};

// Mutable optimization state for one image.
struct ImageContext {
    const Image* image = nullptr;
    std::vector<Rect> rects;
    DescriptorCache cache;
};

// Local cost of part i in an image: lambda_fit * d(P_i, phi) plus
// sep_factor * lambda_sep * sum of pairwise overlaps with the other parts.
double part_local_cost(ImageContext& ctx, int part, const Rect& rect,
                       const std::vector<Eigen::VectorXd>& appearance, const PcaModel& pca,
                       const LearnConfig& cfg, double sep_factor);

// Mean-shift update of one part center; accepts only non-increasing moves and
// finishes with a one-pixel greedy refinement. Returns true when the rect moved.
bool localize_part(ImageContext& ctx, int part, const std::vector<Eigen::VectorXd>& appearance,
                   const PcaModel& pca, const LearnConfig& cfg);

// Scale-space update of one part size (s <- s * b^r'), center fixed; accepts
// only non-increasing moves. Returns true when the rect changed.
bool fit_part_size(ImageContext& ctx, int part, const std::vector<Eigen::VectorXd>& appearance,
                   const PcaModel& pca, const LearnConfig& cfg);

// Appearance update for one part given frozen layouts. region_descs holds
// phi of part i's region in every image. Falls back to the normalized mean
// descriptor when the LP route fails; only non-increasing updates are kept.
Eigen::VectorXd learn_part_appearance(const std::vector<Eigen::VectorXd>& region_descs,
                                      const std::vector<Eigen::VectorXd>& appearance, int part,
                                      const LearnConfig& cfg);

ObjectiveBreakdown objective(const PartModel& model, const std::vector<Image>& images);

struct TrainLog {
    std::vector<ObjectiveBreakdown> iterations;
    std::vector<std::string> warnings;
    std::vector<std::size_t> dropped;  // input indices unusable for seeding
    std::vector<std::size_t> kept;     // input indices trained on
    bool converged = false;
};

// Alternating optimization over part locations, sizes and appearances,
// seeded by saliency and relaxation-labeling association.
PartModel train_part_model(const std::vector<Image>& images, const std::vector<Mask>& masks,
                           const LearnConfig& cfg, TrainLog* log = nullptr, int workers = 1);

// Part layout for a new image under the trained model (appearances frozen).
std::vector<Rect> detect_parts(const Image& image, const Mask& mask, const PartModel& model);

}  // namespace fishrec
