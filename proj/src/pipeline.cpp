#include "fishrec/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "fishrec/errors.hpp"
#include "fishrec/parallel.hpp"
#include "fishrec/rng.hpp"

namespace fishrec {

namespace {

struct Prepared {
    bool usable = false;
    Image image;
    Mask mask;
};

Prepared prepare(const Sample& s) {
    Prepared p;
    try {
        auto [img, mask] = rescale_to_bbox(s.image, s.mask);
        p.image = std::move(img);
        p.mask = std::move(mask);
        p.usable = true;
    } catch (const data_error&) {
        p.usable = false;
    }
    return p;
}

Eigen::VectorXd feature_from_rects(const Image& image, const Mask& mask,
                                   const std::vector<Rect>& rects, const PartModel& pm) {
    ImageContext ctx;
    ctx.image = &image;
    ctx.rects = rects;
    std::vector<PartObservation> parts(rects.size());
    for (std::size_t j = 0; j < rects.size(); ++j) {
        parts[j].part = static_cast<int>(j);
        parts[j].rect = rects[j];
        parts[j].desc = ctx.cache.get(image, rects[j], pm.pca, pm.config.descriptor);
    }
    return assemble_feature(image, mask_bbox_rect(mask), std::move(parts), pm.pca,
                            pm.config.descriptor);
}

double fold_accuracy(const Eigen::MatrixXd& x, const std::vector<int>& species,
                     const std::vector<std::vector<int>>& folds, double c, double gamma,
                     std::uint64_t seed, std::ostream* log) {
    double acc_sum = 0.0;
    int used_folds = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<int> train_idx;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        if (folds[f].empty() || train_idx.empty()) continue;

        Eigen::MatrixXd tx(train_idx.size(), x.cols());
        std::vector<int> ts(train_idx.size());
        for (std::size_t r = 0; r < train_idx.size(); ++r) {
            tx.row(static_cast<int>(r)) = x.row(train_idx[r]);
            ts[r] = species[train_idx[r]];
        }
        HierarchyConfig hcfg;
        hcfg.c = c;
        hcfg.gamma = gamma;
        hcfg.seed = derive_seed(seed, 0xf01d, f);
        const auto tree = build_hierarchy(tx, ts, hcfg);

        int correct = 0;
        for (int i : folds[f]) {
            const PartialLabel out = classify_partial(*tree, x.row(i), true);
            correct += out.complete && out.species == species[i];
        }
        const double acc = static_cast<double>(correct) / folds[f].size();
        if (log) *log << "cv fold " << f << " C=" << c << " accuracy=" << acc << "\n";
        acc_sum += acc;
        ++used_folds;
    }
    return used_folds > 0 ? acc_sum / used_folds : 0.0;
}

}  // namespace

TrainResult train_pipeline(const std::vector<Sample>& samples, PipelineConfig cfg,
                           std::ostream* log) {
    if (samples.empty()) throw data_error("train_pipeline: no samples");

    // resolve the descriptor mode against the actual data
    if (cfg.descriptor_mode == "auto") {
        bool any_color = false;
        for (const auto& s : samples) any_color |= s.image.channels() == 3;
        cfg.descriptor_mode = any_color ? "color" : "gray";
    }
    cfg.normalize();

    std::vector<Prepared> prepared(samples.size());
    parallel_for(samples.size(), cfg.workers, [&](std::size_t i) { prepared[i] = prepare(samples[i]); });

    std::vector<std::size_t> usable;
    std::vector<Image> images;
    std::vector<Mask> masks;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (prepared[i].usable) {
            usable.push_back(i);
            images.push_back(std::move(prepared[i].image));
            masks.push_back(std::move(prepared[i].mask));
        } else if (log) {
            *log << "warning: sample " << samples[i].id << " unusable (empty mask)\n";
        }
    }
    if (usable.size() < 2) throw data_error("train_pipeline: fewer than 2 usable samples");

    TrainResult result;
    result.model.config = cfg;
    result.model.part_model =
        train_part_model(images, masks, cfg.learn, &result.part_log, cfg.workers);
    if (log) {
        for (const auto& w : result.part_log.warnings) *log << "warning: " << w << "\n";
        for (std::size_t it = 0; it < result.part_log.iterations.size(); ++it) {
            const auto& b = result.part_log.iterations[it];
            *log << "iteration " << it + 1 << " J=" << b.total << " fitness=" << b.fitness
                 << " separation=" << b.separation << " discrimination=" << b.discrimination
                 << "\n";
        }
    }

    // kept indices refer into `usable`
    const auto& kept = result.part_log.kept;
    const PartModel& pm = result.model.part_model;

    std::set<std::string> name_set;
    for (std::size_t idx : kept) name_set.insert(samples[usable[idx]].species);
    result.model.species_names.assign(name_set.begin(), name_set.end());
    std::map<std::string, int> name_to_id;
    for (std::size_t i = 0; i < result.model.species_names.size(); ++i)
        name_to_id[result.model.species_names[i]] = static_cast<int>(i);

    result.train_features.resize(kept.size(), feature_dim(cfg.learn.descriptor, cfg.learn.k));
    result.train_species.resize(kept.size());
    result.kept_ids.resize(kept.size());
    parallel_for(kept.size(), cfg.workers, [&](std::size_t r) {
        const std::size_t u = kept[r];
        result.train_features.row(static_cast<int>(r)) =
            feature_from_rects(images[u], masks[u], pm.layout[r], pm);
        result.train_species[r] = name_to_id[samples[usable[u]].species];
        result.kept_ids[r] = samples[usable[u]].id;
    });

    // k-fold cross-validation over the C grid
    const int n = static_cast<int>(kept.size());
    const int folds_n = std::min(cfg.cv_folds, n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, 0xcf01));
    for (int i = n - 1; i > 0; --i) {
        const int j = shuffle.uniform_int(0, i);
        std::swap(order[i], order[j]);
    }
    std::vector<std::vector<int>> folds(folds_n);
    for (int i = 0; i < n; ++i) folds[i % folds_n].push_back(order[i]);

    double best_c = cfg.c_grid.front();
    double best_acc = -1.0;
    for (double c : cfg.c_grid) {
        const double acc = fold_accuracy(result.train_features, result.train_species, folds, c,
                                         cfg.svm_gamma, cfg.seed, log);
        result.cv_scores.emplace_back(c, acc);
        if (log) *log << "cv C=" << c << " mean accuracy=" << acc << "\n";
        if (acc > best_acc) {
            best_acc = acc;
            best_c = c;
        }
    }
    result.model.chosen_c = best_c;
    if (log) *log << "selected C=" << best_c << "\n";

    HierarchyConfig hcfg;
    hcfg.c = best_c;
    hcfg.gamma = cfg.svm_gamma;
    hcfg.seed = derive_seed(cfg.seed, 0x7ee5);
    result.model.tree = build_hierarchy(result.train_features, result.train_species, hcfg);
    return result;
}

std::vector<PredictionRecord> predict_pipeline(const TrainedModel& model,
                                               const std::vector<Sample>& samples, int workers,
                                               Eigen::MatrixXd* features_out,
                                               std::vector<char>* usable_out) {
    const PartModel& pm = model.part_model;
    std::vector<PredictionRecord> records(samples.size());
    if (features_out)
        features_out->setZero(samples.size(),
                              feature_dim(pm.config.descriptor, pm.k));
    if (usable_out) usable_out->assign(samples.size(), 0);

    parallel_for(samples.size(), workers, [&](std::size_t i) {
        PredictionRecord& rec = records[i];
        rec.sample_id = samples[i].id;
        rec.trajectory = samples[i].trajectory;
        rec.true_species = samples[i].species;

        const Prepared p = prepare(samples[i]);
        if (!p.usable) return;  // incomplete record, empty path

        const auto rects = detect_parts(p.image, p.mask, pm);
        const Eigen::VectorXd feature = feature_from_rects(p.image, p.mask, rects, pm);
        if (features_out) features_out->row(static_cast<int>(i)) = feature;
        if (usable_out) (*usable_out)[i] = 1;

        const PartialLabel label = classify_partial(*model.tree, feature, false);
        for (int d : label.decisions) rec.path.push_back(d > 0 ? 'P' : 'N');
        rec.complete = label.complete;
        if (label.complete) rec.predicted = model.species_names[label.species];
    });
    return records;
}

int species_id(const TrainedModel& model, const std::string& name) {
    for (std::size_t i = 0; i < model.species_names.size(); ++i)
        if (model.species_names[i] == name) return static_cast<int>(i);
    return -1;
}

}  // namespace fishrec
