#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fishrec/partmodel.hpp"
#include "fishrec/synthgen.hpp"

namespace fishrec {

// Flat key-value pipeline configuration. Unknown keys are rejected; values
// are validated against the module invariants they feed.
struct PipelineConfig {
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = hardware concurrency

    GenConfig synth;
    double synth_split = 0.0;  // 0 disables train/test splitting

    LearnConfig learn;  // carries saliency, descriptor and association settings
    std::string descriptor_mode = "auto";  // auto | color | gray

    std::vector<double> c_grid = {0.1, 1.0, 10.0};
    double svm_gamma = 0.0;  // 0 = auto per node
    int cv_folds = 10;
    bool trajectory_vote = true;

    // Applies shared knobs (seed, descriptor mode) to the nested configs.
    void normalize();
};

PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::string& path);

// Canonical serialization; parse_config(to_text(c)) reproduces c.
std::string to_text(const PipelineConfig& cfg);

}  // namespace fishrec
