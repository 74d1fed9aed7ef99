#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fishrec/image.hpp"

namespace fishrec {

struct FinSpec {
    double t = 0.0;      // attachment along the body axis, -1..1
    int side = 1;        // +1 below, -1 above (image y grows downward)
    double len = 10.0;   // outward extent in px at scale 1
    double width = 10.0;  // base width in px at scale 1
};

// Body geometry and texture of one synthetic species. Species are told apart
// by part-level attributes (fin placement, tail size, texture), not by the
// whole-silhouette outline.
struct SpeciesSpec {
    std::string name;
    double body_a = 40.0, body_b = 18.0;  // ellipse semi-axes, px at scale 1
    double tail_len = 16.0, tail_h = 10.0;
    std::vector<FinSpec> fins;
    double tex_freq = 5.0;      // stripes along the body
    double tex_contrast = 0.15;
    double tex_angle = 0.0;     // stripe orientation in the object frame
    double base_r = 0.55, base_g = 0.55, base_b = 0.55;
    double eye_r = 3.0;

    double max_extent() const;  // radius bound of the rendered silhouette
};

struct GenConfig {
    std::vector<std::string> species;  // names from builtin_species()
    int per_species = 100;
    int canvas = 180;
    double rot_deg = 20.0;
    double scale_min = 0.85, scale_max = 1.15;
    double flip_prob = 0.5;
    double noise = 0.05;          // per-image sigma scale; actual level varies
    double occlusion_prob = 0.0;
    double imbalance_ratio = 1.0;  // geometric count progression across species
    bool color = true;
    int traj_min = 3, traj_max = 5;  // frames per rendered individual
    std::uint64_t seed = 1;
};

const std::vector<SpeciesSpec>& builtin_species();
const SpeciesSpec& species_by_name(const std::string& name);

// Renders the dataset directory (images/, masks/, labels.csv). Deterministic
// per seed, byte-identical on repeat. Throws config_error when a species
// cannot fit the canvas under the configured pose ranges.
void gen_dataset(const GenConfig& cfg, const std::string& out_dir, int workers = 0);

// Copies a dataset into train/ and test/ splits, whole trajectories only,
// stratified per species toward the requested train fraction.
void split_dataset(const std::string& dataset_dir, double train_fraction,
                   const std::string& train_dir, const std::string& test_dir);

}  // namespace fishrec
