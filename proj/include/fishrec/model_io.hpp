#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fishrec/classifier.hpp"
#include "fishrec/config.hpp"
#include "fishrec/partmodel.hpp"

namespace fishrec {

// Everything cmd_predict needs, persisted as one versioned binary container
// (magic, version, payload, CRC-32). Numeric payload is raw little-endian
// IEEE-754, so save -> load -> save is byte-identical.
struct TrainedModel {
    PartModel part_model;
    std::unique_ptr<HierarchyNode> tree;
    std::vector<std::string> species_names;  // species id -> name
    PipelineConfig config;
    double chosen_c = 1.0;
};

void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace fishrec
