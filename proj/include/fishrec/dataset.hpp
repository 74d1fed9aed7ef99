#pragma once

#include <string>
#include <vector>

#include "fishrec/image.hpp"

namespace fishrec {

// One labeled sample from a dataset directory.
struct Sample {
    std::string id;  // filename stem, unique within a dataset
    std::string filename;
    std::string species;
    std::string trajectory;
    Image image;
    Mask mask;
};

// Loads `images/<name>.<ext>`, `masks/<name>.png` and `labels.csv` (header
// filename,species,trajectory_id) from a dataset directory. Order follows
// labels.csv. Throws data_error on missing files or malformed rows.
std::vector<Sample> load_dataset(const std::string& dir);

// labels.csv rows without pixel data, for evaluate-only workflows.
struct LabelRow {
    std::string filename;
    std::string species;
    std::string trajectory;
};
std::vector<LabelRow> load_labels_csv(const std::string& path);

std::string file_stem(const std::string& filename);

}  // namespace fishrec
