#include "fishrec/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fishrec/errors.hpp"
#include "fishrec/raster_io.hpp"

namespace fs = std::filesystem;

namespace fishrec {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::string file_stem(const std::string& filename) {
    return fs::path(filename).stem().string();
}

std::vector<LabelRow> load_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open labels file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty labels file: " + path);
    if (strip_cr(line) != "filename,species,trajectory_id")
        throw data_error("unexpected labels.csv header in " + path);

    std::vector<LabelRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto f = split_csv_row(line);
        if (f.size() != 3 || f[0].empty() || f[1].empty())
            throw data_error("malformed labels.csv row " + std::to_string(lineno) + " in " + path);
        rows.push_back({f[0], f[1], f[2]});
    }
    return rows;
}

std::vector<Sample> load_dataset(const std::string& dir) {
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw data_error("dataset directory not found: " + dir);
    const auto rows = load_labels_csv((root / "labels.csv").string());
    if (rows.empty()) throw data_error("no samples listed in " + dir);

    std::vector<Sample> samples;
    samples.reserve(rows.size());
    for (const auto& row : rows) {
        Sample s;
        s.id = file_stem(row.filename);
        s.filename = row.filename;
        s.species = row.species;
        s.trajectory = row.trajectory;
        const fs::path img_path = root / "images" / row.filename;
        const fs::path mask_path = root / "masks" / (s.id + ".png");
        if (!fs::exists(img_path)) throw data_error("missing image file: " + img_path.string());
        if (!fs::exists(mask_path)) throw data_error("missing mask file: " + mask_path.string());
        s.image = read_image(img_path.string());
        s.mask = read_mask(mask_path.string());
        if (s.mask.width() != s.image.width() || s.mask.height() != s.image.height())
            throw data_error("mask/image dimension mismatch for sample " + s.id);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace fishrec
