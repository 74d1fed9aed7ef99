#include "fishrec/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fishrec/errors.hpp"

namespace fishrec {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' has a non-numeric value '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw config_error("config key '" + key + "' must be an integer");
    return static_cast<long>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw config_error("config key '" + key + "' must be a boolean (0/1)");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void PipelineConfig::normalize() {
    synth.seed = seed;
    learn.seed = seed;
    if (descriptor_mode == "color") learn.descriptor.color = true;
    if (descriptor_mode == "gray") learn.descriptor.color = false;
}

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw config_error("config line " + std::to_string(lineno) + " is not 'key = value'");

        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
        else if (key == "workers") cfg.workers = static_cast<int>(to_long(key, value));
        else if (key == "synth.species") cfg.synth.species = split_list(value);
        else if (key == "synth.per_species") cfg.synth.per_species = static_cast<int>(to_long(key, value));
        else if (key == "synth.canvas") cfg.synth.canvas = static_cast<int>(to_long(key, value));
        else if (key == "synth.rot_deg") cfg.synth.rot_deg = to_double(key, value);
        else if (key == "synth.scale_min") cfg.synth.scale_min = to_double(key, value);
        else if (key == "synth.scale_max") cfg.synth.scale_max = to_double(key, value);
        else if (key == "synth.flip_prob") cfg.synth.flip_prob = to_double(key, value);
        else if (key == "synth.noise") cfg.synth.noise = to_double(key, value);
        else if (key == "synth.occlusion_prob") cfg.synth.occlusion_prob = to_double(key, value);
        else if (key == "synth.imbalance_ratio") cfg.synth.imbalance_ratio = to_double(key, value);
        else if (key == "synth.color") cfg.synth.color = to_bool(key, value);
        else if (key == "synth.traj_min") cfg.synth.traj_min = static_cast<int>(to_long(key, value));
        else if (key == "synth.traj_max") cfg.synth.traj_max = static_cast<int>(to_long(key, value));
        else if (key == "synth.split") cfg.synth_split = to_double(key, value);
        else if (key == "learn.k") cfg.learn.k = static_cast<int>(to_long(key, value));
        else if (key == "learn.max_iter") cfg.learn.max_iter = static_cast<int>(to_long(key, value));
        else if (key == "learn.conv_tol") cfg.learn.part_conv_tol = to_double(key, value);
        else if (key == "learn.ms_eps_px") cfg.learn.ms_eps_px = to_double(key, value);
        else if (key == "learn.scale_base") cfg.learn.scale_base = to_double(key, value);
        else if (key == "learn.scale_range") cfg.learn.scale_range = static_cast<int>(to_long(key, value));
        else if (key == "learn.lambda_fit") cfg.learn.lambda_fit = to_double(key, value);
        else if (key == "learn.lambda_sep") cfg.learn.lambda_sep = to_double(key, value);
        else if (key == "learn.lambda_disc") cfg.learn.lambda_disc = to_double(key, value);
        else if (key == "learn.min_part_px") cfg.learn.min_part_px = static_cast<int>(to_long(key, value));
        else if (key == "learn.pca_fit_cap") cfg.learn.pca_fit_cap = static_cast<int>(to_long(key, value));
        else if (key == "saliency.sigma") cfg.learn.saliency.sigma = to_double(key, value);
        else if (key == "saliency.nms_radius") cfg.learn.saliency.nms_radius = static_cast<int>(to_long(key, value));
        else if (key == "saliency.part_side") cfg.learn.saliency.init_part_side = static_cast<int>(to_long(key, value));
        else if (key == "descriptor.mode") cfg.descriptor_mode = value;
        else if (key == "descriptor.pca_dim") cfg.learn.descriptor.pca_dim = static_cast<int>(to_long(key, value));
        else if (key == "assoc.knn") cfg.learn.assoc.knn = static_cast<int>(to_long(key, value));
        else if (key == "assoc.conv_eps") cfg.learn.assoc.conv_eps = to_double(key, value);
        else if (key == "assoc.max_iter") cfg.learn.assoc.max_iter = static_cast<int>(to_long(key, value));
        else if (key == "classifier.c_grid") {
            cfg.c_grid.clear();
            for (const auto& item : split_list(value)) cfg.c_grid.push_back(to_double(key, item));
        } else if (key == "classifier.gamma") cfg.svm_gamma = to_double(key, value);
        else if (key == "classifier.cv_folds") cfg.cv_folds = static_cast<int>(to_long(key, value));
        else if (key == "eval.trajectory_vote") cfg.trajectory_vote = to_bool(key, value);
        else throw config_error("unknown config key '" + key + "'");
    }

    // validation against module invariants
    if (cfg.workers < 0) throw config_error("workers must be >= 0");
    if (cfg.synth.per_species < 1) throw config_error("synth.per_species must be >= 1");
    if (cfg.synth.scale_min <= 0 || cfg.synth.scale_max < cfg.synth.scale_min)
        throw config_error("synth scale range is invalid");
    if (cfg.synth.flip_prob < 0 || cfg.synth.flip_prob > 1)
        throw config_error("synth.flip_prob must lie in [0,1]");
    if (cfg.synth.occlusion_prob < 0 || cfg.synth.occlusion_prob > 1)
        throw config_error("synth.occlusion_prob must lie in [0,1]");
    if (cfg.synth.imbalance_ratio < 1) throw config_error("synth.imbalance_ratio must be >= 1");
    if (cfg.synth.traj_min < 1 || cfg.synth.traj_max < cfg.synth.traj_min)
        throw config_error("synth trajectory length range is invalid");
    if (cfg.synth_split < 0 || cfg.synth_split >= 1)
        throw config_error("synth.split must lie in [0,1)");
    if (cfg.learn.k < 1) throw config_error("learn.k must be >= 1");
    if (cfg.learn.max_iter < 1) throw config_error("learn.max_iter must be >= 1");
    if (cfg.learn.part_conv_tol <= 0) throw config_error("learn.conv_tol must be positive");
    if (cfg.learn.ms_eps_px <= 0) throw config_error("learn.ms_eps_px must be positive");
    if (cfg.learn.scale_base <= 1.0) throw config_error("learn.scale_base must exceed 1");
    if (cfg.learn.scale_range < 1) throw config_error("learn.scale_range must be >= 1");
    if (cfg.learn.saliency.sigma <= 0) throw config_error("saliency.sigma must be positive");
    if (cfg.learn.saliency.nms_radius < 1) throw config_error("saliency.nms_radius must be >= 1");
    if (cfg.learn.saliency.init_part_side < 1)
        throw config_error("saliency.part_side must be >= 1");
    if (cfg.descriptor_mode != "auto" && cfg.descriptor_mode != "color" &&
        cfg.descriptor_mode != "gray")
        throw config_error("descriptor.mode must be auto, color or gray");
    if (cfg.learn.descriptor.pca_dim < 1) throw config_error("descriptor.pca_dim must be >= 1");
    if (cfg.learn.assoc.knn < 1) throw config_error("assoc.knn must be >= 1");
    if (cfg.c_grid.empty()) throw config_error("classifier.c_grid must not be empty");
    for (double c : cfg.c_grid)
        if (c <= 0) throw config_error("classifier.c_grid entries must be positive");
    if (cfg.svm_gamma < 0) throw config_error("classifier.gamma must be >= 0");
    if (cfg.cv_folds < 2) throw config_error("classifier.cv_folds must be >= 2");

    cfg.normalize();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_text(const PipelineConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "seed = " << cfg.seed << "\n";
    os << "workers = " << cfg.workers << "\n";
    if (!cfg.synth.species.empty()) {
        os << "synth.species = ";
        for (std::size_t i = 0; i < cfg.synth.species.size(); ++i)
            os << (i ? "," : "") << cfg.synth.species[i];
        os << "\n";
    }
    os << "synth.per_species = " << cfg.synth.per_species << "\n";
    os << "synth.canvas = " << cfg.synth.canvas << "\n";
    os << "synth.rot_deg = " << cfg.synth.rot_deg << "\n";
    os << "synth.scale_min = " << cfg.synth.scale_min << "\n";
    os << "synth.scale_max = " << cfg.synth.scale_max << "\n";
    os << "synth.flip_prob = " << cfg.synth.flip_prob << "\n";
    os << "synth.noise = " << cfg.synth.noise << "\n";
    os << "synth.occlusion_prob = " << cfg.synth.occlusion_prob << "\n";
    os << "synth.imbalance_ratio = " << cfg.synth.imbalance_ratio << "\n";
    os << "synth.color = " << (cfg.synth.color ? 1 : 0) << "\n";
    os << "synth.traj_min = " << cfg.synth.traj_min << "\n";
    os << "synth.traj_max = " << cfg.synth.traj_max << "\n";
    os << "synth.split = " << cfg.synth_split << "\n";
    os << "learn.k = " << cfg.learn.k << "\n";
    os << "learn.max_iter = " << cfg.learn.max_iter << "\n";
    os << "learn.conv_tol = " << cfg.learn.part_conv_tol << "\n";
    os << "learn.ms_eps_px = " << cfg.learn.ms_eps_px << "\n";
    os << "learn.scale_base = " << cfg.learn.scale_base << "\n";
    os << "learn.scale_range = " << cfg.learn.scale_range << "\n";
    os << "learn.lambda_fit = " << cfg.learn.lambda_fit << "\n";
    os << "learn.lambda_sep = " << cfg.learn.lambda_sep << "\n";
    os << "learn.lambda_disc = " << cfg.learn.lambda_disc << "\n";
    os << "learn.min_part_px = " << cfg.learn.min_part_px << "\n";
    os << "learn.pca_fit_cap = " << cfg.learn.pca_fit_cap << "\n";
    os << "saliency.sigma = " << cfg.learn.saliency.sigma << "\n";
    os << "saliency.nms_radius = " << cfg.learn.saliency.nms_radius << "\n";
    os << "saliency.part_side = " << cfg.learn.saliency.init_part_side << "\n";
    os << "descriptor.mode = " << cfg.descriptor_mode << "\n";
    os << "descriptor.pca_dim = " << cfg.learn.descriptor.pca_dim << "\n";
    os << "assoc.knn = " << cfg.learn.assoc.knn << "\n";
    os << "assoc.conv_eps = " << cfg.learn.assoc.conv_eps << "\n";
    os << "assoc.max_iter = " << cfg.learn.assoc.max_iter << "\n";
    os << "classifier.c_grid = ";
    for (std::size_t i = 0; i < cfg.c_grid.size(); ++i) os << (i ? "," : "") << cfg.c_grid[i];
    os << "\n";
    os << "classifier.gamma = " << cfg.svm_gamma << "\n";
    os << "classifier.cv_folds = " << cfg.cv_folds << "\n";
    os << "eval.trajectory_vote = " << (cfg.trajectory_vote ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace fishrec
