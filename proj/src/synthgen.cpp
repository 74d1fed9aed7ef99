#include "fishrec/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "fishrec/errors.hpp"
#include "fishrec/parallel.hpp"
#include "fishrec/raster_io.hpp"
#include "fishrec/rng.hpp"

namespace fs = std::filesystem;

namespace fishrec {

namespace {

constexpr float kBackground = 0.12f;

bool point_in_triangle(double px, double py, double x0, double y0, double x1, double y1,
                       double x2, double y2) {
    const double d1 = (px - x1) * (y0 - y1) - (x0 - x1) * (py - y1);
    const double d2 = (px - x2) * (y1 - y2) - (x1 - x2) * (py - y2);
    const double d3 = (px - x0) * (y2 - y0) - (x2 - x0) * (py - y0);
    const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(has_neg && has_pos);
}

// silhouette test in the object frame (unit scale)
bool inside_fish(const SpeciesSpec& sp, double ox, double oy) {
    const double ex = ox / sp.body_a, ey = oy / sp.body_b;
    if (ex * ex + ey * ey <= 1.0) return true;

    const double tail_root = -0.92 * sp.body_a;
    if (point_in_triangle(ox, oy, tail_root, 0.0, tail_root - sp.tail_len, sp.tail_h,
                          tail_root - sp.tail_len, -sp.tail_h))
        return true;

    for (const auto& fin : sp.fins) {
        const double fx = fin.t * sp.body_a;
        const double edge = fin.side * sp.body_b * std::sqrt(std::max(0.0, 1.0 - fin.t * fin.t));
        const double tip = edge + fin.side * fin.len;
        if (point_in_triangle(ox, oy, fx - 0.5 * fin.width, edge, fx + 0.5 * fin.width, edge,
                              fx + 0.3 * fin.width, tip))
            return true;
    }
    return false;
}

void fish_color(const SpeciesSpec& sp, double ox, double oy, float rgb[3]) {
    const double ca = std::cos(sp.tex_angle), sa = std::sin(sp.tex_angle);
    const double along = (ox * ca + oy * sa) / (2.0 * sp.body_a);
    const double stripe = std::sin(2.0 * M_PI * sp.tex_freq * along);
    double shade = sp.tex_contrast * stripe;

    // darker fin/tail membrane
    const double ex = ox / sp.body_a, ey = oy / sp.body_b;
    if (ex * ex + ey * ey > 1.0) shade -= 0.12;

    // eye: dark disc forward and slightly up
    const double dx = ox - 0.55 * sp.body_a, dy = oy + 0.25 * sp.body_b;
    if (dx * dx + dy * dy <= sp.eye_r * sp.eye_r) shade = -0.28;

    rgb[0] = static_cast<float>(std::clamp(sp.base_r + shade, 0.02, 1.0));
    rgb[1] = static_cast<float>(std::clamp(sp.base_g + shade, 0.02, 1.0));
    rgb[2] = static_cast<float>(std::clamp(sp.base_b + shade, 0.02, 1.0));
}

struct Pose {
    double cx, cy, angle, scale;
    bool flip;
};

struct ImagePlan {
    std::string id;
    std::string species;
    std::string trajectory;
    int species_idx = 0;
    Pose pose;
    double noise_sigma = 0.0;
    bool occlude = false;
    double occl_center = 0.0, occl_width = 0.0;  // image-x band
    std::uint64_t noise_seed = 0;
};

void render(const SpeciesSpec& sp, const ImagePlan& plan, const GenConfig& cfg, Image& img,
            Mask& mask) {
    const int n = cfg.canvas;
    img = Image(n, n, cfg.color ? 3 : 1, kBackground);
    mask = Mask(n, n);

    const Pose& p = plan.pose;
    const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
    float rgb[3];
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dx = x + 0.5 - p.cx, dy = y + 0.5 - p.cy;
            const double ox = (dx * ca - dy * sa) / p.scale;
            const double oy = (dx * sa + dy * ca) / p.scale;
            if (!inside_fish(sp, ox, oy)) continue;
            mask.set(x, y, true);
            fish_color(sp, ox, oy, rgb);
            if (cfg.color) {
                img.at(x, y, 0) = rgb[0];
                img.at(x, y, 1) = rgb[1];
                img.at(x, y, 2) = rgb[2];
            } else {
                img.at(x, y) = 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
            }
        }
    }

    if (p.flip) {  // mirror the canvas so the silhouette mirrors exactly
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n / 2; ++x) {
                for (int c = 0; c < img.channels(); ++c)
                    std::swap(img.at(x, y, c), img.at(n - 1 - x, y, c));
                const bool tmp = mask.at(x, y);
                mask.set(x, y, mask.at(n - 1 - x, y));
                mask.set(n - 1 - x, y, tmp);
            }
    }

    if (plan.occlude) {
        const int x0 = std::max(0, static_cast<int>(plan.occl_center - plan.occl_width / 2));
        const int x1 = std::min(n, static_cast<int>(plan.occl_center + plan.occl_width / 2));
        for (int y = 0; y < n; ++y)
            for (int x = x0; x < x1; ++x) {
                for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = kBackground + 0.05f;
                mask.set(x, y, false);
            }
    }

    if (plan.noise_sigma > 0.0) {
        Rng noise(plan.noise_seed);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                for (int c = 0; c < img.channels(); ++c) {
                    const double v = img.at(x, y, c) + plan.noise_sigma * noise.gaussian();
                    img.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
    }
}

}  // namespace

double SpeciesSpec::max_extent() const {
    double r = std::sqrt(body_a * body_a + body_b * body_b);
    r = std::max(r, 0.92 * body_a + tail_len + tail_h);
    for (const auto& fin : fins) r = std::max(r, body_b + fin.len + fin.width);
    return r;
}

const std::vector<SpeciesSpec>& builtin_species() {
    static const std::vector<SpeciesSpec> specs = [] {
        std::vector<SpeciesSpec> s;
        // alpha/bravo share the outline; the dorsal fin placement differs
        SpeciesSpec alpha;
        alpha.name = "alpha";
        alpha.body_a = 40;
        alpha.body_b = 15;
        alpha.tail_len = 14;
        alpha.tail_h = 9;
        alpha.fins = {{0.05, -1, 10, 11}, {-0.25, 1, 6, 8}};
        alpha.tex_freq = 6;
        alpha.tex_contrast = 0.10;
        alpha.base_r = 0.56;
        alpha.base_g = 0.58;
        alpha.base_b = 0.63;
        s.push_back(alpha);

        SpeciesSpec bravo = alpha;
        bravo.name = "bravo";
        bravo.fins = {{0.48, -1, 12, 11}, {-0.25, 1, 6, 8}};
        bravo.base_r = 0.58;
        bravo.base_g = 0.57;
        bravo.base_b = 0.61;
        s.push_back(bravo);

        // charlie/delta share the outline; tail size differs
        SpeciesSpec charlie;
        charlie.name = "charlie";
        charlie.body_a = 36;
        charlie.body_b = 18;
        charlie.tail_len = 18;
        charlie.tail_h = 11;
        charlie.fins = {{0.2, -1, 8, 10}};
        charlie.tex_freq = 3;
        charlie.tex_contrast = 0.16;
        charlie.tex_angle = 0.25;
        charlie.base_r = 0.62;
        charlie.base_g = 0.55;
        charlie.base_b = 0.48;
        s.push_back(charlie);

        SpeciesSpec delta = charlie;
        delta.name = "delta";
        delta.tail_len = 9;
        delta.tail_h = 6;
        delta.base_r = 0.60;
        delta.base_g = 0.56;
        delta.base_b = 0.50;
        s.push_back(delta);

        SpeciesSpec echo;
        echo.name = "echo";
        echo.body_a = 28;
        echo.body_b = 22;
        echo.tail_len = 11;
        echo.tail_h = 7;
        echo.fins = {{0.0, -1, 9, 12}, {0.1, 1, 7, 9}, {-0.45, -1, 5, 6}};
        echo.tex_freq = 9;
        echo.tex_contrast = 0.20;
        echo.tex_angle = -0.35;
        echo.base_r = 0.50;
        echo.base_g = 0.62;
        echo.base_b = 0.52;
        s.push_back(echo);

        SpeciesSpec foxtrot;
        foxtrot.name = "foxtrot";
        foxtrot.body_a = 44;
        foxtrot.body_b = 12;
        foxtrot.tail_len = 7;
        foxtrot.tail_h = 5;
        foxtrot.fins = {{0.3, 1, 6, 8}};
        foxtrot.tex_freq = 12;
        foxtrot.tex_contrast = 0.14;
        foxtrot.base_r = 0.66;
        foxtrot.base_g = 0.62;
        foxtrot.base_b = 0.57;
        s.push_back(foxtrot);
        return s;
    }();
    return specs;
}

const SpeciesSpec& species_by_name(const std::string& name) {
    for (const auto& sp : builtin_species())
        if (sp.name == name) return sp;
    throw config_error("unknown species: " + name);
}

void gen_dataset(const GenConfig& cfg, const std::string& out_dir, int workers) {
    if (cfg.species.empty()) throw config_error("gen_dataset: no species configured");
    if (cfg.per_species < 1 || cfg.canvas < 32) throw config_error("gen_dataset: bad config");
    if (cfg.imbalance_ratio < 1.0) throw config_error("gen_dataset: imbalance_ratio must be >= 1");

    std::vector<const SpeciesSpec*> specs;
    for (const auto& name : cfg.species) specs.push_back(&species_by_name(name));

    // pose ranges must keep every species inside the canvas
    const double jitter = 0.05 * cfg.canvas;
    const double drift = 3.0;
    for (const auto* sp : specs) {
        const double reach = sp->max_extent() * cfg.scale_max * 1.03 + jitter + 3.0;
        if (reach > cfg.canvas / 2.0)
            throw config_error("species " + sp->name + " cannot fit the canvas under these poses");
    }

    const int n_species = static_cast<int>(specs.size());
    std::vector<int> counts(n_species);
    for (int s = 0; s < n_species; ++s) {
        double f = 1.0;
        if (n_species > 1 && cfg.imbalance_ratio > 1.0)
            f = std::pow(cfg.imbalance_ratio, -static_cast<double>(s) / (n_species - 1));
        counts[s] = std::max(1, static_cast<int>(std::llround(cfg.per_species * f)));
    }

    // plan all images serially, render in parallel
    std::vector<ImagePlan> plans;
    for (int s = 0; s < n_species; ++s) {
        int produced = 0, traj = 0;
        while (produced < counts[s]) {
            Rng rng(derive_seed(cfg.seed, 0xf1f0, s, traj));
            const int frames =
                std::min(counts[s] - produced, rng.uniform_int(cfg.traj_min, cfg.traj_max));
            Pose base;
            base.angle = rng.uniform(-cfg.rot_deg, cfg.rot_deg) * M_PI / 180.0;
            base.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
            base.cx = cfg.canvas / 2.0 + rng.uniform(-jitter, jitter);
            base.cy = cfg.canvas / 2.0 + rng.uniform(-jitter, jitter);
            base.flip = rng.uniform() < cfg.flip_prob;

            for (int f = 0; f < frames; ++f) {
                ImagePlan plan;
                plan.species = specs[s]->name;
                plan.species_idx = s;
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s_t%03d", specs[s]->name.c_str(), traj);
                plan.trajectory = buf;
                std::snprintf(buf, sizeof buf, "%s_t%03d_f%d", specs[s]->name.c_str(), traj, f);
                plan.id = buf;
                plan.pose = base;
                plan.pose.angle += rng.uniform(-drift, drift) * M_PI / 180.0;
                plan.pose.cx += rng.uniform(-2.0, 2.0);
                plan.pose.cy += rng.uniform(-2.0, 2.0);
                plan.pose.scale *= rng.uniform(0.97, 1.03);
                plan.noise_sigma = cfg.noise * (0.4 + 1.2 * rng.uniform());
                plan.occlude = rng.uniform() < cfg.occlusion_prob;
                if (plan.occlude) {
                    plan.occl_center = plan.pose.cx + rng.uniform(-0.5, 0.5) * specs[s]->body_a;
                    plan.occl_width = rng.uniform(0.25, 0.45) * specs[s]->body_a;
                }
                plan.noise_seed = derive_seed(cfg.seed, 0x401e, s, traj * 131 + f);
                plans.push_back(std::move(plan));
                ++produced;
            }
            ++traj;
        }
    }

    const fs::path root(out_dir);
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");

    parallel_for(plans.size(), workers, [&](std::size_t i) {
        const ImagePlan& plan = plans[i];
        Image img;
        Mask mask;
        render(*specs[plan.species_idx], plan, cfg, img, mask);
        write_png((root / "images" / (plan.id + ".png")).string(), img);
        write_mask_png((root / "masks" / (plan.id + ".png")).string(), mask);
    });

    std::ofstream labels(root / "labels.csv");
    if (!labels) throw data_error("cannot write labels.csv in " + out_dir);
    labels << "filename,species,trajectory_id\n";
    for (const auto& plan : plans)
        labels << plan.id << ".png," << plan.species << ',' << plan.trajectory << '\n';
}

void split_dataset(const std::string& dataset_dir, double train_fraction,
                   const std::string& train_dir, const std::string& test_dir) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw config_error("split fraction must be inside (0,1)");
    const fs::path src(dataset_dir);
    std::ifstream in(src / "labels.csv");
    if (!in) throw data_error("cannot open labels.csv in " + dataset_dir);

    struct Row {
        std::string filename, species, traj;
    };
    std::vector<Row> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw data_error("malformed labels.csv row: " + line);
        rows.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), line.substr(c2 + 1)});
    }

    // whole trajectories, greedily filling each species' train quota
    std::map<std::string, std::vector<std::string>> species_trajs;  // ordered by first appearance
    std::map<std::string, int> traj_count;
    std::map<std::string, int> species_count;
    for (const auto& r : rows) {
        auto& list = species_trajs[r.species];
        if (std::find(list.begin(), list.end(), r.traj) == list.end()) list.push_back(r.traj);
        ++traj_count[r.traj];
        ++species_count[r.species];
    }
    std::map<std::string, bool> traj_to_train;
    for (const auto& [species, trajs] : species_trajs) {
        const int want = static_cast<int>(std::llround(train_fraction * species_count[species]));
        int have = 0;
        for (const auto& t : trajs) {
            // take the trajectory only when it moves the count toward the quota
            const bool to_train = (want - have) * 2 > traj_count[t];
            traj_to_train[t] = to_train;
            if (to_train) have += traj_count[t];
        }
    }

    for (const auto* dir : {&train_dir, &test_dir}) {
        fs::create_directories(fs::path(*dir) / "images");
        fs::create_directories(fs::path(*dir) / "masks");
    }
    std::ofstream train_labels(fs::path(train_dir) / "labels.csv");
    std::ofstream test_labels(fs::path(test_dir) / "labels.csv");
    train_labels << "filename,species,trajectory_id\n";
    test_labels << "filename,species,trajectory_id\n";

    for (const auto& r : rows) {
        const bool to_train = traj_to_train[r.traj];
        const fs::path dst(to_train ? train_dir : test_dir);
        const std::string stem = fs::path(r.filename).stem().string();
        fs::copy_file(src / "images" / r.filename, dst / "images" / r.filename,
                      fs::copy_options::overwrite_existing);
        fs::copy_file(src / "masks" / (stem + ".png"), dst / "masks" / (stem + ".png"),
                      fs::copy_options::overwrite_existing);
        (to_train ? train_labels : test_labels)
            << r.filename << ',' << r.species << ',' << r.traj << '\n';
    }
}

}  // namespace fishrec
