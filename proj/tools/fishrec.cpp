#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "fishrec/config.hpp"
#include "fishrec/dataset.hpp"
#include "fishrec/errors.hpp"
#include "fishrec/eval.hpp"
#include "fishrec/model_io.hpp"
#include "fishrec/pipeline.hpp"
#include "fishrec/raster_io.hpp"
#include "fishrec/saliency.hpp"
#include "fishrec/synthgen.hpp"

namespace fs = std::filesystem;
using namespace fishrec;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = -1;
};

PipelineConfig effective_config(const CommonOpts& opts) {
    PipelineConfig cfg = opts.config_path.empty() ? PipelineConfig{} : load_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.workers >= 0) cfg.workers = opts.workers;
    cfg.normalize();
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << content;
}

int cmd_synth(const CommonOpts& opts, const std::string& out_dir) {
    const PipelineConfig cfg = effective_config(opts);
    gen_dataset(cfg.synth, out_dir, cfg.workers);
    std::cout << "dataset written to " << out_dir << "\n";
    if (cfg.synth_split > 0.0) {
        split_dataset(out_dir, cfg.synth_split, (fs::path(out_dir) / "train").string(),
                      (fs::path(out_dir) / "test").string());
        std::cout << "split into " << out_dir << "/train and " << out_dir << "/test\n";
    }
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& model_out) {
    const PipelineConfig cfg = effective_config(opts);
    const auto samples = load_dataset(data_dir);
    const TrainResult result = train_pipeline(samples, cfg, &std::cout);
    save_model(model_out, result.model);

    // per-iteration objective log next to the model file
    std::ostringstream jsonl;
    for (std::size_t i = 0; i < result.part_log.iterations.size(); ++i) {
        const auto& b = result.part_log.iterations[i];
        jsonl << "{\"iteration\":" << i + 1 << ",\"fitness\":" << b.fitness
              << ",\"separation\":" << b.separation << ",\"discrimination\":" << b.discrimination
              << ",\"total\":" << b.total << "}\n";
    }
    write_file(model_out + ".train.jsonl", jsonl.str());
    std::cout << "model written to " << model_out << "\n";
    return 0;
}

int cmd_predict(const CommonOpts& opts, const std::string& data_dir, const std::string& model_path,
                const std::string& out_path) {
    const TrainedModel model = load_model(model_path);
    int workers = model.config.workers;
    if (opts.workers >= 0) workers = opts.workers;
    const auto samples = load_dataset(data_dir);
    const auto records = predict_pipeline(model, samples, workers);
    write_file(out_path, predictions_to_csv(records));
    std::cout << "predictions written to " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& labels_path,
                 const std::string& out_prefix, bool vote) {
    std::ifstream in(pred_path, std::ios::binary);
    if (!in) throw data_error("cannot open predictions file: " + pred_path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto records = predictions_from_csv(ss.str());
    if (records.empty()) throw data_error("predictions file is empty");

    // cross-check against the labels file
    const auto rows = load_labels_csv(labels_path);
    std::map<std::string, const LabelRow*> by_stem;
    for (const auto& r : rows) by_stem[file_stem(r.filename)] = &r;
    for (auto& rec : records) {
        const auto it = by_stem.find(rec.sample_id);
        if (it == by_stem.end())
            throw data_error("prediction sample " + rec.sample_id + " missing from labels file");
        if (it->second->species != rec.true_species)
            throw data_error("species mismatch for sample " + rec.sample_id);
    }

    const MetricsReport raw = compute_metrics(records);
    MetricsReport voted;
    if (vote) voted = compute_metrics(trajectory_vote(records));

    std::ostringstream table;
    table << "== raw predictions ==\n" << raw.to_table();
    if (vote) table << "\n== after trajectory voting ==\n" << voted.to_table();
    write_file(out_prefix + ".txt", table.str());

    std::ostringstream json;
    json << "{\n\"raw\": " << raw.to_json();
    if (vote) json << ",\n\"voted\": " << voted.to_json();
    json << "\n}\n";
    write_file(out_prefix + ".json", json.str());
    write_file(out_prefix + "_confusion.csv", (vote ? voted : raw).confusion_csv());

    std::cout << table.str();
    std::cout << "report written to " << out_prefix << ".{txt,json}\n";
    return 0;
}

int cmd_saliency(const CommonOpts& opts, const std::string& image_path,
                 const std::string& mask_path, const std::string& out_prefix) {
    const PipelineConfig cfg = effective_config(opts);
    const Image image = read_image(image_path);
    Mask mask = mask_path.empty() ? Mask(image.width(), image.height(), true)
                                  : read_mask(mask_path);
    const SaliencyMap map = pft_saliency(image, cfg.learn.saliency);

    Image gray(map.width, map.height, 1);
    const double peak = *std::max_element(map.values.begin(), map.values.end());
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            gray.at(x, y) = peak > 0 ? static_cast<float>(map.at(x, y) / peak) : 0.0f;
    write_pgm(out_prefix + ".pgm", gray);

    std::ostringstream csv;
    csv << "row,col,value\n";
    for (const auto& p : nonmax_suppress(map, mask, cfg.learn.saliency))
        csv << p.y << ',' << p.x << ',' << p.value << '\n';
    write_file(out_prefix + "_keypoints.csv", csv.str());
    std::cout << "saliency dump written to " << out_prefix << ".pgm\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised part-model learning and hierarchical partial classification"};
    app.require_subcommand(1);

    CommonOpts opts;
    app.add_option("--config", opts.config_path, "pipeline config file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", opts.seed, "override the config seed");
    app.add_option("--workers", opts.workers, "worker threads (0 = hardware)");

    std::string out_path, data_dir, model_path, pred_path, labels_path, image_path, mask_path;
    bool no_vote = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    synth->fallthrough();
    synth->add_option("--out", out_path, "output dataset directory")->required();

    auto* train = app.add_subcommand("train", "learn the part model and the class hierarchy");
    train->fallthrough();
    train->add_option("--data", data_dir, "training dataset directory")->required();
    train->add_option("--out", model_path, "output model file")->required();

    auto* predict = app.add_subcommand("predict", "classify a dataset with a trained model");
    predict->fallthrough();
    predict->add_option("--data", data_dir, "dataset directory")->required();
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--out", pred_path, "output predictions CSV")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score a predictions file");
    evaluate->fallthrough();
    evaluate->add_option("--pred", pred_path, "predictions CSV")->required();
    evaluate->add_option("--labels", labels_path, "labels.csv of the evaluated dataset")->required();
    evaluate->add_option("--out", out_path, "report path prefix")->required();
    evaluate->add_flag("--no-vote", no_vote, "skip trajectory voting");

    auto* saliency = app.add_subcommand("saliency", "dump the saliency map and keypoints");
    saliency->fallthrough();
    saliency->add_option("--image", image_path, "input image")->required();
    saliency->add_option("--mask", mask_path, "optional mask for keypoint gating");
    saliency->add_option("--out", out_path, "output path prefix")->required();

    CLI11_PARSE(app, argc, argv);
    opts.seed_set = seed_opt->count() > 0;

    try {
        if (synth->parsed()) return cmd_synth(opts, out_path);
        if (train->parsed()) return cmd_train(opts, data_dir, model_path);
        if (predict->parsed()) return cmd_predict(opts, data_dir, model_path, pred_path);
        if (evaluate->parsed()) return cmd_evaluate(pred_path, labels_path, out_path, !no_vote);
        if (saliency->parsed()) return cmd_saliency(opts, image_path, mask_path, out_path);
    } catch (const config_error& e) {
        std::cerr << "error: code=2 msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "error: code=3 msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "error: code=4 msg=\"" << e.what() << "\"\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: code=1 msg=\"" << e.what() << "\"\n";
        return 1;
    }
    return 0;
}
