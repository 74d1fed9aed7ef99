#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "fishrec/dataset.hpp"
#include "fishrec/eval.hpp"
#include "fishrec/model_io.hpp"

namespace fishrec {

// Full training pass: part-model learning, per-image feature assembly,
// C selection by k-fold cross-validation, final hierarchy training.
struct TrainResult {
    TrainedModel model;
    Eigen::MatrixXd train_features;  // one row per kept training sample
    std::vector<int> train_species;  // species ids aligned with the rows
    std::vector<std::string> kept_ids;
    TrainLog part_log;
    std::vector<std::pair<double, double>> cv_scores;  // (C, mean fold accuracy)
};

TrainResult train_pipeline(const std::vector<Sample>& samples, PipelineConfig cfg,
                           std::ostream* log = nullptr);

// Detection + feature assembly + partial classification per sample. Samples
// that cannot be processed yield incomplete records. When features_out is
// given it receives one row per sample (zeros for unusable ones) and
// usable_out the per-sample validity flags.
std::vector<PredictionRecord> predict_pipeline(const TrainedModel& model,
                                               const std::vector<Sample>& samples, int workers,
                                               Eigen::MatrixXd* features_out = nullptr,
                                               std::vector<char>* usable_out = nullptr);

int species_id(const TrainedModel& model, const std::string& name);  // -1 if unknown

}  // namespace fishrec
