#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace fishrec {

// One test-sample outcome. path holds the per-layer decisions from the root
// ('P' positive side, 'N' negative side); predicted is empty when incomplete.
struct PredictionRecord {
    std::string sample_id;
    std::string trajectory;
    std::string true_species;
    std::string path;
    bool complete = false;
    std::string predicted;
};

struct MetricsReport {
    std::vector<std::string> classes;  // sorted
    std::vector<double> precision, recall, f1;
    double ap = 0.0, ar = 0.0, ac = 0.0, pd = 0.0;
    std::size_t total = 0, complete = 0;
    std::vector<std::vector<int>> confusion;  // rows true, cols predicted; complete only
    std::vector<std::string> flags;

    std::string to_table() const;
    std::string to_json() const;
    std::string confusion_csv() const;
};

double f1_score(double precision, double recall);

// Precision/recall/F1 per class and AP/AR over complete predictions only;
// AC = correct complete / complete; PD = incomplete / total. Classes without
// complete predictions score 0 and are flagged.
MetricsReport compute_metrics(const std::vector<PredictionRecord>& records);

// Majority vote over the complete labels of each trajectory; ties leave the
// trajectory untouched; incomplete predictions are never altered.
std::vector<PredictionRecord> trajectory_vote(std::vector<PredictionRecord> records);

// One-vs-rest flat multiclass baseline over the same biased SVM. Returns one
// species id per test row; ties resolve to the lowest species id.
std::vector<int> flat_svm_baseline(const Eigen::MatrixXd& train_x,
                                   const std::vector<int>& train_species, int n_species,
                                   const Eigen::MatrixXd& test_x, double c, double gamma);

// predictions CSV: sample_id,trajectory_id,true_species,label_sequence,complete
std::string predictions_to_csv(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> predictions_from_csv(const std::string& text);

}  // namespace fishrec
