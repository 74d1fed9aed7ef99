#include "fishrec/eval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fishrec/classifier.hpp"
#include "fishrec/errors.hpp"

namespace fishrec {

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    if (denom <= 0.0) return 0.0;
    return 2.0 * precision * recall / denom;
}

MetricsReport compute_metrics(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw data_error("compute_metrics: no records");

    std::set<std::string> class_set;
    for (const auto& r : records) {
        class_set.insert(r.true_species);
        if (r.complete && !r.predicted.empty()) class_set.insert(r.predicted);
    }

    MetricsReport rep;
    rep.classes.assign(class_set.begin(), class_set.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < rep.classes.size(); ++i) index[rep.classes[i]] = static_cast<int>(i);

    const int n_cls = static_cast<int>(rep.classes.size());
    rep.confusion.assign(n_cls, std::vector<int>(n_cls, 0));
    std::vector<int> tp(n_cls, 0), fp(n_cls, 0), fn(n_cls, 0);

    std::size_t correct = 0;
    for (const auto& r : records) {
        ++rep.total;
        if (!r.complete) continue;
        ++rep.complete;
        const int t = index[r.true_species];
        const int p = index[r.predicted];
        ++rep.confusion[t][p];
        if (t == p) {
            ++tp[t];
            ++correct;
        } else {
            ++fp[p];
            ++fn[t];
        }
    }

    rep.precision.resize(n_cls);
    rep.recall.resize(n_cls);
    rep.f1.resize(n_cls);
    for (int c = 0; c < n_cls; ++c) {
        const int p_den = tp[c] + fp[c];
        const int r_den = tp[c] + fn[c];
        if (p_den == 0)
            rep.flags.push_back("class " + rep.classes[c] + " has no complete predictions; precision reported as 0");
        rep.precision[c] = p_den > 0 ? static_cast<double>(tp[c]) / p_den : 0.0;
        rep.recall[c] = r_den > 0 ? static_cast<double>(tp[c]) / r_den : 0.0;
        rep.f1[c] = f1_score(rep.precision[c], rep.recall[c]);
        rep.ap += rep.precision[c];
        rep.ar += rep.recall[c];
    }
    rep.ap /= n_cls;
    rep.ar /= n_cls;
    if (rep.complete > 0) {
        rep.ac = static_cast<double>(correct) / rep.complete;
    } else {
        rep.ac = 0.0;
        rep.flags.push_back("no complete predictions; AC reported as 0");
    }
    rep.pd = static_cast<double>(rep.total - rep.complete) / rep.total;
    return rep;
}

std::vector<PredictionRecord> trajectory_vote(std::vector<PredictionRecord> records) {
    std::map<std::string, std::map<std::string, int>> votes;
    for (const auto& r : records)
        if (r.complete && !r.trajectory.empty()) ++votes[r.trajectory][r.predicted];

    std::map<std::string, std::string> winner;
    for (const auto& [traj, counts] : votes) {
        int best = 0;
        bool tie = false;
        std::string label;
        for (const auto& [species, n] : counts) {
            if (n > best) {
                best = n;
                label = species;
                tie = false;
            } else if (n == best) {
                tie = true;
            }
        }
        if (!tie && !label.empty()) winner[traj] = label;
    }

    for (auto& r : records) {
        if (!r.complete || r.trajectory.empty()) continue;
        auto it = winner.find(r.trajectory);
        if (it != winner.end()) r.predicted = it->second;
    }
    return records;
}

std::vector<int> flat_svm_baseline(const Eigen::MatrixXd& train_x,
                                   const std::vector<int>& train_species, int n_species,
                                   const Eigen::MatrixXd& test_x, double c, double gamma) {
    if (n_species < 1) throw data_error("flat_svm_baseline: no species");
    if (n_species == 1) return std::vector<int>(test_x.rows(), 0);

    std::vector<SvmModel> models;
    models.reserve(n_species);
    for (int s = 0; s < n_species; ++s) {
        std::vector<int> y(train_species.size());
        for (std::size_t i = 0; i < train_species.size(); ++i)
            y[i] = train_species[i] == s ? 1 : -1;
        models.push_back(train_biased_svm(train_x, y, c, gamma));
    }

    std::vector<int> out(test_x.rows(), 0);
    for (int i = 0; i < test_x.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < n_species; ++s) {
            const double f = models[s].decision(test_x.row(i));
            if (f > best) {  // strict: ties keep the lowest species id
                best = f;
                out[i] = s;
            }
        }
    }
    return out;
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "class                precision  recall     f1\n";
    for (std::size_t c = 0; c < classes.size(); ++c) {
        os << classes[c];
        for (std::size_t pad = classes[c].size(); pad < 21; ++pad) os << ' ';
        os << precision[c] << "     " << recall[c] << "     " << f1[c] << "\n";
    }
    os << "\nAP " << ap << "  AR " << ar << "  AC " << ac << "  PD " << pd << "\n";
    os << "samples " << total << "  complete " << complete << "\n";
    for (const auto& f : flags) os << "note: " << f << "\n";
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["classes"] = classes;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["ap"] = ap;
    j["ar"] = ar;
    j["ac"] = ac;
    j["pd"] = pd;
    j["total"] = total;
    j["complete"] = complete;
    j["confusion"] = confusion;
    j["flags"] = flags;
    return j.dump(2);
}

std::string MetricsReport::confusion_csv() const {
    std::ostringstream os;
    os << "true\\predicted";
    for (const auto& c : classes) os << ',' << c;
    os << '\n';
    for (std::size_t t = 0; t < classes.size(); ++t) {
        os << classes[t];
        for (std::size_t p = 0; p < classes.size(); ++p) os << ',' << confusion[t][p];
        os << '\n';
    }
    return os.str();
}

std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
    std::ostringstream os;
    os << "sample_id,trajectory_id,true_species,label_sequence,complete\n";
    for (const auto& r : records) {
        std::string seq = r.path;
        if (r.complete) seq += (seq.empty() ? "" : ":") + r.predicted;
        os << r.sample_id << ',' << r.trajectory << ',' << r.true_species << ',' << seq << ','
           << (r.complete ? 1 : 0) << '\n';
    }
    return os.str();
}

std::vector<PredictionRecord> predictions_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) ||
        line != "sample_id,trajectory_id,true_species,label_sequence,complete")
        throw data_error("predictions CSV: unexpected header");

    std::vector<PredictionRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        while (f.size() < 5) f.emplace_back();
        if (f.size() != 5)
            throw data_error("predictions CSV: malformed row " + std::to_string(lineno));
        PredictionRecord r;
        r.sample_id = f[0];
        r.trajectory = f[1];
        r.true_species = f[2];
        r.complete = f[4] == "1";
        const auto colon = f[3].find(':');
        if (r.complete) {
            if (colon != std::string::npos) {
                r.path = f[3].substr(0, colon);
                r.predicted = f[3].substr(colon + 1);
            } else {
                r.predicted = f[3];  // decided at a root that is already a leaf
            }
        } else {
            r.path = f[3];
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fishrec
