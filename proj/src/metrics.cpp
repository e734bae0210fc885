#include "drpl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace drpl {

namespace {

struct Counts {
    long positives = 0, negatives = 0;
};

Counts count_truth(const DetectionOutcome& outcome) {
    if (outcome.scores.size() != static_cast<Eigen::Index>(outcome.is_noisy.size()))
        throw std::invalid_argument("detection outcome: length mismatch");
    Counts c;
    for (auto f : outcome.is_noisy) (f ? c.positives : c.negatives)++;
    if (c.positives == 0 || c.negatives == 0)
        throw std::invalid_argument("detection outcome: degenerate ground truth");
    return c;
}

int argmax_row(const Eigen::RowVectorXd& row) {
    int best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = static_cast<int>(c);
    return best;
}

}  // namespace

std::pair<double, double> tpr_fpr(const DetectionOutcome& outcome) {
    Counts c = count_truth(outcome);
    long tp = 0, fp = 0;
    for (Eigen::Index i = 0; i < outcome.scores.size(); ++i) {
        if (outcome.scores[i] > outcome.threshold)
            (outcome.is_noisy[i] ? tp : fp)++;
    }
    return {static_cast<double>(tp) / c.positives, static_cast<double>(fp) / c.negatives};
}

RocResult roc(const DetectionOutcome& outcome) {
    Counts c = count_truth(outcome);
    const Eigen::Index n = outcome.scores.size();

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return outcome.scores[a] > outcome.scores[b]; });

    RocResult res;
    res.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    long tp = 0, fp = 0;
    Eigen::Index i = 0;
    while (i < n) {
        double s = outcome.scores[order[i]];
        while (i < n && outcome.scores[order[i]] == s) {
            (outcome.is_noisy[order[i]] ? tp : fp)++;
            ++i;
        }
        // threshold just below s: everything with score >= s is flagged noisy
        res.points.push_back({s, static_cast<double>(fp) / c.negatives,
                              static_cast<double>(tp) / c.positives});
    }

    double auc = 0.0;
    for (std::size_t k = 1; k < res.points.size(); ++k)
        auc += (res.points[k].fpr - res.points[k - 1].fpr) *
               (res.points[k].tpr + res.points[k - 1].tpr) * 0.5;
    res.auc = auc;

    auto [otpr, ofpr] = tpr_fpr(outcome);
    res.operating_tpr = otpr;
    res.operating_fpr = ofpr;
    return res;
}

double accuracy(const Classifier& model, const Dataset& test) {
    if (test.size() == 0) throw std::invalid_argument("accuracy: empty test set");
    Matrix probs = forward(model, test.features);
    long hits = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
        if (argmax_row(probs.row(i)) == test.true_labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

double linear_probe(const Classifier& model, int depth, const Dataset& probe_train,
                    const Dataset& probe_test, const ProbeConfig& cfg) {
    if (depth < 0 || depth >= model.hidden_count())
        throw std::invalid_argument("linear_probe: depth out of range");

    Matrix train_feats = forward_trace(model, probe_train.features).hidden[depth];
    Matrix test_feats = forward_trace(model, probe_test.features).hidden[depth];

    const int classes = probe_train.num_classes;
    const Eigen::Index n = train_feats.rows(), f = train_feats.cols();

    Matrix targets = Matrix::Zero(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) targets(i, probe_train.true_labels[i]) = 1.0;

    // Convex problem: zero init + full-batch GD is deterministic.
    Matrix w = Matrix::Zero(classes, f);
    Vector b = Vector::Zero(classes);
    for (int step = 0; step < cfg.steps; ++step) {
        Matrix logits = (train_feats * w.transpose()).rowwise() + b.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVectorXd row = logits.row(i);
            row.array() -= row.maxCoeff();
            Eigen::RowVectorXd e = row.array().exp();
            logits.row(i) = e / e.sum();
        }
        Matrix delta = (logits - targets) / static_cast<double>(n);
        w -= cfg.learning_rate * (delta.transpose() * train_feats);
        b -= cfg.learning_rate * delta.colwise().sum().transpose();
    }

    Matrix logits = (test_feats * w.transpose()).rowwise() + b.transpose();
    long hits = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        if (argmax_row(logits.row(i)) == probe_test.true_labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(probe_test.size());
}

}  // namespace drpl
