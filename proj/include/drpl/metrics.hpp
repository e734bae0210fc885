#pragma once

#include <utility>
#include <vector>

#include "drpl/nn.hpp"

namespace drpl {

/// Scores plus ground truth for noisy-sample detection. Positives are noisy
/// samples; a sample counts as detected-noisy when its score exceeds the
/// operating threshold.
struct DetectionOutcome {
    Vector scores;                       // posterior p(k=2|l) or raw loss
    std::vector<std::uint8_t> is_noisy;  // ground truth (!clean_mask)
    double threshold = 0.5;
};

struct RocPoint {
    double threshold, fpr, tpr;
};

struct RocResult {
    std::vector<RocPoint> points;  // swept from (0,0) to (1,1)
    double auc = 0.0;
    double operating_tpr = 0.0, operating_fpr = 0.0;
};

std::pair<double, double> tpr_fpr(const DetectionOutcome& outcome);

RocResult roc(const DetectionOutcome& outcome);

/// Fraction of argmax predictions matching true labels; ties -> lowest class.
double accuracy(const Classifier& model, const Dataset& test);

struct ProbeConfig {
    int steps = 200;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

/// Train a fresh softmax regression on frozen post-activation features at the
/// given hidden depth; returns accuracy on the target test split.
double linear_probe(const Classifier& model, int depth, const Dataset& probe_train,
                    const Dataset& probe_test, const ProbeConfig& cfg = {});

}  // namespace drpl
