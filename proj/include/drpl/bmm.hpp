#pragma once

#include <utility>

#include "drpl/dataset.hpp"

namespace drpl {

/// Two-component Beta mixture over normalized losses. Component 1 models
/// clean samples (lower mean), component 2 noisy samples.
struct BetaMixture {
    double weight1 = 0.5, weight2 = 0.5;
    double alpha1 = 1.0, beta1 = 1.0;
    double alpha2 = 1.0, beta2 = 1.0;
    int iterations = 0;
    double log_likelihood = 0.0;
    bool degenerate = false;  // components collapsed or failed to separate

    double mean1() const { return alpha1 / (alpha1 + beta1); }
    double mean2() const { return alpha2 / (alpha2 + beta2); }
};

/// Per-sample probability of being noisy, p(k=2 | loss).
struct PosteriorVector {
    Vector noisy_probability;
    Vector losses;  // the normalized losses the posteriors were computed from
};

/// Min-max scale to [0,1], then clamp into the open unit interval.
/// A constant vector maps to all 0.5.
Vector normalize_losses(const Vector& raw);

/// EM fit: median-split initialization, weighted method-of-moments M-step,
/// fixed iteration count. Components are ordered so mean1 <= mean2.
BetaMixture fit_beta_mixture(const Vector& losses, int iterations = 10);

PosteriorVector posterior(const BetaMixture& bmm, const Vector& losses);

struct SplitResult {
    std::vector<int> labeled_ids;    // posterior <= gamma, keep observed label
    std::vector<int> labeled_labels;
    std::vector<int> unlabeled_ids;  // posterior > gamma, label discarded
};

/// Threshold the noisy posterior: clean set at p(k=2|l) <= gamma.
SplitResult split(const Dataset& ds, const PosteriorVector& post, double gamma);

}  // namespace drpl
