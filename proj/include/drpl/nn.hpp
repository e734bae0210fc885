#pragma once

#include <optional>
#include <vector>

#include "drpl/dataset.hpp"
#include "drpl/rng.hpp"

namespace drpl {

constexpr double kProbFloor = 1e-7;  // clamp before any log

/// Fully connected softmax classifier with ReLU hidden layers.
struct Classifier {
    struct Layer {
        Matrix weight;  // out x in
        Vector bias;    // out
    };
    std::vector<Layer> layers;

    int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
    int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
    int hidden_count() const { return static_cast<int>(layers.size()) - 1; }
    bool all_finite() const;
};

/// He-uniform initialization, deterministic under the given rng.
Classifier make_classifier(int input_dim, const std::vector<int>& hidden,
                           int num_classes, Rng& rng);

/// One optimization step's worth of data: features plus soft targets.
struct Batch {
    Matrix features;          // B x D
    Matrix targets;           // B x C, rows on the simplex
    std::vector<int> sample_ids;

    void validate(double tol = 1e-6) const;
};

/// SGD with momentum; weight decay applies to weights only.
struct OptState {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<Classifier::Layer> velocity;  // same shapes as model parameters

    static OptState for_model(const Classifier& model, double lr,
                              double momentum = 0.9, double weight_decay = 1e-4);
};

/// Softmax probabilities, one row per sample.
Matrix forward(const Classifier& model, const Matrix& features);

/// Forward pass keeping post-activation hidden features (for backprop and probes).
struct ForwardTrace {
    std::vector<Matrix> hidden;  // post-ReLU activations per hidden layer
    Matrix probabilities;
};
ForwardTrace forward_trace(const Classifier& model, const Matrix& features);

struct CrossEntropyResult {
    double mean = 0.0;
    Vector per_sample;
};
CrossEntropyResult cross_entropy(const Matrix& probabilities, const Matrix& targets);

/// Mean prediction entropy, -(1/N) sum_i sum_c p log p. Zero on one-hot rows.
double entropy_reg(const Matrix& probabilities);

/// KL(prior || batch-mean prediction). Zero iff the batch mean equals the prior.
double balance_reg(const Matrix& probabilities, const Vector& prior);

/// Convex combination of the batch with a seeded permutation of itself,
/// lambda ~ Beta(alpha, alpha). forced_lambda bypasses the draw in tests.
Batch mixup(const Batch& batch, double alpha, Rng& rng,
            std::optional<double> forced_lambda = std::nullopt);

struct LossSpec {
    double lambda_entropy = 1.0;   // weight on entropy_reg
    double lambda_balance = 1.0;   // weight on balance_reg
    Vector prior;                  // empty -> uniform
};

/// One SGD step on CE(targets) + regularizers. Returns the pre-step loss.
double backward_and_step(Classifier& model, OptState& opt, const Batch& batch,
                         const LossSpec& spec);

/// Backpropagate an externally supplied d(loss)/d(logits) through the model
/// and apply one SGD step (used by the corrected-loss baseline).
void sgd_step_with_logit_gradient(Classifier& model, OptState& opt,
                                  const Matrix& features, const ForwardTrace& trace,
                                  Matrix logit_grad);

/// Loss value only (no step); shares the exact computation the step optimizes.
double training_loss(const Classifier& model, const Batch& batch, const LossSpec& spec);

/// Noise-corrected probabilities: out_row = p_row * T (probability of the
/// observed label given corruption by row-stochastic T).
Matrix forward_corrected(const Matrix& probabilities, const TransitionMatrix& t);

}  // namespace drpl
