#include "drpl/nn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace drpl {

namespace {

Matrix softmax_rows(Matrix logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::RowVectorXd row = logits.row(i);
        row.array() -= row.maxCoeff();
        Eigen::RowVectorXd e = row.array().exp();
        logits.row(i) = e / e.sum();
    }
    return logits;
}

inline double clamped_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_features(const Classifier& model, const Matrix& features) {
    if (features.cols() != model.input_dim())
        throw std::invalid_argument("forward: feature dimension " +
                                    std::to_string(features.cols()) +
                                    " does not match model input " +
                                    std::to_string(model.input_dim()));
}

}  // namespace

bool Classifier::all_finite() const {
    for (const auto& l : layers)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

Classifier make_classifier(int input_dim, const std::vector<int>& hidden,
                           int num_classes, Rng& rng) {
    if (input_dim < 1 || num_classes < 2)
        throw std::invalid_argument("make_classifier: bad dimensions");
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(num_classes);

    Classifier model;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        int fan_in = sizes[l], fan_out = sizes[l + 1];
        double limit = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-limit, limit);
        Classifier::Layer layer;
        layer.weight = Matrix::NullaryExpr(fan_out, fan_in, [&] { return u(rng); });
        layer.bias = Vector::Zero(fan_out);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

void Batch::validate(double tol) const {
    if (features.rows() != targets.rows())
        throw std::invalid_argument("batch: features/targets row mismatch");
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
        if (targets.row(i).minCoeff() < -tol ||
            std::abs(targets.row(i).sum() - 1.0) > tol)
            throw std::invalid_argument("batch: target row " + std::to_string(i) +
                                        " is not on the simplex");
    }
}

OptState OptState::for_model(const Classifier& model, double lr, double momentum,
                             double weight_decay) {
    OptState opt;
    opt.learning_rate = lr;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    for (const auto& l : model.layers)
        opt.velocity.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                                Vector::Zero(l.bias.size())});
    return opt;
}

ForwardTrace forward_trace(const Classifier& model, const Matrix& features) {
    check_features(model, features);
    ForwardTrace trace;
    Matrix h = features;
    for (int l = 0; l < model.hidden_count(); ++l) {
        h = ((h * model.layers[l].weight.transpose()).rowwise() +
             model.layers[l].bias.transpose())
                .cwiseMax(0.0);
        trace.hidden.push_back(h);
    }
    const auto& out = model.layers.back();
    Matrix logits = (h * out.weight.transpose()).rowwise() + out.bias.transpose();
    trace.probabilities = softmax_rows(std::move(logits));
    return trace;
}

Matrix forward(const Classifier& model, const Matrix& features) {
    return forward_trace(model, features).probabilities;
}

CrossEntropyResult cross_entropy(const Matrix& probabilities, const Matrix& targets) {
    if (probabilities.rows() != targets.rows() || probabilities.cols() != targets.cols())
        throw std::invalid_argument("cross_entropy: shape mismatch");
    CrossEntropyResult res;
    res.per_sample = Vector::Zero(probabilities.rows());
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < probabilities.cols(); ++c)
            if (targets(i, c) != 0.0) s -= targets(i, c) * clamped_log(probabilities(i, c));
        res.per_sample[i] = s;
    }
    res.mean = probabilities.rows() > 0 ? res.per_sample.mean() : 0.0;
    return res;
}

double entropy_reg(const Matrix& probabilities) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
        for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
            double p = probabilities(i, c);
            if (p > 0.0) total -= p * clamped_log(p);
        }
    return probabilities.rows() > 0 ? total / probabilities.rows() : 0.0;
}

double balance_reg(const Matrix& probabilities, const Vector& prior) {
    if (prior.size() != probabilities.cols())
        throw std::invalid_argument("balance_reg: prior size mismatch");
    if (std::abs(prior.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("balance_reg: prior does not sum to 1");
    Eigen::RowVectorXd mean = probabilities.colwise().mean();
    double kl = 0.0;
    for (Eigen::Index c = 0; c < prior.size(); ++c)
        if (prior[c] > 0.0)
            kl += prior[c] * (std::log(prior[c]) - clamped_log(mean[c]));
    return kl;
}

Batch mixup(const Batch& batch, double alpha, Rng& rng,
            std::optional<double> forced_lambda) {
    if (alpha <= 0.0) throw std::invalid_argument("mixup: alpha must be > 0");
    const Eigen::Index n = batch.features.rows();
    double lambda = forced_lambda ? *forced_lambda : beta_sample(rng, alpha, alpha);

    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);

    Batch mixed = batch;
    for (Eigen::Index i = 0; i < n; ++i) {
        mixed.features.row(i) =
            lambda * batch.features.row(i) + (1.0 - lambda) * batch.features.row(perm[i]);
        mixed.targets.row(i) =
            lambda * batch.targets.row(i) + (1.0 - lambda) * batch.targets.row(perm[i]);
    }
    return mixed;
}

namespace {

Vector effective_prior(const LossSpec& spec, Eigen::Index classes) {
    if (spec.prior.size() == 0)
        return Vector::Constant(classes, 1.0 / static_cast<double>(classes));
    return spec.prior;
}

double loss_from_probs(const Matrix& probs, const Batch& batch, const LossSpec& spec,
                       const Vector& prior) {
    double loss = cross_entropy(probs, batch.targets).mean;
    if (spec.lambda_entropy != 0.0) loss += spec.lambda_entropy * entropy_reg(probs);
    if (spec.lambda_balance != 0.0) loss += spec.lambda_balance * balance_reg(probs, prior);
    return loss;
}

// d(total loss)/d(logits) for CE + lambda1*R_H + lambda2*R_A, all means over B.
Matrix logit_gradient(const Matrix& probs, const Batch& batch, const LossSpec& spec,
                      const Vector& prior) {
    const Eigen::Index b = probs.rows(), c = probs.cols();
    const double invb = 1.0 / static_cast<double>(b);
    Matrix grad = (probs - batch.targets) * invb;

    if (spec.lambda_entropy != 0.0) {
        for (Eigen::Index i = 0; i < b; ++i) {
            double h = 0.0;
            for (Eigen::Index j = 0; j < c; ++j) {
                double p = probs(i, j);
                if (p > 0.0) h -= p * std::log(p);
            }
            for (Eigen::Index j = 0; j < c; ++j) {
                double p = probs(i, j);
                double lp = p > 0.0 ? std::log(p) : std::log(kProbFloor);
                grad(i, j) += spec.lambda_entropy * (-invb) * p * (lp + h);
            }
        }
    }

    if (spec.lambda_balance != 0.0) {
        Eigen::RowVectorXd mean = probs.colwise().mean().cwiseMax(kProbFloor);
        Eigen::RowVectorXd ratio(c);  // prior_c / mean_c
        for (Eigen::Index j = 0; j < c; ++j) ratio[j] = prior[j] / mean[j];
        for (Eigen::Index i = 0; i < b; ++i) {
            double dot = 0.0;
            for (Eigen::Index j = 0; j < c; ++j) dot += ratio[j] * probs(i, j);
            for (Eigen::Index j = 0; j < c; ++j)
                grad(i, j) += spec.lambda_balance * invb * probs(i, j) * (dot - ratio[j]);
        }
    }
    return grad;
}

}  // namespace

double training_loss(const Classifier& model, const Batch& batch, const LossSpec& spec) {
    batch.validate();
    Vector prior = effective_prior(spec, model.output_dim());
    return loss_from_probs(forward(model, batch.features), batch, spec, prior);
}

double backward_and_step(Classifier& model, OptState& opt, const Batch& batch,
                         const LossSpec& spec) {
    batch.validate();
    Vector prior = effective_prior(spec, model.output_dim());
    ForwardTrace trace = forward_trace(model, batch.features);
    double loss = loss_from_probs(trace.probabilities, batch, spec, prior);
    sgd_step_with_logit_gradient(model, opt, batch.features, trace,
                                 logit_gradient(trace.probabilities, batch, spec, prior));
    return loss;
}

void sgd_step_with_logit_gradient(Classifier& model, OptState& opt,
                                  const Matrix& features, const ForwardTrace& trace,
                                  Matrix delta) {
    const int layer_count = static_cast<int>(model.layers.size());
    std::vector<Matrix> weight_grads(layer_count);
    std::vector<Vector> bias_grads(layer_count);

    for (int l = layer_count - 1; l >= 0; --l) {
        const Matrix& input =
            l == 0 ? features : trace.hidden[static_cast<std::size_t>(l) - 1];
        weight_grads[l] = delta.transpose() * input;
        bias_grads[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = delta * model.layers[l].weight;
            const Matrix& act = trace.hidden[static_cast<std::size_t>(l) - 1];
            delta = (act.array() > 0.0).cast<double>() * delta.array();
        }
    }

    for (int l = 0; l < layer_count; ++l)
        if (!weight_grads[l].allFinite() || !bias_grads[l].allFinite())
            throw std::runtime_error("backward_and_step: non-finite gradient in layer " +
                                     std::to_string(l));

    for (int l = 0; l < layer_count; ++l) {
        auto& layer = model.layers[l];
        auto& vel = opt.velocity[l];
        vel.weight = opt.momentum * vel.weight + weight_grads[l] +
                     opt.weight_decay * layer.weight;
        vel.bias = opt.momentum * vel.bias + bias_grads[l];  // no decay on biases
        layer.weight -= opt.learning_rate * vel.weight;
        layer.bias -= opt.learning_rate * vel.bias;
    }
}

Matrix forward_corrected(const Matrix& probabilities, const TransitionMatrix& t) {
    t.validate();
    if (probabilities.cols() != t.row_count())
        throw std::invalid_argument("forward_corrected: class count mismatch");
    return probabilities * t.rows;
}

}  // namespace drpl
