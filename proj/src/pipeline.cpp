#include "drpl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace drpl {

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Drpl: return "drpl";
        case RunMode::CeBaseline: return "ce-baseline";
        case RunMode::MixupBaseline: return "mixup-baseline";
        case RunMode::OracleSsl: return "oracle-ssl";
        case RunMode::ForwardOracle: return "forward-oracle";
    }
    throw std::logic_error("unknown run mode");
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "drpl") return RunMode::Drpl;
    if (name == "ce-baseline") return RunMode::CeBaseline;
    if (name == "mixup-baseline") return RunMode::MixupBaseline;
    if (name == "oracle-ssl") return RunMode::OracleSsl;
    if (name == "forward-oracle") return RunMode::ForwardOracle;
    throw std::invalid_argument("unknown mode: " + name);
}

void RunConfig::validate() const {
    if (warmup_epochs < 1 || warmup_epochs >= stage1_epochs)
        throw std::invalid_argument("config: warm-up must be shorter than stage 1");
    if (gamma1 <= 0.0 || gamma1 >= 1.0 || gamma2 <= 0.0 || gamma2 >= 1.0)
        throw std::invalid_argument("config: thresholds must lie in (0,1)");
    if (stage2_epochs < 1 || final_epochs < 1 || batch_size < 1)
        throw std::invalid_argument("config: epoch/batch counts must be positive");
    if (mixup_alpha <= 0.0) throw std::invalid_argument("config: mixup alpha must be > 0");
    if (mode == RunMode::ForwardOracle && !oracle_transition)
        throw std::invalid_argument("config: forward-oracle needs the true transition");
}

double scheduled_lr(double base, int epoch, int total_epochs) {
    double lr = base;
    if (epoch > total_epochs * 8 / 10) return lr / 100.0;
    if (epoch > total_epochs / 2) return lr / 10.0;
    return lr;
}

namespace {

Matrix one_hot(const std::vector<int>& labels, int classes) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) out(i, labels[i]) = 1.0;
    return out;
}

std::vector<std::vector<int>> make_batches(std::vector<int> order, int batch_size,
                                           Rng& rng) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Batch gather(const Dataset& ds, const Matrix& targets, const std::vector<int>& idx) {
    Batch b;
    b.features = Matrix(static_cast<Eigen::Index>(idx.size()), ds.dims());
    b.targets = Matrix(static_cast<Eigen::Index>(idx.size()), targets.cols());
    b.sample_ids = idx;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        b.features.row(k) = ds.features.row(idx[k]);
        b.targets.row(k) = targets.row(idx[k]);
    }
    return b;
}

// Detection shared by both stages: losses against the original observed
// labels, mixture fit, posterior, threshold split, and TPR/FPR when the
// ground truth is usable.
StageDetection detect(const Dataset& ds, const Classifier& model, double gamma) {
    Matrix probs = forward(model, ds.features);
    Matrix targets = one_hot(ds.observed, ds.num_classes);
    StageDetection det;
    det.gamma = gamma;
    det.raw_losses = cross_entropy(probs, targets).per_sample;
    det.normalized_losses = normalize_losses(det.raw_losses);
    det.mixture = fit_beta_mixture(det.normalized_losses);
    PosteriorVector post = posterior(det.mixture, det.normalized_losses);
    det.noisy_posterior = post.noisy_probability;
    det.sets = split(ds, post, gamma);

    DetectionOutcome outcome;
    outcome.scores = det.noisy_posterior;
    outcome.is_noisy.resize(ds.size());
    for (Eigen::Index i = 0; i < ds.size(); ++i) outcome.is_noisy[i] = !ds.clean[i];
    outcome.threshold = gamma;
    try {
        auto [tpr, fpr] = tpr_fpr(outcome);
        det.tpr = tpr;
        det.fpr = fpr;
    } catch (const std::invalid_argument&) {
        // all-clean or all-noisy ground truth; leave the -1 sentinels
    }
    return det;
}

void require_clean_set(const SplitResult& sets, int classes) {
    if (static_cast<int>(sets.labeled_ids.size()) < 2 * classes)
        throw std::runtime_error(
            "insufficient clean set: detection kept " +
            std::to_string(sets.labeled_ids.size()) + " samples (need >= " +
            std::to_string(2 * classes) + "); raise the threshold or lower the noise");
}

double record_epoch(std::vector<EpochMetric>* metrics, const std::string& stage,
                    int epoch, double lr, double loss_sum, int batches,
                    const Classifier& model, const Dataset* test) {
    double acc = test ? accuracy(model, *test) : 0.0;
    if (metrics)
        metrics->push_back({stage, epoch, lr, loss_sum / std::max(batches, 1), acc});
    return acc;
}

}  // namespace

Stage1Result stage1_relabel(const Dataset& ds, const RunConfig& cfg) {
    return stage1_relabel_with_metrics(ds, cfg, nullptr, nullptr);
}

Stage1Result stage1_relabel_with_metrics(const Dataset& ds, const RunConfig& cfg,
                                         std::vector<EpochMetric>* metrics,
                                         const Dataset* test) {
    cfg.validate();
    ds.validate();

    Rng init_rng = make_rng(cfg.seed, "init-stage1");
    Rng shuffle_rng = make_rng(cfg.seed, "shuffle-stage1");
    Classifier model =
        make_classifier(static_cast<int>(ds.dims()), cfg.hidden_sizes, ds.num_classes,
                        init_rng);
    OptState opt = OptState::for_model(model, cfg.learning_rate, cfg.momentum,
                                       cfg.weight_decay);
    LossSpec spec{cfg.lambda_entropy, cfg.lambda_balance, {}};

    Matrix observed_targets = one_hot(ds.observed, ds.num_classes);
    SoftLabels soft;
    soft.rows = observed_targets;

    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.stage1_epochs; ++epoch) {
        opt.learning_rate = scheduled_lr(cfg.learning_rate, epoch, cfg.stage1_epochs);
        const bool warmup = epoch <= cfg.warmup_epochs;
        if (!warmup) {
            // soft pseudo-labels re-estimated every epoch over the full set
            soft.rows = forward(model, ds.features);
            soft.refreshed_epoch = epoch;
        }
        const Matrix& targets = warmup ? observed_targets : soft.rows;

        double loss_sum = 0.0;
        int batches = 0;
        for (const auto& idx : make_batches(order, cfg.batch_size, shuffle_rng)) {
            loss_sum += backward_and_step(model, opt, gather(ds, targets, idx), spec);
            ++batches;
        }
        record_epoch(metrics, "stage1", epoch, opt.learning_rate, loss_sum, batches,
                     model, test);
    }

    StageDetection det = detect(ds, model, cfg.gamma1);
    require_clean_set(det.sets, ds.num_classes);
    return {std::move(model), std::move(det), std::move(soft)};
}

Classifier ssl_train(const Dataset& ds, const SplitResult& sets, const RunConfig& cfg,
                     int epochs, const std::string& stage,
                     std::vector<EpochMetric>* metrics, const Dataset* test) {
    if (sets.labeled_ids.empty())
        throw std::invalid_argument("ssl_train: labeled set is empty");

    Rng init_rng = make_rng(cfg.seed, "init-" + stage);
    Rng shuffle_rng = make_rng(cfg.seed, "shuffle-" + stage);
    Rng mixup_rng = make_rng(cfg.seed, "mixup-" + stage);
    Classifier model =
        make_classifier(static_cast<int>(ds.dims()), cfg.hidden_sizes, ds.num_classes,
                        init_rng);
    OptState opt = OptState::for_model(model, cfg.learning_rate, cfg.momentum,
                                       cfg.weight_decay);
    LossSpec spec{cfg.lambda_entropy, cfg.lambda_balance, {}};

    // Fixed one-hot targets for the labeled set; pseudo-label rows for the
    // unlabeled set are overwritten every epoch.
    Matrix targets = Matrix::Zero(ds.size(), ds.num_classes);
    for (std::size_t k = 0; k < sets.labeled_ids.size(); ++k)
        targets(sets.labeled_ids[k], sets.labeled_labels[k]) = 1.0;

    std::vector<int> order = sets.labeled_ids;
    order.insert(order.end(), sets.unlabeled_ids.begin(), sets.unlabeled_ids.end());

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        opt.learning_rate = scheduled_lr(cfg.learning_rate, epoch, epochs);
        if (!sets.unlabeled_ids.empty()) {
            Matrix preds = forward(model, ds.features);
            for (int i : sets.unlabeled_ids) targets.row(i) = preds.row(i);
        }
        double loss_sum = 0.0;
        int batches = 0;
        for (const auto& idx : make_batches(order, cfg.batch_size, shuffle_rng)) {
            Batch batch = mixup(gather(ds, targets, idx), cfg.mixup_alpha, mixup_rng);
            loss_sum += backward_and_step(model, opt, batch, spec);
            ++batches;
        }
        record_epoch(metrics, stage, epoch, opt.learning_rate, loss_sum, batches,
                     model, test);
    }
    return model;
}

Stage2Result stage2_detect(const Dataset& ds, const Stage1Result& stage1,
                           const RunConfig& cfg) {
    return stage2_detect_with_metrics(ds, stage1, cfg, nullptr, nullptr);
}

Stage2Result stage2_detect_with_metrics(const Dataset& ds, const Stage1Result& stage1,
                                        const RunConfig& cfg,
                                        std::vector<EpochMetric>* metrics,
                                        const Dataset* test) {
    Classifier model = ssl_train(ds, stage1.detection.sets, cfg, cfg.stage2_epochs,
                                 "stage2", metrics, test);
    StageDetection det = detect(ds, model, cfg.gamma2);
    require_clean_set(det.sets, ds.num_classes);
    return {std::move(model), std::move(det)};
}

namespace {

// Supervised baselines: CE on observed labels, optional mixup, shared schedule.
Classifier train_baseline(const Dataset& ds, const RunConfig& cfg, bool use_mixup,
                          std::vector<EpochMetric>* metrics, const Dataset* test) {
    Rng init_rng = make_rng(cfg.seed, "init-final");
    Rng shuffle_rng = make_rng(cfg.seed, "shuffle-final");
    Rng mixup_rng = make_rng(cfg.seed, "mixup-final");
    Classifier model =
        make_classifier(static_cast<int>(ds.dims()), cfg.hidden_sizes, ds.num_classes,
                        init_rng);
    OptState opt = OptState::for_model(model, cfg.learning_rate, cfg.momentum,
                                       cfg.weight_decay);
    LossSpec spec{0.0, 0.0, {}};  // plain CE

    Matrix targets = one_hot(ds.observed, ds.num_classes);
    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.final_epochs; ++epoch) {
        opt.learning_rate = scheduled_lr(cfg.learning_rate, epoch, cfg.final_epochs);
        double loss_sum = 0.0;
        int batches = 0;
        for (const auto& idx : make_batches(order, cfg.batch_size, shuffle_rng)) {
            Batch batch = gather(ds, targets, idx);
            if (use_mixup) batch = mixup(batch, cfg.mixup_alpha, mixup_rng);
            loss_sum += backward_and_step(model, opt, batch, spec);
            ++batches;
        }
        record_epoch(metrics, "final", epoch, opt.learning_rate, loss_sum, batches,
                     model, test);
    }
    return model;
}

// CE against forward-corrected probabilities with the true transition matrix.
Classifier train_forward_oracle(const Dataset& ds, const RunConfig& cfg,
                                std::vector<EpochMetric>* metrics, const Dataset* test) {
    const TransitionMatrix& t = *cfg.oracle_transition;
    t.validate();
    Rng init_rng = make_rng(cfg.seed, "init-final");
    Rng shuffle_rng = make_rng(cfg.seed, "shuffle-final");
    Classifier model =
        make_classifier(static_cast<int>(ds.dims()), cfg.hidden_sizes, ds.num_classes,
                        init_rng);
    OptState opt = OptState::for_model(model, cfg.learning_rate, cfg.momentum,
                                       cfg.weight_decay);

    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.final_epochs; ++epoch) {
        opt.learning_rate = scheduled_lr(cfg.learning_rate, epoch, cfg.final_epochs);
        double loss_sum = 0.0;
        int batches = 0;
        for (const auto& idx : make_batches(order, cfg.batch_size, shuffle_rng)) {
            Matrix feats(static_cast<Eigen::Index>(idx.size()), ds.dims());
            for (std::size_t k = 0; k < idx.size(); ++k)
                feats.row(k) = ds.features.row(idx[k]);
            ForwardTrace trace = forward_trace(model, feats);
            Matrix corrected = forward_corrected(trace.probabilities, t);

            const Eigen::Index b = feats.rows();
            const double invb = 1.0 / static_cast<double>(b);
            Matrix prob_grad = Matrix::Zero(b, ds.num_classes);
            double loss = 0.0;
            for (Eigen::Index k = 0; k < b; ++k) {
                int y = ds.observed[idx[k]];
                double q = std::max(corrected(k, y), kProbFloor);
                loss -= invb * std::log(q);
                for (Eigen::Index c = 0; c < ds.num_classes; ++c)
                    prob_grad(k, c) = -invb * t.rows(c, y) / q;
            }
            // chain rule through the softmax
            Matrix delta(b, ds.num_classes);
            for (Eigen::Index k = 0; k < b; ++k) {
                double dot = prob_grad.row(k).dot(trace.probabilities.row(k));
                for (Eigen::Index c = 0; c < ds.num_classes; ++c)
                    delta(k, c) = trace.probabilities(k, c) * (prob_grad(k, c) - dot);
            }
            sgd_step_with_logit_gradient(model, opt, feats, trace, std::move(delta));
            loss_sum += loss;
            ++batches;
        }
        record_epoch(metrics, "final", epoch, opt.learning_rate, loss_sum, batches,
                     model, test);
    }
    return model;
}

SplitResult oracle_split(const Dataset& ds) {
    SplitResult sets;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        if (ds.clean[i]) {
            sets.labeled_ids.push_back(static_cast<int>(i));
            sets.labeled_labels.push_back(ds.observed[i]);
        } else {
            sets.unlabeled_ids.push_back(static_cast<int>(i));
        }
    }
    return sets;
}

}  // namespace

RunResult run_pipeline(const Dataset& ds, const Dataset& test, const RunConfig& cfg) {
    cfg.validate();
    ds.validate();

    RunResult result;
    RunReport& report = result.report;
    report.config = cfg;
    report.dataset_size = ds.size();
    report.final_labeled_mask.assign(ds.size(), 1);

    switch (cfg.mode) {
        case RunMode::Drpl: {
            Stage1Result s1 = stage1_relabel_with_metrics(ds, cfg, &report.epochs, &test);
            report.stage1 = s1.detection;
            Stage2Result s2 =
                stage2_detect_with_metrics(ds, s1, cfg, &report.epochs, &test);
            report.stage2 = s2.detection;
            report.final_labeled_mask.assign(ds.size(), 0);
            for (int i : s2.detection.sets.labeled_ids) report.final_labeled_mask[i] = 1;
            result.model = ssl_train(ds, s2.detection.sets, cfg, cfg.final_epochs,
                                     "final", &report.epochs, &test);
            break;
        }
        case RunMode::CeBaseline:
            result.model = train_baseline(ds, cfg, false, &report.epochs, &test);
            break;
        case RunMode::MixupBaseline:
            result.model = train_baseline(ds, cfg, true, &report.epochs, &test);
            break;
        case RunMode::OracleSsl: {
            SplitResult sets = oracle_split(ds);
            for (Eigen::Index i = 0; i < ds.size(); ++i)
                report.final_labeled_mask[i] = ds.clean[i];
            result.model =
                ssl_train(ds, sets, cfg, cfg.final_epochs, "final", &report.epochs, &test);
            break;
        }
        case RunMode::ForwardOracle:
            result.model = train_forward_oracle(ds, cfg, &report.epochs, &test);
            break;
    }

    report.best_test_accuracy = 0.0;
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        if (report.epochs[e].test_accuracy > report.best_test_accuracy) {
            report.best_test_accuracy = report.epochs[e].test_accuracy;
            report.best_epoch = static_cast<int>(e) + 1;
        }
    }
    report.last_test_accuracy =
        report.epochs.empty() ? 0.0 : report.epochs.back().test_accuracy;
    return result;
}

}  // namespace drpl
