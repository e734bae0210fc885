#pragma once

#include <optional>
#include <string>

#include "drpl/bmm.hpp"
#include "drpl/metrics.hpp"
#include "drpl/nn.hpp"

namespace drpl {

enum class RunMode { Drpl, CeBaseline, MixupBaseline, OracleSsl, ForwardOracle };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct RunConfig {
    int warmup_epochs = 15;       // observed-label phase of the relabeling stage
    int stage1_epochs = 40;       // total relabeling epochs, warm-up included
    int stage2_epochs = 60;
    int final_epochs = 80;
    double learning_rate = 0.1;   // dropped by 10x at 50% and 80% of each stage
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lambda_entropy = 1.0;
    double lambda_balance = 1.0;
    double gamma1 = 0.05;
    double gamma2 = 0.5;
    double mixup_alpha = 1.0;
    int batch_size = 128;
    std::vector<int> hidden_sizes = {128, 64};
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Drpl;
    // Ground-truth corruption matrix, used only by forward-oracle mode.
    std::optional<TransitionMatrix> oracle_transition;

    void validate() const;
};

/// Per-sample soft targets, refreshed from model predictions.
struct SoftLabels {
    Matrix rows;          // N x C, each row on the simplex
    int refreshed_epoch = -1;
};

struct EpochMetric {
    std::string stage;    // "stage1" | "stage2" | "final"
    int epoch = 0;        // 1-based within the stage
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
};

/// Detection artifacts of one stage: losses against the original observed
/// labels, fitted mixture, posteriors, and the resulting split.
struct StageDetection {
    Vector raw_losses;
    Vector normalized_losses;
    BetaMixture mixture;
    Vector noisy_posterior;
    SplitResult sets;
    double gamma = 0.0;
    double tpr = -1.0, fpr = -1.0;  // -1 when ground truth is degenerate
};

struct RunReport {
    RunConfig config;
    std::vector<EpochMetric> epochs;
    std::optional<StageDetection> stage1;
    std::optional<StageDetection> stage2;
    double best_test_accuracy = 0.0;
    double last_test_accuracy = 0.0;
    int best_epoch = 0;  // 1-based over all recorded epochs
    std::vector<std::uint8_t> final_labeled_mask;  // per-sample final-set tag
    Eigen::Index dataset_size = 0;
};

struct Stage1Result {
    Classifier model;
    StageDetection detection;
    SoftLabels soft_labels;
};

struct Stage2Result {
    Classifier model;
    StageDetection detection;
};

/// Relabeling training (observed labels for the warm-up, soft pseudo-labels
/// after) followed by BMM detection at gamma1.
Stage1Result stage1_relabel(const Dataset& ds, const RunConfig& cfg);
Stage1Result stage1_relabel_with_metrics(const Dataset& ds, const RunConfig& cfg,
                                         std::vector<EpochMetric>* metrics,
                                         const Dataset* test);

/// Semi-supervised training on labeled + unlabeled samples: fixed labels for
/// the labeled set, per-epoch refreshed pseudo-labels for the rest, mixup on
/// every batch. epoch_hook (when set) is called after each epoch.
Classifier ssl_train(const Dataset& ds, const SplitResult& sets, const RunConfig& cfg,
                     int epochs, const std::string& stage,
                     std::vector<EpochMetric>* metrics = nullptr,
                     const Dataset* test = nullptr);

/// Train a refining SSL model on the stage-1 split and re-detect at gamma2.
Stage2Result stage2_detect(const Dataset& ds, const Stage1Result& stage1,
                           const RunConfig& cfg);
Stage2Result stage2_detect_with_metrics(const Dataset& ds, const Stage1Result& stage1,
                                        const RunConfig& cfg,
                                        std::vector<EpochMetric>* metrics,
                                        const Dataset* test);

struct RunResult {
    Classifier model;
    RunReport report;
};

/// Full pipeline for the configured mode; test set is used for reporting only.
RunResult run_pipeline(const Dataset& ds, const Dataset& test, const RunConfig& cfg);

/// Per-epoch learning rate: base rate dropped by 10x after 50% and 80%.
double scheduled_lr(double base, int epoch, int total_epochs);

}  // namespace drpl
