#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drpl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Labeled dataset. True labels and the clean mask are ground truth kept
/// for evaluation only; training code must read only features + observed.
struct Dataset {
    Matrix features;                  // N x D, one row per sample
    std::vector<int> observed;        // N labels in [0, C)
    std::vector<int> true_labels;     // N labels, hidden from training
    std::vector<std::uint8_t> clean;  // clean[i]: observed==true and content untouched
    int num_classes = 0;
    std::vector<std::int64_t> ids;    // per-sample identifiers

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dims() const { return features.cols(); }

    void validate() const;
    std::vector<std::vector<int>> indices_by_true_class() const;
};

/// Row-stochastic corruption matrix. Row index = true class; C x C for ID
/// noise, C x K for OOD noise. Rows that lost all mass during truncation
/// are replaced by uniform rows and recorded here.
struct TransitionMatrix {
    Matrix rows;                      // each row sums to 1
    std::vector<int> uniform_fallback_rows;

    int row_count() const { return static_cast<int>(rows.rows()); }
    int col_count() const { return static_cast<int>(rows.cols()); }
    void validate(double tol = 1e-9) const;
};

/// Samples from classes outside the task's class set, used to replace
/// in-distribution content under OOD corruption.
struct OodPool {
    Matrix features;                  // M x D
    std::vector<int> source_class;    // M indices in [0, K)
    int num_classes = 0;

    std::vector<std::vector<int>> indices_by_class() const;
    void validate() const;
};

inline void Dataset::validate() const {
    const auto n = size();
    if (static_cast<Eigen::Index>(observed.size()) != n ||
        static_cast<Eigen::Index>(true_labels.size()) != n ||
        static_cast<Eigen::Index>(clean.size()) != n ||
        static_cast<Eigen::Index>(ids.size()) != n)
        throw std::invalid_argument("dataset: field lengths disagree");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (observed[i] < 0 || observed[i] >= num_classes)
            throw std::invalid_argument("dataset: observed label out of range at " +
                                        std::to_string(i));
        if (true_labels[i] < 0 || true_labels[i] >= num_classes)
            throw std::invalid_argument("dataset: true label out of range at " +
                                        std::to_string(i));
    }
}

inline std::vector<std::vector<int>> Dataset::indices_by_true_class() const {
    std::vector<std::vector<int>> by_class(num_classes);
    for (Eigen::Index i = 0; i < size(); ++i)
        by_class[true_labels[i]].push_back(static_cast<int>(i));
    return by_class;
}

inline void TransitionMatrix::validate(double tol) const {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        double s = rows.row(r).sum();
        if (std::abs(s - 1.0) > tol || rows.row(r).minCoeff() < 0.0)
            throw std::invalid_argument("transition matrix: row " + std::to_string(r) +
                                        " is not a probability distribution");
    }
}

inline std::vector<std::vector<int>> OodPool::indices_by_class() const {
    std::vector<std::vector<int>> by_class(num_classes);
    for (std::size_t i = 0; i < source_class.size(); ++i)
        by_class[source_class[i]].push_back(static_cast<int>(i));
    return by_class;
}

inline void OodPool::validate() const {
    if (static_cast<Eigen::Index>(source_class.size()) != features.rows())
        throw std::invalid_argument("ood pool: field lengths disagree");
    for (int c : source_class)
        if (c < 0 || c >= num_classes)
            throw std::invalid_argument("ood pool: source class out of range");
}

}  // namespace drpl
