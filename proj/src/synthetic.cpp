#include "drpl/synthetic.hpp"

#include <cmath>
#include <stdexcept>

namespace drpl {

namespace {

// Spread of the centered Gaussian the class means are drawn from; sized so
// the expected pairwise distance is 1.2x the requested separation.
double means_sigma(int dims, double separation) {
    return 1.2 * separation / std::sqrt(2.0 * dims);
}

// Rejection-sample centered class means until every pair is >= separation apart.
Matrix place_means(int count, int dims, double separation, Rng& rng) {
    std::normal_distribution<double> g(0.0, means_sigma(dims, separation));
    Matrix means(count, dims);
    for (int c = 0; c < count; ++c) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000)
                throw std::runtime_error("generate_synthetic: cannot place class means");
            for (int d = 0; d < dims; ++d) means(c, d) = g(rng);
            bool ok = true;
            for (int prev = 0; prev < c; ++prev)
                if ((means.row(c) - means.row(prev)).norm() < separation) ok = false;
            if (ok) break;
        }
    }
    return means;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                 std::optional<std::uint64_t> means_seed) {
    if (spec.classes < 2 || spec.per_class < 1 || spec.dims < 1)
        throw std::invalid_argument("generate_synthetic: invalid sizes");
    if (spec.ood_classes > 0 && spec.ood_per_class < 1)
        throw std::invalid_argument("generate_synthetic: ood pool needs samples");

    Rng means_rng = make_rng(means_seed.value_or(seed), "means");
    Rng rng = make_rng(seed, "data");
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix means = place_means(spec.classes + spec.ood_classes, spec.dims,
                               spec.separation, means_rng);
    // per-dim standardization: features are mean + unit noise, so the overall
    // per-dim variance is means_sigma^2 + 1
    double sigma = means_sigma(spec.dims, spec.separation);
    const double scale = 1.0 / std::sqrt(sigma * sigma + 1.0);

    SyntheticData out;
    Dataset& ds = out.dataset;
    const int n = spec.classes * spec.per_class;
    ds.features = Matrix(n, spec.dims);
    ds.num_classes = spec.classes;
    ds.observed.resize(n);
    ds.true_labels.resize(n);
    ds.clean.assign(n, 1);
    ds.ids.resize(n);
    int row = 0;
    for (int c = 0; c < spec.classes; ++c)
        for (int s = 0; s < spec.per_class; ++s, ++row) {
            for (int d = 0; d < spec.dims; ++d)
                ds.features(row, d) = (means(c, d) + noise(rng)) * scale;
            ds.observed[row] = c;
            ds.true_labels[row] = c;
            ds.ids[row] = row;
        }

    if (spec.ood_classes > 0) {
        OodPool& pool = out.pool;
        const int m = spec.ood_classes * spec.ood_per_class;
        pool.features = Matrix(m, spec.dims);
        pool.num_classes = spec.ood_classes;
        pool.source_class.resize(m);
        int prow = 0;
        for (int k = 0; k < spec.ood_classes; ++k)
            for (int s = 0; s < spec.ood_per_class; ++s, ++prow) {
                for (int d = 0; d < spec.dims; ++d)
                    pool.features(prow, d) = (means(spec.classes + k, d) + noise(rng)) * scale;
                pool.source_class[prow] = k;
            }
    }
    return out;
}

}  // namespace drpl
