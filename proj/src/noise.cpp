#include "drpl/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drpl {

namespace {

void check_rate(double rate) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("noise rate must be in [0, 1)");
}

// Seeded choice of which samples within a class get corrupted.
std::vector<int> pick_victims(const std::vector<int>& class_indices, int count,
                              Rng& rng) {
    std::vector<int> shuffled = class_indices;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(count);
    return shuffled;
}

int sample_discrete(const Eigen::RowVectorXd& weights, Rng& rng) {
    double u = uniform_real(rng) * weights.sum();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < weights.size(); ++c) {
        acc += weights[c];
        if (u <= acc) return static_cast<int>(c);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

int noisy_count(double rate, std::size_t class_size) {
    return static_cast<int>(std::lround(rate * static_cast<double>(class_size)));
}

TransitionMatrix build_transition(const std::vector<Matrix>& confusions,
                                  const std::vector<int>& keep_classes, bool ood) {
    if (confusions.empty()) throw std::invalid_argument("build_transition: no confusions");
    if (keep_classes.empty()) throw std::invalid_argument("build_transition: empty keep set");
    const Eigen::Index dim = confusions.front().rows();
    for (const auto& m : confusions)
        if (m.rows() != dim || m.cols() != dim)
            throw std::invalid_argument("build_transition: confusion shapes disagree");

    Matrix avg = Matrix::Zero(dim, dim);
    for (const auto& m : confusions) avg += m;
    avg /= static_cast<double>(confusions.size());
    for (Eigen::Index r = 0; r < dim; ++r) {
        double s = avg.row(r).sum();
        if (s > 0.0) avg.row(r) /= s;
    }

    std::vector<std::uint8_t> kept(dim, 0);
    for (int c : keep_classes) {
        if (c < 0 || c >= dim)
            throw std::invalid_argument("build_transition: keep class out of range");
        kept[c] = 1;
    }
    std::vector<int> cols;
    for (Eigen::Index c = 0; c < dim; ++c)
        if (ood ? !kept[c] : kept[c]) cols.push_back(static_cast<int>(c));
    if (cols.empty())
        throw std::invalid_argument("build_transition: no destination columns remain");

    TransitionMatrix out;
    out.rows = Matrix::Zero(static_cast<Eigen::Index>(keep_classes.size()),
                            static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < keep_classes.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c)
            out.rows(r, c) = avg(keep_classes[r], cols[c]);
        if (!ood) out.rows(r, static_cast<Eigen::Index>(r)) = 0.0;  // flips must move
        double s = out.rows.row(r).sum();
        if (s > 0.0) {
            out.rows.row(r) /= s;
        } else {
            out.uniform_fallback_rows.push_back(static_cast<int>(r));
            double uniform = 1.0 / static_cast<double>(cols.size() - (ood ? 0 : 1));
            for (std::size_t c = 0; c < cols.size(); ++c)
                out.rows(r, c) = (!ood && c == r) ? 0.0 : uniform;
        }
    }
    out.validate();
    return out;
}

Dataset inject_uniform_id(const Dataset& ds, double rate, Rng& rng) {
    check_rate(rate);
    Dataset out = ds;
    const int c_total = ds.num_classes;
    for (const auto& members : ds.indices_by_true_class()) {
        for (int i : pick_victims(members, noisy_count(rate, members.size()), rng)) {
            int offset = static_cast<int>(uniform_index(rng, c_total - 1));
            int dest = offset >= ds.true_labels[i] ? offset + 1 : offset;
            out.observed[i] = dest;
            out.clean[i] = 0;
        }
    }
    return out;
}

Dataset inject_nonuniform_id(const Dataset& ds, const TransitionMatrix& t,
                             double rate, Rng& rng) {
    check_rate(rate);
    t.validate();
    if (t.row_count() != ds.num_classes || t.col_count() != ds.num_classes)
        throw std::invalid_argument("inject_nonuniform_id: transition is not CxC");
    for (int r = 0; r < t.row_count(); ++r)
        if (t.rows(r, r) > 1e-12)
            throw std::invalid_argument("inject_nonuniform_id: diagonal mass in row " +
                                        std::to_string(r));
    Dataset out = ds;
    for (const auto& members : ds.indices_by_true_class()) {
        for (int i : pick_victims(members, noisy_count(rate, members.size()), rng)) {
            out.observed[i] = sample_discrete(t.rows.row(ds.true_labels[i]), rng);
            out.clean[i] = 0;
        }
    }
    return out;
}

namespace {

Dataset inject_ood(const Dataset& ds, const OodPool& pool, double rate, Rng& rng,
                   const TransitionMatrix* t_ood) {
    pool.validate();
    if (pool.features.rows() == 0) throw std::invalid_argument("ood pool is empty");
    if (t_ood) {
        t_ood->validate();
        if (t_ood->row_count() != ds.num_classes ||
            t_ood->col_count() != pool.num_classes)
            throw std::invalid_argument("inject_nonuniform_ood: transition is not CxK");
    }
    const auto pool_by_class = pool.indices_by_class();
    Dataset out = ds;
    for (const auto& members : ds.indices_by_true_class()) {
        for (int i : pick_victims(members, noisy_count(rate, members.size()), rng)) {
            int src_class;
            do {
                src_class = t_ood
                                ? sample_discrete(t_ood->rows.row(ds.true_labels[i]), rng)
                                : static_cast<int>(uniform_index(rng, pool.num_classes));
            } while (pool_by_class[src_class].empty());
            const auto& candidates = pool_by_class[src_class];
            int src = candidates[uniform_index(rng, candidates.size())];
            out.features.row(i) = pool.features.row(src);
            out.clean[i] = 0;  // label kept, content replaced
        }
    }
    return out;
}

}  // namespace

Dataset inject_uniform_ood(const Dataset& ds, const OodPool& pool, double rate,
                           Rng& rng) {
    check_rate(rate);
    return inject_ood(ds, pool, rate, rng, nullptr);
}

Dataset inject_nonuniform_ood(const Dataset& ds, const OodPool& pool,
                              const TransitionMatrix& t_ood, double rate, Rng& rng) {
    check_rate(rate);
    pool.validate();
    if (t_ood.col_count() != pool.num_classes)
        throw std::invalid_argument("inject_nonuniform_ood: transition is not CxK");
    const auto pool_by_class = pool.indices_by_class();
    for (int r = 0; r < t_ood.row_count(); ++r) {
        bool reachable = false;
        // some mass must land on a pool class that actually has samples
        for (int c = 0; c < t_ood.col_count(); ++c)
            if (t_ood.rows(r, c) > 0.0 && !pool_by_class[c].empty()) reachable = true;
        if (!reachable)
            throw std::invalid_argument(
                "inject_nonuniform_ood: row " + std::to_string(r) +
                " only references empty pool classes");
    }
    return inject_ood(ds, pool, rate, rng, &t_ood);
}

Dataset inject_pairwise(const Dataset& ds, const std::map<int, int>& flip_map,
                        double rate, Rng& rng) {
    check_rate(rate);
    for (auto [from, to] : flip_map) {
        if (from == to)
            throw std::invalid_argument("inject_pairwise: class " + std::to_string(from) +
                                        " maps to itself");
        if (from < 0 || from >= ds.num_classes || to < 0 || to >= ds.num_classes)
            throw std::invalid_argument("inject_pairwise: class out of range");
    }
    Dataset out = ds;
    const auto by_class = ds.indices_by_true_class();
    for (auto [from, to] : flip_map) {
        const auto& members = by_class[from];
        for (int i : pick_victims(members, noisy_count(rate, members.size()), rng)) {
            out.observed[i] = to;
            out.clean[i] = 0;
        }
    }
    return out;
}

}  // namespace drpl
