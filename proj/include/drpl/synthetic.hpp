#pragma once

#include <optional>

#include "drpl/dataset.hpp"
#include "drpl/rng.hpp"

namespace drpl {

struct SyntheticSpec {
    int classes = 4;
    int per_class = 500;
    int dims = 16;
    double separation = 6.0;  // minimum pairwise distance between class means
    int ood_classes = 0;      // extra blob classes emitted as an OOD pool
    int ood_per_class = 0;
};

struct SyntheticData {
    Dataset dataset;
    OodPool pool;  // empty when ood_classes == 0
};

/// Isotropic Gaussian blobs with class means at pairwise distance
/// >= separation in noise-sigma units; features are rescaled to roughly
/// zero mean, unit variance per dimension. Deterministic under the seed.
/// means_seed pins the class means independently of the sample stream, so a
/// held-out split can share geometry with its training set.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                 std::optional<std::uint64_t> means_seed = {});

}  // namespace drpl
