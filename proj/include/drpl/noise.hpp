#pragma once

#include <map>

#include "drpl/dataset.hpp"
#include "drpl/rng.hpp"

namespace drpl {

/// Average the confusion counts, row-normalize, and cut down to the kept
/// classes. ID mode keeps the same classes on the columns and zeroes the
/// diagonal (a flip must change the label); OOD mode keeps the complement
/// columns. Rows left with no mass fall back to uniform and are recorded.
TransitionMatrix build_transition(const std::vector<Matrix>& confusions,
                                  const std::vector<int>& keep_classes, bool ood);

/// Uniform ID noise: per class, exactly round(r * n_c) samples get a label
/// drawn uniformly from the other classes.
Dataset inject_uniform_id(const Dataset& ds, double rate, Rng& rng);

/// Non-uniform ID noise: flip destinations drawn from the transition row of
/// each sample's true class.
Dataset inject_nonuniform_id(const Dataset& ds, const TransitionMatrix& t,
                             double rate, Rng& rng);

/// Uniform OOD noise: replace features with a pool sample (class uniform,
/// then sample uniform within class); the label stays, the sample is dirty.
Dataset inject_uniform_ood(const Dataset& ds, const OodPool& pool, double rate,
                           Rng& rng);

/// Non-uniform OOD noise: source pool class drawn from the transition row of
/// the sample's true class.
Dataset inject_nonuniform_ood(const Dataset& ds, const OodPool& pool,
                              const TransitionMatrix& t_ood, double rate, Rng& rng);

/// Pairwise flips: classes in the map send exactly round(r * n_c) samples to
/// their mapped destination; unmapped classes are untouched.
Dataset inject_pairwise(const Dataset& ds, const std::map<int, int>& flip_map,
                        double rate, Rng& rng);

/// round(r * n_c) as used by every injection op.
int noisy_count(double rate, std::size_t class_size);

}  // namespace drpl
