#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "drpl/dataset.hpp"
#include "drpl/pipeline.hpp"

namespace drpl {

/// On-disk dataset layout: meta.json {"n","d","c","dtype":"f32"} plus
/// features.bin (row-major little-endian f32) and labels.bin (little-endian
/// u32). Ground truth lives only in a separate truth.json manifest.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds,
                  bool write_truth);
Dataset load_dataset(const std::filesystem::path& dir);

/// Same payload layout; labels.bin holds pool source classes.
void save_pool(const std::filesystem::path& dir, const OodPool& pool);
OodPool load_pool(const std::filesystem::path& dir);

/// {"rows": [[...]], "classes": [...]} with row-stochastic validation.
TransitionMatrix load_transition(const std::filesystem::path& file);
void save_transition(const std::filesystem::path& file, const TransitionMatrix& t,
                     const std::vector<int>& classes = {});

/// {"flips": {"3": 1, ...}} partial class map for pairwise noise.
std::map<int, int> load_flip_map(const std::filesystem::path& file);

std::string mixture_to_json(const BetaMixture& bmm);

/// report.json plus CSV side files (epochs.csv, samples.csv) under dir.
void write_report(const std::filesystem::path& dir, const RunReport& report,
                  const Dataset& ds);
std::string report_to_json(const RunReport& report);

}  // namespace drpl
