#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "surface/manifest.hpp"

namespace surface {

/// Keep roughly `target_frames_per_sequence` frames of each sequence by
/// taking every n-th frame, n = ceil(length / target).
struct SubsampleSpec {
  std::size_t target_frames_per_sequence = 1;
};

std::size_t subsample_stride(std::size_t sequence_length, std::size_t target);

/// Per sequence, retains frames at positions 0, n, 2n, ... of the sequence
/// (ordered by frame index). Record order in the output follows the input.
Manifest subsample(const Manifest& manifest, const SubsampleSpec& spec);

struct SplitSpec {
  std::size_t test_per_class = 300;
  std::size_t val_per_class = 300;
  /// Unset means "everything left after test and validation".
  std::optional<std::size_t> train_per_class = 700;
  std::uint64_t seed = 0;
};

enum class RecipeId { basic, minority_augmented, all_augmented };

std::string_view to_string(RecipeId recipe);
/// Accepts the canonical names plus the CLI short forms `minority` and `all`.
std::optional<RecipeId> parse_recipe(std::string_view name);

struct DatasetBundle {
  Manifest train;
  Manifest val;
  Manifest test;
  RecipeId recipe = RecipeId::basic;
  std::uint64_t seed = 0;
};

/// Sequence-aware stratified split.
///
/// Per class, sequences are shuffled under the seed and whole sequences are
/// moved into the test set until it holds `test_per_class` frames. The last
/// test sequence may be cut; its unused frames are dropped so no test
/// sequence leaks into train or validation. Classes with a single sequence
/// fall back to a frame-level split. Validation and training frames are then
/// drawn from the remaining pool. Throws DataError naming the class and the
/// shortfall when a quota cannot be met.
DatasetBundle split(const Manifest& manifest, const SplitSpec& spec);

/// Quotas for the three dataset recipes. Defaults are the published values.
struct RecipeParams {
  std::size_t test_per_class = 300;
  std::size_t train_per_class = 700;
  std::size_t basic_val_per_class = 300;
  std::size_t minority_val_per_class = 500;
  /// minority_augmented tops up cobblestone training data to this size.
  std::size_t cobblestone_target = 2500;
  /// all_augmented adds at most this many web-search images per class.
  std::size_t websearch_per_class = 300;
};

/// Builds one of the three training sets. The test split is identical across
/// recipes for a given source and seed; web-search images only ever enter
/// the training split.
DatasetBundle build_recipe(const Manifest& source, const Manifest& websearch, RecipeId recipe,
                           std::uint64_t seed, const RecipeParams& params = {});

/// Writes train.csv, val.csv, test.csv and bundle.json into `dir`.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

}  // namespace surface
