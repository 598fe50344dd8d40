#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "surface/nn/model.hpp"
#include "surface/recipes.hpp"
#include "surface/roi.hpp"
#include "surface/synth.hpp"
#include "surface/train.hpp"

namespace surface {

/// Everything a CLI run depends on besides its input files. Built from
/// defaults, then a JSON file, then command-line flags.
struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;  // includes the augmentation spec
  RoiTable roi = RoiTable::defaults();
  nn::ModelSpec model = nn::mini_resnet_spec();
  RecipeId recipe = RecipeId::basic;
  RecipeParams recipe_params;
  SynthSpec synth;
  std::size_t input_size = kNetworkInputSize;

  std::filesystem::path manifest;
  std::filesystem::path websearch_manifest;
  std::filesystem::path out;
};

/// Propagates one seed to every seeded component.
void apply_seed(RunConfig& config, std::uint64_t seed);

/// Replaces the architecture by the named family, keeping the seed.
void apply_model_name(RunConfig& config, const std::string& name);

nlohmann::ordered_json to_json(const RecipeParams& params);
RecipeParams recipe_params_from_json(const nlohmann::json& j, RecipeParams base = {});

nlohmann::ordered_json to_json(const RunConfig& config);
/// Keys present in `j` override `base`. A top-level "seed" is applied last.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace surface
