#include "surface/config.hpp"

#include <fstream>

#include "surface/error.hpp"

namespace surface {

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.train.seed = seed;
  c.train.augmentation.master_seed = seed;
  c.model.init_seed = seed;
  c.synth.seed = seed;
}

void apply_model_name(RunConfig& c, const std::string& name) {
  auto spec = nn::named_model_spec(name, c.seed);
  if (!spec) throw DataError("unknown model '" + name + "'");
  spec->num_classes = c.model.num_classes;
  c.model = *spec;
}

nlohmann::ordered_json to_json(const RecipeParams& p) {
  return {{"test_per_class", p.test_per_class},
          {"train_per_class", p.train_per_class},
          {"basic_val_per_class", p.basic_val_per_class},
          {"minority_val_per_class", p.minority_val_per_class},
          {"cobblestone_target", p.cobblestone_target},
          {"websearch_per_class", p.websearch_per_class}};
}

RecipeParams recipe_params_from_json(const nlohmann::json& j, RecipeParams p) {
  p.test_per_class = j.value("test_per_class", p.test_per_class);
  p.train_per_class = j.value("train_per_class", p.train_per_class);
  p.basic_val_per_class = j.value("basic_val_per_class", p.basic_val_per_class);
  p.minority_val_per_class = j.value("minority_val_per_class", p.minority_val_per_class);
  p.cobblestone_target = j.value("cobblestone_target", p.cobblestone_target);
  p.websearch_per_class = j.value("websearch_per_class", p.websearch_per_class);
  return p;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"train", to_json(c.train)},
          {"roi", c.roi.to_json()},
          {"model", nn::to_json(c.model)},
          {"recipe", std::string(to_string(c.recipe))},
          {"recipe_params", to_json(c.recipe_params)},
          {"synth", to_json(c.synth)},
          {"input_size", c.input_size},
          {"paths",
           {{"manifest", c.manifest.generic_string()},
            {"websearch_manifest", c.websearch_manifest.generic_string()},
            {"out", c.out.generic_string()}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw DataError("run config must be a JSON object");
  try {
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    if (j.contains("roi")) c.roi = RoiTable::from_json(j.at("roi"), c.roi);
    if (j.contains("model")) {
      if (j.at("model").is_string()) {
        apply_model_name(c, j.at("model").get<std::string>());
      } else {
        c.model = nn::model_spec_from_json(j.at("model"));
      }
    }
    if (j.contains("recipe")) {
      const auto name = j.at("recipe").get<std::string>();
      const auto r = parse_recipe(name);
      if (!r) throw DataError("unknown recipe '" + name + "'");
      c.recipe = *r;
    }
    if (j.contains("recipe_params")) c.recipe_params = recipe_params_from_json(j.at("recipe_params"), c.recipe_params);
    if (j.contains("synth")) c.synth = synth_spec_from_json(j.at("synth"), c.synth);
    c.input_size = j.value("input_size", c.input_size);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      c.manifest = p.value("manifest", c.manifest.generic_string());
      c.websearch_manifest = p.value("websearch_manifest", c.websearch_manifest.generic_string());
      c.out = p.value("out", c.out.generic_string());
    }
    if (j.contains("seed")) apply_seed(c, j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid run config: ") + e.what());
  }
  if (c.input_size < 8) throw DataError("input_size must be >= 8");
  nn::validate(c.model);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(c).dump(2) << '\n';
}

}  // namespace surface
