#include "surface/recipes.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "surface/error.hpp"
#include "surface/rng.hpp"

namespace surface {
namespace {

using Records = std::vector<SampleRecord>;

// Salts separating the independent random streams of one class.
constexpr std::uint64_t kSaltSequences = 1;
constexpr std::uint64_t kSaltCutFrames = 2;
constexpr std::uint64_t kSaltPool = 3;
constexpr std::uint64_t kSaltWebsearch = 4;

bool record_less(const SampleRecord& a, const SampleRecord& b) {
  if (a.label != b.label) return a.label < b.label;
  if (a.sequence_id != b.sequence_id) return a.sequence_id < b.sequence_id;
  return a.frame_index < b.frame_index;
}

void sort_records(Manifest& m) { std::sort(m.records.begin(), m.records.end(), record_less); }

std::array<Records, kNumClasses> by_class(const Manifest& m) {
  std::array<Records, kNumClasses> out;
  for (const SampleRecord& r : m.records) out[class_index(r.label)].push_back(r);
  for (Records& rs : out) {
    std::sort(rs.begin(), rs.end(), [](const SampleRecord& a, const SampleRecord& b) {
      if (a.sequence_id != b.sequence_id) return a.sequence_id < b.sequence_id;
      if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
      return a.image_path < b.image_path;
    });
  }
  return out;
}

std::string shortfall(SurfaceClass c, std::string_view what, std::size_t need, std::size_t have) {
  return "class " + std::string(to_string(c)) + ": need " + std::to_string(need) + " " +
         std::string(what) + " samples, have " + std::to_string(have) + " (short by " +
         std::to_string(need - have) + ")";
}

struct ClassSplit {
  Records test;
  Records pool;
};

ClassSplit split_class(const Records& recs, SurfaceClass c, std::size_t test_n, std::uint64_t seed) {
  if (recs.size() < test_n) throw DataError(shortfall(c, "test", test_n, recs.size()));
  const std::uint64_t cls = class_index(c);

  // Sequences in id order (recs is sorted by sequence then frame).
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t i = 0; i < recs.size();) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].sequence_id == recs[i].sequence_id) ++j;
    ranges.emplace_back(i, j);
    i = j;
  }

  ClassSplit out;
  if (ranges.size() < 2) {
    Records frames = recs;
    seeded_shuffle(frames, hash_key({seed, cls, kSaltCutFrames}));
    out.test.assign(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(test_n));
    out.pool.assign(frames.begin() + static_cast<std::ptrdiff_t>(test_n), frames.end());
    return out;
  }

  std::vector<std::size_t> order(ranges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  seeded_shuffle(order, hash_key({seed, cls, kSaltSequences}));

  std::vector<bool> used(ranges.size(), false);
  for (std::size_t s : order) {
    if (out.test.size() >= test_n) break;
    used[s] = true;
    const auto [begin, end] = ranges[s];
    const std::size_t need = test_n - out.test.size();
    if (end - begin <= need) {
      out.test.insert(out.test.end(), recs.begin() + static_cast<std::ptrdiff_t>(begin),
                      recs.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      Records frames(recs.begin() + static_cast<std::ptrdiff_t>(begin),
                     recs.begin() + static_cast<std::ptrdiff_t>(end));
      seeded_shuffle(frames, hash_key({seed, cls, kSaltCutFrames}));
      out.test.insert(out.test.end(), frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(need));
    }
  }
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    if (used[s]) continue;
    out.pool.insert(out.pool.end(), recs.begin() + static_cast<std::ptrdiff_t>(ranges[s].first),
                    recs.begin() + static_cast<std::ptrdiff_t>(ranges[s].second));
  }
  return out;
}

}  // namespace

std::size_t subsample_stride(std::size_t sequence_length, std::size_t target) {
  if (target == 0) throw DataError("subsample target must be at least 1");
  if (sequence_length == 0) return 1;
  return std::max<std::size_t>(1, (sequence_length + target - 1) / target);
}

Manifest subsample(const Manifest& manifest, const SubsampleSpec& spec) {
  std::map<std::string_view, std::vector<std::size_t>> sequences;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    sequences[manifest.records[i].sequence_id].push_back(i);
  }
  std::vector<bool> keep(manifest.records.size(), false);
  for (auto& [id, idx] : sequences) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records[a].frame_index < manifest.records[b].frame_index;
    });
    const std::size_t stride = subsample_stride(idx.size(), spec.target_frames_per_sequence);
    for (std::size_t pos = 0; pos < idx.size(); pos += stride) keep[idx[pos]] = true;
  }
  Manifest out;
  out.name = manifest.name;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (keep[i]) out.records.push_back(manifest.records[i]);
  }
  return out;
}

std::string_view to_string(RecipeId recipe) {
  switch (recipe) {
    case RecipeId::basic: return "basic";
    case RecipeId::minority_augmented: return "minority_augmented";
    case RecipeId::all_augmented: return "all_augmented";
  }
  return "basic";
}

std::optional<RecipeId> parse_recipe(std::string_view name) {
  if (name == "basic") return RecipeId::basic;
  if (name == "minority" || name == "minority_augmented") return RecipeId::minority_augmented;
  if (name == "all" || name == "all_augmented") return RecipeId::all_augmented;
  return std::nullopt;
}

DatasetBundle split(const Manifest& manifest, const SplitSpec& spec) {
  DatasetBundle bundle;
  bundle.seed = spec.seed;
  bundle.train.name = "train";
  bundle.val.name = "val";
  bundle.test.name = "test";

  const auto classes = by_class(manifest);
  for (SurfaceClass c : kAllClasses) {
    const std::uint64_t cls = class_index(c);
    ClassSplit parts = split_class(classes[cls], c, spec.test_per_class, spec.seed);

    std::sort(parts.pool.begin(), parts.pool.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.image_path < b.image_path; });
    seeded_shuffle(parts.pool, hash_key({spec.seed, cls, kSaltPool}));

    const std::size_t val_n = spec.val_per_class;
    if (parts.pool.size() < val_n) throw DataError(shortfall(c, "validation", val_n, parts.pool.size()));
    const std::size_t rest = parts.pool.size() - val_n;
    const std::size_t train_n = spec.train_per_class.value_or(rest);
    if (rest < train_n) throw DataError(shortfall(c, "training", train_n, rest));

    auto first = parts.pool.begin();
    bundle.val.records.insert(bundle.val.records.end(), first, first + static_cast<std::ptrdiff_t>(val_n));
    bundle.train.records.insert(bundle.train.records.end(), first + static_cast<std::ptrdiff_t>(val_n),
                                first + static_cast<std::ptrdiff_t>(val_n + train_n));
    bundle.test.records.insert(bundle.test.records.end(), parts.test.begin(), parts.test.end());
  }
  sort_records(bundle.train);
  sort_records(bundle.val);
  sort_records(bundle.test);
  return bundle;
}

DatasetBundle build_recipe(const Manifest& source, const Manifest& websearch, RecipeId recipe,
                           std::uint64_t seed, const RecipeParams& params) {
  for (const SampleRecord& r : websearch.records) {
    if (r.source != SourceId::websearch) {
      throw DataError("web-search manifest contains non-websearch record " + r.image_path);
    }
  }
  {
    std::unordered_set<std::string_view> paths;
    for (const SampleRecord& r : source.records) paths.insert(r.image_path);
    for (const SampleRecord& r : websearch.records) {
      if (paths.contains(r.image_path)) {
        throw DataError("path appears in both source and web-search manifests: " + r.image_path);
      }
    }
  }

  SplitSpec spec;
  spec.seed = seed;
  spec.test_per_class = params.test_per_class;
  spec.train_per_class = params.train_per_class;
  spec.val_per_class = recipe == RecipeId::minority_augmented ? params.minority_val_per_class
                                                             : params.basic_val_per_class;
  DatasetBundle bundle = split(source, spec);
  bundle.recipe = recipe;
  if (recipe == RecipeId::basic) return bundle;

  const auto extra = by_class(websearch);
  for (SurfaceClass c : kAllClasses) {
    const std::uint64_t cls = class_index(c);
    std::size_t take = 0;
    if (recipe == RecipeId::all_augmented) {
      take = std::min(extra[cls].size(), params.websearch_per_class);
    } else if (c == SurfaceClass::cobblestone) {
      const std::size_t room =
          params.cobblestone_target > params.train_per_class ? params.cobblestone_target - params.train_per_class : 0;
      take = std::min(extra[cls].size(), room);
    } else if (c == SurfaceClass::wet_asphalt) {
      take = extra[cls].size();
    }
    if (take == 0) continue;
    Records candidates = extra[cls];
    seeded_shuffle(candidates, hash_key({seed, cls, kSaltWebsearch}));
    bundle.train.records.insert(bundle.train.records.end(), candidates.begin(),
                                candidates.begin() + static_cast<std::ptrdiff_t>(take));
  }
  sort_records(bundle.train);
  return bundle;
}

namespace {

nlohmann::json counts_json(const Manifest& m) {
  nlohmann::json j = nlohmann::json::object();
  const ClassCounts counts = class_counts(m);
  for (SurfaceClass c : kAllClasses) j[std::string(to_string(c))] = counts[class_index(c)];
  return j;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_manifest(bundle.train, dir / "train.csv");
  save_manifest(bundle.val, dir / "val.csv");
  save_manifest(bundle.test, dir / "test.csv");
  nlohmann::ordered_json sidecar;
  sidecar["recipe"] = std::string(to_string(bundle.recipe));
  sidecar["seed"] = bundle.seed;
  sidecar["counts"] = {{"train", counts_json(bundle.train)},
                       {"val", counts_json(bundle.val)},
                       {"test", counts_json(bundle.test)}};
  std::ofstream out(dir / "bundle.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "bundle.json").string());
  out << sidecar.dump(2) << '\n';
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  std::ifstream in(dir / "bundle.json");
  if (!in) throw DataError("missing bundle sidecar " + (dir / "bundle.json").string());
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(in);
    const auto recipe = parse_recipe(sidecar.at("recipe").get<std::string>());
    if (!recipe) throw DataError("unknown recipe in bundle sidecar");
    bundle.recipe = *recipe;
    bundle.seed = sidecar.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed bundle sidecar: " + std::string(e.what()));
  }
  bundle.train = load_manifest(dir / "train.csv");
  bundle.val = load_manifest(dir / "val.csv");
  bundle.test = load_manifest(dir / "test.csv");
  return bundle;
}

}  // namespace surface
