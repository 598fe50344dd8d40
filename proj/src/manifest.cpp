#include "surface/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "surface/error.hpp"

namespace surface {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string row_error(std::size_t row, const std::string& what) {
  return "manifest row " + std::to_string(row) + ": " + what;
}

}  // namespace

void validate_manifest(const Manifest& manifest) {
  std::unordered_set<std::string_view> paths;
  std::unordered_map<std::string_view, std::uint64_t> last_frame;
  paths.reserve(manifest.records.size());
  last_frame.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const SampleRecord& r = manifest.records[i];
    const std::size_t row = i + 2;  // 1-based, after the header line
    if (r.image_path.empty()) throw DataError(row_error(row, "empty image path"));
    if (r.image_path.find_first_of(",\n\r") != std::string::npos) {
      throw DataError(row_error(row, "path contains a comma or line break: " + r.image_path));
    }
    if (r.sequence_id.empty()) throw DataError(row_error(row, "empty sequence id"));
    if (r.sequence_id.find_first_of(",\n\r") != std::string::npos) {
      throw DataError(row_error(row, "sequence id contains a comma or line break"));
    }
    if (class_index(r.label) >= kNumClasses) throw DataError(row_error(row, "class out of range"));
    if (!paths.insert(r.image_path).second) {
      throw DataError(row_error(row, "duplicate path " + r.image_path));
    }
    if (is_singleton_source(r.source) && (r.sequence_id != r.image_path || r.frame_index != 0)) {
      throw DataError(row_error(row, "web-search record must use its path as sequence id and frame 0"));
    }
    auto [it, fresh] = last_frame.try_emplace(r.sequence_id, r.frame_index);
    if (!fresh) {
      if (r.frame_index <= it->second) {
        throw DataError(row_error(row, "frame index " + std::to_string(r.frame_index) +
                                           " not increasing within sequence " + r.sequence_id));
      }
      it->second = r.frame_index;
    }
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());

  Manifest manifest;
  manifest.name = path.stem().string();

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw DataError("manifest " + path.string() + ": expected header '" + kManifestHeader + "'");
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 5) {
      throw DataError(row_error(row, "expected 5 fields, got " + std::to_string(fields.size())));
    }
    SampleRecord r;
    r.image_path = std::string(fields[0]);
    const auto label = parse_class(fields[1]);
    if (!label) throw DataError(row_error(row, "unknown class '" + std::string(fields[1]) + "'"));
    r.label = *label;
    const auto source = parse_source(fields[2]);
    if (!source) throw DataError(row_error(row, "unknown source '" + std::string(fields[2]) + "'"));
    r.source = *source;
    r.sequence_id = std::string(fields[3]);
    const std::string_view frame = fields[4];
    const auto [ptr, ec] = std::from_chars(frame.data(), frame.data() + frame.size(), r.frame_index);
    if (ec != std::errc{} || ptr != frame.data() + frame.size() || frame.empty()) {
      throw DataError(row_error(row, "bad frame index '" + std::string(frame) + "'"));
    }
    manifest.records.push_back(std::move(r));
  }
  try {
    validate_manifest(manifest);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  validate_manifest(manifest);
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const SampleRecord& r : manifest.records) {
    out << r.image_path << ',' << to_string(r.label) << ',' << to_string(r.source) << ','
        << r.sequence_id << ',' << r.frame_index << '\n';
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write manifest " + path.string());
  const std::string text = out.str();
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw DataError("write failed for manifest " + path.string());
}

ClassCounts class_counts(const Manifest& manifest) {
  ClassCounts counts{};
  for (const SampleRecord& r : manifest.records) ++counts[class_index(r.label)];
  return counts;
}

double imbalance_ratio(const Manifest& manifest) {
  const ClassCounts counts = class_counts(manifest);
  for (SurfaceClass c : kAllClasses) {
    if (counts[class_index(c)] == 0) {
      throw DataError("imbalance ratio undefined: class " + std::string(to_string(c)) + " has no samples");
    }
  }
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

}  // namespace surface
