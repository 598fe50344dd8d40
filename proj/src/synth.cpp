#include "surface/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "surface/error.hpp"
#include "surface/rng.hpp"
#include "surface/roi.hpp"

namespace surface {
namespace {

struct Rgb {
  double r, g, b;
};

Rgb operator+(Rgb a, Rgb b) { return {a.r + b.r, a.g + b.g, a.b + b.b}; }
Rgb operator*(Rgb a, double s) { return {a.r * s, a.g * s, a.b * s}; }
Rgb gray(double v) { return {v, v, v}; }

double lattice(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  return static_cast<double>(hash_key({seed, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y)}) >> 11) *
         0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Value noise in [0, 1) with unit lattice spacing.
double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

/// Three-octave fractal sum, normalized to [0, 1).
double fbm(std::uint64_t seed, double x, double y) {
  double sum = 0.0, amp = 1.0, norm = 0.0, freq = 1.0;
  for (int o = 0; o < 3; ++o) {
    sum += amp * value_noise(seed + static_cast<std::uint64_t>(o), x * freq, y * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / norm;
}

/// Per-sequence parameters drawn once.
struct SequenceStyle {
  std::uint64_t noise_seed;
  double base;  // class-specific brightness parameter in [0, 1)
  double drift_x, drift_y;
  double aux1, aux2;
  Rgb road;  // shared palette of the four road-like classes
};

SequenceStyle draw_style(std::uint64_t seed, SurfaceClass label, std::size_t sequence) {
  SplitMix64 rng(hash_key({seed, class_index(label), sequence, 0x5e9}));
  SequenceStyle s{};
  s.noise_seed = rng();
  s.base = rng.uniform();
  const double speed = rng.uniform(0.15, 0.6);
  const double heading = rng.uniform(0.0, 2.0 * 3.141592653589793);
  s.drift_x = speed * std::cos(heading);
  s.drift_y = speed * std::sin(heading);
  s.aux1 = rng.uniform();
  s.aux2 = rng.uniform();
  // Asphalt, wet asphalt, dirt and cobblestone draw their mean color from
  // the same range, so only texture tells them apart.
  const double level = rng.uniform(0.28, 0.52);
  const double warm = rng.uniform(-0.05, 0.07);
  s.road = Rgb{level + warm, level + 0.3 * warm, level - warm};
  return s;
}

double centered(std::uint64_t seed, double x, double y) { return value_noise(seed, x, y) - 0.5; }

Rgb texture(SurfaceClass label, const SequenceStyle& s, double x, double y) {
  const std::uint64_t k = s.noise_seed;
  switch (label) {
    case SurfaceClass::asphalt: {
      // Fine isotropic grain with small embedded stones.
      const double shade = 0.06 * centered(k, x / 40.0, y / 40.0);
      const double grain = 0.30 * centered(k + 11, x * 0.9, y * 0.9);
      const double stones = 0.10 * centered(k + 17, x / 2.5, y / 2.5);
      return s.road + gray(shade + grain + stones);
    }
    case SurfaceClass::wet_asphalt: {
      // Smooth film with elongated vertical reflections.
      const double shade = 0.05 * centered(k, x / 30.0, y / 30.0);
      const double grain = 0.04 * centered(k + 11, x * 0.9, y * 0.9);
      const double streak = (std::max(0.0, value_noise(k + 23, x / 3.0, y / 28.0) - 0.55) - 0.03) * 1.6;
      return s.road + gray(shade + grain + streak - 0.115);
    }
    case SurfaceClass::grass: {
      const double density = 0.65 + 0.7 * fbm(k, x / 6.0, y / 6.0);
      const double blade = 0.16 * centered(k + 31, x * 1.3, y / 2.0);
      const Rgb base{0.20 + 0.06 * s.aux1, 0.46 + 0.08 * s.base, 0.14};
      return base * density + Rgb{0.3 * blade, blade, 0.2 * blade};
    }
    case SurfaceClass::snow: {
      const double blob = fbm(k, x / 14.0, y / 14.0);
      const double shadow = 0.28 * std::clamp((blob - 0.5) * 4.0, 0.0, 1.0);
      const double sparkle = 0.04 * centered(k + 41, x, y);
      const double level = 0.86 + 0.08 * s.base;
      return Rgb{level - shadow, level - 0.9 * shadow, level - 0.6 * shadow + 0.03} + gray(sparkle);
    }
    case SurfaceClass::dirt: {
      // Large soft blotches, a few pebbles, no fine grain.
      const double blotch = 0.36 * (fbm(k, x / 9.0, y / 9.0) - 0.5);
      const double pebble = 0.08 * centered(k + 51, x / 1.5, y / 1.5);
      return s.road + Rgb{0.03, 0.0, -0.03} * (blotch / 0.18) + gray(blotch + pebble);
    }
    case SurfaceClass::cobblestone: {
      // Staggered stone tiling separated by dark mortar lines.
      const double row_h = 7.0 + 2.0 * s.aux1, col_w = 11.0 + 3.0 * s.aux2;
      const double row = std::floor(y / row_h);
      const double shift = std::fmod(std::abs(row), 2.0) * 0.5 * col_w;
      const double col = std::floor((x + shift) / col_w);
      const double ly = y - row * row_h, lx = x + shift - col * col_w;
      const double edge = std::min({ly, row_h - ly, lx, col_w - lx});
      const double stone = 0.085 + 0.20 * (lattice(k, static_cast<std::int64_t>(col), static_cast<std::int64_t>(row)) - 0.5);
      const double rounding = edge < 2.5 ? 0.06 * (edge - 2.5) : 0.0;
      const double grain = 0.06 * centered(k + 61, x * 0.9, y * 0.9);
      const double v = edge < 1.1 ? -0.16 : stone + rounding + grain;
      return s.road + gray(v);
    }
  }
  return gray(0.5);
}

std::string pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

std::string sequence_name(SurfaceClass label, std::size_t sequence) {
  return std::string(to_string(label)) + "_s" + pad(sequence, 3);
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.classes.empty()) throw DataError("synth spec needs at least one class");
  if (spec.sequences_per_class < 1 || spec.frames_per_sequence < 1) {
    throw DataError("synth spec counts must be >= 1");
  }
  if (spec.image_size < 2) throw DataError("synth image size must be >= 2");
}

nlohmann::ordered_json to_json(const SynthSpec& spec) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (SurfaceClass c : spec.classes) classes.push_back(std::string(to_string(c)));
  return {{"seed", spec.seed},
          {"classes", classes},
          {"sequences_per_class", spec.sequences_per_class},
          {"frames_per_sequence", spec.frames_per_sequence},
          {"image_size", spec.image_size}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec base) {
  base.seed = j.value("seed", base.seed);
  base.sequences_per_class = j.value("sequences_per_class", base.sequences_per_class);
  base.frames_per_sequence = j.value("frames_per_sequence", base.frames_per_sequence);
  base.image_size = j.value("image_size", base.image_size);
  if (j.contains("classes")) {
    base.classes.clear();
    for (const auto& name : j.at("classes")) {
      const auto c = parse_class(name.get<std::string>());
      if (!c) throw DataError("synth spec: unknown class " + name.dump());
      base.classes.push_back(*c);
    }
  }
  validate(base);
  return base;
}

ImagePatch render_frame(const SynthSpec& spec, SurfaceClass label, std::size_t sequence, std::size_t frame) {
  const SequenceStyle style = draw_style(spec.seed, label, sequence);
  SplitMix64 noise(hash_key({spec.seed, class_index(label), sequence, frame, 0xf7a}));
  const double ox = style.drift_x * static_cast<double>(frame), oy = style.drift_y * static_cast<double>(frame);
  const double gain = 1.0 + 0.03 * (noise.uniform() - 0.5);
  // Textures are authored for 64-pixel frames; other sizes sample the same
  // field more or less densely.
  const double unit = 64.0 / static_cast<double>(spec.image_size);
  ImagePatch img(spec.image_size, spec.image_size);
  for (std::size_t i = 0; i < spec.image_size; ++i) {
    for (std::size_t j = 0; j < spec.image_size; ++j) {
      const double x = (static_cast<double>(j) + 0.5) * unit + ox;
      const double y = (static_cast<double>(i) + 0.5) * unit + oy;
      const Rgb c = texture(label, style, x, y) * gain;
      const double n0 = (noise.uniform() - 0.5) * 4.0;
      img.at(i, j, 0) = to_u8(c.r * 255.0 + n0);
      img.at(i, j, 1) = to_u8(c.g * 255.0 + n0);
      img.at(i, j, 2) = to_u8(c.b * 255.0 + n0);
    }
  }
  return img;
}

std::string synth_frame_path(SurfaceClass label, std::size_t sequence, std::size_t frame) {
  return std::string(to_string(label)) + "/" + sequence_name(label, sequence) + "_f" + pad(frame, 4) + ".png";
}

Manifest synth_manifest(const SynthSpec& spec) {
  validate(spec);
  Manifest m;
  m.name = "manifest";
  for (SurfaceClass c : spec.classes) {
    for (std::size_t s = 0; s < spec.sequences_per_class; ++s) {
      for (std::size_t f = 0; f < spec.frames_per_sequence; ++f) {
        m.records.push_back({synth_frame_path(c, s, f), c, SourceId::synthetic, sequence_name(c, s), f});
      }
    }
  }
  return m;
}

Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  Manifest m = synth_manifest(spec);
  std::filesystem::create_directories(out_dir);
  for (const SampleRecord& r : m.records) {
    const std::size_t sequence = std::stoul(r.sequence_id.substr(r.sequence_id.rfind("_s") + 2));
    write_png(render_frame(spec, r.label, sequence, r.frame_index), out_dir / r.image_path);
  }
  save_manifest(m, out_dir / "manifest.csv");
  std::ofstream js(out_dir / "synth_spec.json", std::ios::binary | std::ios::trunc);
  if (!js) throw DataError("cannot write " + (out_dir / "synth_spec.json").string());
  js << to_json(spec).dump(2) << '\n';
  return m;
}

ClassCounts table1_counts() { return {10273, 8547, 2887, 3668, 1082, 3075}; }

Manifest table_shaped_manifest(const ClassCounts& counts, std::size_t frames_per_sequence) {
  if (frames_per_sequence == 0) throw DataError("frames per sequence must be >= 1");
  using S = SourceId;
  // Recording sources providing each class.
  const std::array<std::vector<SourceId>, kNumClasses> providers = {{
      {S::robocar, S::stadtpilot, S::new_college, S::giusti, S::kitti},  // asphalt
      {S::nrec, S::new_college, S::giusti},                              // dirt
      {S::robocar, S::nrec, S::new_college, S::giusti, S::kitti},        // grass
      {S::robocar, S::stadtpilot},                                       // wet_asphalt
      {S::stadtpilot, S::giusti, S::kitti},                              // cobblestone
      {S::robocar, S::giusti},                                           // snow
  }};
  Manifest m;
  m.name = "table1";
  for (SurfaceClass c : kAllClasses) {
    const auto& src = providers[class_index(c)];
    const std::size_t total = counts[class_index(c)];
    for (std::size_t k = 0, seq = 0; k < total; ++seq) {
      const SourceId source = src[seq % src.size()];
      const std::string seq_id = std::string(to_string(source)) + "_" + std::string(to_string(c)) + "_" + pad(seq, 4);
      const std::size_t n = std::min(frames_per_sequence, total - k);
      for (std::size_t f = 0; f < n; ++f, ++k) {
        m.records.push_back({std::string(to_string(source)) + "/" + seq_id + "/" + pad(f, 5) + ".png", c, source,
                             seq_id, f});
      }
    }
  }
  return m;
}

Manifest websearch_manifest(const ClassCounts& per_class) {
  Manifest m;
  m.name = "websearch";
  for (SurfaceClass c : kAllClasses) {
    for (std::size_t i = 0; i < per_class[class_index(c)]; ++i) {
      const std::string path = "websearch/" + std::string(to_string(c)) + "/" + pad(i, 5) + ".jpg";
      m.records.push_back({path, c, SourceId::websearch, path, 0});
    }
  }
  return m;
}

}  // namespace surface
